"""Acceptance criteria, one test each.

Every test writes a single ``criterion N (...): PASS|FAIL - ...`` line past
pytest's output capture, and then asserts.  Running the
file as a script checks all criteria in order.
"""
from __future__ import annotations

import itertools
import random
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from absgrid.abstraction import abstract_program, lift_interpretation  # noqa: E402
from absgrid.bench import (InstanceSpec, SHIPPED, brute_force_sat, fig_reachability,  # noqa: E402
                           grid_sorts, program_for, shipped_spec)
from absgrid.cegar import (CONCRETE, SPURIOUS, LoopOptions, QueryBuilder, Strategy,  # noqa: E402
                           STRATEGIES, check_concreteness, run_loop)
from absgrid.domain import (REL_TYPES, TYPE_I, TYPE_II, TYPE_III, JointRelation,  # noqa: E402
                            combine_joint_types, compute_rel_types)
from absgrid.grounding import GroundProgram, ground  # noqa: E402
from absgrid.quadtree import (identity_mapping, initial_mapping, mapping_cost, split)  # noqa: E402
from absgrid.solver import SolveBudget, enumerate_answer_sets  # noqa: E402
from absgrid.syntax import BUILTINS, compare, parse_program  # noqa: E402

from conftest import (brute_answer_sets, brute_is_concrete, query_view,  # noqa: E402
                      random_ground_rules, random_partition_mapping, random_sorted_program,
                      stable_by_reduct)


def _report(n: int, title: str, ok: bool, detail: str):
    line = f"criterion {n} ({title}): {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, flush=True)
    return ok


# ---------------------------------------------------------------------------
# 1. over-approximation

def over_approximation(trials=200, seed=2024):
    rng = random.Random(seed)
    start = time.monotonic()
    violations = checked = 0
    for _ in range(trials):
        p = random_sorted_program(rng)
        dm = random_partition_mapping(rng, p.sort_domain("s"))
        ap = abstract_program(p, dm)
        ga = ground(ap.program(), "full")
        aux = set(ap.tau_facts) | set(ap.cluster_facts) | set(ap.object_facts)
        for I in brute_answer_sets(ground(p, "full").rules):
            checked += 1
            if not stable_by_reduct(ga.rules, lift_interpretation(I, dm, p) | aux):
                violations += 1
    secs = time.monotonic() - start
    return violations == 0 and secs < 120, (f"{trials} programs, {checked} answer sets, "
                                            f"{violations} violations, {secs:.1f}s")


# ---------------------------------------------------------------------------
# 2. concreteness verdicts against brute force

def concreteness_oracle(triples=100, seed=77):
    rng = random.Random(seed)
    start = time.monotonic()
    mismatches = done = concrete = 0
    while done < triples:
        p = random_sorted_program(rng)
        dm = random_partition_mapping(rng, p.sort_domain("s"))
        ap = abstract_program(p, dm)
        gp = ground(p, "full")
        if len(gp.atoms) > 10:
            continue
        answer_sets = brute_answer_sets(gp.rules)
        ga = ground(ap.program(), "relevant")
        qb = QueryBuilder(p, dm, aux=ap.aux_predicates)
        for m in enumerate_answer_sets(ga, SolveBudget(max_models=3)).models:
            if done >= triples:
                break
            abstract = ga.decode(m.true_atoms)
            cr = check_concreteness(p, dm, query_view(abstract, ap, p), builder=qb)
            expected = brute_is_concrete(p, dm, ap, abstract, answer_sets)
            concrete += expected
            mismatches += (cr.verdict == CONCRETE) != expected
            done += 1
    secs = time.monotonic() - start
    return mismatches == 0 and secs < 120, (f"{done} triples ({concrete} concrete), "
                                            f"{mismatches} mismatches, {secs:.1f}s")


# ---------------------------------------------------------------------------
# 3. relation types

def _quadrant_shapes(g, quadrant):
    """Every mapping reachable from ``g`` by splitting only inside ``quadrant``."""
    def rec(g, leaf):
        yield g
        if leaf.side == 1:
            return
        g2 = split(g, leaf)
        kids = [l for l in g2.leaves if leaf.xs[0] <= l.xs[0] <= leaf.xs[1]
                and leaf.ys[0] <= l.ys[0] <= leaf.ys[1]]
        # expand each child independently
        def over(g, i):
            if i == len(kids):
                yield g
                return
            for h in rec(g, g.find_leaf(kids[i].xs, kids[i].ys)):
                yield from over(h, i + 1)
        yield from over(g2, 0)
    return rec(g, quadrant)


def all_quadtree_mappings(n):
    g0 = initial_mapping(n)
    quads = list(g0.leaves)

    def over(g, i):
        if i == len(quads):
            yield g
            return
        for h in _quadrant_shapes(g, g.find_leaf(quads[i].xs, quads[i].ys)):
            yield from over(h, i + 1)
    return over(g0, 0)


def random_quadtree_mapping(n, rng):
    g = initial_mapping(n)
    todo = list(g.leaves)
    while todo:
        leaf = todo.pop()
        if leaf.side > 1 and rng.random() < 0.5:
            g = split(g, leaf)
            todo.extend(l for l in g.leaves if leaf.xs[0] <= l.xs[0] <= leaf.xs[1]
                        and leaf.ys[0] <= l.ys[0] <= leaf.ys[1])
    return g


def _types_by_enumeration(dm, op, component):
    """Type per object pair from every pair of cells in the two preimages."""
    out = {}
    for a, b in itertools.product(dm.objects(), repeat=2):
        seen = {compare(op, u[component], v[component])
                for u in dm.inverse(a) for v in dm.inverse(b)}
        out[(a, b)] = TYPE_III if len(seen) == 2 else (TYPE_I if True in seen else TYPE_II)
    return out


def _mapping_violations(g):
    dm = g.to_domain_mapping()
    bad = 0
    pairs = set(itertools.product(dm.objects(), repeat=2))
    for op in BUILTINS:
        for comp in (0, 1):
            types = compute_rel_types(dm, JointRelation.binary(op, comp))
            if set(types.types) != pairs or any(t not in REL_TYPES for t in types.types.values()):
                bad += 1
            if types.types != _types_by_enumeration(dm, op, comp):
                bad += 1
    return bad


def _joint_rule_violations():
    bad = 0
    for cts in itertools.product(REL_TYPES, repeat=2):
        joint_i = all(t == TYPE_I for t in cts)
        joint_iii = any(cts[i] == TYPE_III and cts[1 - i] != TYPE_II for i in range(2))
        got = combine_joint_types(cts)
        bad += (got == TYPE_I) != joint_i or (got == TYPE_III) != joint_iii
    return bad


def relation_types(samples_8=120, seed=5):
    maps4 = list(all_quadtree_mappings(4))
    rng = random.Random(seed)
    maps8 = [initial_mapping(8), identity_mapping(8)]
    maps8 += [random_quadtree_mapping(8, rng) for _ in range(samples_8)]
    bad = sum(_mapping_violations(g) for g in maps4 + maps8)
    joint = _joint_rule_violations()
    return bad == 0 and joint == 0 and len(maps4) == 16, (
        f"{len(maps4)} 4x4 mappings (all), {len(maps8)} 8x8 mappings (sampled), "
        f"{bad} type violations, {joint} joint-rule violations over 9 combinations")


# ---------------------------------------------------------------------------
# 4. solver against brute force

HAND_CORPUS = [
    "a :- not b. b :- not a.",
    "a :- a.",
    "a :- not a.",
    "{a}. {b}. :- a, b. c :- a. c :- b.",
    "p :- q. q :- p. r :- not p.",
    "{a}. {b}. {c}. :- not a, not b. d :- a, not c. e :- d, b.",
    "a. b :- a, not c. c :- a, not b. :- b.",
    "x :- y, not z. y :- not w. z :- not x. w :- not y.",
]


def _corpus(seed=99, random_programs=300):
    progs = [ground(parse_program(t)).rules for t in HAND_CORPUS]
    rng = random.Random(seed)
    for _ in range(random_programs):
        n = rng.randint(1, 12)
        progs.append(random_ground_rules(rng, n, rng.randint(1, 14)))
    return progs


def solver_oracle():
    mismatches = total = 0
    for rules in _corpus():
        g = GroundProgram(list(rules))
        if len(g.atoms) > 12:
            continue
        total += 1
        got = {g.decode(m.true_atoms) for m in enumerate_answer_sets(g).models}
        mismatches += got != brute_answer_sets(rules)
    return mismatches == 0, f"{total} programs with <= 12 atoms, {mismatches} mismatches"


# ---------------------------------------------------------------------------
# 5. loop on the 8x8 pocket instance

def pocket_run():
    spec = fig_reachability()
    out = run_loop(program_for(spec), initial_mapping(8), Strategy("default", 1000),
                   LoopOptions(sorts=grid_sorts("reachability"), seed=0))
    secs = out.wall_ms / 1000
    coarse = any(l.side == 4 for l in out.final_mapping.leaves)
    ok = (out.status == "abstract_unsat" and out.cost < mapping_cost(identity_mapping(8))
          and coarse and secs < 120 and not brute_force_sat(spec))
    return ok, (f"status {out.status}, {out.steps} steps, cost {out.cost:.5f} "
                f"(identity 0.8), 4x4 region kept: {coarse}, {secs:.1f}s")


# ---------------------------------------------------------------------------
# 6. strategy agreement

def strategy_agreement(debug_timeout_ms=1000):
    problems = []
    lines = []
    for name in SHIPPED:
        spec = shipped_spec(name)
        if spec.n > 8:
            continue
        p = program_for(spec)
        n0 = initial_mapping(spec.n)
        first = {}
        for kind in STRATEGIES:
            out = run_loop(p, n0, Strategy(kind, debug_timeout_ms),
                           LoopOptions(sorts=grid_sorts(spec.problem)))
            verdicts = [v for rec in out.step_log for v in rec.verdicts]
            first[kind] = out.step_log[0].verdicts
            if out.status != "abstract_unsat" or any(v != SPURIOUS for v in verdicts):
                problems.append(f"{name}/{kind}: {out.status}")
            lines.append(f"{name}/{kind}={out.steps}")
        if len({tuple(v) for v in first.values()}) != 1:
            problems.append(f"{name}: first-step verdicts differ")
    return not problems, (f"{len(lines)} runs all abstract_unsat" if not problems
                          else "; ".join(problems))


# ---------------------------------------------------------------------------
# 7. cost formula

def cost_formula(trials=1000, seed=11):
    g = initial_mapping(8)
    for xs, ys in (((5, 8), (5, 8)), ((7, 8), (7, 8)), ((5, 6), (7, 8))):
        g = split(g, g.find_leaf(xs, ys))
    values = (mapping_cost(identity_mapping(4)), mapping_cost(initial_mapping(4)), mapping_cost(g))
    exact = values == (1.0, 0.0, 0.1125) or all(abs(a - b) < 1e-12
                                                for a, b in zip(values, (1.0, 0.0, 0.1125)))
    rng = random.Random(seed)
    bad = 0
    for t in range(trials):
        h = initial_mapping(rng.choice((4, 8)))
        c = mapping_cost(h)
        while not h.is_identity():
            h = split(h, rng.choice([l for l in h.leaves if l.side > 1]))
            c2 = mapping_cost(h)
            bad += not c2 > c
            c = c2
    return exact and bad == 0, f"costs {values}, {trials} split sequences, {bad} non-increases"


# ---------------------------------------------------------------------------
# 8. identity conservativity

DESK_INSTANCES = [
    InstanceSpec("reachability", 4, obstacles=[(2, 2), (3, 3)], agent_start=(1, 1)),
    InstanceSpec("reachability", 4, obstacles=[(2, 1), (1, 2)], agent_start=(1, 1)),
    InstanceSpec("visitall_plan", 2, agent_start=(1, 1)),
    InstanceSpec("visitall_plan", 4, obstacles=[(1, 1), (2, 1), (3, 1), (4, 1), (1, 2), (2, 2),
                                                (3, 2), (4, 2), (1, 3), (4, 3)], agent_start=(2, 3)),
    InstanceSpec("visitall_kt", 4, forbidden=[(x, y) for x in range(1, 5) for y in (3, 4)]
                 + [(4, 1), (4, 2)], agent_start=(1, 1)),
    InstanceSpec("knights_tour", 4, forbidden=[(x, y) for x in range(1, 5) for y in (3, 4)]
                 + [(4, 1), (4, 2)], agent_start=(1, 1)),
    InstanceSpec("sudoku", 4, clues={(1, 1): 1, (2, 1): 2, (3, 1): 3, (1, 2): 3, (1, 3): 2}),
    shipped_spec("sudoku_scaled_4"),
]


def identity_conservativity():
    problems = []
    for spec in DESK_INSTANCES:
        p = program_for(spec)
        ap = abstract_program(p, identity_mapping(spec.n).to_domain_mapping(grid_sorts(spec.problem)))
        g = ground(p, "relevant")
        ga = ground(ap.program(), "relevant")
        concrete = {frozenset(a for a in g.decode(m.true_atoms) if not p.is_sort_atom(a))
                    for m in enumerate_answer_sets(g).models}
        abstract = {frozenset(a for a in ga.decode(m.true_atoms)
                              if not ap.is_aux(a) and not p.is_sort_atom(a))
                    for m in enumerate_answer_sets(ga).models}
        if concrete != abstract:
            problems.append(f"{spec.problem} n={spec.n}: {len(concrete)} vs {len(abstract)}")
    return not problems, (f"{len(DESK_INSTANCES)} instances over 5 encodings agree"
                          if not problems else "; ".join(problems))


# ---------------------------------------------------------------------------

CRITERIA = [
    (1, "over-approximation", over_approximation),
    (2, "concreteness oracle", concreteness_oracle),
    (3, "relation types", relation_types),
    (4, "solver oracle", solver_oracle),
    (5, "pocket instance run", pocket_run),
    (6, "strategy agreement", strategy_agreement),
    (7, "cost formula", cost_formula),
    (8, "identity conservativity", identity_conservativity),
]


@pytest.mark.parametrize("number,title,check", CRITERIA, ids=[f"c{n}_{t.replace(' ', '_')}"
                                                               for n, t, _ in CRITERIA])
def test_criterion(number, title, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print()
        _report(number, title, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    results = [_report(n, t, *f()) for n, t, f in CRITERIA]
    sys.exit(0 if all(results) else 1)
