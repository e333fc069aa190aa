"""Abstraction and refinement loop over quad-tree mappings.

One iteration: build and solve the abstract program, check up to ``K``
abstract answer sets for concreteness, and when all are spurious split the
quad-tree leaf that the debugging hints point at.
"""
from __future__ import annotations

import logging
import time
from collections import Counter
from dataclasses import dataclass, field

from .abstraction import AbstractProgram, abstract_program, lift_interpretation
from .domain import DomainMapping, atom_objects
from .grounding import GroundProgram, ground
from .quadtree import GridMapping, RegionNode, mapping_cost, split
from .solver import (Interpretation, SolveBudget, enumerate_answer_sets, is_answer_set,
                     solve_minimize)
from .syntax import Atom, Program, Rule, const_key

log = logging.getLogger(__name__)

CONCRETE, SPURIOUS, UNKNOWN = "concrete", "spurious", "unknown"
STRATEGIES = ("default", "two_phase", "time_inc", "grid_inc")


@dataclass(frozen=True)
class RefineHint:
    abstract_element: tuple
    weight: int


@dataclass
class CheckResult:
    verdict: str
    witness: frozenset | None = None
    hints: list[RefineHint] = field(default_factory=list)
    debug_optimum: int | None = None
    checks: int = 1
    note: str = ""


@dataclass
class Strategy:
    kind: str = "default"
    debug_timeout_ms: int | None = 50000
    time_sort: str = "time"

    def __post_init__(self):
        self.kind = self.kind.replace("-", "_")
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}")


@dataclass
class StepRecord:
    step: int
    mapping: dict
    cost: float
    abstract_answer_sets: int
    verdicts: list[str]
    debug_optima: list
    durations_ms: dict
    split: str | None = None


@dataclass
class CegarOutcome:
    status: str
    final_mapping: GridMapping
    witness: frozenset | None
    steps: int
    cost: float
    step_log: list[StepRecord]
    wall_ms: float = 0.0


@dataclass
class LoopOptions:
    abstract_answer_sets: int = 3
    tighten: bool = False
    cost_denominator: str = "literal"
    sorts: tuple = ("x", "y")
    prefixes: tuple | None = None
    object_name: str = "cell"
    global_timeout_s: float | None = None
    check_timeout_ms: int | None = None
    seed: int = 0


# ---------------------------------------------------------------------------
# query construction

def _fresh_pred(p: Program, base: str) -> str:
    used = {a.predicate for r in p.rules for a in r.atoms()} | {f.predicate for f in p.facts}
    used |= set(p.sort_decls)
    name = base
    k = 0
    while name in used:
        k += 1
        name = f"{base}{k}"
    return name


class QueryBuilder:
    """Spuriousness queries for one original program and one mapping."""

    def __init__(self, p: Program, m: DomainMapping, gp: GroundProgram | None = None,
                 aux: set | None = None):
        self.p = p
        self.m = m
        self.gp = gp if gp is not None else ground(p, "relevant")
        self.aux = set(aux or ())
        self.hit = _fresh_pred(p, "hit")
        self.ab = _fresh_pred(p, "ab")
        self.lifted = {a: lift_interpretation([a], m, p).pop() for a in self.gp.atoms}
        self.support: AbstractSupport | None = None

    def is_query_atom(self, a: Atom) -> bool:
        return not (a.predicate in self.aux or self.p.is_sort_atom(a))

    def hit_atom(self, abstract: Atom) -> Atom:
        return Atom(self.hit, (abstract.predicate,) + abstract.args)

    def query(self, abstract_atoms, keep=None) -> list[Rule]:
        """Ground rules of the query; ``keep`` limits it to some abstract atoms."""
        target = {a for a in abstract_atoms if self.is_query_atom(a)}
        rules: list[Rule] = []
        chosen = sorted((a for a in target if keep is None or keep(a)), key=_atom_key)
        for a in self.gp.atoms:
            img = self.lifted[a]
            if img in target:
                if keep is None or keep(img):
                    rules.append(Rule(self.hit_atom(img), False, (a,)))
            elif keep is None or keep(img):
                rules.append(Rule(None, False, (a,)))
        for a in chosen:
            rules.append(Rule(None, False, (), (self.hit_atom(a),)))
        return rules

    def objects(self, atom: Atom) -> list[tuple]:
        """Abstract objects mentioned by an original, abstract or hit atom."""
        if atom.predicate == self.hit:
            atom = Atom(atom.args[0], atom.args[1:])
        img = self.lifted.get(atom, atom)
        return atom_objects(img, self.p.sort_of, self.m.sorts)

    def debug_objects(self, atom: Atom, negative: bool = False) -> list[tuple]:
        """Objects of ``atom``.

        For a negative literal whose abstract image is true in the abstract
        answer set, the objects of the image's coarse abstract support are
        added: that is where the abstraction derived something the original
        program cannot.
        """
        objs = self.objects(atom)
        target = self.hit_target(atom) or self.lifted.get(atom)
        if negative and self.support is not None and target in self.support.true:
            def coarse(b):
                return any(len(self.m.inverse(o)) > 1
                           for o in atom_objects(b, self.p.sort_of, self.m.sorts))
            for b in self.support.frontier(target, coarse):
                if coarse(b):
                    objs.extend(atom_objects(b, self.p.sort_of, self.m.sorts))
        return objs

    def hit_target(self, atom: Atom) -> Atom | None:
        if atom.predicate != self.hit:
            return None
        return Atom(atom.args[0], atom.args[1:])


class AbstractSupport:
    """Rules of the ground abstract program that support atoms of one abstract answer set."""

    def __init__(self, ga: GroundProgram, true_atoms, aux: set):
        self.true = frozenset(true_atoms)
        self.aux = aux
        self.by_head: dict[Atom, list[Rule]] = {}
        for r in ga.rules:
            if r.head is not None and r.head in self.true:
                if all(a in self.true for a in r.body_pos) and not any(a in self.true for a in r.body_neg):
                    self.by_head.setdefault(r.head, []).append(r)

    def body_atoms(self, atom: Atom) -> list[Atom]:
        out = []
        for r in self.by_head.get(atom, ()):
            out.extend(a for a in r.body_pos + r.body_neg if a.predicate not in self.aux)
        return out

    def frontier(self, atom: Atom, coarse) -> list[Atom]:
        """Supporting atoms reached through atoms for which ``coarse`` is false."""
        out, seen, todo = [], {atom}, [atom]
        while todo:
            a = todo.pop(0)
            for b in self.body_atoms(a):
                if b in seen:
                    continue
                seen.add(b)
                out.append(b)
                if not coarse(b):
                    todo.append(b)
        return out


def build_spuriousness_query(abstract_atoms, m: DomainMapping, p: Program,
                             gp: GroundProgram | None = None, aux=None) -> list[Rule]:
    """Ground query whose union with ``p`` is satisfiable iff the abstract set is concrete."""
    return QueryBuilder(p, m, gp, aux).query(abstract_atoms)


def _top_left(m: DomainMapping, obj: tuple):
    """Order key of an abstract object: its preimage's first cell, last component first."""
    return min(tuple(const_key(c) for c in reversed(t)) for t in m.inverse(obj))


def _atom_key(a: Atom):
    return (a.predicate, tuple(const_key(c) for c in a.args))


# ---------------------------------------------------------------------------
# debugging

@dataclass
class DebugProgram:
    ground: GroundProgram
    minimize: frozenset
    ab_objects: dict
    ab_rules: dict


def build_debug_program(base: GroundProgram, query: list[Rule], objects_of,
                        relax=None, ab_pred: str = "ab") -> DebugProgram:
    """Turn constraints into ``ab`` atoms to be minimised.

    ``relax(rule, from_query)`` selects which constraints are softened (all by
    default); the others stay hard.  ``objects_of(atom, negative)`` gives the
    abstract objects a literal mentions, recorded per ``ab`` atom for hint
    extraction.
    """
    rules: list[Rule] = []
    ab_objects: dict[Atom, list] = {}
    ab_rules: dict[Atom, Rule] = {}
    k = 0
    for from_query, group in ((False, base.rules), (True, query)):
        for r in group:
            if r.head is None and (relax is None or relax(r, from_query)):
                k += 1
                ab = Atom(ab_pred, (k,))
                objs = []
                for a in r.body_pos:
                    objs.extend(objects_of(a))
                for a in r.body_neg:
                    objs.extend(objects_of(a, True))
                ab_objects[ab] = objs
                ab_rules[ab] = r
                rules.append(Rule(ab, False, r.body_pos, r.body_neg))
            else:
                rules.append(r)
    g = GroundProgram(rules, sort_decls=base.sort_decls, sort_signature=base.sort_signature)
    return DebugProgram(g, g.ids(ab_objects), ab_objects, ab_rules)


def derive_refine_hints(true_ab_atoms, ab_objects: dict, m: DomainMapping) -> list[RefineHint]:
    """Non-singleton abstract elements named by violated constraints, heaviest first."""
    counts: Counter = Counter()
    for ab in true_ab_atoms:
        for obj in ab_objects.get(ab, ()):
            if len(m.inverse(obj)) > 1:
                counts[obj] += 1
    order = sorted(counts.items(), key=lambda kv: (-kv[1], _top_left(m, kv[0])))
    return [RefineHint(obj, w) for obj, w in order]


def _run_debug(dp: DebugProgram, timeout_ms):
    res = solve_minimize(dp.ground, SolveBudget(timeout_ms=timeout_ms, minimize_atoms=dp.minimize))
    if res.model is None:
        return None, None
    true_ab = [a for a in dp.ground.decode(res.model.true_atoms) if a in dp.ab_objects]
    return true_ab, res.cost


# ---------------------------------------------------------------------------
# concreteness check

def _solve_one(g: GroundProgram, timeout_ms):
    res = enumerate_answer_sets(g, SolveBudget(max_models=1, timeout_ms=timeout_ms))
    if res.models:
        return True, res.models[0]
    return (None if res.timed_out else False), None


def check_concreteness(p: Program, m: DomainMapping, abstract_atoms, strategy: Strategy | None = None,
                       timeout_ms: int | None = None, builder: QueryBuilder | None = None,
                       prior_hints=None, support: AbstractSupport | None = None) -> CheckResult:
    """Decide whether some answer set of ``p`` maps onto ``abstract_atoms``.

    The verdict is the satisfiability of ``p`` plus the full query whatever
    the strategy; strategies only change which partial queries are tried
    first and what is debugged.
    """
    strategy = strategy or Strategy()
    qb = builder or QueryBuilder(p, m)
    qb.support = support
    atoms = frozenset(abstract_atoms)
    kind = strategy.kind
    if kind == "time_inc" and strategy.time_sort not in p.sort_decls:
        log.warning("no %r sort declared; time_inc falls back to default", strategy.time_sort)
        kind = "default"

    stages = []
    if kind == "time_inc":
        stages = [_time_keep(p, strategy.time_sort, t)
                  for t in sorted(p.sort_domain(strategy.time_sort), key=const_key)]
    elif kind == "grid_inc":
        stages = _grid_stages(qb, atoms, prior_hints)
    checks = 0
    for keep in stages:
        q = qb.query(atoms, keep)
        checks += 1
        sat, _ = _solve_one(qb.gp.extend(q), timeout_ms)
        if sat is None:
            return CheckResult(UNKNOWN, checks=checks, note="partial check timed out")
        if not sat:
            hints, opt = _debug(qb, q, "default", strategy.debug_timeout_ms)
            return CheckResult(SPURIOUS, hints=hints, debug_optimum=opt, checks=checks)

    q = qb.query(atoms)
    checks += 1
    sat, model = _solve_one(qb.gp.extend(q), timeout_ms)
    if sat is None:
        return CheckResult(UNKNOWN, checks=checks, note="check timed out")
    if sat:
        g = qb.gp.extend(q)
        witness = frozenset(a for a in g.decode(model.true_atoms) if a.predicate != qb.hit)
        return CheckResult(CONCRETE, witness=witness, checks=checks)
    hints, opt = _debug(qb, q, "two_phase" if kind == "two_phase" else "default",
                        strategy.debug_timeout_ms)
    return CheckResult(SPURIOUS, hints=hints, debug_optimum=opt, checks=checks)


def _debug(qb: QueryBuilder, q: list[Rule], mode: str, timeout_ms):
    if mode == "two_phase":
        dp1 = build_debug_program(qb.gp, q, qb.debug_objects, lambda r, fq: fq, qb.ab)
        true1, _ = _run_debug(dp1, timeout_ms)
        if true1 is not None:
            focus = {o for ab in true1 for o in dp1.ab_objects[ab]}

            def relax(r, from_query):
                if from_query:
                    return True
                return any(o in focus for a in r.body_pos + r.body_neg for o in qb.objects(a))
            dp2 = build_debug_program(qb.gp, q, qb.debug_objects, relax, qb.ab)
            true2, opt2 = _run_debug(dp2, timeout_ms)
            if true2 is not None:
                return derive_refine_hints(true2, dp2.ab_objects, qb.m), opt2
            return derive_refine_hints(true1, dp1.ab_objects, qb.m), None
    dp = build_debug_program(qb.gp, q, qb.debug_objects, None, qb.ab)
    true_ab, opt = _run_debug(dp, timeout_ms)
    if true_ab is None:
        return [], None
    return derive_refine_hints(true_ab, dp.ab_objects, qb.m), opt


def _time_keep(p: Program, time_sort: str, t):
    tk = const_key(t)

    def keep(a: Atom) -> bool:
        found = False
        for i, v in enumerate(a.args):
            if p.sort_of(a.predicate, a.arity, i) == time_sort:
                found = True
                if const_key(v) > tk:
                    return False
        return found
    return keep


def _grid_stages(qb: QueryBuilder, atoms, prior_hints):
    weight = Counter()
    for h in prior_hints or ():
        weight[h.abstract_element] += h.weight
    mentions = Counter(o for a in atoms if qb.is_query_atom(a) for o in qb.objects(a))
    regions = sorted(qb.m.objects(), key=lambda o: (-weight[o], -mentions[o], _top_left(qb.m, o)))
    stages = []
    for k in range(1, len(regions)):
        allowed = frozenset(regions[:k])

        def keep(a: Atom, allowed=allowed) -> bool:
            objs = qb.objects(a)
            return bool(objs) and all(o in allowed for o in objs)
        stages.append(keep)
    return stages


# ---------------------------------------------------------------------------
# refinement

def decide_refinement(g: GridMapping, dm: DomainMapping, hint_sets) -> tuple[GridMapping, RegionNode]:
    """Split the leaf with the highest hint weight per cell (ties: top-left).

    Without any hint the largest leaf is split.
    """
    if g.is_identity():
        raise ValueError("mapping is already the identity")
    score: dict[RegionNode, float] = {}
    for hints in hint_sets:
        for h in hints:
            leaf = g.leaf_for_abstract(dm, h.abstract_element)
            if leaf.side == 1:
                continue
            score[leaf] = score.get(leaf, 0.0) + h.weight / (leaf.side * leaf.side)
    if score:
        leaf = min(score, key=lambda l: (-score[l], l.ys[0], l.xs[0]))
    else:
        leaf = min(g.leaves, key=lambda l: (-l.side, l.ys[0], l.xs[0]))
    return split(g, leaf), leaf


# ---------------------------------------------------------------------------
# main loop

def abstract_answer_sets(ap: AbstractProgram, k: int, timeout_ms=None):
    ga = ground(ap.program(), "relevant")
    res = enumerate_answer_sets(ga, SolveBudget(max_models=k, timeout_ms=timeout_ms))
    full = [ga.decode(mod.true_atoms) for mod in res.models]
    return ga, full, res


def run_loop(p: Program, m0: GridMapping, strategy: Strategy | None = None,
             opts: LoopOptions | None = None) -> CegarOutcome:
    strategy = strategy or Strategy()
    opts = opts or LoopOptions()
    if strategy.kind == "time_inc" and strategy.time_sort not in p.sort_decls:
        log.warning("no %r sort declared; time_inc falls back to default", strategy.time_sort)
        strategy = Strategy("default", strategy.debug_timeout_ms, strategy.time_sort)
    start = time.monotonic()
    deadline = start + opts.global_timeout_s if opts.global_timeout_s else None
    gp = ground(p, "relevant")
    g = m0
    steps = 0
    step_log: list[StepRecord] = []
    prior = None

    def remaining_ms():
        if deadline is None:
            return None
        return max(1, int((deadline - time.monotonic()) * 1000))

    def outcome(status, witness=None):
        return CegarOutcome(status, g, witness, steps, mapping_cost(g, opts.cost_denominator),
                            step_log, (time.monotonic() - start) * 1000)

    while True:
        t0 = time.monotonic()
        dm = g.to_domain_mapping(opts.sorts, opts.prefixes)
        ap = abstract_program(p, dm, opts.object_name, opts.tighten)
        ga, sets, res = abstract_answer_sets(ap, opts.abstract_answer_sets, remaining_ms())
        t_abs = (time.monotonic() - t0) * 1000
        rec = StepRecord(steps, g.to_json(), mapping_cost(g, opts.cost_denominator), len(sets),
                         [], [], {"abstract_solve": round(t_abs, 3)})
        step_log.append(rec)
        if res.timed_out and not sets:
            rec.verdicts.append(UNKNOWN)
            return outcome(UNKNOWN)
        if not sets:
            return outcome("abstract_unsat")
        qb = QueryBuilder(p, dm, gp, ap.aux_predicates)
        hint_sets = []
        t1 = time.monotonic()
        for abstract in sets:
            budget = remaining_ms()
            if opts.check_timeout_ms is not None:
                budget = min(budget or opts.check_timeout_ms, opts.check_timeout_ms)
            support = AbstractSupport(ga, abstract, ap.aux_predicates)
            visible = frozenset(a for a in abstract if not ap.is_aux(a))
            cr = check_concreteness(p, dm, visible, strategy, budget, qb, prior, support)
            rec.verdicts.append(cr.verdict)
            rec.debug_optima.append(cr.debug_optimum)
            if cr.verdict == CONCRETE:
                rec.durations_ms["checks"] = round((time.monotonic() - t1) * 1000, 3)
                if not is_answer_set(gp, Interpretation(gp.ids(cr.witness))):
                    raise RuntimeError("concreteness witness is not an answer set")
                return outcome(CONCRETE, cr.witness)
            hint_sets.append(cr.hints)
        rec.durations_ms["checks"] = round((time.monotonic() - t1) * 1000, 3)
        if deadline is not None and time.monotonic() >= deadline:
            return outcome(UNKNOWN)
        if g.is_identity():
            # only reachable when checks timed out
            return outcome(UNKNOWN)
        g, leaf = decide_refinement(g, dm, hint_sets)
        rec.split = leaf.label()
        prior = [h for hs in hint_sets for h in hs]
        steps += 1
