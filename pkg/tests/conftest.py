"""Shared oracles and generators.

The oracles here never call the package's solver: answer sets are found by
trying every subset of atoms against the Gelfond-Lifschitz reduct.
"""
from __future__ import annotations

import itertools
import random

import pytest

from absgrid.domain import DomainMapping
from absgrid.syntax import Atom, Program, Rule, Var


def _fixpoint(rules):
    """Least model of definite rules ``(head, body)`` by counting satisfied bodies."""
    missing = []
    watch: dict = {}
    true, todo = set(), []
    for k, (head, body) in enumerate(rules):
        body = set(body)
        missing.append(len(body))
        for a in body:
            watch.setdefault(a, []).append(k)
        if not body:
            todo.append(head)
    while todo:
        a = todo.pop()
        if a in true:
            continue
        true.add(a)
        for k in watch.get(a, ()):
            missing[k] -= 1
            if missing[k] == 0:
                todo.append(rules[k][0])
    return true


def stable_by_reduct(rules, candidate) -> bool:
    """Is ``candidate`` (a set of atoms) an answer set of the ground ``rules``?"""
    s = set(candidate)
    red = []
    for r in rules:
        if any(a in s for a in r.body_neg):
            continue
        if r.head is None:
            if all(a in s for a in r.body_pos):
                return False
            continue
        if r.choice and r.head not in s:
            continue
        red.append((r.head, r.body_pos))
    return _fixpoint(red) == s


def brute_answer_sets(rules) -> set[frozenset]:
    """All answer sets of a ground rule list by subset enumeration."""
    atoms = sorted({a for r in rules for a in r.atoms()}, key=str)
    facts = {r.head for r in rules
             if r.head is not None and not r.choice and not r.body_pos and not r.body_neg}
    heads = {r.head for r in rules if r.head is not None}
    free = [a for a in atoms if a in heads and a not in facts]
    out = set()
    for k in range(len(free) + 1):
        for subset in itertools.combinations(free, k):
            cand = facts.union(subset)
            if stable_by_reduct(rules, cand):
                out.add(frozenset(cand))
    return out


# ---------------------------------------------------------------------------
# random propositional programs

def random_ground_rules(rng: random.Random, n_atoms: int, n_rules: int):
    atoms = [Atom(f"a{i}") for i in range(n_atoms)]
    rules = []
    for _ in range(n_rules):
        kind = rng.random()
        body = rng.sample(atoms, rng.randint(0, min(3, n_atoms)))
        split = rng.randint(0, len(body))
        pos, neg = tuple(body[:split]), tuple(body[split:])
        if kind < 0.15:
            if pos or neg:
                rules.append(Rule(None, False, pos, neg))
            continue
        head = rng.choice(atoms)
        rules.append(Rule(head, kind < 0.4, pos, neg))
    return rules


# ---------------------------------------------------------------------------
# random sorted programs with a mapping over one sort

_OPS = ("<", "<=", "=", "!=", ">", ">=")


def random_sorted_program(rng: random.Random, max_atoms: int = 8):
    """Program over sorts ``s`` (mapped) and ``t`` (unmapped) with few ground atoms.

    Negation is stratified: the over-approximation guarantee of the
    abstraction does not cover cycles through negation.
    """
    ns = rng.randint(2, 4)
    nt = rng.randint(1, 2)
    s_dom = tuple(range(1, ns + 1))
    t_dom = ("u", "v")[:nt]
    preds = [("p", "s"), ("q", "s"), ("r", "t")]
    budget = max_atoms
    chosen = []
    for name, sort in preds:
        size = ns if sort == "s" else nt
        if size <= budget:
            chosen.append((name, sort))
            budget -= size
    X, Y, Z = Var("X"), Var("Y"), Var("Z")
    var_of = {"s": [X, Y], "t": [Z]}

    def lit(choices):
        name, sort = rng.choice(choices)
        return Atom(name, (rng.choice(var_of[sort]),))

    # negation only refers to strictly lower predicates; positive recursion is fine
    rules = []
    for _ in range(rng.randint(2, 5)):
        level = rng.randrange(len(chosen))
        pos = [lit(chosen[:level + 1]) for _ in range(rng.randint(0, 2))]
        neg = [lit(chosen[:level]) for _ in range(rng.randint(0, 2))] if level else []
        rels = ()
        svars = {v for a in pos for v in a.args if v in (X, Y)}
        if len(svars) == 2 and rng.random() < 0.6:
            rels = (Atom.rel(rng.choice(_OPS), X, Y),)
        elif svars and rng.random() < 0.3:
            rels = (Atom.rel(rng.choice(_OPS), sorted(svars)[0], rng.choice(s_dom)),)
        r = rng.random()
        if r < 0.2 and (pos or neg):
            rules.append(Rule(None, False, tuple(pos), tuple(neg), rels))
            continue
        head = lit([chosen[level]])
        rules.append(Rule(head, r < 0.55, tuple(pos), tuple(neg), rels))
    facts = []
    for name, sort in chosen:
        dom = s_dom if sort == "s" else t_dom
        for c in dom:
            if rng.random() < 0.15:
                facts.append(Atom(name, (c,)))
    sig = {(name, 1, 0): sort for name, sort in chosen}
    return Program(rules, facts, {"s": s_dom, "t": t_dom}, sig)


def random_partition_mapping(rng: random.Random, domain) -> DomainMapping:
    """Random partition of ``domain`` into contiguous blocks (sort ``s``)."""
    dom = list(domain)
    if rng.random() < 0.3:
        rng.shuffle(dom)
    cuts = sorted(rng.sample(range(1, len(dom)), rng.randint(0, len(dom) - 1)))
    blocks, start = {}, 0
    for end in cuts + [len(dom)]:
        part = dom[start:end]
        name = part[0] if len(part) == 1 else "s" + "_".join(map(str, part))
        blocks[name] = part
        start = end
    return DomainMapping.from_partition("s", blocks, dom)


@pytest.fixture
def rng():
    return random.Random(1234)


def query_view(atoms, ap, p) -> frozenset:
    """Atoms a concreteness check compares: no auxiliary or sort atoms."""
    return frozenset(a for a in atoms if not ap.is_aux(a) and not p.is_sort_atom(a))


def brute_is_concrete(p, dm, ap, abstract_atoms, concrete_sets) -> bool:
    """Some answer set of ``p`` lifts exactly onto ``abstract_atoms``."""
    from absgrid.abstraction import lift_interpretation
    target = query_view(abstract_atoms, ap, p)
    return any(query_view(lift_interpretation(I, dm, p), ap, p) == target for I in concrete_sets)
