"""Grounding of sorted programs.

Two instantiation modes are offered:

``full``
    every instance whose variables range over their sort domains; built-ins
    are evaluated and instances with a false built-in are dropped.
``relevant``
    instances are produced by joining positive bodies against the atoms that
    can possibly be derived; facts are removed from bodies, negative literals
    over underivable atoms are dropped.  This is what the solver pipeline uses;
    it has the same answer sets as ``full``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .syntax import Atom, Program, Rule, Var


class GroundingError(ValueError):
    pass


@dataclass
class GroundProgram:
    rules: list[Rule]
    atom_index: dict[Atom, int] = field(default_factory=dict)
    atoms: list[Atom] = field(default_factory=list)
    sort_decls: dict = field(default_factory=dict)
    sort_signature: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.atom_index:
            self._index()

    def _index(self):
        self.atom_index.clear()
        self.atoms.clear()
        for r in self.rules:
            if not r.is_ground():
                raise GroundingError(f"rule {r} is not ground")
            for a in r.atoms():
                if a not in self.atom_index:
                    self.atom_index[a] = len(self.atoms)
                    self.atoms.append(a)

    def id(self, atom: Atom) -> int:
        return self.atom_index[atom]

    def ids(self, atoms) -> frozenset[int]:
        return frozenset(self.atom_index[a] for a in atoms if a in self.atom_index)

    def decode(self, ids) -> frozenset[Atom]:
        return frozenset(self.atoms[i] for i in ids)

    def extend(self, rules) -> "GroundProgram":
        """New ground program with ``rules`` appended (ids of old atoms kept)."""
        g = GroundProgram(self.rules + list(rules), dict(self.atom_index), list(self.atoms),
                          self.sort_decls, self.sort_signature)
        for r in rules:
            for a in r.atoms():
                if a not in g.atom_index:
                    g.atom_index[a] = len(g.atoms)
                    g.atoms.append(a)
        return g

    def to_program(self) -> Program:
        return Program(rules=list(self.rules), facts=[], sort_decls=dict(self.sort_decls),
                       sort_signature=dict(self.sort_signature))

    def __str__(self):
        return "".join(f"{r}\n" for r in self.rules)


def ground(p: Program, mode: str = "full") -> GroundProgram:
    if mode == "full":
        rules = _ground_full(p)
    elif mode == "relevant":
        rules = _ground_relevant(p)
    else:
        raise ValueError(f"unknown grounding mode {mode!r}")
    return GroundProgram(rules, sort_decls=dict(p.sort_decls), sort_signature=dict(p.sort_signature))


def _sort_domains(p: Program, rule: Rule, variables) -> dict[Var, tuple]:
    sorts = p.variable_sorts(rule)
    doms = {}
    for v in variables:
        if v not in sorts:
            raise GroundingError(f"unbound variable {v} in rule {rule}")
        dom = p.sort_domain(sorts[v])
        if not dom:
            raise GroundingError(f"sort domain {sorts[v]!r} is empty (rule {rule})")
        doms[v] = dom
    return doms


def _instantiate(p: Program, rule: Rule, binding: dict) -> Rule | None:
    for rel in rule.relations:
        if not rel.substitute(binding).evaluate():
            return None
    pos = []
    for a in rule.body_pos:
        g = a.substitute(binding)
        if p.is_sort_atom(g):
            if g.args[0] not in p.sort_domain(g.predicate):
                return None
            continue
        pos.append(g)
    neg = []
    for a in rule.body_neg:
        g = a.substitute(binding)
        if p.is_sort_atom(g):
            if g.args[0] in p.sort_domain(g.predicate):
                return None
            continue
        neg.append(g)
    head = rule.head.substitute(binding) if rule.head is not None else None
    return Rule(head, rule.choice, tuple(pos), tuple(neg), ())


def _ground_full(p: Program) -> list[Rule]:
    out = [Rule(f) for f in p.facts]
    for rule in p.rules:
        variables = sorted(rule.variables())
        doms = _sort_domains(p, rule, variables)
        for values in itertools.product(*(doms[v] for v in variables)):
            g = _instantiate(p, rule, dict(zip(variables, values)))
            if g is not None:
                out.append(g)
    return out


class _AtomStore:
    """Possible atoms indexed by signature and by (signature, position, value)."""

    def __init__(self):
        self.atoms: set[Atom] = set()
        self.by_sig: dict[tuple, list[Atom]] = {}
        self.by_arg: dict[tuple, list[Atom]] = {}

    def add(self, a: Atom) -> bool:
        if a in self.atoms:
            return False
        self.atoms.add(a)
        sig = (a.predicate, a.arity)
        self.by_sig.setdefault(sig, []).append(a)
        for i, c in enumerate(a.args):
            self.by_arg.setdefault((sig, i, c), []).append(a)
        return True

    def candidates(self, pattern: Atom, binding: dict) -> list[Atom]:
        sig = (pattern.predicate, pattern.arity)
        best = None
        for i, t in enumerate(pattern.args):
            c = binding.get(t, t) if isinstance(t, Var) else t
            if isinstance(c, Var):
                continue
            lst = self.by_arg.get((sig, i, c), [])
            if best is None or len(lst) < len(best):
                best = lst
                if not best:
                    break
        return best if best is not None else self.by_sig.get(sig, [])


def _match(pattern: Atom, atom: Atom, binding: dict) -> dict | None:
    new = None
    for t, c in zip(pattern.args, atom.args):
        if isinstance(t, Var):
            b = binding.get(t) if new is None else new.get(t)
            if b is None:
                if new is None:
                    new = dict(binding)
                new[t] = c
            elif b != c:
                return None
        elif t != c:
            return None
    return binding if new is None else new


def _bindings(p: Program, rule: Rule, store: _AtomStore, doms: dict):
    """Yield variable bindings for ``rule`` over the atoms in ``store``."""
    joins = [a for a in rule.body_pos if not p.is_sort_atom(a)]
    all_vars = sorted(rule.variables())

    def rec(i, binding):
        if i == len(joins):
            rest = [v for v in all_vars if v not in binding]
            if not rest:
                yield binding
                return
            for values in itertools.product(*(doms[v] for v in rest)):
                b = dict(binding)
                b.update(zip(rest, values))
                yield b
            return
        pat = joins[i]
        for atom in list(store.candidates(pat, binding)):
            b = _match(pat, atom, binding)
            if b is not None:
                yield from rec(i + 1, b)

    yield from rec(0, {})


def _join_domains(p: Program, rule: Rule) -> dict[Var, tuple]:
    joined: set[Var] = set()
    for a in rule.body_pos:
        if not p.is_sort_atom(a):
            joined |= a.variables()
    return _sort_domains(p, rule, sorted(rule.variables() - joined))


def _ground_relevant(p: Program) -> list[Rule]:
    store = _AtomStore()
    facts = []
    for f in p.facts:
        if store.add(f):
            facts.append(f)
    fact_set = set(facts)
    doms = {id(r): _join_domains(p, r) for r in p.rules}
    producing = [r for r in p.rules if r.head is not None]
    changed = True
    while changed:
        changed = False
        for rule in producing:
            for b in _bindings(p, rule, store, doms[id(rule)]):
                g = _instantiate(p, rule, b)
                if g is not None and store.add(g.head):
                    changed = True

    out = [Rule(f) for f in facts]
    seen = set(out)
    for rule in p.rules:
        for b in _bindings(p, rule, store, doms[id(rule)]):
            g = _instantiate(p, rule, b)
            if g is None:
                continue
            if any(a in fact_set for a in g.body_neg):
                continue
            if g.head is not None and g.head in fact_set and not g.choice:
                continue
            pos = tuple(a for a in g.body_pos if a not in fact_set)
            neg = tuple(a for a in g.body_neg if a in store.atoms)
            g = Rule(g.head, g.choice, pos, neg, ())
            if g not in seen:
                seen.add(g)
                out.append(g)
    return out
