"""Construction of the abstract program for a domain mapping.

Every rule ``l :- B, rel`` becomes

(a) ``m(l) :- m(B), tau(i)``                          exact copy when the relation surely holds;
(b) ``{m(l)} :- m(B), tau(iii)``                      guess when the relation is uncertain;
(c) ``{m(l)} :- m(B+ u L), not m(B- \\ L), tau(t), isCluster(j)``
    for every non-empty ``L`` of negative literals, ``t`` in {i, iii} and
    every mapped argument ``j`` of a literal in ``L``: a negated abstract atom
    may be true only because some other original atom of its cluster is.

Rules without a relation over the mapped sorts get (a) and (c) without the
``tau`` guard; constraints only get (a).  Before this, objects that share
some but not all variables are standardised apart, the equalities joining
them become part of the rule's relation, and (for joint mappings) sort
literals such as ``row(X), column(Y)`` are replaced by the object predicate
``cell(X,Y)``.

An object joined by two or more positive atoms may stand for different
originals in each of them, so the exact copy (a) additionally requires
``not isCluster(v)`` for the join variables and a choice copy guarded by
``isCluster(v)`` takes over otherwise.  Joins with fact-only predicates
whose facts cover whole clusters stay exact.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

from .domain import (TYPE_I, TYPE_III, Comparison, DomainMapping, JointRelation, RelTypeSet,
                     compute_joint_rel_types, compute_rel_types, object_slots)
from .syntax import Atom, Program, Rule, Var, const_key

log = logging.getLogger(__name__)

CLUSTER_PRED = "isCluster"
REL_PREFIX = "relr"


class AbstractionError(ValueError):
    pass


@dataclass
class AbstractRule:
    """Normal form of a rule ready for abstraction."""
    head: Atom | None
    choice: bool
    body_pos: list[Atom]
    body_neg: list[Atom]
    object_atoms: list[Atom]
    plain_relations: list[Atom]
    relation: JointRelation | None = None
    relation_objects: list[tuple] = field(default_factory=list)
    shared_vars: list[Var] = field(default_factory=list)


@dataclass
class AbstractProgram:
    rules: list[Rule]
    facts: list[Atom]
    tau_facts: list[Atom]
    cluster_facts: list[Atom]
    object_facts: list[Atom]
    sort_object: str
    mapping: DomainMapping
    rel_types: dict[str, RelTypeSet]
    sort_decls: dict
    sort_signature: dict
    warnings: list[str] = field(default_factory=list)

    @property
    def aux_predicates(self) -> set[str]:
        out = {CLUSTER_PRED} | set(self.rel_types)
        if self.object_facts:
            out.add(self.sort_object)
        return out

    def is_aux(self, atom: Atom) -> bool:
        return atom.predicate in self.aux_predicates

    def program(self) -> Program:
        facts = self.facts + self.object_facts + self.cluster_facts + self.tau_facts
        return Program(list(self.rules), facts, dict(self.sort_decls), dict(self.sort_signature))

    def text(self) -> str:
        return str(self.program())


class _Ctx:
    def __init__(self, p: Program, m: DomainMapping, object_name: str, uniform=frozenset()):
        self.p = p
        self.m = m
        self.object_name = object_name
        self.joint = m.arity > 1
        self.uniform = frozenset(uniform)

    def sort_of(self, pred, arity, pos):
        return self.p.sort_of(pred, arity, pos)

    def slots(self, atom: Atom) -> list[tuple]:
        if self.p.is_sort_atom(atom):
            return [(0,)] if (not self.joint and atom.predicate in self.m.sorts) else []
        if atom.predicate == self.object_name and self.joint:
            return [tuple(range(self.m.arity))]
        return object_slots(atom.predicate, atom.arity, self.sort_of, self.m.sorts)


def _fresh_namer(rule: Rule):
    used = {v.name for v in rule.variables()}
    counter = itertools.count(1)

    def fresh(base: Var) -> Var:
        while True:
            name = f"{base.name}_{next(counter)}"
            if name not in used:
                used.add(name)
                return Var(name)
    return fresh


def normalize_rule(r: Rule, ctx: _Ctx) -> AbstractRule:
    """Replace joint sort literals, standardise objects apart, split relations."""
    p, m = ctx.p, ctx.m
    var_sorts = p.variable_sorts(r)
    pos_atoms, sort_lits = [], []
    for a in r.body_pos:
        if ctx.joint and p.is_sort_atom(a) and a.predicate in m.sorts:
            sort_lits.append(a)
        else:
            pos_atoms.append(a)
    for a in r.body_neg:
        if p.is_sort_atom(a) and a.predicate in m.sorts:
            raise AbstractionError(f"negated sort literal {a} over a mapped sort in rule {r}")

    object_atoms: list[Atom] = []
    if sort_lits:
        pending = {}
        for a in sort_lits:
            t = a.args[0]
            if not isinstance(t, Var):
                raise AbstractionError(f"sort literal {a} with a constant in rule {r}")
            pending[t] = m.sorts.index(a.predicate)
        candidates = list(pos_atoms) + ([r.head] if r.head is not None else []) + list(r.body_neg)
        for atom in candidates:
            for slot in ctx.slots(atom):
                t = tuple(atom.args[i] for i in slot)
                hit = [v for i, v in enumerate(t) if isinstance(v, Var) and pending.get(v) == i]
                if hit:
                    obj = Atom(ctx.object_name, t)
                    if obj not in object_atoms:
                        object_atoms.append(obj)
                    for v in hit:
                        pending.pop(v, None)
        if pending:
            names = ", ".join(sorted(v.name for v in pending))
            raise AbstractionError(f"cannot pair sort literal variable(s) {names} into "
                                   f"objects in rule {r}")

    fresh = _fresh_namer(r)
    registry: dict[tuple, tuple] = {}
    seen: set[Var] = set()
    equalities: list[tuple[int, Var, Var]] = []

    def register(t: tuple) -> tuple:
        if t in registry:
            return registry[t]
        new = []
        for comp, term in enumerate(t):
            if isinstance(term, Var) and term in seen:
                f = fresh(term)
                equalities.append((comp, f, term))
                new.append(f)
            else:
                new.append(term)
        renamed = tuple(new)
        registry[t] = renamed
        for term in t + renamed:
            if isinstance(term, Var):
                seen.add(term)
        return renamed

    def rewrite(atom: Atom, renamer) -> Atom:
        slots = ctx.slots(atom)
        if not slots:
            return atom
        args = list(atom.args)
        for slot in slots:
            t = tuple(atom.args[i] for i in slot)
            for i, v in zip(slot, renamer(t)):
                args[i] = v
        return Atom(atom.predicate, tuple(args))

    # an object joined by several positive atoms may stand for different
    # originals in each of them unless all but one atom hold cluster-wide
    occurrences: dict[tuple, list[Atom]] = {}
    for a in pos_atoms:
        if p.is_sort_atom(a):
            continue
        for slot in ctx.slots(a):
            t = tuple(a.args[i] for i in slot)
            if any(isinstance(v, Var) for v in t):
                occurrences.setdefault(t, []).append(a)

    new_pos = [rewrite(a, register) for a in pos_atoms]
    shared_vars: list[Var] = []
    for t, atoms in occurrences.items():
        if sum(1 for a in atoms if a.predicate not in ctx.uniform) > 1:
            for v in registry[t]:
                if isinstance(v, Var) and v not in shared_vars:
                    shared_vars.append(v)
    new_objs = [rewrite(a, register) for a in object_atoms]

    extra_objects: list[Atom] = []

    def lookup(t: tuple) -> tuple:
        if t in registry:
            return registry[t]
        tv = {v for v in t if isinstance(v, Var)}
        if tv & seen:
            raise AbstractionError(f"object {t} in head or negative body only partially "
                                   f"matches the positive body in rule {r}")
        registry[t] = t
        seen.update(tv)
        if ctx.joint and tv:
            extra_objects.append(Atom(ctx.object_name, t))
        return t

    new_head = rewrite(r.head, lookup) if r.head is not None else None
    new_neg = [rewrite(a, lookup) for a in r.body_neg]
    new_objs += [a for a in extra_objects if a not in new_objs]

    # object index for each mapped-sort variable occurrence
    objects: list[tuple] = []
    for t in registry.values():
        if t not in objects:
            objects.append(t)
    where: dict[Var, tuple[int, int]] = {}
    for oi, t in enumerate(objects):
        for comp, term in enumerate(t):
            if isinstance(term, Var):
                where.setdefault(term, (oi, comp))

    comparisons: list[tuple[int, str, tuple, tuple]] = []
    plain: list[Atom] = []
    for rel in r.relations:
        sorts = {var_sorts.get(v) for v in rel.variables()}
        if not (sorts & set(m.sorts)):
            plain.append(rel)
            continue
        comp = None
        operands = []
        for term in rel.args:
            if isinstance(term, Var):
                if term not in where:
                    raise AbstractionError(f"relation {rel} uses {term}, which is not part "
                                           f"of an object in rule {r}")
                oi, c = where[term]
                if comp is not None and comp != c:
                    raise AbstractionError(f"relation {rel} compares different sorts in rule {r}")
                comp = c
                operands.append(("obj", oi))
            else:
                operands.append(("const", term))
        comparisons.append((comp, rel.builtin, operands[0], operands[1]))
    for comp, f, orig in equalities:
        comparisons.append((comp, "=", ("obj", where[f][0]), ("obj", where[orig][0])))

    out = AbstractRule(new_head, r.choice, new_pos, new_neg, new_objs, plain,
                       shared_vars=shared_vars)
    if comparisons:
        used = []
        for _, _, lhs, rhs in comparisons:
            for side in (lhs, rhs):
                if side[0] == "obj" and side[1] not in used:
                    used.append(side[1])
        used.sort()
        remap = {oi: j for j, oi in enumerate(used)}

        def re(side):
            return ("obj", remap[side[1]]) if side[0] == "obj" else side
        out.relation = JointRelation(len(used), tuple(
            Comparison(c, op, re(lhs), re(rhs)) for c, op, lhs, rhs in comparisons))
        out.relation_objects = [objects[oi] for oi in used]
    return out


def _lift(atom: Atom, ctx: _Ctx) -> Atom:
    slots = ctx.slots(atom)
    if not slots:
        return atom
    args = list(atom.args)
    for slot in slots:
        t = tuple(atom.args[i] for i in slot)
        if all(not isinstance(v, Var) for v in t):
            for i, v in zip(slot, ctx.m(t)):
                args[i] = v
        elif any(not isinstance(v, Var) for v in t):
            raise AbstractionError(f"object {t} in {atom} mixes constants and variables")
    return Atom(atom.predicate, tuple(args))


def _mapped_args(atom: Atom, ctx: _Ctx) -> list:
    out = []
    for slot in ctx.slots(atom):
        for i in slot:
            v = atom.args[i]
            if isinstance(v, Var) or ctx.m.is_cluster_value(v):
                if v not in out:
                    out.append(v)
    return out


def abstract_rule(r: Rule, m: DomainMapping, p: Program, index: int = 1,
                  object_name: str = "cell", tighten: bool = False, uniform=frozenset()):
    """Abstract rules for ``r`` plus the relation (if any) they are guarded by.

    Returns ``(rules, relation_name, relation)``; ``relation`` is ``None`` when
    the rule has no comparison over the mapped sorts.  ``uniform`` names
    fact-only predicates whose facts cover whole clusters; joins with them
    stay exact.
    """
    ctx = _Ctx(p, m, object_name, uniform)
    nr = normalize_rule(r, ctx)
    head = _lift(nr.head, ctx) if nr.head is not None else None
    pos = [_lift(a, ctx) for a in nr.body_pos]
    neg = [_lift(a, ctx) for a in nr.body_neg]
    objs = nr.object_atoms
    plain = tuple(nr.plain_relations)
    rel_name = f"{REL_PREFIX}{index}"

    def tau(t):
        args = tuple(v for o in nr.relation_objects for v in o) + (t,)
        return Atom(rel_name, args)

    out: list[Rule] = []

    def emit(choice, body_pos, body_neg, extra, extra_neg=()):
        rule = Rule(head, choice, tuple(body_pos) + tuple(objs) + tuple(extra),
                    tuple(body_neg) + tuple(extra_neg), plain)
        if rule not in out:
            out.append(rule)

    guards = [[tau(TYPE_I)]] if nr.relation is not None else [[]]
    exact = [Atom(CLUSTER_PRED, (v,)) for v in nr.shared_vars]
    emit(nr.choice, pos, neg, guards[0], exact)
    if head is None:
        return out, (rel_name if nr.relation is not None else None), nr.relation
    for v in nr.shared_vars:
        emit(True, pos, neg, guards[0] + [Atom(CLUSTER_PRED, (v,))])
    if nr.relation is not None:
        if not tighten:
            emit(True, pos, neg, [tau(TYPE_III)])
        shift_guards = [[tau(TYPE_I)], [tau(TYPE_III)]]
    else:
        shift_guards = [[]]
    for size in range(1, len(neg) + 1):
        for chosen in itertools.combinations(range(len(neg)), size):
            L = [neg[i] for i in chosen]
            rest = [neg[i] for i in range(len(neg)) if i not in chosen]
            js = []
            for lit in L:
                for j in _mapped_args(lit, ctx):
                    if j not in js:
                        js.append(j)
            for g in shift_guards:
                for j in js:
                    emit(True, pos + L, rest, g + [Atom(CLUSTER_PRED, (j,))])
    return out, (rel_name if nr.relation is not None else None), nr.relation


def abstract_program(p: Program, m: DomainMapping, object_name: str = "cell",
                     tighten: bool = False, rel_method: str = "exhaustive") -> AbstractProgram:
    """Abstract program of ``p`` under ``m``; deterministic for equal inputs.

    ``rel_method`` selects how relation types are computed: ``exhaustive``
    enumerates inverse images of whole objects, ``joint`` combines
    per-sort types.  Both agree on rectangular clusters.
    """
    for s in m.sorts:
        if s not in p.sort_decls:
            raise AbstractionError(f"mapped sort {s!r} is not declared in the program")
        dom = set(p.sort_domain(s))
        if m.domains is not None and set(m.domains[s]) != dom:
            raise AbstractionError(f"mapping domain of {s!r} differs from the declaration")
    uniform = _uniform_predicates(p, m)
    ctx = _Ctx(p, m, object_name, uniform)
    warnings = []
    if object_name in {a.predicate for r in p.rules for a in r.atoms()} | {f.predicate for f in p.facts}:
        raise AbstractionError(f"object predicate {object_name!r} already used by the program")

    facts: list[Atom] = []
    for f in p.facts:
        lf = _lift(f, ctx)
        if lf not in facts:
            facts.append(lf)

    rules: list[Rule] = []
    rel_types: dict[str, RelTypeSet] = {}
    tau_facts: list[Atom] = []
    signature = dict(p.sort_signature)
    compute = compute_rel_types if rel_method == "exhaustive" else compute_joint_rel_types
    for idx, r in enumerate(p.rules, 1):
        new, name, relation = abstract_rule(r, m, p, idx, object_name, tighten, uniform)
        for nr_ in new:
            if nr_ not in rules:
                rules.append(nr_)
        if relation is not None:
            rts = compute(m, relation, name)
            rel_types[name] = rts
            tau_facts.extend(rts.atoms())
            for k in range(relation.arity):
                for i, s in enumerate(m.sorts):
                    signature[(name, relation.arity * m.arity + 1, k * m.arity + i)] = s

    sort_decls = dict(p.sort_decls)
    for i, s in enumerate(m.sorts):
        sort_decls[s] = tuple(m.component_values(i))
    object_facts = []
    if m.arity > 1:
        object_facts = [Atom(object_name, a) for a in m.objects()]
        for i, s in enumerate(m.sorts):
            signature[(object_name, m.arity, i)] = s
    cluster_facts = [Atom(CLUSTER_PRED, (v,)) for v in m.cluster_values()]
    return AbstractProgram(rules, facts, tau_facts, cluster_facts, object_facts, object_name,
                           m, rel_types, sort_decls, signature, warnings)


def _uniform_predicates(p: Program, m: DomainMapping) -> frozenset:
    """Fact-only predicates whose facts are unions of whole cluster products."""
    derived = {r.head.predicate for r in p.rules if r.head is not None}
    by_pred: dict[str, list[Atom]] = {}
    for f in p.facts:
        by_pred.setdefault(f.predicate, []).append(f)
    out = set()
    ctx = _Ctx(p, m, "")
    for pred, facts in by_pred.items():
        if pred in derived:
            continue
        lifted = {}
        for f in facts:
            lifted.setdefault(_lift(f, ctx), set()).add(f)
        if all(len(orig) == _preimage_size(a, ctx) for a, orig in lifted.items()):
            out.add(pred)
    return frozenset(out)


def _preimage_size(atom: Atom, ctx: _Ctx) -> int:
    size = 1
    for slot in ctx.slots(atom):
        size *= len(ctx.m.inverse(tuple(atom.args[i] for i in slot)))
    return size


def lift_interpretation(atoms, m: DomainMapping, p: Program) -> set[Atom]:
    ctx = _Ctx(p, m, "")
    return {_lift(a, ctx) for a in atoms}


def sort_key_atom(a: Atom):
    return (a.predicate, tuple(const_key(c) for c in a.args))
