"""Multi-sort domain mappings and abstract relation types.

A :class:`DomainMapping` clusters tuples of the jointly abstracted sorts
``D1 x ... x Dn`` into abstract tuples.  A predicate position of one of these
sorts is part of an *object*: the i-th position of each sort in a predicate's
signature together form one object, so ``sol(X,Y,N)`` with ``X:row`` and
``Y:column`` has the single object ``(X, Y)``.  Sorts outside the mapping are
left untouched.

Abstract relations are existential: the lifted relation holds on abstract
objects if it holds for some originals in their clusters, and likewise for
its negation.  Both holding at once is the uncertain case (type ``iii``).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .syntax import Atom, compare, const_key

TYPE_I, TYPE_II, TYPE_III = "i", "ii", "iii"
REL_TYPES = (TYPE_I, TYPE_II, TYPE_III)


def _tuple_key(t):
    return tuple(const_key(c) for c in t)


class DomainMapping:
    """Clustering ``m : D1 x ... x Dn -> D^1 x ... x D^n``.

    ``clusters`` maps each abstract tuple to its inverse image.  Clusters must
    be rectangles (products of their projections) and an abstract component
    value must always stand for the same set of original values.
    """

    def __init__(self, sorts: Iterable[str], clusters: Mapping[tuple, Iterable[tuple]],
                 domains: Mapping[str, Iterable] | None = None):
        self.sorts = tuple(sorts)
        n = len(self.sorts)
        if n == 0:
            raise ValueError("a mapping needs at least one sort")
        self.clusters: dict[tuple, frozenset] = {}
        self.forward: dict[tuple, tuple] = {}
        members: list[dict] = [{} for _ in range(n)]
        for abstract, originals in clusters.items():
            abstract = tuple(abstract)
            originals = frozenset(tuple(o) for o in originals)
            if len(abstract) != n or any(len(o) != n for o in originals):
                raise ValueError(f"cluster {abstract} does not match sorts {self.sorts}")
            if not originals:
                raise ValueError(f"cluster {abstract} is empty")
            if abstract in self.clusters:
                raise ValueError(f"duplicate abstract tuple {abstract}")
            proj = [frozenset(o[i] for o in originals) for i in range(n)]
            if len(originals) != _prod(len(p) for p in proj):
                raise ValueError(f"cluster {abstract} is not a product of its projections")
            for i, v in enumerate(abstract):
                prev = members[i].setdefault(v, proj[i])
                if prev != proj[i]:
                    raise ValueError(f"abstract value {v!r} of sort {self.sorts[i]} "
                                     f"names two different sets of originals")
            for o in originals:
                if o in self.forward:
                    raise ValueError(f"original {o} is in two clusters")
                self.forward[o] = abstract
            self.clusters[abstract] = originals
        self.members = members
        self.domains = None
        if domains is not None:
            self.domains = {s: tuple(domains[s]) for s in self.sorts}
            for o in itertools.product(*(self.domains[s] for s in self.sorts)):
                if o not in self.forward:
                    raise ValueError(f"mapping is not total: {o} unmapped")
            if len(self.forward) != _prod(len(self.domains[s]) for s in self.sorts):
                raise ValueError("mapping covers values outside the declared domains")
        self._objects = sorted(self.clusters, key=lambda a: _tuple_key(min(self.clusters[a], key=_tuple_key)))

    # -- construction helpers -------------------------------------------------

    @classmethod
    def identity(cls, sorts, domains: Mapping[str, Iterable]) -> "DomainMapping":
        sorts = tuple(sorts)
        doms = [tuple(domains[s]) for s in sorts]
        return cls(sorts, {o: [o] for o in itertools.product(*doms)}, domains)

    @classmethod
    def from_partition(cls, sort: str, blocks: Mapping, domain=None) -> "DomainMapping":
        """Single-sort mapping from ``{abstract_name: originals}``."""
        clusters = {(name,): [(o,) for o in originals] for name, originals in blocks.items()}
        return cls((sort,), clusters, {sort: domain} if domain is not None else None)

    # -- queries ----------------------------------------------------------------

    @property
    def arity(self) -> int:
        return len(self.sorts)

    def objects(self) -> list[tuple]:
        """Abstract tuples, ordered by their smallest original."""
        return list(self._objects)

    def inverse(self, abstract: tuple) -> frozenset:
        return self.clusters[tuple(abstract)]

    def __call__(self, original: tuple) -> tuple:
        try:
            return self.forward[tuple(original)]
        except KeyError:
            raise ValueError(f"{original} is outside the mapped domain") from None

    def component_values(self, i: int) -> list:
        return sorted(self.members[i], key=const_key)

    def component_members(self, i: int, value) -> frozenset:
        return self.members[i][value]

    def is_cluster_value(self, value) -> bool:
        """True if ``value`` is a component of some tuple and stands for >1 originals."""
        return any(len(m.get(value, ())) > 1 for m in self.members)

    def cluster_values(self) -> list:
        vals = {v for m in self.members for v, s in m.items() if len(s) > 1}
        return sorted(vals, key=const_key)

    def is_identity(self) -> bool:
        return all(len(c) == 1 for c in self.clusters.values())

    def __eq__(self, other):
        return (isinstance(other, DomainMapping) and self.sorts == other.sorts
                and self.clusters == other.clusters)

    def __hash__(self):
        return hash((self.sorts, frozenset(self.clusters.items())))

    def __repr__(self):
        return f"DomainMapping(sorts={self.sorts}, clusters={len(self.clusters)})"

    def to_json(self) -> dict:
        return {
            "sorts": list(self.sorts),
            "clusters": [{"abstract": list(a),
                          "members": [list(o) for o in sorted(self.clusters[a], key=_tuple_key)]}
                         for a in self._objects],
        }

    @classmethod
    def from_json(cls, data) -> "DomainMapping":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(data["sorts"], {tuple(c["abstract"]): [tuple(o) for o in c["members"]]
                                   for c in data["clusters"]})


def _prod(xs) -> int:
    out = 1
    for x in xs:
        out *= x
    return out


# ---------------------------------------------------------------------------
# objects inside atoms

SortOf = Callable[[str, int, int], "str | None"]


def object_slots(predicate: str, arity: int, sort_of: SortOf, sorts: tuple) -> list[tuple]:
    """Position tuples forming the objects of ``predicate/arity``.

    Raises ``ValueError`` when the predicate mentions the mapped sorts an
    unequal number of times, since such positions cannot be paired.
    """
    per_sort = [[] for _ in sorts]
    for pos in range(arity):
        s = sort_of(predicate, arity, pos)
        if s in sorts:
            per_sort[sorts.index(s)].append(pos)
    counts = {len(p) for p in per_sort}
    if len(counts) > 1:
        raise ValueError(f"{predicate}/{arity} mentions the sorts {sorts} unevenly; "
                         "positions cannot be paired into objects")
    return list(zip(*per_sort))


def lift_atom(m: DomainMapping, a: Atom, sort_of: SortOf) -> Atom:
    """Replace every object of the ground atom ``a`` by its abstract tuple."""
    slots = object_slots(a.predicate, a.arity, sort_of, m.sorts)
    if not slots:
        return a
    args = list(a.args)
    for slot in slots:
        abstract = m(tuple(a.args[p] for p in slot))
        for p, v in zip(slot, abstract):
            args[p] = v
    return Atom(a.predicate, tuple(args))


def atom_objects(a: Atom, sort_of: SortOf, sorts: tuple) -> list[tuple]:
    return [tuple(a.args[p] for p in slot)
            for slot in object_slots(a.predicate, a.arity, sort_of, sorts)]


# ---------------------------------------------------------------------------
# relations

@dataclass(frozen=True)
class Comparison:
    """``lhs op rhs`` on one component; operands are ``("obj", j)`` or ``("const", c)``."""
    component: int
    op: str
    lhs: tuple
    rhs: tuple

    def objects(self) -> set[int]:
        return {t[1] for t in (self.lhs, self.rhs) if t[0] == "obj"}

    def holds(self, objs) -> bool:
        def val(t):
            return objs[t[1]][self.component] if t[0] == "obj" else t[1]
        return compare(self.op, val(self.lhs), val(self.rhs))


@dataclass(frozen=True)
class JointRelation:
    """Conjunction of comparisons over ``arity`` objects."""
    arity: int
    comparisons: tuple

    @classmethod
    def binary(cls, op: str, component: int = 0) -> "JointRelation":
        return cls(2, (Comparison(component, op, ("obj", 0), ("obj", 1)),))

    @classmethod
    def per_component(cls, ops) -> "JointRelation":
        """Binary relation with ``ops[i]`` on component i (``None`` = unconstrained)."""
        return cls(2, tuple(Comparison(i, op, ("obj", 0), ("obj", 1))
                            for i, op in enumerate(ops) if op is not None))

    def holds(self, objs) -> bool:
        return all(c.holds(objs) for c in self.comparisons)

    def components(self) -> set[int]:
        return {c.component for c in self.comparisons}

    def restrict(self, component: int) -> "JointRelation":
        return JointRelation(self.arity, tuple(c for c in self.comparisons
                                               if c.component == component))


def _type_of(pos: bool, neg: bool) -> str:
    if pos and not neg:
        return TYPE_I
    if neg and not pos:
        return TYPE_II
    assert pos and neg, "inverse images are never empty"
    return TYPE_III


@dataclass
class RelTypeSet:
    """Type of the abstract relation for every tuple of abstract objects."""
    name: str
    types: dict
    mapping: DomainMapping

    def type_of(self, objects: tuple) -> str:
        return self.types[tuple(objects)]

    def atoms(self) -> list[Atom]:
        out = []
        for objs, t in self.types.items():
            args = tuple(v for o in objs for v in o) + (t,)
            out.append(Atom(self.name, args))
        return out

    def count(self, t: str) -> int:
        return sum(1 for v in self.types.values() if v == t)


def _relevant_projection(m: DomainMapping, abstract: tuple, comps: list[int]) -> list[tuple]:
    """Distinct projections of an inverse image onto ``comps`` (others set to None)."""
    n = m.arity
    seen = set()
    for o in m.inverse(abstract):
        seen.add(tuple(o[i] if i in comps else None for i in range(n)))
    return list(seen)


def compute_rel_types(m: DomainMapping, rel: JointRelation, name: str = "rel") -> RelTypeSet:
    """Types by exhaustive enumeration of the inverse images of every object tuple."""
    comps = sorted(rel.components())
    objs = m.objects()
    proj = {a: _relevant_projection(m, a, comps) for a in objs}
    types = {}
    for combo in itertools.product(objs, repeat=rel.arity):
        pos = neg = False
        for originals in itertools.product(*(proj[a] for a in combo)):
            if rel.holds(originals):
                pos = True
            else:
                neg = True
            if pos and neg:
                break
        types[combo] = _type_of(pos, neg)
    return RelTypeSet(name, types, m)


def combine_joint_types(component_types) -> str:
    """Joint type from per-component types.

    Joint type I needs every component in I; joint type III needs some
    component in III and no component in II; everything else is the
    complement, stored as II.
    """
    cts = list(component_types)
    if all(t == TYPE_I for t in cts):
        return TYPE_I
    if any(t == TYPE_III for t in cts) and not any(t == TYPE_II for t in cts):
        return TYPE_III
    return TYPE_II


def compute_joint_rel_types(m: DomainMapping, rel: JointRelation, name: str = "rel") -> RelTypeSet:
    """Types per component (existential over component projections), then combined."""
    n = m.arity
    for c in rel.comparisons:
        if not 0 <= c.component < n:
            raise ValueError(f"comparison on component {c.component} but mapping has {n} sorts")
    objs = m.objects()
    per_comp = {}
    for i in range(n):
        sub = rel.restrict(i)
        if not sub.comparisons:
            continue
        vals = {a: sorted(m.component_members(i, a[i]), key=const_key) for a in objs}
        table = {}
        for combo in itertools.product(objs, repeat=rel.arity):
            key = tuple(a[i] for a in combo)
            if key in table:
                continue
            pos = neg = False
            for values in itertools.product(*(vals[a] for a in combo)):
                fake = [tuple(v if j == i else None for j in range(n)) for v in values]
                if sub.holds(fake):
                    pos = True
                else:
                    neg = True
                if pos and neg:
                    break
            table[key] = _type_of(pos, neg)
        per_comp[i] = table
    types = {}
    for combo in itertools.product(objs, repeat=rel.arity):
        cts = [per_comp[i][tuple(a[i] for a in combo)] if i in per_comp else TYPE_I
               for i in range(n)]
        types[combo] = combine_joint_types(cts)
    return RelTypeSet(name, types, m)
