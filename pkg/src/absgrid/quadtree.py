"""Hierarchical grid abstractions (quad-trees, 9-ary trees for Sudoku).

Cells are addressed ``(x, y)``, 1-based, ``x`` being the first coordinate of
a grid predicate (column from the left in renderings) and ``y`` the second
(row from the top).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

from .domain import DomainMapping


@dataclass(frozen=True)
class RegionNode:
    xs: tuple[int, int]
    ys: tuple[int, int]
    depth: int = 0
    children: tuple["RegionNode", ...] = ()

    @property
    def side(self) -> int:
        return self.xs[1] - self.xs[0] + 1

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def extent(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return (self.xs, self.ys)

    def cells(self):
        for y in range(self.ys[0], self.ys[1] + 1):
            for x in range(self.xs[0], self.xs[1] + 1):
                yield (x, y)

    def contains(self, x: int, y: int) -> bool:
        return self.xs[0] <= x <= self.xs[1] and self.ys[0] <= y <= self.ys[1]

    def expand(self, b: int) -> "RegionNode":
        if self.side == 1:
            raise ValueError(f"cannot split singleton region {self.label()}")
        if self.side % b:
            raise ValueError(f"region side {self.side} not divisible by {b}")
        s = self.side // b
        kids = tuple(RegionNode((self.xs[0] + i * s, self.xs[0] + (i + 1) * s - 1),
                                (self.ys[0] + j * s, self.ys[0] + (j + 1) * s - 1),
                                self.depth + 1)
                     for j in range(b) for i in range(b))
        return RegionNode(self.xs, self.ys, self.depth, kids)

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            for c in self.children:
                yield from c.leaves()

    def label(self) -> str:
        return f"x={self.xs[0]}..{self.xs[1]} y={self.ys[0]}..{self.ys[1]}"


def _leaf_key(node: RegionNode):
    return (node.ys[0], node.xs[0])


def _power_of(n: int, b: int) -> int | None:
    k = 0
    while n > 1 and n % b == 0:
        n //= b
        k += 1
    return k if n == 1 else None


class GridMapping:
    """Quad-tree (``branching=2``) or 9-ary (``branching=3``) partition of an n x n grid."""

    def __init__(self, n: int, branching: int, root: RegionNode):
        self.n = n
        self.branching = branching
        self.root = root

    @cached_property
    def leaves(self) -> tuple[RegionNode, ...]:
        return tuple(sorted(self.root.leaves(), key=_leaf_key))

    @cached_property
    def _cell_leaf(self) -> dict:
        return {cell: leaf for leaf in self.leaves for cell in leaf.cells()}

    def leaf_at(self, x: int, y: int) -> RegionNode:
        return self._cell_leaf[(x, y)]

    def find_leaf(self, xs, ys) -> RegionNode:
        for leaf in self.leaves:
            if leaf.xs == tuple(xs) and leaf.ys == tuple(ys):
                return leaf
        raise KeyError(f"no leaf with extent x={xs} y={ys}")

    @property
    def levels(self) -> int:
        return _power_of(self.n, self.branching)

    def is_identity(self) -> bool:
        return all(leaf.side == 1 for leaf in self.leaves)

    def __eq__(self, other):
        return (isinstance(other, GridMapping) and self.n == other.n
                and self.branching == other.branching
                and {l.extent for l in self.leaves} == {l.extent for l in other.leaves})

    def __hash__(self):
        return hash((self.n, self.branching, frozenset(l.extent for l in self.leaves)))

    def __repr__(self):
        return f"GridMapping(n={self.n}, branching={self.branching}, leaves={len(self.leaves)})"

    # -- conversion -------------------------------------------------------------

    def to_domain_mapping(self, sorts=("x", "y"), prefixes=None) -> DomainMapping:
        """Joint mapping whose clusters are the leaf extents.

        Singleton leaves keep their original coordinates; a region spanning
        ``lo..hi`` on a coordinate is named ``<prefix><lo>_<hi>``.
        """
        if prefixes is None:
            prefixes = _default_prefixes(sorts)
        clusters = {}
        for leaf in self.leaves:
            ax = _name(prefixes[0], leaf.xs)
            ay = _name(prefixes[1], leaf.ys)
            clusters[(ax, ay)] = list(leaf.cells())
        dom = tuple(range(1, self.n + 1))
        return DomainMapping(tuple(sorts), clusters, {sorts[0]: dom, sorts[1]: dom})

    def leaf_for_abstract(self, dm: DomainMapping, abstract: tuple) -> RegionNode:
        x, y = next(iter(dm.inverse(abstract)))
        return self.leaf_at(x, y)

    def to_text(self) -> str:
        lines = [f"quadtree n={self.n} b={self.branching}"]
        lines += [leaf.label() for leaf in self.leaves]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"n": self.n, "branching": self.branching,
                "leaves": [[list(l.xs), list(l.ys)] for l in self.leaves]}


def _name(prefix: str, rng: tuple[int, int]):
    return rng[0] if rng[0] == rng[1] else f"{prefix}{rng[0]}_{rng[1]}"


def _default_prefixes(sorts) -> tuple[str, str]:
    a, b = sorts[0][0].lower(), sorts[1][0].lower()
    if a == b:
        return (sorts[0].lower() + "_", sorts[1].lower() + "_")
    return (a, b)


def initial_mapping(n: int, branching: int = 2) -> GridMapping:
    """Root expanded once: ``branching**2`` leaves of side ``n / branching``."""
    if branching < 2:
        raise ValueError("branching must be at least 2")
    k = _power_of(n, branching)
    if k is None or k < 1:
        raise ValueError(f"grid side {n} is not a power of {branching}")
    root = RegionNode((1, n), (1, n), 0).expand(branching)
    return GridMapping(n, branching, root)


def identity_mapping(n: int, branching: int = 2) -> GridMapping:
    g = initial_mapping(n, branching)
    while not g.is_identity():
        g = split(g, next(l for l in g.leaves if l.side > 1))
    return g


def _replace(node: RegionNode, target: RegionNode, b: int) -> RegionNode:
    if node.is_leaf:
        return node.expand(b) if node.extent == target.extent else node
    if not (node.xs[0] <= target.xs[0] and target.xs[1] <= node.xs[1]
            and node.ys[0] <= target.ys[0] and target.ys[1] <= node.ys[1]):
        return node
    return RegionNode(node.xs, node.ys, node.depth,
                      tuple(_replace(c, target, b) for c in node.children))


def split(g: GridMapping, leaf: RegionNode) -> GridMapping:
    """Replace ``leaf`` by its children; other leaves are unchanged."""
    try:
        leaf = g.find_leaf(leaf.xs, leaf.ys)
    except KeyError:
        raise ValueError(f"{leaf.label()} is not a leaf of this mapping") from None
    if leaf.side == 1:
        raise ValueError(f"cannot split singleton region {leaf.label()}")
    return GridMapping(g.n, g.branching, _replace(g.root, leaf, g.branching))


def mapping_cost(g: GridMapping, denominator: str = "literal") -> float:
    """Normalised weighted count of regions per level (0 = coarsest, identity highest).

    ``literal`` weighs level i by ``n**2 * 2**(-i**2)`` in the denominator;
    ``per-level-count`` uses the number of same-size regions
    ``n**2 * b**(-2i)``.  For ``branching=3`` only ``per-level-count`` is
    defined and is used whatever is requested.
    """
    if denominator not in ("literal", "per-level-count"):
        raise ValueError(f"unknown cost denominator {denominator!r}")
    b, n = g.branching, g.n
    top = g.levels - 1
    counts: dict[int, int] = {}
    for leaf in g.leaves:
        i = _power_of(leaf.side, b)
        counts[i] = counts.get(i, 0) + 1
    num = sum(counts.get(i, 0) * (top - i) for i in range(top + 1))
    if denominator == "literal" and b == 2:
        den = sum(n * n * 2.0 ** (-(i * i)) * (top - i) for i in range(top + 1))
    else:
        den = sum(n * n * float(b) ** (-2 * i) * (top - i) for i in range(top + 1))
    if den == 0:
        return 0.0
    return num / den


_HEADER = re.compile(r"quadtree\s+n=(\d+)\s+b=(\d+)")
_LEAF = re.compile(r"x=(\d+)\.\.(\d+)\s+y=(\d+)\.\.(\d+)")


def parse_mapping(text: str) -> GridMapping:
    """Inverse of :meth:`GridMapping.to_text`."""
    lines = [l.strip() for l in text.splitlines() if l.strip() and not l.strip().startswith("%")]
    if not lines:
        raise ValueError("empty mapping text")
    m = _HEADER.fullmatch(lines[0])
    if not m:
        raise ValueError(f"bad mapping header {lines[0]!r}")
    n, b = int(m.group(1)), int(m.group(2))
    targets = set()
    for line in lines[1:]:
        lm = _LEAF.fullmatch(line)
        if not lm:
            raise ValueError(f"bad leaf line {line!r}")
        x0, x1, y0, y1 = map(int, lm.groups())
        targets.add(((x0, x1), (y0, y1)))
    return from_leaves(n, b, targets)


def from_leaves(n: int, b: int, extents) -> GridMapping:
    targets = {(tuple(xs), tuple(ys)) for xs, ys in extents}
    g = initial_mapping(n, b)
    while True:
        current = {l.extent for l in g.leaves}
        if current == targets:
            return g
        todo = [l for l in g.leaves if l.extent not in targets]
        if not todo:
            raise ValueError("leaf list does not tile the grid")
        leaf = todo[0]
        if leaf.side == 1:
            raise ValueError(f"leaf list does not form a {b}-ary tree over {n}x{n}")
        g = split(g, leaf)


def mapping_from_json(data: dict) -> GridMapping:
    """Inverse of :meth:`GridMapping.to_json`."""
    return from_leaves(int(data["n"]), int(data["branching"]), data["leaves"])
