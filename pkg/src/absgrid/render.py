"""ASCII and SVG drawings of a quad-tree mapping over an instance.

Obstacles and forbidden cells are ``#``, the agent's start is ``@`` and
Sudoku clues show their value.  Borders between leaves use ``|`` and ``-``;
borders between the top-level regions (and the outer frame) are doubled as
``||`` and ``=``.
"""
from __future__ import annotations

from .bench import InstanceSpec
from .quadtree import GridMapping


def _lookup(mapping: GridMapping, spec: InstanceSpec | None):
    # Sudoku mappings are keyed (row, column); drawings are (column, row)
    if spec is not None and spec.problem == "sudoku":
        return lambda x, y: mapping.leaf_at(y, x)
    return mapping.leaf_at


def _check(mapping: GridMapping, spec: InstanceSpec | None):
    if spec is not None and spec.n != mapping.n:
        raise ValueError(f"mapping side {mapping.n} differs from instance side {spec.n}")


def _content(spec: InstanceSpec | None, x: int, y: int) -> str:
    if spec is None:
        return " "
    if (x, y) in spec.blocked:
        return "#"
    if spec.agent_start == (x, y):
        return "@"
    v = spec.clues.get((x, y))
    return str(v) if v is not None else " "


def render_ascii(mapping: GridMapping, spec: InstanceSpec | None = None) -> str:
    _check(mapping, spec)
    n = mapping.n
    leaf = _lookup(mapping, spec)
    top = n // mapping.branching

    def region(x, y):
        return ((x - 1) // top, (y - 1) // top)

    def vsep(i, y):
        # separator left of column i+1 in row y (i = 0..n)
        if i in (0, n):
            return "||"
        if leaf(i, y) is leaf(i + 1, y):
            return "  "
        return "||" if region(i, y) != region(i + 1, y) else " |"

    def hseg(x, j):
        # segment above row j+1 in column x (j = 0..n)
        if j in (0, n):
            return "="
        if leaf(x, j) is leaf(x, j + 1):
            return " "
        return "=" if region(x, j) != region(x, j + 1) else "-"

    def corner(i, j):
        above = vsep(i, j) if j >= 1 else "  "
        below = vsep(i, j + 1) if j < n else "  "
        left = hseg(i, j) if i >= 1 else " "
        right = hseg(i + 1, j) if i < n else " "
        if "||" in (above, below):
            return "++"
        if above.strip() or below.strip():
            return (left if left.strip() else " ") + "+"
        if left.strip() or right.strip():
            return (left if left.strip() else right) * 2
        return "  "

    lines = []
    for j in range(n + 1):
        parts = []
        for i in range(n + 1):
            parts.append(corner(i, j))
            if i < n:
                parts.append(hseg(i + 1, j) * 3)
        lines.append("".join(parts).rstrip())
        if j < n:
            y = j + 1
            row = []
            for i in range(n + 1):
                row.append(vsep(i, y))
                if i < n:
                    row.append(f" {_content(spec, i + 1, y)} ")
            lines.append("".join(row).rstrip())
    return "\n".join(lines) + "\n"


def render_svg(mapping: GridMapping, spec: InstanceSpec | None = None, cell: int = 32) -> str:
    _check(mapping, spec)
    n = mapping.n
    size = n * cell
    pad = 4
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + 2 * pad}" '
           f'height="{size + 2 * pad}" viewBox="0 0 {size + 2 * pad} {size + 2 * pad}">',
           f'<rect x="0" y="0" width="{size + 2 * pad}" height="{size + 2 * pad}" fill="white"/>']
    sudoku = spec is not None and spec.problem == "sudoku"
    if spec is not None:
        for x, y in sorted(spec.blocked):
            out.append(f'<rect x="{pad + (x - 1) * cell}" y="{pad + (y - 1) * cell}" '
                       f'width="{cell}" height="{cell}" fill="#555555"/>')
        if spec.agent_start is not None:
            x, y = spec.agent_start
            out.append(f'<circle cx="{pad + (x - 0.5) * cell}" cy="{pad + (y - 0.5) * cell}" '
                       f'r="{cell * 0.2}" fill="black"/>')
        for (x, y), v in sorted(spec.clues.items()):
            out.append(f'<text x="{pad + (x - 0.5) * cell}" y="{pad + (y - 0.5) * cell}" '
                       f'font-size="{cell * 0.6}" text-anchor="middle" '
                       f'dominant-baseline="central">{v}</text>')
    out.append('<g fill="none" stroke="#dddddd" stroke-width="0.5">')
    for k in range(n + 1):
        out.append(f'<line x1="{pad}" y1="{pad + k * cell}" x2="{pad + size}" y2="{pad + k * cell}"/>')
        out.append(f'<line x1="{pad + k * cell}" y1="{pad}" x2="{pad + k * cell}" y2="{pad + size}"/>')
    out.append("</g>")

    nodes = []

    def walk(node):
        nodes.append(node)
        for c in node.children:
            walk(c)
    walk(mapping.root)
    for node in sorted(nodes, key=lambda nd: (-nd.depth, nd.ys[0], nd.xs[0])):
        xs, ys = (node.ys, node.xs) if sudoku else (node.xs, node.ys)
        width = max(1, 4 - node.depth)
        out.append(f'<rect x="{pad + (xs[0] - 1) * cell}" y="{pad + (ys[0] - 1) * cell}" '
                   f'width="{(xs[1] - xs[0] + 1) * cell}" height="{(ys[1] - ys[0] + 1) * cell}" '
                   f'fill="none" stroke="black" stroke-width="{width}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render(mapping: GridMapping, spec: InstanceSpec | None = None, fmt: str = "ascii") -> str:
    if fmt == "ascii":
        return render_ascii(mapping, spec)
    if fmt == "svg":
        return render_svg(mapping, spec)
    raise ValueError(f"unknown render format {fmt!r}")
