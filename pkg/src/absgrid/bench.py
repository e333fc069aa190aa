"""Benchmark encodings, instance generation and brute-force certification.

Cells are ``(x, y)`` with ``x`` the column from the left and ``y`` the row
from the top, both 1-based.  Sudoku keeps its own order: facts are
``given(Row, Column, Value)``.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import asdict, dataclass, field
from importlib import resources

from .syntax import Program, parse_program

PROBLEMS = ("reachability", "sudoku", "knights_tour", "visitall_plan", "visitall_kt")
ALIASES = {"r": "reachability", "reach": "reachability", "s": "sudoku", "kt": "knights_tour",
           "v": "visitall_plan", "visitall": "visitall_plan", "v_kt": "visitall_kt",
           "vkt": "visitall_kt"}
GRID_SORTS = {"sudoku": ("row", "column")}
KNIGHT = [(1, 2), (2, 1), (-1, 2), (-2, 1), (1, -2), (2, -1), (-1, -2), (-2, -1)]
STEPS = [(1, 0), (-1, 0), (0, 1), (0, -1)]
META_PREFIX = "% absgrid-instance: "
SPEC_PREFIX = "% absgrid-spec: "


def canonical_problem(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    key = ALIASES.get(key, key)
    if key not in PROBLEMS:
        raise ValueError(f"unknown problem {name!r}; expected one of {', '.join(PROBLEMS)}")
    return key


def grid_sorts(problem: str) -> tuple[str, str]:
    return GRID_SORTS.get(canonical_problem(problem), ("x", "y"))


def encoding_text(problem: str) -> str:
    problem = canonical_problem(problem)
    return resources.files("absgrid.encodings").joinpath(f"{problem}.lp").read_text()


def encoding_for(problem: str) -> Program:
    """Parsed encoding with a placeholder 1x1 grid so that it validates alone."""
    problem = canonical_problem(problem)
    return parse_program(encoding_text(problem) + _placeholder_sorts(problem))


def _placeholder_sorts(problem: str) -> str:
    if problem == "sudoku":
        return "#sort row = {1}. #sort column = {1}. #sort num = {1}. #sort block = {1}.\n"
    extra = "#sort time = {0}.\n" if problem == "visitall_plan" else ""
    return "#sort x = {1}. #sort y = {1}.\n" + extra


@dataclass
class InstanceSpec:
    problem: str
    n: int
    seed: int = 0
    obstacles: list = field(default_factory=list)
    clues: dict = field(default_factory=dict)
    forbidden: list = field(default_factory=list)
    agent_start: tuple | None = None
    name: str = ""

    def __post_init__(self):
        self.problem = canonical_problem(self.problem)
        self.obstacles = sorted(tuple(c) for c in self.obstacles)
        self.forbidden = sorted(tuple(c) for c in self.forbidden)
        self.clues = {tuple(k): int(v) for k, v in dict(self.clues).items()}
        if self.agent_start is not None:
            self.agent_start = tuple(self.agent_start)
        self.validate()

    def validate(self):
        if self.n < 1:
            raise ValueError("grid side must be positive")
        cells = list(self.obstacles) + list(self.forbidden) + list(self.clues)
        if self.agent_start is not None:
            cells.append(self.agent_start)
        for x, y in cells:
            if not (1 <= x <= self.n and 1 <= y <= self.n):
                raise ValueError(f"cell ({x},{y}) outside the {self.n}x{self.n} grid")
        for v in self.clues.values():
            if not 1 <= v <= self.n:
                raise ValueError(f"clue value {v} outside 1..{self.n}")
        if self.problem == "sudoku":
            b = _block_side(self.n)
            if b is None:
                raise ValueError(f"sudoku side {self.n} is not a square number")
        elif self.agent_start is None:
            raise ValueError(f"{self.problem} needs a start cell")
        elif self.agent_start in set(self.obstacles) | set(self.forbidden):
            raise ValueError("start cell is blocked")

    @property
    def blocked(self) -> set:
        return set(self.obstacles) | set(self.forbidden)

    def free_cells(self) -> list[tuple]:
        return [(x, y) for y in range(1, self.n + 1) for x in range(1, self.n + 1)
                if (x, y) not in self.blocked]

    def metadata(self, certified: bool | None = None) -> dict:
        d = {"problem": self.problem, "n": self.n, "seed": self.seed}
        if self.name:
            d["name"] = self.name
        if certified is not None:
            d["certified"] = certified
        return d

    def to_json(self) -> dict:
        d = asdict(self)
        d["clues"] = [[k[0], k[1], v] for k, v in sorted(self.clues.items())]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "InstanceSpec":
        d = dict(d)
        d["clues"] = {(c, r): v for c, r, v in d.get("clues", [])}
        return cls(**d)


def _block_side(n: int) -> int | None:
    b = int(round(n ** 0.5))
    return b if b * b == n else None


# ---------------------------------------------------------------------------
# fact generation

def instance_facts(spec: InstanceSpec) -> str:
    n = spec.n
    out = []
    if spec.problem == "sudoku":
        b = _block_side(n)
        out.append(f"#sort row = {{1..{n}}}. #sort column = {{1..{n}}}. "
                   f"#sort num = {{1..{n}}}. #sort block = {{1..{n}}}.")
        for (col, row), v in sorted(spec.clues.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            out.append(f"given({row},{col},{v}).")
        for row in range(1, n + 1):
            out.append(" ".join(f"inblock({row},{col},{(row - 1) // b * b + (col - 1) // b + 1})."
                                for col in range(1, n + 1)))
        return "\n".join(out) + "\n"
    out.append(f"#sort x = {{1..{n}}}. #sort y = {{1..{n}}}.")
    if spec.problem == "visitall_plan":
        horizon = len(spec.free_cells()) - 1
        out.append(f"#sort time = {{0..{max(horizon, 0)}}}.")
        if horizon > 0:
            out.append(" ".join(f"next({t},{t + 1})." for t in range(horizon)))
    sx, sy = spec.agent_start
    out.append(f"start({sx},{sy}).")
    if spec.problem in ("reachability", "visitall_plan"):
        for x, y in spec.obstacles:
            out.append(f"obstacle({x},{y}).")
        steps = STEPS
        rel = "adj"
    else:
        for x, y in spec.forbidden:
            out.append(f"forbidden({x},{y}).")
        steps = KNIGHT
        rel = "kmove"
    for y in range(1, n + 1):
        row = []
        for x in range(1, n + 1):
            for dx, dy in steps:
                if 1 <= x + dx <= n and 1 <= y + dy <= n:
                    row.append(f"{rel}({x},{y},{x + dx},{y + dy}).")
        out.append(" ".join(row))
    return "\n".join(out) + "\n"


def instance_text(spec: InstanceSpec, certified: bool | None = None) -> str:
    header = META_PREFIX + json.dumps(spec.metadata(certified), sort_keys=True)
    body = SPEC_PREFIX + json.dumps(spec.to_json(), sort_keys=True)
    return f"{header}\n{body}\n{instance_facts(spec)}"


def read_instance(text: str) -> tuple[dict, InstanceSpec | None]:
    meta, spec = {}, None
    for line in text.splitlines():
        if line.startswith(META_PREFIX):
            meta = json.loads(line[len(META_PREFIX):])
        elif line.startswith(SPEC_PREFIX):
            spec = InstanceSpec.from_json(json.loads(line[len(SPEC_PREFIX):]))
    return meta, spec


def load_problem(problem: str, instance: str) -> Program:
    """Encoding of ``problem`` joined with instance facts (text)."""
    return parse_program(encoding_text(problem) + "\n" + instance)


def program_for(spec: InstanceSpec) -> Program:
    return load_problem(spec.problem, instance_facts(spec))


# ---------------------------------------------------------------------------
# brute-force oracles (independent of the ASP machinery)

def _neighbours(spec: InstanceSpec, steps):
    free = set(spec.free_cells())
    return {c: [(c[0] + dx, c[1] + dy) for dx, dy in steps if (c[0] + dx, c[1] + dy) in free]
            for c in free}


def reachability_sat(spec: InstanceSpec) -> bool:
    nb = _neighbours(spec, STEPS)
    seen = {spec.agent_start}
    todo = [spec.agent_start]
    while todo:
        c = todo.pop()
        for d in nb[c]:
            if d not in seen:
                seen.add(d)
                todo.append(d)
    return len(seen) == len(nb)


def _hamiltonian_path(nb, start, total) -> bool:
    path = {start}

    def dfs(c):
        if len(path) == total:
            return True
        for d in nb[c]:
            if d not in path:
                path.add(d)
                if dfs(d):
                    return True
                path.remove(d)
        return False
    return dfs(start)


def visitall_sat(spec: InstanceSpec) -> bool:
    nb = _neighbours(spec, STEPS)
    return _hamiltonian_path(nb, spec.agent_start, len(nb))


def visitall_kt_sat(spec: InstanceSpec) -> bool:
    nb = _neighbours(spec, KNIGHT)
    return _hamiltonian_path(nb, spec.agent_start, len(nb))


def knights_tour_sat(spec: InstanceSpec) -> bool:
    """A successor function along knight moves forming one cycle over all free cells."""
    nb = _neighbours(spec, KNIGHT)
    total = len(nb)
    start = spec.agent_start
    path = [start]
    on = {start}

    def dfs(c):
        if len(path) == total:
            return start in nb[c]
        for d in nb[c]:
            if d not in on:
                path.append(d)
                on.add(d)
                if dfs(d):
                    return True
                path.pop()
                on.remove(d)
        return False
    return dfs(start)


def sudoku_sat(spec: InstanceSpec) -> bool:
    """Complete backtracking with forward checking over cells and unit values."""
    n = spec.n
    b = _block_side(n)
    cells = [(c, r) for r in range(1, n + 1) for c in range(1, n + 1)]

    def units_of(c, r):
        return (("col", c), ("row", r), ("blk", (r - 1) // b, (c - 1) // b))
    units: dict = {}
    for c, r in cells:
        for u in units_of(c, r):
            units.setdefault(u, []).append((c, r))
    grid = {}
    for (c, r), v in spec.clues.items():
        for u in units_of(c, r):
            for other in units[u]:
                if grid.get(other) == v:
                    return False
        grid[(c, r)] = v

    def candidates(cell):
        used = {grid[o] for u in units_of(*cell) for o in units[u] if o in grid}
        return [v for v in range(1, n + 1) if v not in used]

    def solve():
        empty = [c for c in cells if c not in grid]
        if not empty:
            return True
        cand = {c: candidates(c) for c in empty}
        for u, members in units.items():
            placed = {grid[m] for m in members if m in grid}
            for v in range(1, n + 1):
                if v not in placed and not any(v in cand[m] for m in members if m not in grid):
                    return False
        cell = min(empty, key=lambda c: len(cand[c]))
        for v in cand[cell]:
            grid[cell] = v
            if solve():
                return True
            del grid[cell]
        return False
    return solve()


ORACLES = {"reachability": reachability_sat, "visitall_plan": visitall_sat,
           "visitall_kt": visitall_kt_sat, "knights_tour": knights_tour_sat,
           "sudoku": sudoku_sat}


def brute_force_sat(spec: InstanceSpec) -> bool:
    return ORACLES[spec.problem](spec)


# ---------------------------------------------------------------------------
# random generation

def _random_spec(problem: str, n: int, seed: int, rng: random.Random) -> InstanceSpec:
    cells = [(x, y) for y in range(1, n + 1) for x in range(1, n + 1)]
    if problem == "sudoku":
        k = rng.randint(n, 2 * n)
        chosen = rng.sample(cells, k)
        return InstanceSpec(problem, n, seed, clues={c: rng.randint(1, n) for c in chosen})
    density = {"reachability": 0.2, "visitall_plan": 0.15}.get(problem, 0.1)
    k = max(1, int(round(density * n * n)))
    blocked = rng.sample(cells, k)
    start = rng.choice([c for c in cells if c not in blocked])
    if problem in ("reachability", "visitall_plan"):
        return InstanceSpec(problem, n, seed, obstacles=blocked, agent_start=start)
    return InstanceSpec(problem, n, seed, forbidden=blocked, agent_start=start)


def generate_instance(problem: str, n: int, seed: int, certify: bool = True,
                      max_attempts: int = 200) -> tuple[InstanceSpec, str]:
    """Deterministic random instance; with ``certify`` only unsatisfiable ones are returned."""
    problem = canonical_problem(problem)
    for attempt in range(max_attempts):
        rng = random.Random(seed * 100003 + attempt)
        spec = _random_spec(problem, n, seed, rng)
        if not certify:
            return spec, instance_text(spec)
        if not brute_force_sat(spec):
            return spec, instance_text(spec, certified=True)
    raise RuntimeError(f"no unsatisfiable {problem} instance found for n={n}, seed={seed}")


def certify_unsat(spec: InstanceSpec) -> bool:
    return not brute_force_sat(spec)


# ---------------------------------------------------------------------------
# fixed hand-made instances

def fig_reachability() -> InstanceSpec:
    """8x8 instance: five obstacles cut off a pocket in the bottom-right corner."""
    return InstanceSpec("reachability", 8, 0, obstacles=[(5, 8), (6, 7), (7, 6), (8, 6), (7, 5)],
                        agent_start=(1, 1), name="fig_reachability")


def fig_sudoku() -> InstanceSpec:
    """9x9 instance with clues in the three leftmost columns, keyed (column, row)."""
    clues = {(2, 1): 7, (2, 2): 6, (3, 2): 5, (2, 3): 9, (1, 4): 4, (3, 4): 8,
             (3, 5): 1, (1, 6): 9, (3, 6): 2}
    return InstanceSpec("sudoku", 9, 0, clues=clues, name="fig_sudoku")


def fig_sudoku_scaled() -> InstanceSpec:
    """4x4 analogue: 1 and 2 are barred from the lower-left block's right column
    and its left column has a single free cell."""
    clues = {(2, 1): 1, (2, 2): 2, (1, 3): 3, (1, 4): 4}
    return InstanceSpec("sudoku", 4, 0, clues=clues, name="sudoku_scaled")


SHIPPED = ("reachability_fig_8", "reachability_4_s3", "sudoku_scaled_4", "knights_tour_4_s1",
           "visitall_plan_4_s2", "visitall_kt_4_s1")


def shipped_spec(name: str) -> InstanceSpec:
    """Spec behind a shipped instance file, rebuilt from scratch."""
    fixed = {"reachability_fig_8": fig_reachability, "sudoku_fig_9": fig_sudoku,
             "sudoku_scaled_4": fig_sudoku_scaled}
    if name in fixed:
        spec = fixed[name]()
    else:
        m = re.fullmatch(r"([a-z_]+)_(\d+)_s(\d+)", name)
        if not m:
            raise KeyError(f"unknown shipped instance {name!r}")
        spec, _ = generate_instance(m.group(1), int(m.group(2)), int(m.group(3)))
    spec.name = name
    return spec


def shipped_instance_text(name: str) -> str:
    return resources.files("absgrid.instances").joinpath(f"{name}.lp").read_text()
