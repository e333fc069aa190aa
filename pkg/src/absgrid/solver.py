"""Answer-set enumeration for ground programs.

The search is a chronological DPLL over atom truth values.  Propagation is
done on the rule completion (forward chaining, support counting, body
falsification for constraints) plus an unfounded-set pass restricted to
atoms on positive cycles, and every total assignment is re-checked with the
reduct before it is reported.  Branching takes the smallest unassigned atom
id and tries ``False`` first, so results are reproducible.

Choice rules ``{a} :- B.`` are handled natively; the auxiliary atom of the
two-rule desugaring never appears in any interpretation.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

from .grounding import GroundProgram


@dataclass(frozen=True)
class Interpretation:
    true_atoms: frozenset
    consistent: bool = True

    def __contains__(self, atom_id):
        return atom_id in self.true_atoms

    def __len__(self):
        return len(self.true_atoms)

    def __iter__(self):
        return iter(sorted(self.true_atoms))


@dataclass
class SolveBudget:
    max_models: int | None = None
    timeout_ms: int | None = None
    minimize_atoms: frozenset | None = None

    def __post_init__(self):
        if self.max_models is not None and self.max_models < 1:
            raise ValueError("max_models must be positive")
        if self.timeout_ms is not None and self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")

    def deadline(self) -> float | None:
        if self.timeout_ms is None:
            return None
        return time.monotonic() + self.timeout_ms / 1000.0


@dataclass
class SolveResult:
    models: list[Interpretation]
    exhausted: bool
    timed_out: bool = False

    @property
    def satisfiable(self) -> bool | None:
        if self.models:
            return True
        return False if self.exhausted else None

    def __iter__(self):
        return iter(self.models)

    def __len__(self):
        return len(self.models)

    def __getitem__(self, i):
        return self.models[i]


@dataclass
class MinimizeResult:
    model: Interpretation | None
    cost: int | None
    optimal: bool
    timed_out: bool = False
    models_seen: int = 0


class SolveTimeout(Exception):
    pass


# ---------------------------------------------------------------------------
# compiled form

@dataclass
class _Compiled:
    n: int
    head: list
    choice: list
    pos: list
    neg: list
    head_occ: list = field(default_factory=list)
    pos_occ: list = field(default_factory=list)
    neg_occ: list = field(default_factory=list)


def _compile(g: GroundProgram) -> _Compiled:
    idx = g.atom_index
    n = len(g.atoms)
    c = _Compiled(n, [], [], [], [])
    c.head_occ = [[] for _ in range(n)]
    c.pos_occ = [[] for _ in range(n)]
    c.neg_occ = [[] for _ in range(n)]
    for r in g.rules:
        ri = len(c.head)
        h = idx[r.head] if r.head is not None else None
        pos = tuple(dict.fromkeys(idx[a] for a in r.body_pos))
        neg = tuple(dict.fromkeys(idx[a] for a in r.body_neg))
        c.head.append(h)
        c.choice.append(r.choice)
        c.pos.append(pos)
        c.neg.append(neg)
        if h is not None:
            c.head_occ[h].append(ri)
        for a in pos:
            c.pos_occ[a].append(ri)
        for a in neg:
            c.neg_occ[a].append(ri)
    return c


def _body_true(c: _Compiled, r: int, true_set) -> bool:
    return all(p in true_set for p in c.pos[r]) and not any(q in true_set for q in c.neg[r])


def _least(c: _Compiled, rules, n: int) -> tuple[set, bool]:
    """Least model of the negation-free rules ``rules`` (negative bodies ignored)."""
    missing = {}
    watch: dict[int, list] = {}
    derived: set = set()
    queue = deque()
    consistent = True
    for r in rules:
        k = len(c.pos[r])
        missing[r] = k
        for p in c.pos[r]:
            watch.setdefault(p, []).append(r)
        if k == 0:
            queue.append(r)
    while queue:
        r = queue.popleft()
        h = c.head[r]
        if h is None:
            consistent = False
            continue
        if h in derived:
            continue
        derived.add(h)
        for r2 in watch.get(h, ()):
            missing[r2] -= 1
            if missing[r2] == 0:
                queue.append(r2)
    return derived, consistent


def _is_stable(c: _Compiled, true_set) -> bool:
    kept = [r for r in range(len(c.head))
            if _body_true(c, r, true_set) and not (c.choice[r] and c.head[r] not in true_set)]
    lm, consistent = _least(c, kept, c.n)
    return consistent and lm == set(true_set)


# ---------------------------------------------------------------------------
# public helpers

def reduct(g: GroundProgram, i: Interpretation) -> GroundProgram:
    """Rules whose whole body holds in ``i``, with negative bodies removed.

    Choice rules are first read as the two-rule shorthand, so ``{a} :- B``
    survives as ``a :- B+`` exactly when ``a`` is in ``i``.  The result keeps
    the atom numbering of ``g``.
    """
    true_set = i.true_atoms
    atoms = g.atoms
    kept = []
    for r in g.rules:
        if not all(g.atom_index[a] in true_set for a in r.body_pos):
            continue
        if any(g.atom_index[a] in true_set for a in r.body_neg):
            continue
        if r.choice and g.atom_index[r.head] not in true_set:
            continue
        kept.append(type(r)(r.head, False, r.body_pos, (), ()))
    red = GroundProgram(kept, dict(g.atom_index), list(atoms), g.sort_decls, g.sort_signature)
    return red


def least_model(g: GroundProgram) -> Interpretation:
    """Least model by fixpoint iteration; violated constraints clear ``consistent``."""
    c = _compile(g)
    lm, consistent = _least(c, range(len(c.head)), c.n)
    return Interpretation(frozenset(lm), consistent)


def is_answer_set(g: GroundProgram, i: Interpretation) -> bool:
    lm = least_model(reduct(g, i))
    return lm.consistent and lm.true_atoms == i.true_atoms


# ---------------------------------------------------------------------------
# search

def _positive_loop_atoms(c: _Compiled) -> set:
    """Atoms lying on a cycle of the positive dependency graph (iterative Tarjan)."""
    succ = [[] for _ in range(c.n)]
    for r, h in enumerate(c.head):
        if h is not None:
            succ[h].extend(c.pos[r])
    index = [None] * c.n
    low = [0] * c.n
    onstack = [False] * c.n
    stack = []
    out = set()
    counter = 0
    for root in range(c.n):
        if index[root] is not None:
            continue
        work = [(root, 0)]
        while work:
            v, i = work[-1]
            if i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                onstack[v] = True
            if i < len(succ[v]):
                work[-1] = (v, i + 1)
                w = succ[v][i]
                if index[w] is None:
                    work.append((w, 0))
                elif onstack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or v in succ[v]:
                    out.update(comp)
    return out


class _Search:
    def __init__(self, c: _Compiled, minimize=None, deadline=None, soft_first=False):
        self.c = c
        n = c.n
        self.val = [None] * n
        self.trail = []
        self.decisions = []
        self.queue = deque()
        self.nfalse = [0] * len(c.head)
        self.nundef = [len(c.pos[r]) + len(c.neg[r]) for r in range(len(c.head))]
        self.support = [len(c.head_occ[a]) for a in range(n)]
        self.minset = set(minimize or ())
        self.minorder = sorted(self.minset)
        self.soft_first = soft_first
        self.next_min = 0
        self.cost = 0
        self.bound = None
        self.deadline = deadline
        self.ticks = 0
        self.next_var = 0
        self.loop_atoms = _positive_loop_atoms(c)
        self.loop_rules = sorted({r for a in self.loop_atoms for r in c.head_occ[a]})

    # -- assignment ---------------------------------------------------------

    def assign(self, a: int, v: bool) -> bool:
        cur = self.val[a]
        if cur is not None:
            return cur == v
        c = self.c
        self.val[a] = v
        self.trail.append(a)
        nfalse, nundef, support, head = self.nfalse, self.nundef, self.support, c.head
        if v:
            for r in c.pos_occ[a]:
                nundef[r] -= 1
            for r in c.neg_occ[a]:
                nundef[r] -= 1
                nfalse[r] += 1
                if nfalse[r] == 1 and head[r] is not None:
                    support[head[r]] -= 1
            if a in self.minset:
                self.cost += 1
        else:
            for r in c.pos_occ[a]:
                nundef[r] -= 1
                nfalse[r] += 1
                if nfalse[r] == 1 and head[r] is not None:
                    support[head[r]] -= 1
            for r in c.neg_occ[a]:
                nundef[r] -= 1
        self.queue.append(a)
        return True

    def undo_to(self, mark: int):
        c = self.c
        nfalse, nundef, support, head = self.nfalse, self.nundef, self.support, c.head
        while len(self.trail) > mark:
            a = self.trail.pop()
            v = self.val[a]
            self.val[a] = None
            if v:
                for r in c.pos_occ[a]:
                    nundef[r] += 1
                for r in c.neg_occ[a]:
                    nundef[r] += 1
                    nfalse[r] -= 1
                    if nfalse[r] == 0 and head[r] is not None:
                        support[head[r]] += 1
                if a in self.minset:
                    self.cost -= 1
            else:
                for r in c.pos_occ[a]:
                    nundef[r] += 1
                    nfalse[r] -= 1
                    if nfalse[r] == 0 and head[r] is not None:
                        support[head[r]] += 1
                for r in c.neg_occ[a]:
                    nundef[r] += 1
            if a < self.next_var:
                self.next_var = a
        self.next_min = 0
        self.queue.clear()

    # -- propagation --------------------------------------------------------

    def check_support(self, h: int) -> bool:
        s = self.support[h]
        v = self.val[h]
        if s == 0:
            if v is True:
                return False
            if v is None:
                return self.assign(h, False)
            return True
        if s == 1 and v is True:
            c = self.c
            for r in c.head_occ[h]:
                if self.nfalse[r] == 0:
                    for p in c.pos[r]:
                        if not self.assign(p, True):
                            return False
                    for q in c.neg[r]:
                        if not self.assign(q, False):
                            return False
                    break
        return True

    def check_rule(self, r: int) -> bool:
        c = self.c
        h = c.head[r]
        if self.nfalse[r] > 0:
            return True if h is None else self.check_support(h)
        if self.nundef[r] == 0:
            if h is None:
                return False
            if not c.choice[r]:
                return self.assign(h, True)
            return True
        if self.nundef[r] == 1 and (h is None or (not c.choice[r] and self.val[h] is False)):
            for p in c.pos[r]:
                if self.val[p] is None:
                    return self.assign(p, False)
            for q in c.neg[r]:
                if self.val[q] is None:
                    return self.assign(q, True)
        return True

    def unfounded(self) -> bool:
        if not self.loop_atoms:
            return True
        c = self.c
        val = self.val
        loop = self.loop_atoms
        derived = set()
        missing = {}
        watch: dict[int, list] = {}
        queue = deque()
        for r in self.loop_rules:
            if self.nfalse[r] > 0:
                continue
            k = 0
            for p in c.pos[r]:
                if p in loop:
                    k += 1
                    watch.setdefault(p, []).append(r)
            missing[r] = k
            if k == 0:
                queue.append(r)
        while queue:
            r = queue.popleft()
            h = c.head[r]
            if h in derived or val[h] is False:
                continue
            derived.add(h)
            for r2 in watch.get(h, ()):
                missing[r2] -= 1
                if missing[r2] == 0:
                    queue.append(r2)
        for a in sorted(loop - derived):
            if not self.assign(a, False):
                return False
        return True

    def propagate(self) -> bool:
        if self.bound is not None and self.cost >= self.bound:
            return False
        c = self.c
        while True:
            while self.queue:
                a = self.queue.popleft()
                if self.bound is not None and self.cost >= self.bound:
                    return False
                if self.val[a] is True and not self.check_support(a):
                    return False
                for r in c.head_occ[a]:
                    if not self.check_rule(r):
                        return False
                for r in c.pos_occ[a]:
                    if not self.check_rule(r):
                        return False
                for r in c.neg_occ[a]:
                    if not self.check_rule(r):
                        return False
            if self.bound is not None and self.cost == self.bound - 1:
                for m in self.minorder:
                    if self.val[m] is None and not self.assign(m, False):
                        return False
                if self.queue:
                    continue
            before = len(self.trail)
            if not self.unfounded():
                return False
            if len(self.trail) == before:
                return True

    def initial(self) -> bool:
        c = self.c
        for r in range(len(c.head)):
            if not self.check_rule(r):
                return False
        for a in range(c.n):
            if not self.check_support(a):
                return False
        return self.propagate()

    # -- search loop --------------------------------------------------------

    def tick(self):
        self.ticks += 1
        if self.deadline is not None and self.ticks % 64 == 0 and time.monotonic() > self.deadline:
            raise SolveTimeout()

    def pick(self):
        val = self.val
        if self.soft_first:
            # minimise: decide the soft atoms first, so cheap models come early
            j = self.next_min
            while j < len(self.minorder) and val[self.minorder[j]] is not None:
                j += 1
            self.next_min = j
            if j < len(self.minorder):
                return self.minorder[j]
        i = self.next_var
        n = self.c.n
        while i < n and val[i] is not None:
            i += 1
        self.next_var = i
        return i if i < n else None

    def backtrack(self) -> bool:
        while self.decisions:
            self.tick()
            mark, a, v, flipped = self.decisions.pop()
            self.undo_to(mark)
            if flipped:
                continue
            self.decisions.append((mark, a, not v, True))
            if self.assign(a, not v) and self.propagate():
                return True
        return False

    def models(self):
        """Yield stable models as frozensets of atom ids."""
        if not self.initial():
            return
        while True:
            self.tick()
            a = self.pick()
            if a is None:
                model = frozenset(i for i, v in enumerate(self.val) if v)
                if _is_stable(self.c, model):
                    yield model
                if not self.backtrack():
                    return
                continue
            self.decisions.append((len(self.trail), a, False, False))
            if not (self.assign(a, False) and self.propagate()):
                if not self.backtrack():
                    return


def enumerate_answer_sets(g: GroundProgram, b: SolveBudget | None = None) -> SolveResult:
    """Answer sets of ``g`` in search order, up to ``b.max_models``.

    ``exhausted`` is set when the whole search space was explored, so an empty
    result with ``exhausted`` means unsatisfiable; ``timed_out`` means unknown.
    """
    b = b or SolveBudget()
    search = _Search(_compile(g), deadline=b.deadline())
    out = []
    try:
        for m in search.models():
            out.append(Interpretation(m))
            if b.max_models is not None and len(out) >= b.max_models:
                return SolveResult(out, exhausted=False)
    except SolveTimeout:
        return SolveResult(out, exhausted=False, timed_out=True)
    return SolveResult(out, exhausted=True)


def solve_minimize(g: GroundProgram, b: SolveBudget) -> MinimizeResult:
    """Answer set with the fewest true atoms among ``b.minimize_atoms``.

    A short branch-and-bound run provides an upper bound; then costs
    0, 1, 2, ... are tried in turn with the bound propagated, so the first
    cost that admits a model is optimal.  On timeout the best model so far is
    returned with ``optimal`` unset.
    """
    if b.minimize_atoms is None:
        raise ValueError("solve_minimize needs minimize_atoms")
    c = _compile(g)
    deadline = b.deadline()
    best, best_cost, seen = None, None, 0
    probe = None if deadline is None else time.monotonic() + (deadline - time.monotonic()) * 0.5
    search = _Search(c, minimize=b.minimize_atoms, deadline=probe)
    try:
        for m in search.models():
            seen += 1
            best, best_cost = Interpretation(m), len(m & search.minset)
            if best_cost == 0:
                return MinimizeResult(best, 0, optimal=True, models_seen=seen)
            search.bound = best_cost
            if probe is None and seen >= 1:
                break
        else:
            return MinimizeResult(best, best_cost, optimal=True, models_seen=seen)
    except SolveTimeout:
        if deadline is not None and time.monotonic() > deadline:
            return MinimizeResult(best, best_cost, optimal=False, timed_out=True, models_seen=seen)
    k = 0
    try:
        while best_cost is None or k < best_cost:
            search = _Search(c, minimize=b.minimize_atoms, deadline=deadline, soft_first=True)
            search.bound = k + 1
            for m in search.models():
                seen += 1
                return MinimizeResult(Interpretation(m), len(m & search.minset), optimal=True,
                                      models_seen=seen)
            k += 1
    except SolveTimeout:
        return MinimizeResult(best, best_cost, optimal=False, timed_out=True, models_seen=seen)
    if best is None:
        return MinimizeResult(None, None, optimal=True, models_seen=seen)
    return MinimizeResult(best, best_cost, optimal=True, models_seen=seen)
