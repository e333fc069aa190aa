import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from absgrid.bench import InstanceSpec, encoding_for, program_for
from absgrid.grounding import GroundingError, ground
from absgrid.solver import SolveBudget, enumerate_answer_sets
from absgrid.syntax import Atom, Rule, parse_program

from conftest import brute_answer_sets, random_sorted_program


def test_both_instances_emitted():
    p = parse_program("#sort s = {a, b}. #bind p/1 1 s.\np(a). q(X) :- p(X).")
    g = ground(p)
    qa = Rule(Atom("q", ("a",)), False, (Atom("p", ("a",)),))
    qb = Rule(Atom("q", ("b",)), False, (Atom("p", ("b",)),))
    assert qa in g.rules and qb in g.rules


def test_relevant_grounding_drops_underivable():
    p = parse_program("#sort s = {a, b}. #bind p/1 1 s.\np(a). q(X) :- p(X).")
    g = ground(p, "relevant")
    heads = {r.head for r in g.rules}
    assert Atom("q", ("a",)) in heads and Atom("q", ("b",)) not in heads


def test_builtin_evaluated_per_pair():
    p = parse_program("#sort row = {1,2}. #sort column = {1}. #sort num = {1}.\n"
                      "#bind sol/3 1 row. #bind sol/3 2 column. #bind sol/3 3 num.\n"
                      ":- sol(X1,Y,M), sol(X2,Y,M), X1 < X2.")
    g = ground(p)
    pairs = [(r.body_pos[0].args[0], r.body_pos[1].args[0]) for r in g.rules]
    assert pairs == [(1, 2)]


def test_unbound_variable():
    p = parse_program("q(X) :- p(X).")
    with pytest.raises(GroundingError, match="unbound"):
        ground(p)


def test_empty_sort_domain():
    p = parse_program("#sort s = {}. #bind p/1 1 s. q :- p(X).")
    with pytest.raises(GroundingError, match="empty"):
        ground(p)


def test_sort_literals_are_not_atoms():
    p = parse_program("#sort s = {1,2}. #bind p/1 1 s. p(X) :- s(X).")
    g = ground(p)
    assert all(a.predicate == "p" for a in g.atoms)
    assert len(g.rules) == 2


def test_idempotent():
    p = encoding_for("reachability")
    g = ground(p)
    again = ground(g.to_program())
    assert again.rules == g.rules
    assert again.atoms == g.atoms


def test_atom_index_is_a_bijection():
    g = ground(encoding_for("sudoku"))
    assert len(g.atom_index) == len(g.atoms)
    assert all(g.atoms[i] == a for a, i in g.atom_index.items())
    occurring = {a for r in g.rules for a in r.atoms()}
    assert occurring == set(g.atoms)


def _sudoku_solutions(n, clues):
    """Every n x n grid (n=4) with distinct rows, columns and 2x2 blocks."""
    rows = list(itertools.permutations(range(1, n + 1)))
    b = int(n ** 0.5)
    out = set()

    def ok(grid):
        r = len(grid) - 1
        for c in range(n):
            if any(grid[k][c] == grid[r][c] for k in range(r)):
                return False
        if (r + 1) % b == 0:
            for c0 in range(0, n, b):
                vals = [grid[rr][cc] for rr in range(r + 1 - b, r + 1) for cc in range(c0, c0 + b)]
                if len(set(vals)) != n:
                    return False
        return True

    def rec(grid):
        if len(grid) == n:
            out.add(frozenset((r + 1, c + 1, grid[r][c]) for r in range(n) for c in range(n)))
            return
        r = len(grid)
        for row in rows:
            if any(clues.get((c + 1, r + 1), row[c]) != row[c] for c in range(n)):
                continue
            grid.append(row)
            if ok(grid):
                rec(grid)
            grid.pop()
    rec([])
    return out


def test_sudoku_4x4_matches_brute_force():
    clues = {(1, 1): 1, (2, 3): 2, (4, 4): 3}
    spec = InstanceSpec("sudoku", 4, clues=clues)
    g = ground(program_for(spec))
    res = enumerate_answer_sets(g)
    assert res.exhausted
    got = {frozenset(a.args for a in g.decode(m.true_atoms) if a.predicate == "sol")
           for m in res.models}
    assert got == _sudoku_solutions(4, clues)
    assert len(got) > 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_relevant_and_full_agree(seed):
    p = random_sorted_program(random.Random(seed))
    full = brute_answer_sets(ground(p, "full").rules)
    rel = brute_answer_sets(ground(p, "relevant").rules)
    assert full == rel
