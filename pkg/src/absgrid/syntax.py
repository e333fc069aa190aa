"""AST, parser and printer for the supported ASP fragment.

The fragment is normal rules, choice rules with a single head atom,
constraints, default negation and binary comparison built-ins.  Sorts are
declared with ``#sort name = {c1, ..., ck}.`` (ranges ``lo..hi`` allowed) and
predicate argument positions are bound to sorts with
``#bind pred/arity position sort.`` (positions are 1-based in the text).

A unary atom whose predicate is a declared sort name, e.g. ``row(X)``, is a
sort-membership literal: it is never an atom of the ground program, the
grounder just ranges its variable over the sort's domain.

Terms are plain Python values: ``int`` and ``str`` for constants and
:class:`Var` for variables.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

log = logging.getLogger(__name__)

BUILTINS = ("=", "!=", "<", "<=", ">", ">=")
_OP_ALIASES = {"==": "=", "<>": "!=", "≠": "!=", "≤": "<=", "≥": ">="}


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name or not (self.name[0].isupper() or self.name[0] == "_"):
            raise ValueError(f"invalid variable name {self.name!r}")

    def __str__(self):
        return self.name


Term = Union[int, str, Var]


def is_var(t) -> bool:
    return isinstance(t, Var)


def const_key(c):
    """Total order on constants: integers before symbols."""
    return (0, c, "") if isinstance(c, int) else (1, 0, c)


def compare(op: str, a, b) -> bool:
    ka, kb = const_key(a), const_key(b)
    if op == "=":
        return ka == kb
    if op == "!=":
        return ka != kb
    if op == "<":
        return ka < kb
    if op == "<=":
        return ka <= kb
    if op == ">":
        return ka > kb
    if op == ">=":
        return ka >= kb
    raise ValueError(f"unknown built-in {op!r}")


def format_term(t) -> str:
    return str(t)


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple = ()
    builtin: str | None = None

    def __post_init__(self):
        if self.builtin is not None:
            if self.builtin not in BUILTINS:
                raise ValueError(f"unknown built-in {self.builtin!r}")
            if len(self.args) != 2:
                raise ValueError("built-in atoms are binary")
            if self.predicate != self.builtin:
                raise ValueError("built-in atoms carry their relation as predicate")
        elif self.predicate in BUILTINS:
            raise ValueError(f"predicate {self.predicate!r} is reserved")

    @classmethod
    def rel(cls, op: str, lhs, rhs) -> "Atom":
        op = _OP_ALIASES.get(op, op)
        return cls(op, (lhs, rhs), op)

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def signature(self) -> tuple[str, int]:
        return (self.predicate, len(self.args))

    def variables(self) -> set[Var]:
        return {a for a in self.args if isinstance(a, Var)}

    def is_ground(self) -> bool:
        return not any(isinstance(a, Var) for a in self.args)

    def substitute(self, binding: dict) -> "Atom":
        return Atom(self.predicate,
                    tuple(binding.get(a, a) if isinstance(a, Var) else a for a in self.args),
                    self.builtin)

    def evaluate(self) -> bool:
        assert self.builtin is not None and self.is_ground()
        return compare(self.builtin, *self.args)

    def __str__(self):
        if self.builtin is not None:
            return f"{self.args[0]} {self.builtin} {self.args[1]}"
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(map(str, self.args))})"


@dataclass(frozen=True)
class Rule:
    head: Atom | None = None
    choice: bool = False
    body_pos: tuple[Atom, ...] = ()
    body_neg: tuple[Atom, ...] = ()
    relations: tuple[Atom, ...] = ()

    def __post_init__(self):
        if self.choice and self.head is None:
            raise ValueError("choice rule without head")
        if any(r.builtin is None for r in self.relations):
            raise ValueError("relations must be built-in atoms")
        if any(a.builtin is not None for a in self.body_pos + self.body_neg):
            raise ValueError("built-in atoms belong in relations")

    @property
    def is_constraint(self) -> bool:
        return self.head is None

    @property
    def is_fact(self) -> bool:
        return (self.head is not None and not self.choice and not self.body_pos
                and not self.body_neg and not self.relations)

    def atoms(self) -> Iterator[Atom]:
        if self.head is not None:
            yield self.head
        yield from self.body_pos
        yield from self.body_neg

    def variables(self) -> set[Var]:
        out: set[Var] = set()
        for a in self.atoms():
            out |= a.variables()
        for r in self.relations:
            out |= r.variables()
        return out

    def is_ground(self) -> bool:
        return not self.variables()

    def __str__(self):
        body = [str(a) for a in self.body_pos]
        body += [f"not {a}" for a in self.body_neg]
        body += [str(r) for r in self.relations]
        head = ""
        if self.head is not None:
            head = "{" + str(self.head) + "}" if self.choice else str(self.head)
        if not body:
            return f"{head}."
        if head:
            return f"{head} :- {', '.join(body)}."
        return f":- {', '.join(body)}."


SortKey = tuple  # (predicate, arity, 0-based position)


@dataclass
class Program:
    rules: list[Rule] = field(default_factory=list)
    facts: list[Atom] = field(default_factory=list)
    sort_decls: dict[str, tuple] = field(default_factory=dict)
    sort_signature: dict[SortKey, str] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for key, sort in self.sort_signature.items():
            if sort not in self.sort_decls:
                raise ValueError(f"unbound sort reference {sort!r} in #bind {key[0]}/{key[1]}")
        for fact in self.facts:
            if not fact.is_ground() or fact.builtin is not None:
                raise ValueError(f"fact {fact} is not a ground atom")
            if self.is_sort_atom(fact):
                raise ValueError(f"sort predicate {fact.predicate} used as a fact")
            for pos, c in enumerate(fact.args):
                sort = self.sort_of(fact.predicate, fact.arity, pos)
                if sort is not None and c not in self.sort_domain(sort):
                    raise ValueError(f"fact {fact}: {c!r} not in sort {sort}")
        for rule in self.rules:
            if rule.head is not None and self.is_sort_atom(rule.head):
                raise ValueError(f"sort predicate {rule.head.predicate} used in a rule head")

    def sort_of(self, predicate: str, arity: int, pos: int) -> str | None:
        if arity == 1 and pos == 0 and predicate in self.sort_decls:
            return predicate
        return self.sort_signature.get((predicate, arity, pos))

    def sort_domain(self, sort: str) -> tuple:
        return self.sort_decls[sort]

    def is_sort_atom(self, atom: Atom) -> bool:
        return atom.builtin is None and atom.arity == 1 and atom.predicate in self.sort_decls

    def variable_sorts(self, rule: Rule) -> dict[Var, str]:
        """Sort of every variable of ``rule`` that occurs at a sorted position."""
        out: dict[Var, str] = {}
        for atom in rule.atoms():
            for pos, t in enumerate(atom.args):
                if isinstance(t, Var):
                    s = self.sort_of(atom.predicate, atom.arity, pos)
                    if s is not None:
                        out.setdefault(t, s)
        return out

    def copy(self, **changes) -> "Program":
        data = dict(rules=list(self.rules), facts=list(self.facts),
                    sort_decls=dict(self.sort_decls), sort_signature=dict(self.sort_signature))
        data.update(changes)
        return Program(**data)

    def __str__(self):
        return format_program(self)


def format_program(p: Program) -> str:
    lines = []
    for name, dom in p.sort_decls.items():
        lines.append(f"#sort {name} = {{{', '.join(map(str, dom))}}}.")
    for (pred, arity, pos), sort in p.sort_signature.items():
        lines.append(f"#bind {pred}/{arity} {pos + 1} {sort}.")
    lines.extend(f"{f}." for f in p.facts)
    lines.extend(str(r) for r in p.rules)
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# parsing

class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<directive>\#[a-z]+)
  | (?P<if>:-)
  | (?P<range>\.\.)
  | (?P<dot>\.)
  | (?P<op>==|!=|<>|<=|>=|<|>|=|≠|≤|≥)
  | (?P<int>-?\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_']*)
  | (?P<ident>[a-z][A-Za-z0-9_']*)
  | (?P<punct>[(),{}/])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        for i, ch in enumerate(chunk):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.anon = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def accept(self, kind: str, text: str | None = None) -> _Tok | None:
        t = self.tok
        if t.kind == kind and (text is None or t.text == text):
            self.i += 1
            return t
        return None

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        t = self.accept(kind, text)
        if t is None:
            want = text if text is not None else kind
            got = self.tok.text or "end of input"
            self.error(f"expected {want!r}, got {got!r}")
        return t

    def program(self) -> Program:
        rules, facts = [], []
        sorts: dict[str, tuple] = {}
        binds: dict[SortKey, str] = {}
        bind_toks = []
        while self.tok.kind != "eof":
            if self.tok.kind == "directive":
                d = self.tok
                if d.text == "#sort":
                    self.i += 1
                    name = self.expect("ident").text
                    if name in sorts:
                        self.error(f"duplicate sort declaration {name!r}", d)
                    self.expect("op", "=")
                    sorts[name] = self.domain()
                elif d.text == "#bind":
                    self.i += 1
                    pred = self.expect("ident").text
                    self.expect("punct", "/")
                    arity = int(self.expect("int").text)
                    pos = int(self.expect("int").text)
                    if not 1 <= pos <= arity:
                        self.error(f"position {pos} out of range for {pred}/{arity}", d)
                    sort = self.expect("ident").text
                    binds[(pred, arity, pos - 1)] = sort
                    bind_toks.append((sort, d))
                else:
                    self.error(f"unknown directive {d.text}")
                self.expect("dot")
                continue
            rule = self.rule()
            if rule.is_fact and rule.head.is_ground():
                facts.append(rule.head)
            else:
                rules.append(rule)
        for sort, tok in bind_toks:
            if sort not in sorts:
                self.error(f"unbound sort reference {sort!r}", tok)
        try:
            return Program(rules, facts, sorts, binds)
        except ValueError as exc:
            raise ParseError(str(exc), 1, 1) from None

    def domain(self) -> tuple:
        self.expect("punct", "{")
        out = []
        if not self.accept("punct", "}"):
            while True:
                c = self.constant()
                if self.accept("range"):
                    hi = self.constant()
                    if not isinstance(c, int) or not isinstance(hi, int):
                        self.error("ranges need integer bounds")
                    out.extend(range(c, hi + 1))
                else:
                    out.append(c)
                if self.accept("punct", "}"):
                    break
                self.expect("punct", ",")
        seen = []
        for c in out:
            if c not in seen:
                seen.append(c)
        return tuple(seen)

    def constant(self):
        t = self.accept("int")
        if t:
            return int(t.text)
        t = self.accept("ident")
        if t:
            return t.text
        self.error(f"expected a constant, got {self.tok.text!r}")

    def rule(self) -> Rule:
        head, choice = None, False
        if self.accept("punct", "{"):
            head = self.atom()
            self.expect("punct", "}")
            choice = True
        elif self.tok.kind != "if":
            head = self.atom()
        pos, neg, rels = [], [], []
        if self.accept("if"):
            while True:
                self.literal(pos, neg, rels)
                if self.accept("dot"):
                    break
                self.expect("punct", ",")
        else:
            self.expect("dot")
        return Rule(head, choice, tuple(pos), tuple(neg), tuple(rels))

    def literal(self, pos, neg, rels):
        if self.tok.kind == "ident" and self.tok.text == "not":
            self.i += 1
            neg.append(self.atom())
            return
        if self.tok.kind == "ident" and self.toks[self.i + 1].kind != "op":
            pos.append(self.atom())
            return
        lhs = self.term()
        op = self.expect("op").text
        rhs = self.term()
        rels.append(Atom.rel(op, lhs, rhs))

    def atom(self) -> Atom:
        t = self.expect("ident")
        if t.text == "not":
            self.error("'not' is a keyword", t)
        args = []
        if self.accept("punct", "("):
            while True:
                args.append(self.term())
                if self.accept("punct", ")"):
                    break
                self.expect("punct", ",")
        return Atom(t.text, tuple(args))

    def term(self):
        t = self.accept("var")
        if t:
            if t.text == "_":
                self.anon += 1
                return Var(f"_{self.anon}")
            return Var(t.text)
        return self.constant()


def parse_program(text: str) -> Program:
    """Parse program text; raises :class:`ParseError` with line/column."""
    return _Parser(text).program()


def parse_rule(text: str) -> Rule:
    p = _Parser(text)
    r = p.rule()
    if p.tok.kind != "eof":
        p.error("trailing input after rule")
    return r


# ---------------------------------------------------------------------------
# fragment check

def _positive_dependency_cycles(p: Program) -> list[list[str]]:
    edges: dict[str, set[str]] = {}
    for r in p.rules:
        if r.head is None:
            continue
        for b in r.body_pos:
            if not p.is_sort_atom(b):
                edges.setdefault(r.head.predicate, set()).add(b.predicate)
    cycles = []
    # Tarjan would be overkill at this size; report predicates reaching themselves.
    for start in sorted(edges):
        stack, seen = list(edges[start]), set()
        while stack:
            q = stack.pop()
            if q == start:
                cycles.append([start])
                break
            if q in seen:
                continue
            seen.add(q)
            stack.extend(edges.get(q, ()))
    return cycles


def check_fragment(p: Program) -> list[str]:
    """Diagnostics for rules outside the abstractable fragment (empty if fine).

    Each rule may constrain every sort with at most one comparison, the two
    sides of a comparison must share a sort, and comparison variables must
    occur in the positive body.  Positive recursion is only logged.
    """
    diags = []
    for idx, rule in enumerate(p.rules, 1):
        sorts = p.variable_sorts(rule)
        pos_vars: set[Var] = set()
        for a in rule.body_pos:
            pos_vars |= a.variables()
        per_sort: dict[str | None, list[Atom]] = {}
        for rel in rule.relations:
            unsafe = sorted(v.name for v in rel.variables() - pos_vars)
            if unsafe:
                diags.append(f"rule {idx} ({rule}): unsafe variable(s) {', '.join(unsafe)} "
                             f"in relation {rel}")
                continue
            vsorts = {sorts.get(v) for v in rel.variables()}
            if len(vsorts) > 1:
                diags.append(f"rule {idx} ({rule}): relation {rel} compares different sorts")
                continue
            if not rel.variables():
                continue
            per_sort.setdefault(vsorts.pop(), []).append(rel)
        for sort, rels in per_sort.items():
            if len(rels) > 1:
                where = f"sort {sort}" if sort else "unsorted variables"
                diags.append(f"rule {idx} ({rule}): {len(rels)} relation atoms over {where} "
                             f"({', '.join(map(str, rels))}); at most one is supported")
    for cyc in _positive_dependency_cycles(p):
        log.warning("positive recursion through %s", cyc[0])
    return diags


def iter_atoms(p: Program) -> Iterable[Atom]:
    yield from p.facts
    for r in p.rules:
        yield from r.atoms()
