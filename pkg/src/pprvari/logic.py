"""Propositional formulas: parsing, evaluation, CNF conversion and satisfiability.

Every validity check in the toolchain (constraint evaluation, feature-model
configuration checks, decision visibility, cross-model rules) runs through the
small AST defined here.  Three surface syntaxes parse into the same AST:

* ``ppr`` -- constraint expressions with word operators (``implies``, ``AND``,
  ``OR``, ``NOT``, case-insensitive).
* ``dm``  -- decision-model conditions with ``!``, ``&&``, ``||``, ``=>`` and
  enumeration tests ``name == option``.
* ``cdc`` -- like ``dm`` but identifiers may be qualified as ``model#element``.

Enumeration tests are atoms of their own (:class:`VarEq`); an assignment maps
atom keys (``name`` or ``name=option``) to booleans.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping


class ExprSyntaxError(ValueError):
    """Raised for malformed expression text; carries the offset of the fault."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


class Formula:
    """Base class for formula nodes.  Instances are immutable and hashable."""

    __slots__ = ()


@dataclass(frozen=True)
class Var(Formula):
    name: str


@dataclass(frozen=True)
class VarEq(Formula):
    """Enumeration test ``name == option``."""

    name: str
    option: str


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    children: tuple


@dataclass(frozen=True)
class Or(Formula):
    children: tuple


@dataclass(frozen=True)
class Implies(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class Bool(Formula):
    value: bool


TRUE = Bool(True)
FALSE = Bool(False)

# Reserved prefix for Tseitin auxiliaries in CNF variable tables.
AUX_PREFIX = "__t"


def and_(children: Iterable[Formula]) -> Formula:
    cs = tuple(children)
    if not cs:
        return TRUE
    if len(cs) == 1:
        return cs[0]
    return And(cs)


def or_(children: Iterable[Formula]) -> Formula:
    cs = tuple(children)
    if not cs:
        return FALSE
    if len(cs) == 1:
        return cs[0]
    return Or(cs)


def atom_key(f: Formula) -> str:
    if isinstance(f, Var):
        return f.name
    if isinstance(f, VarEq):
        return f"{f.name}={f.option}"
    raise TypeError(f"not an atom: {f!r}")


def atoms(f: Formula) -> list:
    """All atom keys in f, first-mention order, deduplicated."""
    seen: dict = {}

    def walk(g: Formula) -> None:
        if isinstance(g, (Var, VarEq)):
            seen.setdefault(atom_key(g), None)
        elif isinstance(g, Not):
            walk(g.child)
        elif isinstance(g, (And, Or)):
            for c in g.children:
                walk(c)
        elif isinstance(g, Implies):
            walk(g.lhs)
            walk(g.rhs)

    walk(f)
    return list(seen)


# ---------------------------------------------------------------------------
# Parsing

_WORD_OPS = {"implies", "and", "or", "not"}


def _tokenize(text: str, dialect: str) -> list:
    """Token stream of (kind, text, pos).  Kinds: ident, qident, op, lparen, rparen."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "(":
            tokens.append(("lparen", c, i))
            i += 1
        elif c == ")":
            tokens.append(("rparen", c, i))
            i += 1
        elif dialect in ("dm", "cdc") and text.startswith("=>", i):
            tokens.append(("op", "=>", i))
            i += 2
        elif dialect in ("dm", "cdc") and text.startswith("==", i):
            tokens.append(("op", "==", i))
            i += 2
        elif dialect in ("dm", "cdc") and text.startswith("&&", i):
            tokens.append(("op", "&&", i))
            i += 2
        elif dialect in ("dm", "cdc") and text.startswith("||", i):
            tokens.append(("op", "||", i))
            i += 2
        elif dialect in ("dm", "cdc") and c == "!":
            tokens.append(("op", "!", i))
            i += 1
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if dialect == "cdc" and j < n and text[j] == "#":
                k = j + 1
                while k < n and (text[k].isalnum() or text[k] == "_"):
                    k += 1
                if k == j + 1:
                    raise ExprSyntaxError("expected element id after '#'", j)
                tokens.append(("ident", text[i:k], i))
                i = k
            elif dialect == "ppr" and word.lower() in _WORD_OPS:
                tokens.append(("op", word.lower(), i))
                i = j
            else:
                tokens.append(("ident", word, i))
                i = j
        else:
            raise ExprSyntaxError(f"unexpected character {c!r}", i)
    return tokens


class _Parser:
    def __init__(self, tokens: list, dialect: str, length: int):
        self.tokens = tokens
        self.dialect = dialect
        self.pos = 0
        self.length = length

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of expression", self.length)
        self.pos += 1
        return tok

    def expect_op(self, *ops: str) -> bool:
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] in ops:
            self.pos += 1
            return True
        return False

    # implies (right assoc) < or < and < not < atom
    def parse_implies(self) -> Formula:
        lhs = self.parse_or()
        if self.expect_op("=>", "implies"):
            rhs = self.parse_implies()
            return Implies(lhs, rhs)
        return lhs

    def parse_or(self) -> Formula:
        parts = [self.parse_and()]
        while self.expect_op("||", "or"):
            parts.append(self.parse_and())
        return or_(parts)

    def parse_and(self) -> Formula:
        parts = [self.parse_not()]
        while self.expect_op("&&", "and"):
            parts.append(self.parse_not())
        return and_(parts)

    def parse_not(self) -> Formula:
        if self.expect_op("!", "not"):
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_atom(self) -> Formula:
        tok = self.next()
        kind, text, pos = tok
        if kind == "lparen":
            inner = self.parse_implies()
            closing = self.peek()
            if closing is None or closing[0] != "rparen":
                raise ExprSyntaxError("missing ')'", pos)
            self.pos += 1
            return inner
        if kind == "ident":
            if self.dialect in ("dm", "cdc"):
                if text == "true":
                    return TRUE
                if text == "false":
                    return FALSE
                if self.expect_op("=="):
                    opt = self.next()
                    if opt[0] != "ident":
                        raise ExprSyntaxError("expected option name after '=='", opt[2])
                    return VarEq(text, opt[1])
            return Var(text)
        raise ExprSyntaxError(f"unexpected token {text!r}", pos)


def parse_expr(text: str, dialect: str = "dm") -> Formula:
    """Parse expression text in one of the dialects ``ppr``, ``dm``, ``cdc``."""
    if dialect not in ("ppr", "dm", "cdc"):
        raise ValueError(f"unknown dialect {dialect!r}")
    tokens = _tokenize(text, dialect)
    if not tokens:
        raise ExprSyntaxError("empty expression", 0)
    parser = _Parser(tokens, dialect, len(text))
    f = parser.parse_implies()
    trailing = parser.peek()
    if trailing is not None:
        raise ExprSyntaxError(f"unexpected token {trailing[1]!r}", trailing[2])
    return f


# ---------------------------------------------------------------------------
# Printing (inverse of parse_expr for each dialect)

_PREC = {"implies": 0, "or": 1, "and": 2, "not": 3, "atom": 4}


def _render(f: Formula, dialect: str, parent_prec: int) -> str:
    word = dialect == "ppr"
    if isinstance(f, Bool):
        if word:
            raise ValueError("boolean literals are not part of the ppr dialect")
        return "true" if f.value else "false"
    if isinstance(f, Var):
        return f.name
    if isinstance(f, VarEq):
        if word:
            raise ValueError("enumeration tests are not part of the ppr dialect")
        return f"{f.name} == {f.option}"
    if isinstance(f, Not):
        body = _render(f.child, dialect, _PREC["not"])
        return ("NOT " if word else "!") + body
    if isinstance(f, And):
        sep = " AND " if word else " && "
        text = sep.join(_render(c, dialect, _PREC["and"] + 1) for c in f.children)
        return f"({text})" if parent_prec > _PREC["and"] else text
    if isinstance(f, Or):
        sep = " OR " if word else " || "
        text = sep.join(_render(c, dialect, _PREC["or"] + 1) for c in f.children)
        return f"({text})" if parent_prec > _PREC["or"] else text
    if isinstance(f, Implies):
        op = " implies " if word else " => "
        text = _render(f.lhs, dialect, _PREC["implies"] + 1) + op + _render(f.rhs, dialect, _PREC["implies"])
        return f"({text})" if parent_prec > _PREC["implies"] else text
    raise TypeError(f"unknown formula node {f!r}")


def render_expr(f: Formula, dialect: str = "dm") -> str:
    return _render(f, dialect, 0)


# ---------------------------------------------------------------------------
# Evaluation

def eval_partial(f: Formula, assignment: Mapping) -> bool | None:
    """Three-valued (Kleene) evaluation; None means not determined yet."""
    if isinstance(f, Bool):
        return f.value
    if isinstance(f, (Var, VarEq)):
        return assignment.get(atom_key(f))
    if isinstance(f, Not):
        v = eval_partial(f.child, assignment)
        return None if v is None else not v
    if isinstance(f, And):
        saw_unknown = False
        for c in f.children:
            v = eval_partial(c, assignment)
            if v is False:
                return False
            if v is None:
                saw_unknown = True
        return None if saw_unknown else True
    if isinstance(f, Or):
        saw_unknown = False
        for c in f.children:
            v = eval_partial(c, assignment)
            if v is True:
                return True
            if v is None:
                saw_unknown = True
        return None if saw_unknown else False
    if isinstance(f, Implies):
        return eval_partial(Or((Not(f.lhs), f.rhs)), assignment)
    raise TypeError(f"unknown formula node {f!r}")


def eval_total(f: Formula, assignment: Mapping) -> bool:
    """Classical evaluation; raises if some atom is unassigned."""
    missing = [a for a in atoms(f) if a not in assignment]
    if missing:
        raise ValueError(f"unassigned variables: {', '.join(missing)}")
    v = eval_partial(f, assignment)
    assert v is not None
    return v


# ---------------------------------------------------------------------------
# CNF

@dataclass
class Cnf:
    """Clause set over an indexed variable table (1-based, sign = polarity)."""

    clauses: list
    var_table: dict

    def copy(self) -> "Cnf":
        return Cnf([list(c) for c in self.clauses], dict(self.var_table))

    @property
    def names(self) -> list:
        return list(self.var_table)


class _CnfBuilder:
    def __init__(self):
        self.var_table: dict = {}
        self.clauses: list = []
        self.aux_count = 0

    def index(self, name: str) -> int:
        idx = self.var_table.get(name)
        if idx is None:
            idx = len(self.var_table) + 1
            self.var_table[name] = idx
        return idx

    def fresh_aux(self) -> int:
        self.aux_count += 1
        return self.index(f"{AUX_PREFIX}{self.aux_count}")


def _simplify(f: Formula) -> Formula:
    """Constant folding; keeps the node structure otherwise."""
    if isinstance(f, (Var, VarEq, Bool)):
        return f
    if isinstance(f, Not):
        c = _simplify(f.child)
        if isinstance(c, Bool):
            return FALSE if c.value else TRUE
        return Not(c)
    if isinstance(f, And):
        parts = []
        for c in f.children:
            s = _simplify(c)
            if isinstance(s, Bool):
                if not s.value:
                    return FALSE
                continue
            parts.append(s)
        return and_(parts)
    if isinstance(f, Or):
        parts = []
        for c in f.children:
            s = _simplify(c)
            if isinstance(s, Bool):
                if s.value:
                    return TRUE
                continue
            parts.append(s)
        return or_(parts)
    if isinstance(f, Implies):
        lhs, rhs = _simplify(f.lhs), _simplify(f.rhs)
        if isinstance(lhs, Bool):
            return rhs if lhs.value else TRUE
        if isinstance(rhs, Bool):
            return TRUE if rhs.value else _simplify(Not(lhs))
        return Implies(lhs, rhs)
    raise TypeError(f"unknown formula node {f!r}")


def _as_literal(f: Formula, b: _CnfBuilder) -> int | None:
    if isinstance(f, (Var, VarEq)):
        return b.index(atom_key(f))
    if isinstance(f, Not) and isinstance(f.child, (Var, VarEq)):
        return -b.index(atom_key(f.child))
    return None


def _as_clause(f: Formula, b: _CnfBuilder) -> list | None:
    """Literal list if f is directly clause-shaped, else None."""
    lit = _as_literal(f, b)
    if lit is not None:
        return [lit]
    if isinstance(f, Or):
        lits = []
        for c in f.children:
            lit = _as_literal(c, b)
            if lit is None:
                return None
            lits.append(lit)
        return lits
    if isinstance(f, Implies):
        # (a1 & a2 & ...) => (b1 | b2 | ...) is one clause when all parts are literals
        ante = f.lhs.children if isinstance(f.lhs, And) else (f.lhs,)
        cons = f.rhs.children if isinstance(f.rhs, Or) else (f.rhs,)
        lits = []
        for a in ante:
            lit = _as_literal(a, b)
            if lit is None:
                return None
            lits.append(-lit)
        for c in cons:
            lit = _as_literal(c, b)
            if lit is None:
                return None
            lits.append(lit)
        return lits
    if isinstance(f, Not) and isinstance(f.child, And):
        lits = []
        for c in f.child.children:
            lit = _as_literal(c, b)
            if lit is None:
                return None
            lits.append(-lit)
        return lits
    return None


def _tseitin(f: Formula, b: _CnfBuilder) -> int:
    """Encode f, returning a literal equivalent to f (full biconditional encoding)."""
    lit = _as_literal(f, b)
    if lit is not None:
        return lit
    if isinstance(f, Not):
        return -_tseitin(f.child, b)
    if isinstance(f, Implies):
        return _tseitin(Or((Not(f.lhs), f.rhs)), b)
    if isinstance(f, (And, Or)):
        child_lits = [_tseitin(c, b) for c in f.children]
        aux = b.fresh_aux()
        if isinstance(f, And):
            # aux <-> (l1 & l2 & ...)
            for lit in child_lits:
                b.clauses.append([-aux, lit])
            b.clauses.append([aux] + [-lit for lit in child_lits])
        else:
            # aux <-> (l1 | l2 | ...)
            for lit in child_lits:
                b.clauses.append([-lit, aux])
            b.clauses.append([-aux] + child_lits)
        return aux
    raise TypeError(f"unknown formula node {f!r}")


def to_cnf(f: Formula) -> Cnf:
    """Equisatisfiable CNF; models restricted to the original atoms match f's models."""
    b = _CnfBuilder()
    # Register original atoms first so the variable table leads with them.
    for a in atoms(f):
        b.index(a)
    s = _simplify(f)
    if isinstance(s, Bool):
        return Cnf([] if s.value else [[]], b.var_table)
    conjuncts = s.children if isinstance(s, And) else (s,)
    for c in conjuncts:
        clause = _as_clause(c, b)
        if clause is not None:
            b.clauses.append(clause)
        else:
            b.clauses.append([_tseitin(c, b)])
    return Cnf(b.clauses, b.var_table)


# ---------------------------------------------------------------------------
# Satisfiability (plain DPLL with unit propagation)

def sat(cnf: Cnf, assumptions: Mapping | None = None) -> dict | None:
    """Complete backtracking search.  Returns a total witness dict or None.

    Deterministic: branches on the lowest unassigned variable index, trying
    True before False, so identical inputs yield identical witnesses.
    """
    values: dict = {}
    if assumptions:
        for name, val in assumptions.items():
            if name not in cnf.var_table:
                raise ValueError(f"unknown assumption variable {name!r}")
            values[cnf.var_table[name]] = bool(val)

    clauses = cnf.clauses

    def propagate(assign: dict) -> dict | None:
        assign = dict(assign)
        changed = True
        while changed:
            changed = False
            for clause in clauses:
                unassigned = None
                satisfied = False
                count = 0
                for lit in clause:
                    v = assign.get(abs(lit))
                    if v is None:
                        unassigned = lit
                        count += 1
                    elif (lit > 0) == v:
                        satisfied = True
                        break
                if satisfied:
                    continue
                if count == 0:
                    return None  # conflict
                if count == 1:
                    assign[abs(unassigned)] = unassigned > 0
                    changed = True
        return assign

    def search(assign: dict) -> dict | None:
        assign = propagate(assign)
        if assign is None:
            return None
        all_satisfied = True
        for clause in clauses:
            if not any((lit > 0) == assign.get(abs(lit)) for lit in clause if abs(lit) in assign):
                all_satisfied = False
                break
        if all_satisfied:
            return assign
        var = None
        for idx in range(1, len(cnf.var_table) + 1):
            if idx not in assign:
                var = idx
                break
        if var is None:
            return None
        for val in (True, False):
            trial = dict(assign)
            trial[var] = val
            result = search(trial)
            if result is not None:
                return result
        return None

    solution = search(values)
    if solution is None:
        return None
    return {name: solution.get(idx, False) for name, idx in cnf.var_table.items()}


def enumerate_models(cnf: Cnf, variables: list, limit: int) -> tuple:
    """All satisfying assignments projected to `variables`, deduplicated.

    Returns (models, truncated).  Models come out sorted lexicographically in
    the order variables appear in the CNF variable table (False < True), so
    identical inputs always produce the same list.  `truncated` flags that the
    limit cut the enumeration short.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    for v in variables:
        if v not in cnf.var_table:
            raise ValueError(f"unknown projection variable {v!r}")
    work = cnf.copy()
    ordered = sorted(variables, key=lambda v: cnf.var_table[v])
    models = []
    truncated = False
    while True:
        witness = sat(work)
        if witness is None:
            break
        model = {v: witness[v] for v in variables}
        if len(models) == limit:
            truncated = True
            break
        models.append(model)
        # Block this projection and continue.
        work.clauses.append(
            [(-work.var_table[v] if model[v] else work.var_table[v]) for v in ordered]
        )
        if not ordered:
            break  # single empty projection
    models.sort(key=lambda m: tuple(m[v] for v in ordered))
    return models, truncated
