"""Product-Process-Resource DSL: domain model, parser, writer, validation.

The DSL is a flat list of declarations::

    Product "Pipe2": { name: "Pipe 2", implements: ["Pipe"], excludes: ["Pipe3"] }
    Process "InsertPipe2": { implements: ["InsertPipe"], inputs: [{productId: "Pipe2"}] }
    Resource "LF_4": { implements: ["Linefeeds"] }
    Constraint "C1": { definition: "Lock1,Pipe2,Pipe3 -> Lock1 implies Pipe2 OR Pipe3" }
    Attribute "deltaFile": { description: "...", defaultValue: "", type: "String" }

Property values are strings, booleans, numbers, arrays or nested objects;
``//`` starts a line comment.  Unknown property keys are kept as unit
attributes (with a warning), which is how open-ended metadata such as
``deltaFile`` travels through the toolchain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .logic import ExprSyntaxError, Formula, atoms, eval_total, parse_expr, render_expr

CATEGORIES = ("product", "process", "resource")

# Canonical property order used by write_ppr.
_KEY_ORDER = [
    "name", "isAbstract", "implements", "requires", "excludes", "children",
    "inputs", "outputs", "resources",
]


@dataclass
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int = 0
    column: int = 0
    unit_id: str | None = None
    rule: str | None = None

    def render(self) -> str:
        where = f"{self.line}:{self.column}" if self.line else "-"
        unit = f" [{self.unit_id}]" if self.unit_id else ""
        return f"{self.severity}:{where}{unit} {self.message}"


class PprParseError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.render() for d in self.diagnostics))


@dataclass
class PprUnit:
    id: str
    name: str = ""
    is_abstract: bool = False
    implements: list = field(default_factory=list)
    requires: list = field(default_factory=list)
    excludes: list = field(default_factory=list)
    children: list = field(default_factory=list)
    attributes: dict = field(default_factory=dict)
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass
class Product(PprUnit):
    pass


@dataclass
class Process(PprUnit):
    inputs: list = field(default_factory=list)          # product ids
    outputs: list = field(default_factory=list)         # (port label, product id)
    required_resources: list = field(default_factory=list)


@dataclass
class Resource(PprUnit):
    pass


@dataclass
class ConstraintDef:
    id: str
    scope: list
    expr: Formula
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass
class AttributeDef:
    id: str
    description: str = ""
    default_value: str = ""
    value_type: str = "String"  # String | Number | Boolean
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass
class PprModel:
    products: dict = field(default_factory=dict)
    processes: dict = field(default_factory=dict)
    resources: dict = field(default_factory=dict)
    constraints: dict = field(default_factory=dict)
    attribute_defs: dict = field(default_factory=dict)

    def units(self, category: str) -> dict:
        return {"product": self.products, "process": self.processes, "resource": self.resources}[category]

    def all_units(self):
        for category in CATEGORIES:
            for unit in self.units(category).values():
                yield category, unit

    def category_of(self, unit_id: str) -> str | None:
        for category in CATEGORIES:
            if unit_id in self.units(category):
                return category
        return None


# ---------------------------------------------------------------------------
# Lexer / parser

_TOP_KEYWORDS = {"Product", "Process", "Resource", "Constraint", "Attribute"}


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, n: int) -> None:
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def skip_ws(self) -> None:
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c.isspace():
                self._advance(1)
            elif self.text.startswith("//", self.pos):
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self._advance(1)
            else:
                break

    def eof(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def loc(self) -> tuple:
        return self.line, self.col

    def peek_char(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, literal: str) -> bool:
        self.skip_ws()
        if self.text.startswith(literal, self.pos):
            self._advance(len(literal))
            return True
        return False

    def expect(self, literal: str) -> None:
        if not self.take(literal):
            raise _Fail(f"expected {literal!r}", *self.loc())

    def word(self) -> str | None:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self._advance(1)
        return self.text[start:self.pos] or None

    def string(self) -> str:
        self.skip_ws()
        if self.peek_char() != '"':
            raise _Fail("expected string literal", *self.loc())
        self._advance(1)
        out = []
        while True:
            c = self.peek_char()
            if c == "":
                raise _Fail("unterminated string", *self.loc())
            if c == '"':
                self._advance(1)
                return "".join(out)
            if c == "\\":
                self._advance(1)
                esc = self.peek_char()
                out.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                self._advance(1)
            else:
                out.append(c)
                self._advance(1)


class _Fail(Exception):
    def __init__(self, message: str, line: int, col: int):
        self.message = message
        self.line = line
        self.col = col


def _parse_value(sc: _Scanner):
    sc.skip_ws()
    c = sc.peek_char()
    if c == '"':
        return sc.string()
    if c == "[":
        sc.expect("[")
        items = []
        sc.skip_ws()
        if sc.take("]"):
            return items
        while True:
            items.append(_parse_value(sc))
            sc.skip_ws()
            if sc.take(","):
                sc.skip_ws()
                if sc.take("]"):  # trailing comma
                    return items
                continue
            sc.expect("]")
            return items
    if c == "{":
        sc.expect("{")
        obj = {}
        sc.skip_ws()
        if sc.take("}"):
            return obj
        while True:
            line, col = sc.loc()
            key = sc.word()
            if not key:
                raise _Fail("expected property key", line, col)
            sc.expect(":")
            obj[key] = _parse_value(sc)
            sc.skip_ws()
            if sc.take(","):
                sc.skip_ws()
                if sc.take("}"):
                    return obj
                continue
            sc.expect("}")
            return obj
    word_start = sc.loc()
    word = sc.word()
    if word in ("true", "false"):
        return word == "true"
    if word and (word[0].isdigit() or word[0] == "-"):
        try:
            return int(word)
        except ValueError:
            raise _Fail(f"malformed number {word!r}", *word_start)
    if word:
        raise _Fail(f"unquoted value {word!r}", *word_start)
    raise _Fail("expected value", *sc.loc())


def _string_list(value, what: str, loc) -> list:
    if not isinstance(value, list):
        raise _Fail(f"{what} must be an array", *loc)
    out = []
    for item in value:
        if isinstance(item, str):
            out.append(item)
        else:
            raise _Fail(f"{what} entries must be strings", *loc)
    return out


def _input_list(value, loc) -> list:
    # Accepts both {productId: "X"} objects and bare "X" strings.
    if not isinstance(value, list):
        raise _Fail("inputs must be an array", *loc)
    out = []
    for item in value:
        if isinstance(item, str):
            out.append(item)
        elif isinstance(item, dict) and isinstance(item.get("productId"), str):
            out.append(item["productId"])
        else:
            raise _Fail("inputs entries must be product ids", *loc)
    return out


def _output_list(value, loc) -> list:
    if not isinstance(value, list):
        raise _Fail("outputs must be an array", *loc)
    out = []
    for i, item in enumerate(value):
        if isinstance(item, str):
            out.append((f"OP{i + 1}", item))
        elif isinstance(item, dict) and len(item) == 1:
            label, inner = next(iter(item.items()))
            if isinstance(inner, dict) and isinstance(inner.get("productId"), str):
                out.append((label, inner["productId"]))
            elif isinstance(inner, str):
                out.append((label, inner))
            else:
                raise _Fail("outputs entries must map a port to a product id", *loc)
        else:
            raise _Fail("outputs entries must map a port to a product id", *loc)
    return out


def _resource_list(value, loc) -> list:
    if not isinstance(value, list):
        raise _Fail("resources must be an array", *loc)
    out = []
    for item in value:
        if isinstance(item, str):
            out.append(item)
        elif isinstance(item, dict) and isinstance(item.get("resourceId"), str):
            out.append(item["resourceId"])
        else:
            raise _Fail("resources entries must be resource ids", *loc)
    return out


def _attr_value(value) -> str | bool | int:
    return value if isinstance(value, (str, bool, int)) else str(value)


def parse_ppr(text: str) -> tuple:
    """Parse DSL text.  Returns (model, diagnostics); raises PprParseError when
    any error-severity diagnostic was produced (warnings alone do not raise)."""
    sc = _Scanner(text)
    model = PprModel()
    diagnostics: list = []

    def diag(severity, message, line, col, unit_id=None, rule=None):
        diagnostics.append(Diagnostic(severity, message, line, col, unit_id, rule))

    try:
        while not sc.eof():
            line, col = sc.loc()
            keyword = sc.word()
            if keyword not in _TOP_KEYWORDS:
                raise _Fail(f"unknown keyword {keyword!r}", line, col)
            unit_id = sc.string()
            sc.expect(":")
            sc.expect("{")
            props = {}
            prop_locs = {}
            sc.skip_ws()
            if not sc.take("}"):
                while True:
                    ploc = sc.loc()
                    key = sc.word()
                    if not key:
                        raise _Fail("expected property key", *sc.loc())
                    sc.expect(":")
                    if key in props:
                        diag("warning", f"duplicate property {key!r}", *ploc, unit_id=unit_id)
                    props[key] = _parse_value(sc)
                    prop_locs[key] = ploc
                    sc.skip_ws()
                    if sc.take(","):
                        sc.skip_ws()
                        if sc.take("}"):
                            break
                        continue
                    sc.expect("}")
                    break

            if keyword == "Constraint":
                definition = props.pop("definition", None)
                if not isinstance(definition, str):
                    raise _Fail("constraint needs a definition string", line, col)
                if "->" not in definition:
                    raise _Fail("constraint definition must be 'scope -> expr'", line, col)
                scope_part, expr_part = definition.split("->", 1)
                scope = [s.strip() for s in scope_part.split(",") if s.strip()]
                try:
                    expr = parse_expr(expr_part.strip(), "ppr")
                except ExprSyntaxError as exc:
                    raise _Fail(f"bad constraint expression: {exc}", line, col)
                if unit_id in model.constraints:
                    diag("error", f"duplicate constraint id {unit_id!r}", line, col, unit_id=unit_id)
                else:
                    model.constraints[unit_id] = ConstraintDef(unit_id, scope, expr, line, col)
                for key in props:
                    diag("warning", f"unknown constraint property {key!r}", *prop_locs[key], unit_id=unit_id)
                continue

            if keyword == "Attribute":
                attr = AttributeDef(
                    unit_id,
                    description=str(props.pop("description", "")),
                    default_value=str(props.pop("defaultValue", "")),
                    value_type=str(props.pop("type", "String")),
                    line=line,
                    column=col,
                )
                if attr.value_type not in ("String", "Number", "Boolean"):
                    diag("warning", f"unknown attribute type {attr.value_type!r}", line, col, unit_id=unit_id)
                if unit_id in model.attribute_defs:
                    diag("error", f"duplicate attribute id {unit_id!r}", line, col, unit_id=unit_id)
                else:
                    model.attribute_defs[unit_id] = attr
                for key in props:
                    diag("warning", f"unknown attribute property {key!r}", *prop_locs[key], unit_id=unit_id)
                continue

            cls = {"Product": Product, "Process": Process, "Resource": Resource}[keyword]
            unit = cls(id=unit_id, line=line, column=col)
            unit.name = str(props.pop("name", unit_id))
            unit.is_abstract = bool(props.pop("isAbstract", False))
            for key, setter in (
                ("implements", "implements"), ("requires", "requires"),
                ("excludes", "excludes"), ("children", "children"),
            ):
                if key in props:
                    setattr(unit, setter, _string_list(props.pop(key), key, prop_locs[key]))
            if isinstance(unit, Process):
                if "inputs" in props:
                    unit.inputs = _input_list(props.pop("inputs"), prop_locs["inputs"])
                if "outputs" in props:
                    unit.outputs = _output_list(props.pop("outputs"), prop_locs["outputs"])
                if "resources" in props:
                    unit.required_resources = _resource_list(props.pop("resources"), prop_locs["resources"])
            for key, value in props.items():
                diag("warning", f"unknown property {key!r} kept as attribute", *prop_locs[key], unit_id=unit_id)
                unit.attributes[key] = _attr_value(value)

            target = model.units(keyword.lower())
            if unit_id in target:
                diag("error", f"duplicate {keyword.lower()} id {unit_id!r}", line, col, unit_id=unit_id)
            else:
                target[unit_id] = unit
    except _Fail as f:
        diag("error", f.message, f.line, f.col)

    _normalize_excludes(model)
    if any(d.severity == "error" for d in diagnostics):
        raise PprParseError(diagnostics)
    return model, diagnostics


def _normalize_excludes(model: PprModel) -> None:
    """Materialize the symmetric closure of excludes within each category."""
    for category in CATEGORIES:
        units = model.units(category)
        for unit in units.values():
            for other_id in unit.excludes:
                other = units.get(other_id)
                if other is not None and unit.id not in other.excludes:
                    other.excludes.append(unit.id)


# ---------------------------------------------------------------------------
# Writer

def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return _quote(value)
    if isinstance(value, list):
        return "[" + ", ".join(_render_value(v) for v in value) + "]"
    raise TypeError(f"cannot render {value!r}")


def write_ppr(model: PprModel) -> str:
    """Deterministic serialization; parse_ppr(write_ppr(m)) == m for valid m."""
    blocks = []
    for keyword, units in (("Product", model.products), ("Process", model.processes), ("Resource", model.resources)):
        for unit in units.values():
            props = []
            props.append(f"name: {_quote(unit.name)}")
            if unit.is_abstract:
                props.append("isAbstract: true")
            for key in ("implements", "requires", "excludes", "children"):
                values = getattr(unit, key)
                if values:
                    props.append(f"{key}: {_render_value(values)}")
            if isinstance(unit, Process):
                if unit.inputs:
                    rendered = ", ".join("{productId: %s}" % _quote(p) for p in unit.inputs)
                    props.append(f"inputs: [{rendered}]")
                if unit.outputs:
                    rendered = ", ".join(
                        "{%s: {productId: %s}}" % (label, _quote(p)) for label, p in unit.outputs
                    )
                    props.append(f"outputs: [{rendered}]")
                if unit.required_resources:
                    rendered = ", ".join("{resourceId: %s}" % _quote(r) for r in unit.required_resources)
                    props.append(f"resources: [{rendered}]")
            for key, value in unit.attributes.items():
                props.append(f"{key}: {_render_value(value)}")
            body = ",\n  ".join(props)
            blocks.append(f"{keyword} {_quote(unit.id)}: {{\n  {body}\n}}")
    for c in model.constraints.values():
        definition = ",".join(c.scope) + " -> " + render_expr(c.expr, "ppr")
        blocks.append(f"Constraint {_quote(c.id)}: {{\n  definition: {_quote(definition)}\n}}")
    for a in model.attribute_defs.values():
        body = (
            f"description: {_quote(a.description)},\n"
            f"  defaultValue: {_quote(a.default_value)},\n"
            f"  type: {_quote(a.value_type)}"
        )
        blocks.append(f"Attribute {_quote(a.id)}: {{\n  {body}\n}}")
    return "\n\n".join(blocks) + ("\n" if blocks else "")


# ---------------------------------------------------------------------------
# Validation

def _cycle_check(ids: dict, edges, rule: str, diagnostics: list) -> None:
    """DFS cycle detection over unit ids; edges(unit) yields successor ids."""
    WHITE, GRAY, BLACK = 0, 1, 2
    state = {uid: WHITE for uid in ids}

    def visit(uid: str) -> bool:
        state[uid] = GRAY
        for succ in edges(ids[uid]):
            if succ not in ids:
                continue
            if state[succ] == GRAY:
                return True
            if state[succ] == WHITE and visit(succ):
                return True
        state[uid] = BLACK
        return False

    for uid in ids:
        if state[uid] == WHITE and visit(uid):
            unit = ids[uid]
            diagnostics.append(Diagnostic(
                "error", f"cycle in {rule} involving {uid!r}", unit.line, unit.column,
                unit_id=uid, rule=rule,
            ))
            return


def validate_model(model: PprModel) -> list:
    """Check the structural invariants; empty result means the model is sound."""
    diagnostics: list = []

    def err(unit, message, rule):
        diagnostics.append(Diagnostic("error", message, unit.line, unit.column, unit_id=unit.id, rule=rule))

    for category, unit in model.all_units():
        units = model.units(category)
        for rel in ("implements", "requires", "excludes", "children"):
            for ref in getattr(unit, rel):
                if ref not in units:
                    other = model.category_of(ref)
                    if other is not None:
                        err(unit, f"{rel} reference {ref!r} names a {other}, expected a {category}",
                            f"{rel}-category")
                    else:
                        err(unit, f"unresolved reference {ref!r} in {rel}", f"{rel}-resolution")
        if unit.children and category != "product":
            err(unit, "children decomposition is only valid on products", "children-products-only")
        if isinstance(unit, Process):
            for ref in unit.inputs:
                if ref not in model.products:
                    err(unit, f"input {ref!r} does not name a product", "inputs-resolution")
            for _, ref in unit.outputs:
                if ref not in model.products:
                    err(unit, f"output {ref!r} does not name a product", "outputs-resolution")
            for ref in unit.required_resources:
                if ref not in model.resources:
                    err(unit, f"resource {ref!r} does not name a resource", "resources-resolution")

    for category in CATEGORIES:
        units = model.units(category)
        _cycle_check(units, lambda u: u.implements, f"{category} implements", diagnostics)
        _cycle_check(units, lambda u: u.children, f"{category} children", diagnostics)
        for unit in units.values():
            for other_id in unit.excludes:
                other = units.get(other_id)
                if other is not None and unit.id not in other.excludes:
                    err(unit, f"excludes of {unit.id!r} and {other_id!r} is not symmetric", "excludes-symmetry")

    for c in model.constraints.values():
        for ref in c.scope:
            if model.category_of(ref) is None:
                diagnostics.append(Diagnostic(
                    "error", f"unresolved reference {ref!r} in constraint scope",
                    c.line, c.column, unit_id=c.id, rule="constraint-scope",
                ))
        loose = [v for v in atoms(c.expr) if v not in c.scope]
        for v in loose:
            diagnostics.append(Diagnostic(
                "error", f"constraint variable {v!r} missing from scope",
                c.line, c.column, unit_id=c.id, rule="constraint-scope",
            ))
    return diagnostics


def eval_constraint(constraint: ConstraintDef, assignment: dict) -> bool:
    """Classical evaluation over the constraint scope; all scope ids must be assigned."""
    missing = [v for v in constraint.scope if v not in assignment]
    if missing:
        raise ValueError(f"unassigned scope variables: {', '.join(missing)}")
    return eval_total(constraint.expr, assignment)


def concrete_members(model: PprModel, abstract_id: str) -> list:
    """Non-abstract units transitively implementing abstract_id, declaration order."""
    category = model.category_of(abstract_id)
    if category is None:
        raise KeyError(f"unknown unit {abstract_id!r}")
    units = model.units(category)
    if not units[abstract_id].is_abstract:
        raise ValueError(f"{abstract_id!r} is not abstract")

    # reachable[uid] = True when uid transitively implements abstract_id
    reachable = {abstract_id}
    changed = True
    while changed:
        changed = False
        for unit in units.values():
            if unit.id in reachable:
                continue
            if any(parent in reachable for parent in unit.implements):
                reachable.add(unit.id)
                changed = True
    return [uid for uid, unit in units.items() if uid in reachable and not unit.is_abstract]
