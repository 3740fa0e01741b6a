"""Feature models, decision models, cross-model rules and their configurations.

These are the derived variability artifacts the staged configuration runs on.
File formats (all UTF-8 text, ``//`` line comments):

``.fm``
    Indented feature tree.  Non-grouped features carry a ``mandatory`` or
    ``optional`` marker; a bare ``or`` / ``alternative`` line opens a group
    whose members follow one level deeper without markers.  Flags and opaque
    attributes sit in braces: ``{abstract, deltaFile="!DLock1"}``.  A trailing
    ``constraints`` section holds one formula per line (``! && || =>``).

``.dm``
    One ``decision <id> { ... }`` block per decision with keys ``question``,
    ``type`` (boolean | enumeration), ``range`` (enumeration options separated
    by ``|``), ``visible`` and repeated ``rule`` lines.

``.cdc``
    One rule per line, ``LHS => RHS;`` with ``model#element`` references; an
    optional ``Name)`` label prefix is accepted on input.

``.dconfig``
    Header (``model``, source product configuration digest) followed by the
    ordered assignment records ``<seq> <origin> <decision> = <value>``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .logic import (
    FALSE, TRUE, And, Formula, Implies, Not, Or, Var, VarEq,
    and_, atoms, eval_partial, parse_expr, render_expr, to_cnf, enumerate_models,
)

MANDATORY = "mandatory"
OPTIONAL = "optional"
GROUP_OR = "or"
GROUP_ALTERNATIVE = "alternative"


class ModelFormatError(ValueError):
    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass
class Feature:
    id: str
    name: str = ""
    abstract: bool = False
    parent: str | None = None
    variability: str = MANDATORY
    group: str | None = None  # applies to this feature's children
    attributes: dict = field(default_factory=dict)


@dataclass
class FeatureModel:
    model_id: str
    root: str
    features: dict = field(default_factory=dict)  # id -> Feature, insertion order = document order
    constraints: list = field(default_factory=list)

    def children(self, feature_id: str) -> list:
        return [f.id for f in self.features.values() if f.parent == feature_id]

    def subtree(self, feature_id: str) -> list:
        out = [feature_id]
        i = 0
        while i < len(out):
            out.extend(self.children(out[i]))
            i += 1
        return out

    def ancestors(self, feature_id: str) -> list:
        out = []
        parent = self.features[feature_id].parent
        while parent is not None:
            out.append(parent)
            parent = self.features[parent].parent
        return out

    def depth(self, feature_id: str) -> int:
        return len(self.ancestors(feature_id))

    def check(self) -> None:
        if self.root not in self.features:
            raise ModelFormatError(f"root {self.root!r} is not a feature")
        if self.features[self.root].parent is not None:
            raise ModelFormatError("root must not have a parent")
        for f in self.features.values():
            if f.id != self.root:
                if f.parent is None:
                    raise ModelFormatError(f"feature {f.id!r} has no parent")
                if f.parent not in self.features:
                    raise ModelFormatError(f"feature {f.id!r} has unknown parent {f.parent!r}")
        # tree-ness: every non-root feature reaches the root
        for f in self.features.values():
            seen = set()
            cur = f.id
            while cur != self.root:
                if cur in seen:
                    raise ModelFormatError(f"parent cycle at feature {cur!r}")
                seen.add(cur)
                cur = self.features[cur].parent


@dataclass
class Decision:
    id: str
    question: str = ""
    range: list | None = None  # None = boolean, else enumeration options
    visibility: Formula = TRUE
    rules: list = field(default_factory=list)

    @property
    def is_enum(self) -> bool:
        return self.range is not None


@dataclass
class DecisionModel:
    model_id: str
    decisions: dict = field(default_factory=dict)

    def check(self) -> None:
        known = set(self.decisions)
        options = {}
        for d in self.decisions.values():
            if d.is_enum:
                if not d.range:
                    raise ModelFormatError(f"enumeration decision {d.id!r} has no options")
                if len(set(d.range)) != len(d.range):
                    raise ModelFormatError(f"enumeration decision {d.id!r} has duplicate options")
                options[d.id] = set(d.range)
        for d in self.decisions.values():
            for f in [d.visibility] + d.rules:
                for ref in _dm_refs(f):
                    if isinstance(ref, VarEq):
                        if ref.name not in options or ref.option not in options[ref.name]:
                            raise ModelFormatError(
                                f"decision {d.id!r} references unknown option {ref.name}=={ref.option}")
                    elif ref.name not in known:
                        raise ModelFormatError(f"decision {d.id!r} references unknown decision {ref.name!r}")


def _dm_refs(f: Formula):
    if isinstance(f, (Var, VarEq)):
        yield f
    elif isinstance(f, Not):
        yield from _dm_refs(f.child)
    elif isinstance(f, (And, Or)):
        for c in f.children:
            yield from _dm_refs(c)
    elif isinstance(f, Implies):
        yield from _dm_refs(f.lhs)
        yield from _dm_refs(f.rhs)


@dataclass
class CdcRule:
    lhs: Formula  # over model#element qualified references
    rhs: Formula

    def formula(self) -> Formula:
        return Implies(self.lhs, self.rhs)

    def render(self) -> str:
        return f"{render_expr(self.lhs, 'cdc')} => {render_expr(self.rhs, 'cdc')}"


def cdc_refs(rule: CdcRule) -> list:
    """(model_id, element_id) pairs referenced by the rule, in order."""
    out = []
    for key in atoms(rule.formula()):
        name = key.split("=", 1)[0]
        if "#" not in name:
            raise ModelFormatError(f"unqualified reference {name!r} in cross-model rule")
        model_id, element_id = name.split("#", 1)
        out.append((model_id, element_id))
    return out


@dataclass
class FmConfiguration:
    model_id: str
    selected: set = field(default_factory=set)


@dataclass
class DmAssignment:
    decision: str
    value: object  # bool for boolean decisions, option string for enumerations
    origin: str    # preset | user | propagated
    seq: int


@dataclass
class DmConfiguration:
    model_id: str
    assignments: list = field(default_factory=list)
    product_digest: str = ""

    def value_of(self, decision_id: str):
        for a in self.assignments:
            if a.decision == decision_id:
                return a.value
        return None

    def next_seq(self) -> int:
        return self.assignments[-1].seq + 1 if self.assignments else 0


def product_config_digest(cfg: FmConfiguration) -> str:
    payload = cfg.model_id + "|" + ",".join(sorted(cfg.selected))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Feature-model semantics

def fm_to_formula(fm: FeatureModel) -> Formula:
    """Standard feature-model semantics as one conjunction.

    Root holds; every child implies its parent; a mandatory non-grouped child
    is forced by its parent; alternative groups pick exactly one member, or
    groups at least one; cross-tree constraints are conjoined.
    """
    parts = [Var(fm.root)]
    for f in fm.features.values():
        if f.parent is None:
            continue
        parts.append(Implies(Var(f.id), Var(f.parent)))
    for f in fm.features.values():
        children = fm.children(f.id)
        if f.group is None:
            for c in children:
                if fm.features[c].variability == MANDATORY:
                    parts.append(Implies(Var(f.id), Var(c)))
            continue
        if not children:
            continue
        parts.append(Implies(Var(f.id), Or(tuple(Var(c) for c in children))
                             if len(children) > 1 else Var(children[0])))
        if f.group == GROUP_ALTERNATIVE:
            for i in range(len(children)):
                for j in range(i + 1, len(children)):
                    parts.append(Not(And((Var(children[i]), Var(children[j])))))
    parts.extend(fm.constraints)
    return and_(parts)


def expand_selection(fm: FeatureModel, selected) -> set:
    """Selection closed under the ancestor chain (containers auto-include)."""
    out = set()
    for fid in selected:
        if fid not in fm.features:
            raise KeyError(f"unknown feature {fid!r}")
        out.add(fid)
        out.update(fm.ancestors(fid))
    return out


def mandatory_closure(fm: FeatureModel, seed=()) -> set:
    """Selection grown to a consistent default: ancestors of every member plus
    the mandatory non-grouped children of every selected feature."""
    out = set(seed)
    out.add(fm.root)
    changed = True
    while changed:
        changed = False
        for fid in list(out):
            for anc in fm.ancestors(fid):
                if anc not in out:
                    out.add(anc)
                    changed = True
        for f in fm.features.values():
            if f.id in out or f.parent not in out:
                continue
            if fm.features[f.parent].group is None and f.variability == MANDATORY:
                out.add(f.id)
                changed = True
    return out


def validate_fm_config(fm: FeatureModel, cfg: FmConfiguration) -> list:
    """Violation messages for the configuration; empty list means valid.

    Ancestors of selected features are auto-included before checking, matching
    the behavior of tree-structured configurators.
    """
    if cfg.model_id != fm.model_id:
        raise ValueError(f"configuration targets {cfg.model_id!r}, model is {fm.model_id!r}")
    selected = expand_selection(fm, cfg.selected)
    assignment = {fid: (fid in selected) for fid in fm.features}
    violations = []
    if fm.root not in selected:
        violations.append(f"root feature {fm.root} must be selected")
    for f in fm.features.values():
        children = fm.children(f.id)
        if f.parent is not None and f.id in selected and f.parent not in selected:
            violations.append(f"{f.id} requires its parent {f.parent}")
        if f.group is None:
            for c in children:
                if f.id in selected and fm.features[c].variability == MANDATORY and c not in selected:
                    violations.append(f"mandatory feature {c} missing under {f.id}")
            continue
        picked = [c for c in children if c in selected]
        if f.id in selected and children and not picked:
            violations.append(f"{f.group} group under {f.id} needs a member")
        if f.group == GROUP_ALTERNATIVE and len(picked) > 1:
            violations.append(f"alternative group under {f.id} allows one member, got {', '.join(picked)}")
    for formula in fm.constraints:
        if eval_partial(formula, assignment) is False:
            violations.append(f"constraint violated: {render_expr(formula)}")
    return violations


def count_configurations(fm: FeatureModel, limit: int = 100000) -> tuple:
    """Number of configurations projected to concrete features; (count, truncated)."""
    concrete = [f.id for f in fm.features.values() if not f.abstract]
    cnf = to_cnf(fm_to_formula(fm))
    for fid in fm.features:
        if fid not in cnf.var_table:  # feature mentioned nowhere else
            cnf.var_table[fid] = len(cnf.var_table) + 1
    models, truncated = enumerate_models(cnf, concrete, limit)
    return len(models), truncated


# ---------------------------------------------------------------------------
# .fm format

_INDENT = "    "


def _render_flags(f: Feature) -> str:
    entries = []
    if f.abstract:
        entries.append("abstract")
    for key, value in f.attributes.items():
        entries.append(f'{key}="{_escape(str(value))}"')
    return " {" + ", ".join(entries) + "}" if entries else ""


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def _unescape(s: str) -> str:
    out = []
    i = 0
    while i < len(s):
        if s[i] == "\\" and i + 1 < len(s):
            out.append(s[i + 1])
            i += 2
        else:
            out.append(s[i])
            i += 1
    return "".join(out)


def fm_write(fm: FeatureModel) -> str:
    lines = [f"model {fm.model_id}", "features"]

    def emit(fid: str, depth: int) -> None:
        f = fm.features[fid]
        marker = ""
        parent = fm.features[f.parent] if f.parent else None
        in_group = parent is not None and parent.group is not None
        if parent is not None and not in_group:
            marker = f.variability + " "
        name = f' "{_escape(f.name)}"' if f.name and f.name != f.id else ""
        lines.append(f"{_INDENT * depth}{marker}{fid}{name}{_render_flags(f)}")
        children = fm.children(fid)
        if f.group is not None and children:
            lines.append(f"{_INDENT * (depth + 1)}{f.group}")
            for c in children:
                emit(c, depth + 2)
        else:
            for c in children:
                emit(c, depth + 1)

    emit(fm.root, 1)
    if fm.constraints:
        lines.append("constraints")
        for c in fm.constraints:
            lines.append(f"{_INDENT}{render_expr(c)}")
    return "\n".join(lines) + "\n"


def _split_head(line: str, lineno: int) -> tuple:
    """Parse one feature line -> (marker, id, display name, abstract, attributes)."""
    rest = line.strip()
    marker = None
    for m in (MANDATORY, OPTIONAL):
        if rest == m or rest.startswith(m + " "):
            marker = m
            rest = rest[len(m):].strip()
            break
    abstract = False
    attributes: dict = {}
    if rest.endswith("}"):
        brace = rest.rindex("{")
        flag_text = rest[brace + 1:-1]
        rest = rest[:brace].strip()
        depth_in_string = False
        entry = []
        entries = []
        for ch in flag_text + ",":
            if ch == '"' and (not entry or entry[-1] != "\\"):
                depth_in_string = not depth_in_string
                entry.append(ch)
            elif ch == "," and not depth_in_string:
                if "".join(entry).strip():
                    entries.append("".join(entry).strip())
                entry = []
            else:
                entry.append(ch)
        for e in entries:
            if e == "abstract":
                abstract = True
            elif "=" in e:
                key, _, raw = e.partition("=")
                raw = raw.strip()
                if not (raw.startswith('"') and raw.endswith('"')):
                    raise ModelFormatError(f"malformed attribute {e!r}", lineno)
                attributes[key.strip()] = _unescape(raw[1:-1])
            else:
                raise ModelFormatError(f"unknown feature flag {e!r}", lineno)
    name = ""
    if '"' in rest:
        q = rest.index('"')
        if not rest.endswith('"'):
            raise ModelFormatError("malformed display name", lineno)
        name = _unescape(rest[q + 1:-1])
        rest = rest[:q].strip()
    if not rest or not all(c.isalnum() or c == "_" for c in rest):
        raise ModelFormatError(f"malformed feature id {rest!r}", lineno)
    return marker, rest, name, abstract, attributes


def fm_read(text: str) -> FeatureModel:
    lines = _significant_lines(text)
    if not lines:
        raise ModelFormatError("empty feature model document")
    idx = 0
    model_id = ""
    if lines[idx][1].strip().startswith("model "):
        model_id = lines[idx][1].strip()[6:].strip()
        idx += 1
    if idx >= len(lines) or lines[idx][1].strip() != "features":
        raise ModelFormatError("expected 'features' section", lines[idx][0] if idx < len(lines) else 0)
    idx += 1

    fm = FeatureModel(model_id=model_id, root="")
    # stack of (indent, feature_id); group lines push (indent, ("group", parent_id))
    stack: list = []
    while idx < len(lines):
        lineno, raw = lines[idx]
        stripped = raw.strip()
        if stripped == "constraints":
            idx += 1
            break
        indent = (len(raw) - len(raw.lstrip())) // len(_INDENT)
        while stack and stack[-1][0] >= indent:
            stack.pop()
        if stripped in (GROUP_OR, GROUP_ALTERNATIVE):
            if not stack or not isinstance(stack[-1][1], str):
                raise ModelFormatError("group marker without a parent feature", lineno)
            parent_id = stack[-1][1]
            if fm.features[parent_id].group is not None:
                raise ModelFormatError(f"feature {parent_id!r} already has a group", lineno)
            fm.features[parent_id].group = stripped
            stack.append((indent, ("group", parent_id)))
            idx += 1
            continue
        marker, fid, name, abstract, attributes = _split_head(raw, lineno)
        if fid in fm.features:
            raise ModelFormatError(f"duplicate feature {fid!r}", lineno)
        if not stack:
            parent = None
            variability = MANDATORY
        else:
            top = stack[-1][1]
            if isinstance(top, tuple):  # group member
                parent = top[1]
                if marker is not None:
                    raise ModelFormatError("group members take no variability marker", lineno)
                variability = OPTIONAL
            else:
                parent = top
                if marker is None:
                    raise ModelFormatError(f"feature {fid!r} needs mandatory/optional marker", lineno)
                variability = marker
        fm.features[fid] = Feature(
            id=fid, name=name or fid, abstract=abstract, parent=parent,
            variability=variability, attributes=attributes,
        )
        if parent is None:
            if fm.root:
                raise ModelFormatError(f"second root feature {fid!r}", lineno)
            fm.root = fid
        stack.append((indent, fid))
        idx += 1

    while idx < len(lines):
        lineno, raw = lines[idx]
        fm.constraints.append(parse_expr(raw.strip(), "dm"))
        idx += 1
    if not fm.root:
        raise ModelFormatError("feature model has no root")
    if not fm.model_id:
        fm.model_id = fm.root
    fm.check()
    return fm


def _significant_lines(text: str) -> list:
    out = []
    for i, line in enumerate(text.splitlines(), start=1):
        body = line.split("//", 1)[0].rstrip()
        if body.strip():
            out.append((i, body))
    return out


# ---------------------------------------------------------------------------
# .dm format

def dm_write(dm: DecisionModel) -> str:
    lines = [f"model {dm.model_id}"]
    for d in dm.decisions.values():
        lines.append(f"decision {d.id} {{")
        lines.append(f'    question "{_escape(d.question)}"')
        lines.append(f"    type {'enumeration' if d.is_enum else 'boolean'}")
        if d.is_enum:
            lines.append(f"    range {' | '.join(d.range)}")
        lines.append(f"    visible {render_expr(d.visibility)}")
        for rule in d.rules:
            lines.append(f"    rule {render_expr(rule)}")
        lines.append("}")
    return "\n".join(lines) + "\n"


def dm_read(text: str) -> DecisionModel:
    lines = _significant_lines(text)
    dm = DecisionModel(model_id="")
    idx = 0
    if idx < len(lines) and lines[idx][1].strip().startswith("model "):
        dm.model_id = lines[idx][1].strip()[6:].strip()
        idx += 1
    current: Decision | None = None
    while idx < len(lines):
        lineno, raw = lines[idx]
        stripped = raw.strip()
        idx += 1
        if current is None:
            if not (stripped.startswith("decision ") and stripped.endswith("{")):
                raise ModelFormatError(f"expected decision block, got {stripped!r}", lineno)
            did = stripped[len("decision "):-1].strip()
            if not did or did in dm.decisions:
                raise ModelFormatError(f"bad or duplicate decision id {did!r}", lineno)
            current = Decision(id=did, visibility=TRUE)
            continue
        if stripped == "}":
            dm.decisions[current.id] = current
            current = None
            continue
        key, _, value = stripped.partition(" ")
        value = value.strip()
        if key == "question":
            if not (value.startswith('"') and value.endswith('"')):
                raise ModelFormatError("question must be a quoted string", lineno)
            current.question = _unescape(value[1:-1])
        elif key == "type":
            if value == "enumeration":
                if current.range is None:
                    current.range = []
            elif value != "boolean":
                raise ModelFormatError(f"unknown decision type {value!r}", lineno)
        elif key == "range":
            current.range = [opt.strip() for opt in value.split("|") if opt.strip()]
        elif key == "visible":
            current.visibility = parse_expr(value, "dm")
        elif key == "rule":
            current.rules.append(parse_expr(value, "dm"))
        else:
            raise ModelFormatError(f"unknown decision key {key!r}", lineno)
    if current is not None:
        raise ModelFormatError("unterminated decision block")
    dm.check()
    return dm


# ---------------------------------------------------------------------------
# .cdc format

def cdc_write(rules: list) -> str:
    return "".join(rule.render() + ";\n" for rule in rules)


def cdc_read(text: str) -> list:
    rules = []
    for lineno, raw in _significant_lines(text):
        body = raw.strip()
        if body.endswith(";"):
            body = body[:-1].strip()
        # tolerate "CDC1)" style labels
        head, sep, rest = body.partition(")")
        if sep and "#" not in head and " " not in head.strip():
            body = rest.strip()
        try:
            f = parse_expr(body, "cdc")
        except Exception as exc:
            raise ModelFormatError(f"bad cross-model rule: {exc}", lineno)
        if not isinstance(f, Implies):
            raise ModelFormatError("cross-model rule must be LHS => RHS", lineno)
        rules.append(CdcRule(f.lhs, f.rhs))
    return rules


def resolve_cdcs(rules: list, models: dict) -> list:
    """Unresolved (model_id, element_id) pairs against {model_id: element-id set}."""
    missing = []
    for rule in rules:
        for model_id, element_id in cdc_refs(rule):
            elements = models.get(model_id)
            if elements is None or element_id not in elements:
                missing.append((model_id, element_id))
    return missing


# ---------------------------------------------------------------------------
# .dconfig format

def dconfig_write(cfg: DmConfiguration) -> str:
    lines = ["dconfig", f"model {cfg.model_id}", f"product {cfg.product_digest or '-'}"]
    for a in cfg.assignments:
        value = a.value if isinstance(a.value, str) else ("true" if a.value else "false")
        lines.append(f"{a.seq} {a.origin} {a.decision} = {value}")
    return "\n".join(lines) + "\n"


def dconfig_read(text: str) -> DmConfiguration:
    lines = _significant_lines(text)
    if not lines or lines[0][1].strip() != "dconfig":
        raise ModelFormatError("missing dconfig header", lines[0][0] if lines else 0)
    cfg = DmConfiguration(model_id="")
    last_seq = -1
    for lineno, raw in lines[1:]:
        body = raw.strip()
        if body.startswith("model "):
            cfg.model_id = body[6:].strip()
            continue
        if body.startswith("product "):
            digest = body[8:].strip()
            cfg.product_digest = "" if digest == "-" else digest
            continue
        head, eq, value = body.partition("=")
        if not eq:
            raise ModelFormatError("assignment record needs '='", lineno)
        parts = head.split()
        if len(parts) != 3:
            raise ModelFormatError("assignment record is '<seq> <origin> <decision> = <value>'", lineno)
        seq_text, origin, decision = parts
        try:
            seq = int(seq_text)
        except ValueError:
            raise ModelFormatError(f"bad sequence number {seq_text!r}", lineno)
        if origin not in ("preset", "user", "propagated"):
            raise ModelFormatError(f"unknown origin {origin!r}", lineno)
        if seq <= last_seq:
            raise ModelFormatError("sequence numbers must be strictly increasing", lineno)
        last_seq = seq
        value = value.strip()
        parsed = True if value == "true" else False if value == "false" else value
        cfg.assignments.append(DmAssignment(decision, parsed, origin, seq))
    return cfg


# ---------------------------------------------------------------------------
# Decision-model assignment atoms (shared by engine and validators)

def dm_atoms(dm: DecisionModel, assignments: list) -> dict:
    """Atom-key assignment for visibility/rule evaluation.

    Boolean decision ``d`` contributes atom ``d``; an enumeration decision
    assigned option ``o`` contributes ``d=o`` true and ``d=x`` false for every
    other option.  Unassigned decisions contribute nothing (three-valued
    evaluation treats them as unknown).
    """
    out: dict = {}
    for a in assignments:
        d = dm.decisions.get(a.decision)
        if d is None:
            raise KeyError(f"unknown decision {a.decision!r}")
        if d.is_enum:
            for opt in d.range:
                out[f"{d.id}={opt}"] = opt == a.value
        else:
            out[d.id] = bool(a.value)
    return out


def dm_atoms_total(dm: DecisionModel, assignments: list) -> dict:
    """Like dm_atoms but total: unassigned decisions count as false/no option."""
    out = dm_atoms(dm, assignments)
    for d in dm.decisions.values():
        if d.is_enum:
            for opt in d.range:
                out.setdefault(f"{d.id}={opt}", False)
        else:
            out.setdefault(d.id, False)
    return out
