"""Function-block networks, delta models, and variant generation.

The control-code artifact is a deliberately small stand-in for a function
block application: named, typed blocks plus event connections::

    application ShiftForkCaseStudyApp {
        fb InsertLock1 : InsertLock1;
        fb E_REND_WeldLock1 : E_REND;
        event InsertLock1.CNF -> WeldLock1.REQ;
    }

Delta files specialize a 150% base application::

    delta DLock1;
    uses ShiftForkCaseStudyApp;
    {
        <Remove> NetworkElement name=InsertLock1;
        <Add> FB name=UltrasonicWeldingRobot16 type=UltrasonicWeldingRobot_16;
        <Add> EventConnection UltrasonicWeldingRobot16.CNF PopulatedPipe.REQ;
    }

A ``deltaFile`` attribute on a process or resource binds the delta to that
element.  A plain binding fires when the element is part of the configured
variant; a ``!`` prefix inverts it -- the delta (typically removing the
element's blocks from the 150% base) fires when the element is NOT selected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .engine import STAGE_DONE, StagedSession

DELTA_ATTRIBUTE = "deltaFile"


class FbnError(ValueError):
    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class DeltaError(ValueError):
    pass


@dataclass
class FbNetwork:
    app_name: str
    blocks: dict = field(default_factory=dict)   # name -> type id, insertion order
    connections: list = field(default_factory=list)  # (src, src_port, dst, dst_port)

    def copy(self) -> "FbNetwork":
        return FbNetwork(self.app_name, dict(self.blocks), list(self.connections))

    def has_connection(self, conn: tuple) -> bool:
        return conn in self.connections


# ---------------------------------------------------------------------------
# .fbn format

def parse_fbn(text: str) -> FbNetwork:
    lines = _lines(text)
    if not lines:
        raise FbnError("empty application file")
    lineno, head = lines[0]
    head = head.strip()
    if not (head.startswith("application ") and head.endswith("{")):
        raise FbnError("expected 'application <name> {'", lineno)
    network = FbNetwork(app_name=head[len("application "):-1].strip())
    closed = False
    for lineno, raw in lines[1:]:
        stmt = raw.strip()
        if stmt == "}":
            closed = True
            continue
        if closed:
            raise FbnError("statements after closing '}'", lineno)
        if not stmt.endswith(";"):
            raise FbnError("statement must end with ';'", lineno)
        stmt = stmt[:-1].strip()
        if stmt.startswith("fb "):
            body = stmt[3:]
            name, sep, type_id = body.partition(":")
            name, type_id = name.strip(), type_id.strip()
            if not sep or not name or not type_id:
                raise FbnError("block statement is 'fb <name> : <type>'", lineno)
            if name in network.blocks:
                raise FbnError(f"duplicate block {name!r}", lineno)
            network.blocks[name] = type_id
        elif stmt.startswith("event "):
            body = stmt[6:]
            src, sep, dst = body.partition("->")
            if not sep:
                raise FbnError("event statement is 'event A.P -> B.Q'", lineno)
            conn = _endpoint(src, lineno) + _endpoint(dst, lineno)
            for endpoint in (conn[0], conn[2]):
                if endpoint not in network.blocks:
                    raise FbnError(f"connection endpoint {endpoint!r} is not a declared block", lineno)
            network.connections.append(conn)
        else:
            raise FbnError(f"unknown statement {stmt.split(' ')[0]!r}", lineno)
    if not closed:
        raise FbnError("missing closing '}'")
    return network


def _endpoint(text: str, lineno: int) -> tuple:
    block, sep, port = text.strip().partition(".")
    if not sep or not block.strip() or not port.strip():
        raise FbnError(f"malformed endpoint {text.strip()!r}", lineno)
    return block.strip(), port.strip()


def _lines(text: str) -> list:
    out = []
    for i, line in enumerate(text.splitlines(), start=1):
        body = line.split("//", 1)[0].rstrip()
        if body.strip():
            out.append((i, body))
    return out


def write_fbn(network: FbNetwork) -> str:
    lines = [f"application {network.app_name} {{"]
    for name, type_id in network.blocks.items():
        lines.append(f"    fb {name} : {type_id};")
    for src, sport, dst, dport in network.connections:
        lines.append(f"    event {src}.{sport} -> {dst}.{dport};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Delta models

@dataclass
class RemoveElement:
    name: str


@dataclass
class AddBlock:
    name: str
    type_id: str


@dataclass
class AddEventConnection:
    src: str
    src_port: str
    dst: str
    dst_port: str


@dataclass
class RemoveEventConnection:
    src: str
    src_port: str
    dst: str
    dst_port: str


@dataclass
class DeltaModel:
    name: str
    uses: str
    ops: list = field(default_factory=list)


@dataclass
class DeltaBinding:
    element: tuple      # (category, unit id)
    delta_name: str
    negated: bool


def parse_delta(text: str) -> DeltaModel:
    lines = _lines(text)
    if len(lines) < 2:
        raise FbnError("delta file needs 'delta' and 'uses' headers")
    lineno, head = lines[0]
    head = head.strip()
    if not (head.startswith("delta ") and head.endswith(";")):
        raise FbnError("expected 'delta <name>;'", lineno)
    name = head[len("delta "):-1].strip()
    lineno, uses_line = lines[1]
    uses_line = uses_line.strip()
    if not (uses_line.startswith("uses ") and uses_line.endswith(";")):
        raise FbnError("expected 'uses <application>;'", lineno)
    uses = uses_line[len("uses "):-1].strip()
    delta = DeltaModel(name=name, uses=uses)
    body = lines[2:]
    if not body or body[0][1].strip() != "{":
        raise FbnError("expected '{' after headers", body[0][0] if body else lineno)
    closed = False
    for lineno, raw in body[1:]:
        stmt = raw.strip()
        if stmt == "}":
            closed = True
            continue
        if closed:
            raise FbnError("statements after closing '}'", lineno)
        if not stmt.endswith(";"):
            raise FbnError("operation must end with ';'", lineno)
        delta.ops.append(_parse_op(stmt[:-1].strip(), lineno))
    if not closed:
        raise FbnError("missing closing '}'")
    return delta


def _parse_op(stmt: str, lineno: int):
    if stmt.startswith("<Remove>"):
        body = stmt[len("<Remove>"):].strip()
        if body.startswith("NetworkElement"):
            rest = body[len("NetworkElement"):].strip()
            if not rest.startswith("name="):
                raise FbnError("remove operation needs name=<element>", lineno)
            return RemoveElement(rest[len("name="):].strip())
        if body.startswith("EventConnection"):
            return RemoveEventConnection(*_two_endpoints(body[len("EventConnection"):], lineno))
        raise FbnError(f"unknown remove target in {stmt!r}", lineno)
    if stmt.startswith("<Add>"):
        body = stmt[len("<Add>"):].strip()
        if body.startswith("FB"):
            rest = body[len("FB"):].strip()
            fields = dict(_kv(part, lineno) for part in rest.split())
            if set(fields) != {"name", "type"}:
                raise FbnError("add-block operation needs name=... type=...", lineno)
            return AddBlock(fields["name"], fields["type"])
        if body.startswith("EventConnection"):
            return AddEventConnection(*_two_endpoints(body[len("EventConnection"):], lineno))
        raise FbnError(f"unknown add target in {stmt!r}", lineno)
    raise FbnError(f"unknown operation keyword in {stmt!r}", lineno)


def _kv(part: str, lineno: int) -> tuple:
    key, sep, value = part.partition("=")
    if not sep or not key or not value:
        raise FbnError(f"malformed clause {part!r}", lineno)
    return key, value


def _two_endpoints(body: str, lineno: int) -> tuple:
    parts = body.split()
    if len(parts) != 2:
        raise FbnError("connection operation needs two endpoints", lineno)
    src = _endpoint(parts[0], lineno)
    dst = _endpoint(parts[1], lineno)
    return src[0], src[1], dst[0], dst[1]


def write_delta(delta: DeltaModel) -> str:
    lines = [f"delta {delta.name};", f"uses {delta.uses};", "{"]
    for op in delta.ops:
        if isinstance(op, RemoveElement):
            lines.append(f"    <Remove> NetworkElement name={op.name};")
        elif isinstance(op, AddBlock):
            lines.append(f"    <Add> FB name={op.name} type={op.type_id};")
        elif isinstance(op, AddEventConnection):
            lines.append(f"    <Add> EventConnection {op.src}.{op.src_port} {op.dst}.{op.dst_port};")
        elif isinstance(op, RemoveEventConnection):
            lines.append(f"    <Remove> EventConnection {op.src}.{op.src_port} {op.dst}.{op.dst_port};")
        else:
            raise TypeError(f"unknown delta operation {op!r}")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Applying deltas

def apply_delta(network: FbNetwork, delta: DeltaModel) -> tuple:
    """New network with the delta applied, plus cascade warnings."""
    if delta.uses != network.app_name:
        raise DeltaError(
            f"delta {delta.name} targets {delta.uses!r}, network is {network.app_name!r}")
    out = network.copy()
    warnings = []
    for op in delta.ops:
        if isinstance(op, RemoveElement):
            if op.name not in out.blocks:
                raise DeltaError(f"delta {delta.name}: element {op.name!r} not in network")
            del out.blocks[op.name]
            kept = []
            for conn in out.connections:
                if conn[0] == op.name or conn[2] == op.name:
                    warnings.append(
                        f"delta {delta.name}: dropped connection "
                        f"{conn[0]}.{conn[1]} -> {conn[2]}.{conn[3]} attached to {op.name}")
                else:
                    kept.append(conn)
            out.connections = kept
        elif isinstance(op, AddBlock):
            if op.name in out.blocks:
                raise DeltaError(f"delta {delta.name}: block {op.name!r} already exists")
            out.blocks[op.name] = op.type_id
        elif isinstance(op, AddEventConnection):
            conn = (op.src, op.src_port, op.dst, op.dst_port)
            for endpoint in (op.src, op.dst):
                if endpoint not in out.blocks:
                    raise DeltaError(
                        f"delta {delta.name}: connection endpoint {endpoint!r} missing")
            if conn not in out.connections:
                out.connections.append(conn)
        elif isinstance(op, RemoveEventConnection):
            conn = (op.src, op.src_port, op.dst, op.dst_port)
            if conn not in out.connections:
                raise DeltaError(
                    f"delta {delta.name}: connection "
                    f"{op.src}.{op.src_port} -> {op.dst}.{op.dst_port} not in network")
            out.connections.remove(conn)
        else:
            raise TypeError(f"unknown delta operation {op!r}")
    return out, warnings


# ---------------------------------------------------------------------------
# Collection from a completed session

def delta_bindings(session: StagedSession) -> list:
    """Bindings in application order: processes carried by the production
    sequence first, remaining processes in declaration order, then resources
    in feature-model order."""
    ws = session.workspace
    bindings = []
    seen = set()

    def add(category: str, unit) -> None:
        raw = unit.attributes.get(DELTA_ATTRIBUTE, "")
        if not isinstance(raw, str) or not raw.strip() or unit.id in seen:
            return
        seen.add(unit.id)
        raw = raw.strip()
        negated = raw.startswith("!")
        bindings.append(DeltaBinding((category, unit.id), raw[1:] if negated else raw, negated))

    sequence = session.production_sequence() if session.process_cfg else []
    for decision_id in sequence:
        unit = ws.ppr.processes.get(decision_id)
        if unit is not None:
            add("process", unit)
    for unit in ws.ppr.processes.values():
        add("process", unit)
    for fid in ws.resource_fm.features:
        unit = ws.ppr.resources.get(fid)
        if unit is not None:
            add("resource", unit)
    return bindings


def _element_selected(session: StagedSession, binding: DeltaBinding) -> bool:
    category, uid = binding.element
    if category == "process":
        return session.process_cfg.value_of(uid) is True
    return uid in (session.resource_cfg.selected if session.resource_cfg else set())


def collect_deltas(session: StagedSession, delta_dir: Path) -> list:
    """Parsed delta models that fire for the session's configuration."""
    if session.stage != STAGE_DONE:
        raise DeltaError("artifact generation needs a completed session")
    fired = []
    for binding in delta_bindings(session):
        selected = _element_selected(session, binding)
        if binding.negated == selected:
            continue  # plain binding w/o selection, or negated binding w/ selection
        path = Path(delta_dir) / f"{binding.delta_name}.delta"
        if not path.exists():
            raise DeltaError(f"delta file {path.name} for {binding.element[1]} not found")
        fired.append(parse_delta(path.read_text(encoding="utf-8")))
    return fired


# ---------------------------------------------------------------------------
# Consistency report and generation

@dataclass
class ReportEntry:
    kind: str      # realized | stale
    element: str
    ok: bool
    detail: str


@dataclass
class ConsistencyReport:
    entries: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.ok for e in self.entries)

    def render(self) -> str:
        lines = [f"consistency: {'PASS' if self.passed else 'FAIL'}"]
        for e in self.entries:
            lines.append(f"  [{'ok' if e.ok else 'FAIL'}] {e.kind} {e.element}: {e.detail}")
        for w in self.warnings:
            lines.append(f"  warning: {w}")
        return "\n".join(lines) + "\n"


def _realizes(network: FbNetwork, element_id: str) -> bool:
    return element_id in network.blocks or element_id in network.blocks.values()


def _never_selectable_processes(session: StagedSession) -> list:
    """Concrete processes whose visibility is already falsified by the taken
    configuration; their blocks must not survive generation."""
    from .logic import eval_partial
    from .vmodels import dm_atoms_total

    ws = session.workspace
    dm = ws.process_dm
    atoms = dm_atoms_total(dm, session.process_cfg.assignments)
    out = []
    for proc in ws.ppr.processes.values():
        if proc.is_abstract or proc.id not in dm.decisions:
            continue
        if session.process_cfg.value_of(proc.id) is not None:
            continue
        if eval_partial(dm.decisions[proc.id].visibility, atoms) is False:
            out.append(proc.id)
    return out


def generate_artifact(session: StagedSession, base: FbNetwork, delta_dir: Path) -> tuple:
    """Apply every fired delta to the base and check the result.

    The report verifies that each selected concrete process and resource is
    realized by an identically-named or identically-typed block, and that no
    block of a never-selectable variant survived.
    """
    if session.stage != STAGE_DONE:
        raise DeltaError("artifact generation needs a completed session")
    network = base
    report = ConsistencyReport()
    for delta in collect_deltas(session, delta_dir):
        network, warnings = apply_delta(network, delta)
        report.warnings.extend(warnings)

    ws = session.workspace
    for proc in ws.ppr.processes.values():
        if proc.is_abstract:
            continue
        if session.process_cfg.value_of(proc.id) is True:
            ok = _realizes(network, proc.id)
            report.entries.append(ReportEntry(
                "realized", proc.id, ok,
                "block present" if ok else "selected process has no block"))
    for fid in ws.resource_fm.features:
        feature = ws.resource_fm.features[fid]
        if feature.abstract:
            continue
        if session.resource_cfg and fid in session.resource_cfg.selected:
            ok = _realizes(network, fid)
            report.entries.append(ReportEntry(
                "realized", fid, ok,
                "block present" if ok else "selected resource has no block"))
    for pid in _never_selectable_processes(session):
        stale = pid in network.blocks
        report.entries.append(ReportEntry(
            "stale", pid, not stale,
            "variant block removed" if not stale else "unselectable variant still in network"))
    locked = session.resource_preselection.locked if session.resource_preselection else []
    for fid in locked:
        stale = _realizes(network, fid)
        report.entries.append(ReportEntry(
            "stale", fid, not stale,
            "no block for locked resource" if not stale else "locked resource still in network"))
    return network, report
