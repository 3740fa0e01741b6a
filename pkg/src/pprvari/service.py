"""Local HTTP/JSON API exposing the staged configuration engine.

Thin adapter over :mod:`pprvari.engine`: every response mirrors the engine
state, no business rules live here.  Sessions are kept in memory, serialized
per session, and snapshotted into the workspace directory on every mutation so
an interrupted run can resume.

Endpoints (all under /v1):

    POST /sessions                          create a session          -> 201
    GET  /sessions/{id}                     full session view
    POST /sessions/{id}/product             submit product selection
    POST /sessions/{id}/process/decisions   take one decision
    POST /sessions/{id}/process/rollback    undo trailing decisions
    POST /sessions/{id}/process/finish      close the process stage
    POST /sessions/{id}/resource            submit resource selection
    POST /sessions/{id}/generate            generate the artifact
    GET  /sessions/{id}/metrics             sequence-space metric
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ConfigDict

from .deltas import DeltaError, generate_artifact, parse_fbn, write_fbn
from .engine import (
    DecisionError, StageError, StagedSession, STAGE_PROCESS, STAGE_PRODUCT,
)
from .logic import FALSE, TRUE, render_expr
from .vmodels import mandatory_closure
from .workspace import delta_dir, load_workspace


class ProductBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    selected: list[str]


class DecisionBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    decision: str
    value: bool | str


class RollbackBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    count: int


class ResourceBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    selected: list[str]


class GenerateBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    base: str = "base.fbn"


@dataclass
class SessionRecord:
    id: str
    session: StagedSession
    lock: threading.Lock = field(default_factory=threading.Lock)


def _fm_view(fm) -> dict:
    return {
        "model_id": fm.model_id,
        "root": fm.root,
        "features": [
            {
                "id": f.id, "name": f.name, "parent": f.parent, "abstract": f.abstract,
                "variability": f.variability, "group": f.group,
            }
            for f in fm.features.values()
        ],
    }


def _dm_view(dm) -> dict:
    def vis(d):
        if d.visibility == TRUE:
            return "true"
        if d.visibility == FALSE:
            return "false"
        return render_expr(d.visibility)

    return {
        "model_id": dm.model_id,
        "decisions": [
            {
                "id": d.id, "question": d.question,
                "type": "enumeration" if d.is_enum else "boolean",
                "range": d.range, "visible_if": vis(d),
                "rules": [render_expr(r) for r in d.rules],
            }
            for d in dm.decisions.values()
        ],
    }


def _session_view(record: SessionRecord) -> dict:
    s = record.session
    ws = s.workspace
    view = {
        "id": record.id,
        "stage": s.stage,
        "models": {
            "name": ws.name,
            "product_fm": _fm_view(ws.product_fm),
            "process_dm": _dm_view(ws.process_dm),
            "resource_fm": _fm_view(ws.resource_fm),
            "cdc_rules": [r.render() for r in ws.cdcs],
        },
        "product": {
            "preselected": sorted(mandatory_closure(ws.product_fm)),
            "selected": sorted(s.product_cfg.selected) if s.product_cfg else None,
        },
        "process": {
            "visible": s.visible_decisions() if s.stage == STAGE_PROCESS else [],
            "queue": [
                {"decision": a.decision, "value": a.value, "origin": a.origin, "seq": a.seq}
                for a in (s.process_cfg.assignments if s.process_cfg else [])
                if a.origin != "preset"
            ],
            "presets": [
                {"decision": a.decision, "value": a.value, "seq": a.seq}
                for a in (s.process_cfg.assignments if s.process_cfg else [])
                if a.origin == "preset"
            ],
            "sequence": s.production_sequence() if s.process_cfg else [],
        },
        "resource": {
            "required": s.resource_preselection.required if s.resource_preselection else [],
            "required_groups": s.resource_preselection.required_groups if s.resource_preselection else [],
            "locked": s.resource_preselection.locked if s.resource_preselection else [],
            "selected": sorted(s.resource_cfg.selected) if s.resource_cfg else None,
        },
        "metrics": s.metrics_cache.as_dict() if s.metrics_cache else None,
    }
    return view


def create_app(workspace_dir: Path, persist: bool = True) -> FastAPI:
    workspace_dir = Path(workspace_dir)
    app = FastAPI(title="pprvari configuration service", version="1")
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"http://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )
    records: dict = {}
    records_lock = threading.Lock()
    snapshot_dir = workspace_dir / "sessions"

    def persist_record(record: SessionRecord) -> None:
        if not persist:
            return
        snapshot_dir.mkdir(parents=True, exist_ok=True)
        (snapshot_dir / f"{record.id}.json").write_text(
            record.session.to_snapshot(), encoding="utf-8")

    def get_record(session_id: str) -> SessionRecord:
        with records_lock:
            record = records.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return record

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "workspace": str(workspace_dir)}

    @app.post("/v1/sessions", status_code=201)
    def create_session():
        try:
            workspace = load_workspace(workspace_dir)
            session = StagedSession.create(workspace)
        except Exception as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        record = SessionRecord(id=uuid.uuid4().hex[:12], session=session)
        with records_lock:
            records[record.id] = record
        persist_record(record)
        return {
            "id": record.id,
            "stage": session.stage,
            "models": _session_view(record)["models"],
        }

    @app.get("/v1/sessions/{session_id}")
    def get_state(session_id: str):
        record = get_record(session_id)
        with record.lock:
            return _session_view(record)

    @app.post("/v1/sessions/{session_id}/product")
    def post_product(session_id: str, body: ProductBody):
        record = get_record(session_id)
        with record.lock:
            s = record.session
            if s.stage != STAGE_PRODUCT:
                raise HTTPException(status_code=409, detail=f"stage is {s.stage!r}, not product")
            try:
                violations = s.set_product_config(set(body.selected))
            except KeyError as exc:
                raise HTTPException(status_code=409, detail=f"unknown feature {exc}")
            if violations:
                raise HTTPException(status_code=409, detail={"violations": violations})
            persist_record(record)
            return _session_view(record)

    @app.post("/v1/sessions/{session_id}/process/decisions")
    def post_decision(session_id: str, body: DecisionBody):
        record = get_record(session_id)
        with record.lock:
            s = record.session
            decision = s.workspace.process_dm.decisions.get(body.decision)
            if decision is not None:
                bad_type = decision.is_enum and not isinstance(body.value, str) or \
                    not decision.is_enum and not isinstance(body.value, bool)
                if bad_type or (decision.is_enum and body.value not in decision.range):
                    raise HTTPException(
                        status_code=422,
                        detail=f"value {body.value!r} is outside the range of {body.decision!r}")
            try:
                propagated = s.take_decision(body.decision, body.value)
            except StageError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except DecisionError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            persist_record(record)
            view = _session_view(record)
            view["propagated"] = [{"decision": d, "value": v} for d, v in propagated]
            return view

    @app.post("/v1/sessions/{session_id}/process/rollback")
    def post_rollback(session_id: str, body: RollbackBody):
        record = get_record(session_id)
        with record.lock:
            try:
                record.session.rollback(body.count)
            except (StageError, DecisionError) as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            persist_record(record)
            return _session_view(record)

    @app.post("/v1/sessions/{session_id}/process/finish")
    def post_finish(session_id: str):
        record = get_record(session_id)
        with record.lock:
            s = record.session
            try:
                sequence = s.finish_process()
            except StageError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except DecisionError as exc:
                raise HTTPException(
                    status_code=409,
                    detail={"pending": s.visible_decisions(), "message": str(exc)})
            persist_record(record)
            view = _session_view(record)
            view["sequence"] = sequence
            return view

    @app.post("/v1/sessions/{session_id}/resource")
    def post_resource(session_id: str, body: ResourceBody):
        record = get_record(session_id)
        with record.lock:
            s = record.session
            try:
                violations = s.set_resource_config(set(body.selected))
            except StageError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except KeyError as exc:
                raise HTTPException(status_code=409, detail=f"unknown resource {exc}")
            if violations:
                raise HTTPException(status_code=409, detail={"violations": violations})
            persist_record(record)
            return _session_view(record)

    @app.post("/v1/sessions/{session_id}/generate")
    def post_generate(session_id: str, body: GenerateBody):
        record = get_record(session_id)
        with record.lock:
            s = record.session
            base_path = workspace_dir / Path(body.base).name
            if not base_path.exists():
                raise HTTPException(status_code=409, detail=f"no base artifact {base_path.name!r}")
            base = parse_fbn(base_path.read_text(encoding="utf-8"))
            try:
                network, report = generate_artifact(s, base, delta_dir(workspace_dir))
            except DeltaError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            return {
                "id": record.id,
                "passed": report.passed,
                "report": report.render(),
                "entries": [
                    {"kind": e.kind, "element": e.element, "ok": e.ok, "detail": e.detail}
                    for e in report.entries
                ],
                "warnings": report.warnings,
                "artifact": write_fbn(network),
            }

    @app.get("/v1/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        record = get_record(session_id)
        with record.lock:
            try:
                metric = record.session.sequence_space()
            except StageError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            return metric.as_dict()

    return app
