"""Workspace directory handling.

A workspace is one directory that threads state between the toolchain steps:

    model.ppr      source PPR model (copied in by the transform step)
    product.fm     generated product feature model
    process.dm     generated process decision model
    resource.fm    generated resource feature model
    links.cdc      generated cross-model rules
    stats.json     model statistics
    deltas/        optional delta files for artifact generation
    session.json   optional staged-session snapshot
"""

from __future__ import annotations

from pathlib import Path

from .engine import StagedSession, Workspace
from .ppr import parse_ppr
from .transform import TransformOutput, write_workspace
from .vmodels import cdc_read, dm_read, fm_read

SNAPSHOT_FILE = "session.json"
DELTA_DIR = "deltas"


class WorkspaceError(ValueError):
    pass


def create_workspace(ppr_path: Path, out_dir: Path, name: str | None = None) -> Workspace:
    """Transform a PPR file into a fresh workspace directory."""
    ppr_path = Path(ppr_path)
    text = ppr_path.read_text(encoding="utf-8")
    model, _ = parse_ppr(text)
    name = name or ppr_path.stem
    output = write_workspace(model, name, Path(out_dir))
    return Workspace(ppr=model, name=name, output=output)


def load_workspace(directory: Path) -> Workspace:
    directory = Path(directory)
    required = ["model.ppr", "product.fm", "process.dm", "resource.fm", "links.cdc"]
    missing = [f for f in required if not (directory / f).exists()]
    if missing:
        raise WorkspaceError(f"workspace {directory} is missing: {', '.join(missing)}")
    model, _ = parse_ppr((directory / "model.ppr").read_text(encoding="utf-8"))
    product_fm = fm_read((directory / "product.fm").read_text(encoding="utf-8"))
    process_dm = dm_read((directory / "process.dm").read_text(encoding="utf-8"))
    resource_fm = fm_read((directory / "resource.fm").read_text(encoding="utf-8"))
    cdcs = cdc_read((directory / "links.cdc").read_text(encoding="utf-8"))
    if not product_fm.model_id.endswith("_product"):
        raise WorkspaceError(f"unexpected product model id {product_fm.model_id!r}")
    name = product_fm.model_id[: -len("_product")]
    output = TransformOutput(
        product_fm=product_fm, process_dm=process_dm, resource_fm=resource_fm, cdcs=cdcs)
    return Workspace(ppr=model, name=name, output=output)


def delta_dir(workspace_dir: Path) -> Path:
    return Path(workspace_dir) / DELTA_DIR


def save_snapshot(workspace_dir: Path, session: StagedSession) -> Path:
    path = Path(workspace_dir) / SNAPSHOT_FILE
    path.write_text(session.to_snapshot(), encoding="utf-8")
    return path


def load_snapshot(workspace: Workspace, path: Path) -> StagedSession:
    return StagedSession.from_snapshot(workspace, Path(path).read_text(encoding="utf-8"))
