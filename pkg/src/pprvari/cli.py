"""Command-line entry point wiring the whole workflow.

    pprvari validate model.ppr
    pprvari transform model.ppr --out ws/
    pprvari stats model.ppr --format table
    pprvari configure --workspace ws/
    pprvari metrics --workspace ws/
    pprvari generate --workspace ws/ --base base.fbn --out variant.fbn
    pprvari serve --workspace ws/ --port 8420

Exit codes: 0 success, 1 validation errors, 2 usage errors, 3 internal errors.
Diagnostics go to stderr, payload to stdout.
"""

from __future__ import annotations

import json
import socket
import sys
from pathlib import Path

import click

from . import engine as engine_mod
from .deltas import DeltaError, generate_artifact, parse_fbn, write_fbn
from .engine import StagedSession, permutations
from .ppr import PprParseError, parse_ppr, validate_model
from .transform import model_statistics, transform
from .vmodels import dconfig_write, mandatory_closure
from .workspace import (
    WorkspaceError, create_workspace, delta_dir, load_snapshot, load_workspace, save_snapshot,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


class CliError(click.ClickException):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.exit_code = code


def _read_model(path: Path):
    if not path.exists():
        raise CliError(f"no such file: {path}", EXIT_USAGE)
    try:
        return parse_ppr(path.read_text(encoding="utf-8"))
    except PprParseError as exc:
        for d in exc.diagnostics:
            click.echo(d.render(), err=True)
        sys.exit(EXIT_INVALID)


@click.group()
def main():
    """Variability toolchain for product-process-resource models."""


@main.command()
@click.argument("ppr_file", type=click.Path(path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["text", "structured"]), default="text")
def validate(ppr_file: Path, fmt: str):
    """Parse and validate a PPR file."""
    model, warnings = _read_model(ppr_file)
    diagnostics = warnings + validate_model(model)
    errors = [d for d in diagnostics if d.severity == "error"]
    if fmt == "structured":
        payload = {
            "ok": not errors,
            "diagnostics": [
                {"severity": d.severity, "message": d.message, "line": d.line,
                 "column": d.column, "unit": d.unit_id, "rule": d.rule}
                for d in diagnostics
            ],
        }
        click.echo(json.dumps(payload, indent=2))
    else:
        for d in diagnostics:
            click.echo(d.render(), err=True)
        click.echo("OK" if not errors else f"{len(errors)} error(s)")
    sys.exit(EXIT_INVALID if errors else EXIT_OK)


workspace_option = click.option(
    "--workspace", "workspace_dir", type=click.Path(path_type=Path),
    envvar="PPRVARI_WORKSPACE", required=True,
    help="Workspace directory (defaults to $PPRVARI_WORKSPACE).")


@main.command("transform")
@click.argument("ppr_file", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), envvar="PPRVARI_WORKSPACE",
              required=True, help="Output workspace directory (defaults to $PPRVARI_WORKSPACE).")
@click.option("--name", default=None, help="Model name; defaults to the file stem.")
def transform_cmd(ppr_file: Path, out_dir: Path, name: str | None):
    """Derive the variability models into a workspace directory."""
    _read_model(ppr_file)  # surfaces parse errors with exit 1
    try:
        ws = create_workspace(ppr_file, out_dir, name)
    except Exception as exc:
        raise CliError(str(exc), EXIT_INVALID)
    for w in ws.output.warnings:
        click.echo(f"warning: {w}", err=True)
    click.echo(f"workspace written to {out_dir}")
    sys.exit(EXIT_OK)


def _stats_table(report) -> str:
    rows = [
        ("ppr.products", report.ppr["n_products"]),
        ("ppr.product_components", report.ppr["n_product_components"]),
        ("ppr.processes", report.ppr["n_processes"]),
        ("ppr.resources", report.ppr["n_resources"]),
        ("ppr.constraints", report.ppr["n_constraints"]),
        ("product_fm.features", report.product_fm["n_features"]),
        ("product_fm.xor_groups", report.product_fm["n_xor"]),
        ("product_fm.or_groups", report.product_fm["n_or"]),
        ("product_fm.tree_edges", report.product_fm["n_tree"]),
        ("product_fm.tree_height", report.product_fm["tree_height"]),
        ("product_fm.configurations", report.product_fm["n_configs"]),
        ("process_dm.decisions", report.process_dm["n_decisions"]),
        ("process_dm.rules", report.process_dm["n_rules"]),
        ("process_dm.visibility_conditions", report.process_dm["n_visibility"]),
        ("resource_fm.features", report.resource_fm["n_features"]),
        ("resource_fm.xor_groups", report.resource_fm["n_xor"]),
        ("resource_fm.or_groups", report.resource_fm["n_or"]),
        ("resource_fm.tree_edges", report.resource_fm["n_tree"]),
        ("resource_fm.tree_height", report.resource_fm["tree_height"]),
        ("cdc.rules", report.n_cdc_rules),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


@main.command()
@click.argument("ppr_file", type=click.Path(path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["text", "table", "structured"]), default="text")
@click.option("--limit", default=100000, help="Configuration counting cap.")
def stats(ppr_file: Path, fmt: str, limit: int):
    """Model statistics for a PPR file and its derived models."""
    model, _ = _read_model(ppr_file)
    try:
        out = transform(model, ppr_file.stem)
    except Exception as exc:
        raise CliError(str(exc), EXIT_INVALID)
    report = model_statistics(model, out, config_limit=limit)
    if fmt == "structured":
        from .transform import stats_to_json
        click.echo(stats_to_json(report), nl=False)
    elif fmt == "table":
        click.echo(_stats_table(report))
    else:
        click.echo(
            f"{report.ppr['n_products']} products ({report.ppr['n_product_components']} components), "
            f"{report.ppr['n_processes']} processes, {report.ppr['n_resources']} resources, "
            f"{report.ppr['n_constraints']} constraints")
        click.echo(
            f"product FM: {report.product_fm['n_features']} features, "
            f"{report.product_fm['n_xor']} alternative / {report.product_fm['n_or']} or groups, "
            f"{report.product_fm['n_configs']} configurations")
        click.echo(
            f"process DM: {report.process_dm['n_decisions']} decisions, "
            f"{report.process_dm['n_rules']} rules, "
            f"{report.process_dm['n_visibility']} visibility conditions")
        click.echo(
            f"resource FM: {report.resource_fm['n_features']} features, "
            f"{report.resource_fm['n_or']} or groups")
        click.echo(f"cross-model rules: {report.n_cdc_rules}")
    sys.exit(EXIT_OK)


# ---------------------------------------------------------------------------
# Interactive / scripted configuration

def _print_queue(session: StagedSession) -> None:
    click.echo("queue:")
    for a in session.process_cfg.assignments:
        if a.origin == "preset":
            continue
        value = a.value if isinstance(a.value, str) else ("true" if a.value else "false")
        click.echo(f"  {a.seq:3d} {a.origin:10s} {a.decision} = {value}")


def _product_prompt_lines(session: StagedSession) -> list:
    fm = session.workspace.product_fm
    lines = ["product features ([m]=mandatory, auto-included; groups pick members):"]
    for f in fm.features.values():
        if f.id == fm.root:
            continue
        depth = fm.depth(f.id)
        parent_group = fm.features[f.parent].group if f.parent else None
        tag = f"<{parent_group}>" if parent_group else (
            "[m]" if f.variability == "mandatory" else "[o]")
        lines.append(f"  {'    ' * (depth - 1)}{tag} {f.id}")
    return lines


def _configure_loop(session: StagedSession, answers, workspace_dir: Path) -> int:
    fm = session.workspace.product_fm

    def ask(prompt: str) -> str:
        if answers is not None:
            try:
                line = next(answers)
            except StopIteration:
                raise CliError("answer script exhausted before the session finished", EXIT_INVALID)
            click.echo(f"{prompt} {line}")
            return line
        return click.prompt(prompt, default="", show_default=False)

    while session.stage == "product":
        for line in _product_prompt_lines(session):
            click.echo(line)
        raw = ask("select features (comma-separated ids)>")
        picked = {p.strip() for p in raw.split(",") if p.strip()}
        try:
            selection = mandatory_closure(fm, picked)
        except KeyError as exc:
            click.echo(f"invalid: {exc}", err=True)
            continue
        violations = session.set_product_config(selection)
        for v in violations:
            click.echo(f"invalid: {v}", err=True)

    while session.stage == "process":
        visible = session.visible_decisions()
        if visible:
            click.echo("visible process steps:")
            for i, did in enumerate(visible, start=1):
                click.echo(f"  {i}. {did}")
        else:
            click.echo("no visible steps left; 'finish' closes the stage")
        raw = ask("take <id> [true|false] | rollback <n> | metrics | finish>").strip()
        if not raw:
            continue
        parts = raw.split()
        try:
            if parts[0] == "finish":
                session.finish_process()
            elif parts[0] == "rollback":
                session.rollback(int(parts[1]) if len(parts) > 1 else 1)
                _print_queue(session)
            elif parts[0] == "metrics":
                metric = session.sequence_space()
                click.echo(json.dumps(metric.as_dict(), indent=2))
            elif parts[0] == "take":
                if len(parts) < 2:
                    click.echo("usage: take <id> [true|false]", err=True)
                    continue
                value = True if len(parts) < 3 else parts[2].lower() == "true"
                session.take_decision(parts[1], value)
                _print_queue(session)
            else:  # bare decision id means take it
                session.take_decision(parts[0], True)
                _print_queue(session)
        except engine_mod.EngineError as exc:
            click.echo(f"invalid: {exc}", err=True)

    while session.stage == "resource":
        pre = session.resource_preselection
        click.echo("resource preselection:")
        click.echo(f"  required: {', '.join(pre.required) or '-'}")
        click.echo(f"  required groups: {', '.join(pre.required_groups) or '-'}")
        click.echo(f"  locked out: {', '.join(pre.locked) or '-'}")
        raw = ask("select resources (comma-separated ids)>")
        picked = {p.strip() for p in raw.split(",") if p.strip()} | set(pre.required)
        try:
            violations = session.set_resource_config(picked)
        except KeyError as exc:
            click.echo(f"invalid: {exc}", err=True)
            continue
        for v in violations:
            click.echo(f"invalid: {v}", err=True)

    sequence = session.production_sequence()
    click.echo("production sequence: " + " -> ".join(sequence))
    dconfig_path = workspace_dir / "process.dconfig"
    dconfig_path.write_text(dconfig_write(session.process_cfg), encoding="utf-8")
    resource_path = workspace_dir / "resource.selection"
    resource_path.write_text(
        "\n".join(sorted(session.resource_cfg.selected)) + "\n", encoding="utf-8")
    snapshot = save_snapshot(workspace_dir, session)
    click.echo(f"written: {dconfig_path.name}, {resource_path.name}, {snapshot.name}")
    return EXIT_OK


@main.command()
@workspace_option
@click.option("--resume", "resume_file", type=click.Path(path_type=Path), default=None,
              help="Resume from a session snapshot.")
@click.option("--script", "script_file", type=click.Path(path_type=Path), default=None,
              help="Read prompt answers from a file instead of the terminal.")
def configure(workspace_dir: Path, resume_file: Path | None, script_file: Path | None):
    """Staged configuration: product, process sequence, resources."""
    try:
        ws = load_workspace(workspace_dir)
    except (WorkspaceError, PprParseError) as exc:
        raise CliError(str(exc), EXIT_USAGE)
    if resume_file is not None:
        session = load_snapshot(ws, resume_file)
    else:
        session = StagedSession.create(ws)
    answers = None
    if script_file is not None:
        if not script_file.exists():
            raise CliError(f"no such file: {script_file}", EXIT_USAGE)
        answers = iter(script_file.read_text(encoding="utf-8").splitlines())
    sys.exit(_configure_loop(session, answers, Path(workspace_dir)))


@main.command()
@workspace_option
@click.option("--dconfig", "dconfig_file", type=click.Path(path_type=Path), default=None,
              help="Replay this decision queue (defaults to the workspace snapshot).")
@click.option("--perm", nargs=2, type=int, default=None,
              help="Just compute permutations N R and exit.")
@click.option("--format", "fmt", type=click.Choice(["text", "structured"]), default="text")
def metrics(workspace_dir: Path, dconfig_file: Path | None, perm, fmt: str):
    """Configuration-space metric for a session (full space vs staged sum)."""
    if perm is not None:
        n, r = perm
        try:
            value = permutations(n, r)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_USAGE)
        click.echo(str(value))
        sys.exit(EXIT_OK)
    try:
        ws = load_workspace(workspace_dir)
    except (WorkspaceError, PprParseError) as exc:
        raise CliError(str(exc), EXIT_USAGE)
    snapshot_path = Path(workspace_dir) / "session.json"
    if dconfig_file is None and not snapshot_path.exists():
        raise CliError("no session snapshot; run 'pprvari configure' first", EXIT_USAGE)
    if dconfig_file is not None:
        from .vmodels import dconfig_read
        cfg = dconfig_read(Path(dconfig_file).read_text(encoding="utf-8"))
        session = StagedSession.create(ws)
        session.stage = "process"
        session.process_cfg = cfg
        session.product_cfg = None
    else:
        session = load_snapshot(ws, snapshot_path)
    try:
        metric = session.sequence_space()
    except engine_mod.EngineError as exc:
        raise CliError(str(exc), EXIT_USAGE)
    if fmt == "structured":
        click.echo(json.dumps(metric.as_dict(), indent=2))
    else:
        click.echo(f"explorable decisions (n): {metric.n}")
        click.echo(f"full sequence space n!: {metric.full_space}")
        click.echo(f"stages: {' + '.join(f'{s}!' for s in metric.stage_sizes) or '-'}")
        click.echo(f"reduced sequence space: {metric.reduced_space}")
    sys.exit(EXIT_OK)


@main.command()
@workspace_option
@click.option("--base", "base_file", type=click.Path(path_type=Path), required=True)
@click.option("--out", "out_file", type=click.Path(path_type=Path), required=True)
@click.option("--deltas", "deltas_dir", type=click.Path(path_type=Path), default=None,
              help="Delta directory (defaults to <workspace>/deltas).")
@click.option("--session", "session_file", type=click.Path(path_type=Path), default=None,
              help="Session snapshot (defaults to <workspace>/session.json).")
def generate(workspace_dir: Path, base_file: Path, out_file: Path,
             deltas_dir: Path | None, session_file: Path | None):
    """Generate the control-code variant for a completed session."""
    try:
        ws = load_workspace(workspace_dir)
    except (WorkspaceError, PprParseError) as exc:
        raise CliError(str(exc), EXIT_USAGE)
    if not Path(base_file).exists():
        raise CliError(f"no such file: {base_file}", EXIT_USAGE)
    session_path = Path(session_file) if session_file else Path(workspace_dir) / "session.json"
    if not session_path.exists():
        raise CliError(f"no session snapshot at {session_path}", EXIT_USAGE)
    session = load_snapshot(ws, session_path)
    base = parse_fbn(Path(base_file).read_text(encoding="utf-8"))
    directory = Path(deltas_dir) if deltas_dir else delta_dir(workspace_dir)
    try:
        network, report = generate_artifact(session, base, directory)
    except DeltaError as exc:
        click.echo(f"generation failed: {exc}", err=True)
        sys.exit(EXIT_INVALID)
    Path(out_file).write_text(write_fbn(network), encoding="utf-8")
    click.echo(report.render(), nl=False)
    click.echo(f"artifact written to {out_file}")
    sys.exit(EXIT_OK if report.passed else EXIT_INVALID)


@main.command()
@workspace_option
@click.option("--port", default=8420, help="TCP port; 0 picks an ephemeral port.")
@click.option("--host", default="127.0.0.1")
def serve(workspace_dir: Path, port: int, host: str):
    """Run the local configuration service."""
    import uvicorn

    from .service import create_app

    try:
        ws_dir = Path(workspace_dir)
        load_workspace(ws_dir)
    except (WorkspaceError, PprParseError) as exc:
        raise CliError(str(exc), EXIT_USAGE)
    if port == 0:
        probe = socket.socket()
        probe.bind((host, 0))
        port = probe.getsockname()[1]
        probe.close()
    else:
        probe = socket.socket()
        try:
            probe.bind((host, port))
        except OSError:
            raise CliError(f"port {port} is not available", EXIT_USAGE)
        finally:
            probe.close()
    click.echo(f"listening on http://{host}:{port}", err=False)
    app = create_app(ws_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def run() -> None:
    try:
        main(standalone_mode=True)
    except Exception as exc:  # pragma: no cover - last resort
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(EXIT_INTERNAL)


if __name__ == "__main__":
    run()
