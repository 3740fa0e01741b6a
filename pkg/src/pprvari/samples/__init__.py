"""Bundled sample models used by the documentation, the demo, and the tests."""

from __future__ import annotations

from pathlib import Path

_HERE = Path(__file__).parent

SHIFT_FORK_NAME = "shiftfork"


def shift_fork_ppr_path() -> Path:
    return _HERE / "shiftfork" / "shiftfork.ppr"


def shift_fork_base_path() -> Path:
    return _HERE / "shiftfork" / "base.fbn"


def shift_fork_delta_dir() -> Path:
    return _HERE / "shiftfork" / "deltas"
