"""Bundled fixtures and golden-file verification."""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .render import render
from .report import run_report, simulation_config
from .spec import TrialSpec, loads_spec

FIXTURES = ("A", "B", "C_week26", "C_full")


def _dir():
    return resources.files(__package__).joinpath("fixtures")


def fixture_text(name: str) -> str:
    return _dir().joinpath(f"{name}.json").read_text(encoding="utf-8")


def load_fixture(name: str) -> TrialSpec:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    return loads_spec(fixture_text(name))


def golden_text(name: str) -> bytes:
    return _dir().joinpath("golden", f"{name}.txt").read_bytes()


def render_fixture(name: str, fmt: str = "text", workers: int = 1) -> bytes:
    spec = load_fixture(name)
    return render(run_report(spec, simulation_config(spec, workers=workers)), fmt)


@dataclass(frozen=True)
class VerifyResult:
    name: str
    ok: bool
    diff: str = ""


def verify(names: Optional[list] = None, workers: int = 1) -> list[VerifyResult]:
    """Render each fixture as text and compare it byte-for-byte with its golden file."""
    out = []
    for name in names or FIXTURES:
        got = render_fixture(name, "text", workers)
        want = golden_text(name)
        diff = ""
        if got != want:
            diff = "".join(difflib.unified_diff(
                want.decode("utf-8").splitlines(True), got.decode("utf-8").splitlines(True),
                f"golden/{name}.txt", "rendered"))
        out.append(VerifyResult(name, got == want, diff))
    return out
