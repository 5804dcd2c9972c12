"""CSV and run-directory persistence.

Every CSV is UTF-8 with LF line endings, a single header row whose first column
is the schema version, and repr-formatted floats so a re-run from the same
(config, seed) reproduces the bytes exactly.
"""

from __future__ import annotations

from pathlib import Path

from .studies import StudyResult

SCHEMA_VERSION = 1


def _format_cell(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path, columns: list[str], rows: list[list[object]]) -> None:
    lines = [",".join(["schema_version"] + columns)]
    for row in rows:
        lines.append(",".join([str(SCHEMA_VERSION)] + [_format_cell(v) for v in row]))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def write_study_csv(result: StudyResult, path: str | Path) -> None:
    write_csv(path, result.columns, result.rows)


def write_verdicts(result: StudyResult, path: str | Path) -> None:
    lines = [f"study = {result.study}"]
    if result.config is not None:
        for key, value in result.config.provenance().items():
            lines.append(f"{key} = {value}")
    for name, reg in result.slopes.items():
        lines.append(
            f"slope {name}: {reg.slope!r} +/- {reg.stderr!r} (R^2 = {reg.r2!r}, m = {reg.npoints})"
        )
    lines.extend(result.verdict_lines())
    for note in result.notes:
        lines.append(f"note: {note}")
    lines.append("overall = " + ("PASS" if result.passed else "FAIL"))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def write_resolved_config(pairs: dict[str, object], path: str | Path) -> None:
    """Resolved run configuration in the same `key = value` grammar the parser reads."""
    from . import __version__

    lines = [f"# resolved configuration (reproduces this run; wsnl {__version__})"]
    for key, value in pairs.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
