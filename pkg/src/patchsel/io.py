"""Landscape files, strategy strings and CSV/JSON writers."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .analytic import InvasionReport, Outcome
from .errors import ModelError, ParseError
from .landscape import Landscape, Strategy, build_landscape
from .sde_sim import Trajectory

REQUIRED = ("n", "mu", "kappa", "sigma")


def fmt(x) -> str:
    """Decimal text with 17 significant digits (exact float round trip)."""
    if isinstance(x, (str, Outcome)):
        return x.value if isinstance(x, Outcome) else x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def landscape_from_dict(doc: dict) -> Landscape:
    if not isinstance(doc, dict):
        raise ParseError("landscape document must be an object")
    missing = [k for k in REQUIRED if k not in doc]
    if missing:
        raise ParseError(f"landscape is missing field(s): {', '.join(missing)}")
    return build_landscape(doc["n"], doc["mu"], doc["kappa"], doc["sigma"])


def loads_landscape(text: str) -> Landscape:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, e.colno) from None
    return landscape_from_dict(doc)


def load_landscape(path: str | Path) -> Landscape:
    return loads_landscape(Path(path).read_text())


def dumps_landscape(L: Landscape) -> str:
    # json writes floats with repr, the shortest string that round-trips exactly
    return json.dumps(L.to_dict(), indent=2) + "\n"


def save_landscape(L: Landscape, path: str | Path) -> None:
    Path(path).write_text(dumps_landscape(L))


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",") if t.strip() != ""])
    except ValueError as e:
        raise ParseError(f"cannot parse vector {text!r}: {e}") from None


def parse_strategy(text: str) -> Strategy:
    return Strategy(parse_vector(text))


def format_vector(v: Iterable[float]) -> str:
    return ",".join(fmt(x) for x in v)


def report_row(report: InvasionReport) -> list[str]:
    return [fmt(getattr(report, f)) for f in InvasionReport.FIELDS]


def write_csv(stream: IO[str], header: Sequence[str], rows: Iterable[Sequence], comment: str | None = None) -> None:
    """CSV with ``\\n`` line endings; an optional ``#`` comment line precedes the header."""
    if comment:
        stream.write(f"# {comment}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])


def write_trajectory(stream: IO[str], traj: Trajectory, comment: str | None = None) -> None:
    header = ["t", *traj.labels]
    rows = ([t, *s] for t, s in zip(traj.times, traj.states))
    write_csv(stream, header, rows, comment)


def read_csv(path_or_stream) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a CSV written by :func:`write_csv`, skipping comment lines."""
    if isinstance(path_or_stream, (str, Path)):
        text = Path(path_or_stream).read_text()
    else:
        text = path_or_stream.read()
    lines = [ln for ln in text.split("\n") if ln and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Outcome):
        return o.value
    raise TypeError(f"not serializable: {type(o).__name__}")


def error_name(e: BaseException) -> str:
    return type(e).__name__ if isinstance(e, ModelError) else "Error"
