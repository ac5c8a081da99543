"""Plain-text file formats.

* distribution files: ``C X`` header then ``C`` rows of ``X`` decimals; a
  pair is two such blocks separated by a blank line
* curve CSV: ``delta,value``
* points CSV: one accepted simulation sample per row
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .core import JointDistribution, build_joint
from .errors import KLMismatchError, MalformedFileError

CURVE_HEADER = ("delta", "value")
POINTS_HEADER = (
    "index",
    "source",
    "num_classes",
    "num_obs",
    "E_star",
    "E_q",
    "delta_q",
    "tv",
    "kl_cond",
    "kl_joint",
    "bound_nussbaum",
    "bound_refined",
)


def fmt(v: float) -> str:
    """9 significant digits, ``inf`` literal for infinities."""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.9g}"


# --------------------------------------------------------------------------
# distribution files


def _parse_blocks(text: str) -> list[list[tuple[int, str]]]:
    blocks, current = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            if current:
                blocks.append(current)
                current = []
            continue
        current.append((lineno, line))
    if current:
        blocks.append(current)
    return blocks


def _parse_block(block: list[tuple[int, str]]) -> JointDistribution:
    lineno, head = block[0]
    parts = head.split()
    try:
        if len(parts) != 2:
            raise ValueError
        C, X = int(parts[0]), int(parts[1])
    except ValueError:
        raise MalformedFileError(f"expected 'C X' header, got {head!r}", lineno) from None
    rows = block[1:]
    if len(rows) != C:
        raise MalformedFileError(f"expected {C} rows, found {len(rows)}", lineno)
    mat = np.empty((C, X))
    for c, (ln, line) in enumerate(rows):
        cells = line.split()
        if len(cells) != X:
            raise MalformedFileError(f"expected {X} values, found {len(cells)}", ln)
        try:
            mat[c] = [float(v) for v in cells]
        except ValueError:
            raise MalformedFileError(f"non-numeric value in {line!r}", ln) from None
    try:
        return build_joint(mat)
    except KLMismatchError as exc:
        raise MalformedFileError(str(exc), lineno) from exc


def parse_distributions(text: str) -> list[JointDistribution]:
    return [_parse_block(b) for b in _parse_blocks(text)]


def parse_pair(text: str) -> tuple[JointDistribution, JointDistribution]:
    dists = parse_distributions(text)
    if len(dists) != 2:
        raise MalformedFileError(f"expected 2 distributions, found {len(dists)}")
    return dists[0], dists[1]


def read_pair(path) -> tuple[JointDistribution, JointDistribution]:
    return parse_pair(Path(path).read_text())


def format_distribution(joint: JointDistribution) -> str:
    lines = [f"{joint.num_classes} {joint.num_obs}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in joint.probs]
    return "\n".join(lines) + "\n"


def format_pair(pr: JointDistribution, q: JointDistribution) -> str:
    return format_distribution(pr) + "\n" + format_distribution(q)


# --------------------------------------------------------------------------
# CSVs


def write_curve_csv(curve, fh: TextIO) -> None:
    fh.write(",".join(CURVE_HEADER) + "\n")
    for d, v in zip(curve.deltas, curve.values):
        fh.write(f"{fmt(d)},{fmt(v)}\n")


def _read_numeric_csv(path, header: tuple[str, ...], text_cols=(), allow_empty=False) -> list[dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except UnicodeDecodeError as exc:
        raise MalformedFileError(f"{path}: not a text file") from exc
    if allow_empty and not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    try:
        got = next(reader)
    except StopIteration:
        raise MalformedFileError(f"{path}: empty file, missing header", 1) from None
    if tuple(h.strip() for h in got) != header:
        raise MalformedFileError(f"{path}: unexpected header {got!r}", 1)
    rows = []
    for rowno, cells in enumerate(reader, start=2):
        if not cells:
            continue
        if len(cells) != len(header):
            raise MalformedFileError(
                f"{path}: expected {len(header)} cells, found {len(cells)}", rowno
            )
        rec = {}
        for name, cell in zip(header, cells):
            if name in text_cols:
                rec[name] = cell.strip()
                continue
            try:
                rec[name] = float(cell)
            except ValueError:
                raise MalformedFileError(
                    f"{path}: non-numeric value {cell!r} in column {name!r}", rowno
                ) from None
        rows.append(rec)
    return rows


def read_curve_csv(path) -> tuple[np.ndarray, np.ndarray]:
    rows = _read_numeric_csv(path, CURVE_HEADER)
    d = np.array([r["delta"] for r in rows])
    v = np.array([r["value"] for r in rows])
    return d, v


def points_csv_lines(points: Iterable) -> Iterable[str]:
    yield ",".join(POINTS_HEADER) + "\n"
    for p in points:
        yield (
            f"{p.index},{p.source},{p.num_classes},{p.num_obs},"
            f"{fmt(p.bayes_error)},{fmt(p.model_error)},{fmt(p.delta_q)},"
            f"{fmt(p.total_variation)},{fmt(p.kl_conditional)},{fmt(p.kl_joint)},"
            f"{fmt(p.bound_nussbaum)},{fmt(p.bound_refined)}\n"
        )


def write_points_csv(points: Iterable, fh: TextIO) -> None:
    fh.writelines(points_csv_lines(points))


def read_points_csv(path) -> list[dict]:
    """Rows of a points CSV; a zero-byte file reads as no points."""
    return _read_numeric_csv(path, POINTS_HEADER, text_cols=("source",), allow_empty=True)
