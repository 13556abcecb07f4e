"""CSV and JSON formats.

Embeddings: header ``id,v1,...,vd`` then one class per row.
Matrix: header ``<corner>,<novel ids...>`` then ``<base id>,<similarities...>``.
Reals are written with 17 significant digits in CSV; JSON uses Python's
shortest round-trip repr, which is equally lossless.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .core import EmbeddingTable, SelectionResult, SimilarityMatrix
from .errors import ParseError
from .verification import BoundCertificate

__all__ = [
    "parse_embeddings_csv",
    "write_embeddings_csv",
    "parse_matrix_csv",
    "write_matrix_csv",
    "parse_samples_csv",
    "parse_id_list",
    "write_chosen_csv",
    "atomic_write_text",
    "RunReport",
    "result_to_dict",
    "result_from_dict",
]


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows(path):
    path = Path(path)
    if not path.exists():
        raise ParseError(path, None, "file does not exist")
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            yield lineno, [cell.strip() for cell in row]


def _numbers(path, lineno: int, cells: Sequence[str]) -> list[float]:
    try:
        values = [float(c) for c in cells]
    except ValueError:
        bad = next(c for c in cells if not _is_float(c))
        raise ParseError(path, lineno, f"non-numeric value {bad!r}") from None
    if not all(np.isfinite(values)):
        raise ParseError(path, lineno, "non-finite value")
    return values


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_embeddings_csv(path) -> EmbeddingTable:
    rows = _rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError(path, None, "no data rows") from None
    if len(header) < 2 or header[0].lower() != "id":
        raise ParseError(path, lineno, "header must be 'id,v1,...,vd'")
    width = len(header)
    ids, vectors, seen = [], [], {}
    for lineno, row in rows:
        if len(row) != width:
            raise ParseError(path, lineno, f"expected {width} fields, got {len(row)}")
        label = row[0]
        if label == "":
            raise ParseError(path, lineno, "empty class id")
        if label in seen:
            raise ParseError(path, lineno, f"duplicate id {label!r} (first on line {seen[label]})")
        seen[label] = lineno
        ids.append(label)
        vectors.append(_numbers(path, lineno, row[1:]))
    if not ids:
        raise ParseError(path, None, "no data rows")
    return EmbeddingTable(tuple(ids), np.array(vectors))


def write_embeddings_csv(table: EmbeddingTable, path) -> None:
    lines = [",".join(["id"] + [f"v{i + 1}" for i in range(table.dim)])]
    for label, vec in zip(table.ids, table.vectors):
        lines.append(",".join([label] + [fmt(v) for v in vec]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def parse_matrix_csv(path) -> SimilarityMatrix:
    rows = _rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError(path, None, "no data rows") from None
    novel = header[1:]
    if not novel or any(c == "" for c in novel):
        raise ParseError(path, lineno, "header must list novel ids after the corner cell")
    if len(set(novel)) != len(novel):
        raise ParseError(path, lineno, "duplicate novel id in header")
    base, values, seen = [], [], {}
    for lineno, row in rows:
        if len(row) != len(header):
            raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
        if row[0] in seen:
            raise ParseError(path, lineno, f"duplicate id {row[0]!r} (first on line {seen[row[0]]})")
        seen[row[0]] = lineno
        base.append(row[0])
        values.append(_numbers(path, lineno, row[1:]))
    if not base:
        raise ParseError(path, None, "no data rows")
    order = sorted(range(len(base)), key=base.__getitem__)
    cols = sorted(range(len(novel)), key=novel.__getitem__)
    arr = np.array(values)[np.ix_(order, cols)]
    return SimilarityMatrix(tuple(base[i] for i in order), tuple(novel[j] for j in cols), arr)


def write_matrix_csv(matrix: SimilarityMatrix, path) -> None:
    lines = [",".join(["id", *matrix.novel_ids])]
    for label, row in zip(matrix.base_ids, matrix.values):
        lines.append(",".join([label] + [fmt(v) for v in row]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def parse_samples_csv(path) -> list[tuple[float, float, float]]:
    """Rows of ``acc,x1,x2`` (header required)."""
    rows = _rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError(path, None, "no data rows") from None
    if [h.lower() for h in header] != ["acc", "x1", "x2"]:
        raise ParseError(path, lineno, "header must be 'acc,x1,x2'")
    out = []
    for lineno, row in rows:
        if len(row) != 3:
            raise ParseError(path, lineno, f"expected 3 fields, got {len(row)}")
        out.append(tuple(_numbers(path, lineno, row)))
    if not out:
        raise ParseError(path, None, "no data rows")
    return out


def parse_id_list(spec: str | None) -> tuple[str, ...] | None:
    """``a,b,c`` or ``@path`` (one id per line); ``None`` passes through."""
    if spec is None:
        return None
    if spec.startswith("@"):
        path = Path(spec[1:])
        if not path.exists():
            raise ParseError(path, None, "id list file does not exist")
        items = [line.strip() for line in path.read_text().splitlines()]
    else:
        items = [s.strip() for s in spec.split(",")]
    return tuple(s for s in items if s)


def write_chosen_csv(result: SelectionResult, path) -> None:
    atomic_write_text(path, "id\n" + "".join(f"{c}\n" for c in sorted(result.chosen)))


def result_to_dict(result: SelectionResult) -> dict:
    d = asdict(result)
    d["chosen"] = list(result.chosen)
    d["step_gains"] = list(result.step_gains)
    return d


def result_from_dict(d: dict) -> SelectionResult:
    return SelectionResult(
        chosen=tuple(d["chosen"]),
        objective=float(d["objective"]),
        algorithm=d["algorithm"],
        step_gains=tuple(float(g) for g in d.get("step_gains", ())),
        seed=d.get("seed"),
        elapsed=float(d.get("elapsed", 0.0)),
    )


def _certificate_from_dict(d: dict | None) -> BoundCertificate | None:
    if d is None:
        return None
    d = dict(d)
    d["assumption_flags"] = tuple(d.get("assumption_flags", ()))
    return BoundCertificate(**d)


@dataclass
class RunReport:
    problem: dict[str, Any]
    result: SelectionResult
    certificate: BoundCertificate | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "result": result_to_dict(self.result),
            "certificate": None if self.certificate is None else asdict(self.certificate),
            "diagnostics": self.diagnostics,
            "timings": self.timings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(
            problem=d["problem"],
            result=result_from_dict(d["result"]),
            certificate=_certificate_from_dict(d.get("certificate")),
            diagnostics=d.get("diagnostics", {}),
            timings=d.get("timings", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def write(self, path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def read(cls, path) -> "RunReport":
        return cls.from_json(Path(path).read_text())
