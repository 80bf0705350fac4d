"""Guess-count correction via the prior-reweighted confusion matrix.

Row-normalizing a confusion matrix (rows guessed, columns actual) gives the
probability of the actual origin given a guess. Because those probabilities
depend on the class mix of the evaluation data, the matrix columns are first
rescaled so their sums match the target population's uncorrected guess
distribution; the resulting row-stochastic operator converts guessed
aggregate counts into estimates of the actual composition.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InputFormatError
from .util import fmt_float

__all__ = [
    "ConfusionCounts",
    "CorrectionOperator",
    "reweight_priors",
    "correction_operator",
    "correct_counts",
    "render_confusion_csv",
    "parse_confusion_csv",
]


def _render_cell(value: float) -> str:
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return fmt_float(value)


def render_confusion_csv(regions: Sequence[str], matrix: np.ndarray) -> str:
    for label in regions:
        if "," in label:
            raise ValueError(f"region label {label!r} cannot contain a comma")
    lines = ["guessed," + ",".join(regions)]
    for label, row in zip(regions, np.asarray(matrix, dtype=float)):
        lines.append(label + "," + ",".join(_render_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_confusion_csv(text: str, source: str = "<confusion>") -> tuple[tuple[str, ...], np.ndarray]:
    """Read a square count grid with matching row/column region labels."""
    rows = [row for row in csv.reader(io.StringIO(text)) if row and any(cell.strip() for cell in row)]
    rows = [row for row in rows if not row[0].lstrip().startswith("#")]
    if not rows:
        raise InputFormatError(f"{source}: empty matrix")
    regions = tuple(cell.strip() for cell in rows[0][1:])
    if len(regions) < 1 or len(set(regions)) != len(regions):
        raise InputFormatError(f"{source}: bad header region labels")
    if len(rows) - 1 != len(regions):
        raise InputFormatError(
            f"{source}: expected {len(regions)} data rows, got {len(rows) - 1}"
        )
    matrix = np.zeros((len(regions), len(regions)))
    for i, row in enumerate(rows[1:]):
        if len(row) != len(regions) + 1:
            raise InputFormatError(f"{source}: row {i + 2}: wrong field count")
        if row[0].strip() != regions[i]:
            raise InputFormatError(
                f"{source}: row {i + 2}: label {row[0]!r} does not match column order"
            )
        try:
            matrix[i] = [float(cell) for cell in row[1:]]
        except ValueError:
            raise InputFormatError(f"{source}: row {i + 2}: non-numeric cell") from None
    if np.any(matrix < 0):
        raise InputFormatError(f"{source}: negative counts")
    return regions, matrix


@dataclass(frozen=True, eq=False)
class ConfusionCounts:
    """Nonnegative guessed-by-actual count matrix; every column has mass."""

    regions: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", matrix)
        n = len(self.regions)
        if matrix.shape != (n, n):
            raise ValueError(f"matrix shape {matrix.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("non-finite confusion entries")
        if np.any(matrix < 0):
            raise ValueError("negative confusion entries")
        empty = [self.regions[j] for j in np.nonzero(matrix.sum(axis=0) == 0)[0]]
        if empty:
            raise ValueError(f"regions with zero actual names: {', '.join(empty)}")

    @property
    def total(self) -> float:
        return float(self.matrix.sum())

    @property
    def column_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def column_shares(self) -> np.ndarray:
        return self.column_sums / self.total

    @classmethod
    def from_csv(cls, path: Path | str) -> "ConfusionCounts":
        regions, matrix = parse_confusion_csv(
            Path(path).read_text(encoding="utf-8"), source=str(path)
        )
        return cls(regions, matrix)

    def to_csv(self) -> str:
        return render_confusion_csv(self.regions, self.matrix)


def reweight_priors(
    counts: ConfusionCounts, target_priors: Sequence[float]
) -> ConfusionCounts:
    """Rescale columns so their sums are proportional to the target priors.

    Column j is scaled by target_priors[j] * total / colsum(j), so the grand
    total is preserved and the new column shares equal the target priors.
    """
    p = np.asarray(list(target_priors), dtype=float)
    n = len(counts.regions)
    if p.shape != (n,):
        raise ValueError(f"priors have length {p.shape}, expected {n}")
    if np.any(p <= 0):
        raise ValueError("target priors must be strictly positive")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError(f"target priors must sum to 1, got {float(p.sum())!r}")
    scale = p * counts.total / counts.column_sums
    return ConfusionCounts(counts.regions, counts.matrix * scale[None, :])


@dataclass(frozen=True, eq=False)
class CorrectionOperator:
    """Row-stochastic matrix: entry (i, j) is P(actual = j | guessed = i)."""

    regions: tuple[str, ...]
    matrix: np.ndarray
    provenance: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", matrix)
        n = len(self.regions)
        if matrix.shape != (n, n):
            raise ValueError(f"matrix shape {matrix.shape}, expected {(n, n)}")
        if np.any(matrix < -1e-12) or np.any(matrix > 1 + 1e-12):
            raise ValueError("operator entries must lie in [0, 1]")
        if np.any(np.abs(matrix.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("operator rows must sum to 1")

    def to_csv(self) -> str:
        header = "".join(
            f"# {key}: {self.provenance[key]}\n" for key in sorted(self.provenance)
        )
        lines = ["guessed," + ",".join(self.regions)]
        for label, row in zip(self.regions, self.matrix):
            lines.append(label + "," + ",".join(fmt_float(v) for v in row))
        return header + "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, path: Path | str) -> "CorrectionOperator":
        text = Path(path).read_text(encoding="utf-8")
        provenance: dict[str, object] = {}
        for line in text.splitlines():
            if line.startswith("#") and ":" in line:
                key, _, value = line[1:].partition(":")
                provenance[key.strip()] = value.strip()
        regions, matrix = parse_confusion_csv(text, source=str(path))
        return cls(regions, matrix, provenance)


def correction_operator(
    counts: ConfusionCounts, provenance: Mapping[str, object] | None = None
) -> CorrectionOperator:
    """Row-normalize the (possibly reweighted) confusion counts."""
    row_sums = counts.row_sums
    empty = [counts.regions[i] for i in np.nonzero(row_sums == 0)[0]]
    if empty:
        raise ValueError(f"zero row sum for guessed region(s): {', '.join(empty)}")
    matrix = counts.matrix / row_sums[:, None]
    return CorrectionOperator(counts.regions, matrix, dict(provenance or {}))


def correct_counts(guessed: Sequence[float], operator: CorrectionOperator) -> np.ndarray:
    """corrected[j] = sum_i guessed[i] * P(actual=j | guessed=i).

    Linear in the input and mass preserving: the corrected vector totals the
    same as the guessed one (rows of the operator sum to 1).
    """
    g = np.asarray(list(guessed), dtype=float)
    if g.shape != (len(operator.regions),):
        raise ValueError(
            f"guessed counts have length {g.shape}, expected {len(operator.regions)}"
        )
    if np.any(g < 0):
        raise ValueError("guessed counts must be nonnegative")
    return g @ operator.matrix
