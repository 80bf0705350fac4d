"""Multinomial naive Bayes over surname n-grams.

Covers the stratified train/eval split, training with additive smoothing,
log-space scoring and confusion-matrix evaluation. Scores are computed in
log space throughout so long names cannot underflow, and every stochastic
step draws from a seed derived per region, making splits independent of
iteration order.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import normalize_surname
from .errors import InputFormatError
from .features import NGramConfig, extract, build_vocabulary
from .util import atomic_write, derive_seed, dumps

__all__ = [
    "split",
    "train",
    "TrainedModel",
    "Classification",
    "classify",
    "EvalReport",
    "evaluate",
    "read_labeled_tsv",
    "render_labeled_tsv",
]

MODEL_FORMAT_VERSION = 1


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    return m + math.log(float(np.exp(values - m).sum()))


def split(
    labeled: Sequence[tuple[str, str]],
    train_fraction: float = 0.85,
    seed: int = 0,
) -> tuple[list[tuple[str, str]], list[tuple[str, str]]]:
    """Stratified split: per region, ceil(fraction * n) names go to training.

    Within each region the sorted names are shuffled by a generator seeded
    from (seed, region), so the split is deterministic and unaffected by the
    order regions are processed in.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    by_region: dict[str, list[str]] = {}
    for surname, region in labeled:
        by_region.setdefault(region, []).append(surname)
    small = sorted(r for r, names in by_region.items() if len(names) < 2)
    if small:
        raise ValueError(f"regions with fewer than 2 names: {', '.join(small)}")
    train_set: list[tuple[str, str]] = []
    eval_set: list[tuple[str, str]] = []
    for region in sorted(by_region):
        names = sorted(by_region[region])
        rng = random.Random(derive_seed(seed, f"split:{region}"))
        rng.shuffle(names)
        cut = math.ceil(train_fraction * len(names))
        train_set.extend((name, region) for name in names[:cut])
        eval_set.extend((name, region) for name in names[cut:])
    train_set.sort()
    eval_set.sort()
    return train_set, eval_set


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Log priors and smoothed per-region token log likelihoods.

    Regions are sorted, so a first-maximum argmax over scores is already the
    lexicographic tie-break.
    """

    regions: tuple[str, ...]
    vocabulary: tuple[str, ...]
    log_priors: np.ndarray
    log_likelihoods: np.ndarray
    alpha: float
    feature_config: NGramConfig
    strip_diacritics: bool = False

    def __post_init__(self) -> None:
        log_priors = np.asarray(self.log_priors, dtype=float)
        log_likelihoods = np.asarray(self.log_likelihoods, dtype=float)
        object.__setattr__(self, "log_priors", log_priors)
        object.__setattr__(self, "log_likelihoods", log_likelihoods)
        n_regions, n_tokens = len(self.regions), len(self.vocabulary)
        if len(set(self.regions)) != n_regions:
            raise ValueError("duplicate region labels")
        if len(set(self.vocabulary)) != n_tokens:
            raise ValueError("duplicate vocabulary tokens")
        if log_priors.shape != (n_regions,):
            raise ValueError("log_priors shape mismatch")
        if log_likelihoods.shape != (n_regions, n_tokens):
            raise ValueError("log_likelihoods shape mismatch")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if abs(_logsumexp(log_priors)) > 1e-9:
            raise ValueError("priors do not sum to 1")
        for i in range(n_regions):
            if abs(_logsumexp(log_likelihoods[i])) > 1e-9:
                raise ValueError(f"likelihoods for {self.regions[i]} do not sum to 1")
        object.__setattr__(
            self, "vocab_index", {token: j for j, token in enumerate(self.vocabulary)}
        )
        object.__setattr__(
            self, "region_index", {region: i for i, region in enumerate(self.regions)}
        )

    def to_json(self) -> str:
        doc = {
            "version": MODEL_FORMAT_VERSION,
            "regions": list(self.regions),
            "vocabulary": list(self.vocabulary),
            "log_priors": [float(x) for x in self.log_priors],
            "log_likelihoods": [[float(x) for x in row] for row in self.log_likelihoods],
            "alpha": float(self.alpha),
            "feature_config": {
                **self.feature_config.to_dict(),
                "strip_diacritics": self.strip_diacritics,
            },
        }
        return dumps(doc)

    def save(self, path: Path | str) -> Path:
        return atomic_write(path, self.to_json())

    @classmethod
    def load(cls, path: Path | str) -> "TrainedModel":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"{path}: not valid JSON: {exc}") from None
        if not isinstance(doc, dict) or doc.get("version") != MODEL_FORMAT_VERSION:
            raise InputFormatError(f"{path}: unsupported model file version")
        try:
            fc = dict(doc["feature_config"])
            strip = bool(fc.pop("strip_diacritics", False))
            return cls(
                regions=tuple(doc["regions"]),
                vocabulary=tuple(doc["vocabulary"]),
                log_priors=np.array(doc["log_priors"], dtype=float),
                log_likelihoods=np.array(doc["log_likelihoods"], dtype=float),
                alpha=float(doc["alpha"]),
                feature_config=NGramConfig.from_dict(fc),
                strip_diacritics=strip,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"{path}: malformed model file: {exc}") from None


def train(
    train_set: Sequence[tuple[str, str]],
    alpha: float = 0.1,
    config: NGramConfig = NGramConfig(),
    *,
    min_df: int = 1,
    strip_diacritics: bool = False,
) -> TrainedModel:
    """Fit priors and smoothed token likelihoods from (surname, region) pairs.

    prior(r) is the share of names labeled r; likelihood(r, g) is
    (count of g in r + alpha) / (in-vocabulary tokens of r + alpha * |V|),
    which sums to 1 over the vocabulary by construction.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not train_set:
        raise ValueError("empty training set")
    regions = tuple(sorted({region for _, region in train_set}))
    vocabulary = tuple(build_vocabulary((s for s, _ in train_set), config, min_df))
    vocab_index = {token: j for j, token in enumerate(vocabulary)}
    region_index = {region: i for i, region in enumerate(regions)}

    token_counts = np.zeros((len(regions), len(vocabulary)))
    name_counts = np.zeros(len(regions))
    for surname, region in train_set:
        i = region_index[region]
        name_counts[i] += 1
        for token, c in extract(surname, config).items():
            j = vocab_index.get(token)
            if j is not None:
                token_counts[i, j] += c

    totals = token_counts.sum(axis=1)
    likelihood = (token_counts + alpha) / (totals[:, None] + alpha * len(vocabulary))
    priors = name_counts / name_counts.sum()
    return TrainedModel(
        regions=regions,
        vocabulary=vocabulary,
        log_priors=np.log(priors),
        log_likelihoods=np.log(likelihood),
        alpha=alpha,
        feature_config=config,
        strip_diacritics=strip_diacritics,
    )


@dataclass(frozen=True, eq=False)
class Classification:
    """Per-region scores for one surname; label is the argmax region."""

    label: str
    regions: tuple[str, ...]
    scores: np.ndarray  # unnormalized log posterior
    posterior: np.ndarray
    prior_only: bool  # no surname n-gram was in the model vocabulary


def classify(model: TrainedModel, surname: str) -> Classification:
    """Score a surname against every region.

    score(r) = log prior(r) + sum over in-vocabulary tokens of
    count * log likelihood(r, token). Out-of-vocabulary tokens are ignored
    (the model's event space is its training vocabulary); a name with no
    known token at all falls back to the priors and is flagged.
    """
    normalized = normalize_surname(surname, model.strip_diacritics)
    if not normalized:
        raise ValueError(f"surname {surname!r} is empty after normalization")
    tokens = extract(normalized, model.feature_config)
    indices: list[int] = []
    counts: list[float] = []
    vocab_index = model.vocab_index  # type: ignore[attr-defined]
    for token, c in tokens.items():
        j = vocab_index.get(token)
        if j is not None:
            indices.append(j)
            counts.append(float(c))
    scores = model.log_priors.copy()
    if indices:
        scores = scores + model.log_likelihoods[:, indices] @ np.array(counts)
    shifted = np.exp(scores - scores.max())
    posterior = shifted / shifted.sum()
    best = float(scores.max())
    label = min(model.regions[i] for i in range(len(scores)) if scores[i] == best)
    return Classification(
        label=label,
        regions=model.regions,
        scores=scores,
        posterior=posterior,
        prior_only=not indices,
    )


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Confusion counts (rows guessed, columns actual) with per-region metrics."""

    regions: tuple[str, ...]
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    support: np.ndarray  # actual names per region (column sums)

    @classmethod
    def from_confusion(cls, regions: Sequence[str], confusion: np.ndarray) -> "EvalReport":
        regions = tuple(regions)
        confusion = np.asarray(confusion)
        n = len(regions)
        if confusion.shape != (n, n):
            raise ValueError(f"confusion shape {confusion.shape}, expected {(n, n)}")
        if np.any(confusion < 0):
            raise ValueError("negative confusion counts")
        diag = np.diag(confusion).astype(float)
        row_sums = confusion.sum(axis=1).astype(float)
        col_sums = confusion.sum(axis=0).astype(float)
        precision = np.divide(diag, row_sums, out=np.zeros(n), where=row_sums > 0)
        recall = np.divide(diag, col_sums, out=np.zeros(n), where=col_sums > 0)
        return cls(regions, confusion, precision, recall, col_sums.astype(np.int64))

    @property
    def n_eval(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        total = self.confusion.sum()
        return float(np.diag(self.confusion).sum() / total) if total else 0.0

    def to_json(self) -> str:
        doc = {
            "regions": list(self.regions),
            "n_eval": self.n_eval,
            "accuracy": self.accuracy,
            "precision": {r: float(p) for r, p in zip(self.regions, self.precision)},
            "recall": {r: float(p) for r, p in zip(self.regions, self.recall)},
            "support": {r: int(s) for r, s in zip(self.regions, self.support)},
            "confusion": [[int(x) for x in row] for row in self.confusion],
        }
        return dumps(doc)


def evaluate(model: TrainedModel, eval_set: Sequence[tuple[str, str]]) -> EvalReport:
    """Confusion matrix of guessed vs actual region over an evaluation set."""
    if not eval_set:
        raise ValueError("empty evaluation set")
    unknown = sorted({region for _, region in eval_set} - set(model.regions))
    if unknown:
        raise ValueError(f"evaluation labels unknown to the model: {', '.join(unknown)}")
    region_index = model.region_index  # type: ignore[attr-defined]
    confusion = np.zeros((len(model.regions), len(model.regions)), dtype=np.int64)
    for surname, actual in eval_set:
        guessed = classify(model, surname).label
        confusion[region_index[guessed], region_index[actual]] += 1
    return EvalReport.from_confusion(model.regions, confusion)


def render_labeled_tsv(labeled: Iterable[tuple[str, str]]) -> str:
    return "".join(f"{surname}\t{region}\n" for surname, region in labeled)


def read_labeled_tsv(path: Path | str) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise InputFormatError(f"{path}: line {lineno}: expected surname<TAB>region")
        out.append((fields[0], fields[1]))
    return out
