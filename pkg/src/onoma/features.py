"""Character n-gram decomposition of normalized surnames.

A surname is described by the multiset of its contiguous character n-grams,
optionally padded with boundary markers so that prefixes and suffixes become
distinct features. Multi-word surnames are decomposed word by word: compound
particles carry origin signal and should not blur across word boundaries.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

FeatureVector = dict[str, int]

__all__ = [
    "NGramConfig",
    "FeatureVector",
    "extract",
    "build_vocabulary",
    "write_vocabulary",
    "read_vocabulary",
]


@dataclass(frozen=True)
class NGramConfig:
    """Which n-gram sizes to emit and how word boundaries are marked."""

    n_values: tuple[int, ...] = (2, 3)
    pad_boundaries: bool = True
    start_marker: str = "^"
    end_marker: str = "$"

    def __post_init__(self) -> None:
        values = tuple(sorted({int(n) for n in self.n_values}))
        if not values:
            raise ValueError("n_values must be non-empty")
        if values[0] < 1 or values[-1] > 8:
            raise ValueError(f"each n must be in 1..8, got {values}")
        object.__setattr__(self, "n_values", values)
        for name in ("start_marker", "end_marker"):
            marker = getattr(self, name)
            if not isinstance(marker, str) or len(marker) != 1:
                raise ValueError(f"{name} must be a single character")
        if self.start_marker == self.end_marker:
            raise ValueError("start and end markers must differ")

    def to_dict(self) -> dict:
        return {
            "n_values": list(self.n_values),
            "pad_boundaries": self.pad_boundaries,
            "start_marker": self.start_marker,
            "end_marker": self.end_marker,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "NGramConfig":
        return cls(
            n_values=tuple(data["n_values"]),
            pad_boundaries=bool(data["pad_boundaries"]),
            start_marker=str(data["start_marker"]),
            end_marker=str(data["end_marker"]),
        )


def extract(surname: str, config: NGramConfig = NGramConfig()) -> FeatureVector:
    """Token -> occurrence count for every configured n-gram size.

    For each word of the (already normalized) surname, the padded string
    contributes every contiguous substring of length n with multiplicity;
    words shorter than n contribute nothing for that n. Pure function.
    """
    if not surname:
        raise ValueError("empty surname")
    for marker in (config.start_marker, config.end_marker):
        if marker in surname:
            raise ValueError(f"surname contains reserved marker {marker!r}")
    counts: Counter[str] = Counter()
    for word in surname.split(" "):
        if not word:
            continue
        padded = (
            config.start_marker + word + config.end_marker if config.pad_boundaries else word
        )
        for n in config.n_values:
            for i in range(len(padded) - n + 1):
                counts[padded[i : i + n]] += 1
    return dict(counts)


def build_vocabulary(
    corpus: Iterable[str], config: NGramConfig = NGramConfig(), min_df: int = 1
) -> list[str]:
    """Sorted list of tokens occurring in at least min_df distinct surnames."""
    if min_df < 1:
        raise ValueError(f"min_df must be >= 1, got {min_df}")
    distinct = set(corpus)
    if not distinct:
        raise ValueError("empty corpus")
    df: Counter[str] = Counter()
    for surname in distinct:
        df.update(set(extract(surname, config)))
    vocabulary = sorted(token for token, n in df.items() if n >= min_df)
    if not vocabulary:
        raise ValueError("empty vocabulary: no token passes min_df")
    return vocabulary


def write_vocabulary(vocabulary: Iterable[str], path: Path | str) -> Path:
    """One token per line; line order defines the feature index."""
    from .util import atomic_write

    return atomic_write(path, "".join(f"{token}\n" for token in vocabulary))


def read_vocabulary(path: Path | str) -> list[str]:
    tokens = [
        line for line in Path(path).read_text(encoding="utf-8").splitlines() if line
    ]
    if not tokens:
        raise ValueError(f"{path}: empty vocabulary file")
    return tokens
