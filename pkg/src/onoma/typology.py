"""Data-driven country typology from n-gram profiles.

Countries are described by the frequency profile of n-grams over their core
names, clustered agglomeratively (Ward linkage on Euclidean distances via
the Lance-Williams recurrence), and a dendrogram cut plus an explicit,
auditable override list turns the tree into a small set of world-region
labels used to relabel the training data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import CoreName
from .errors import InputFormatError, InvariantError
from .features import NGramConfig, extract
from .util import fmt_float

log = logging.getLogger(__name__)

__all__ = [
    "Merge",
    "Dendrogram",
    "agglomerate",
    "CountryFeatureMatrix",
    "build_country_matrix",
    "ward_cluster",
    "Override",
    "load_overrides",
    "RegionTypology",
    "DEFAULT_REGION_LABELS",
    "cut_dendrogram",
    "relabel",
]

# Default labels for a 7-way cut; ties to the bundled confusion fixture.
DEFAULT_REGION_LABELS = (
    "African",
    "Arabian",
    "Asian",
    "CS-European",
    "Indian",
    "N-European",
    "Slavic",
)

DELETED_LABEL = "DELETED"


@dataclass(frozen=True)
class Merge:
    a: int
    b: int
    height: float
    new_id: int


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge tree. Leaves are 0..n-1, merge t creates node n+t."""

    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]

    def __post_init__(self) -> None:
        n = len(self.leaves)
        if n < 1:
            raise ValueError("dendrogram needs at least one leaf")
        if len(set(self.leaves)) != n:
            raise ValueError("duplicate leaf labels")
        if len(self.merges) != n - 1:
            raise ValueError(f"expected {n - 1} merges, got {len(self.merges)}")
        used: set[int] = set()
        prev = -np.inf
        for t, m in enumerate(self.merges):
            if m.new_id != n + t:
                raise InvariantError(f"merge {t}: new node id {m.new_id}, expected {n + t}")
            for node in (m.a, m.b):
                if not 0 <= node < m.new_id:
                    raise InvariantError(f"merge {t}: node {node} out of range")
                if node in used:
                    raise InvariantError(f"merge {t}: node {node} merged twice")
                used.add(node)
            if m.height < prev - 1e-9 * max(1.0, abs(prev)):
                raise InvariantError(
                    f"merge heights decrease: {prev!r} then {m.height!r}"
                )
            prev = m.height

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def clusters_at(self, k: int) -> list[frozenset[str]]:
        """The k groups left after undoing the k-1 highest merges.

        Heights are nondecreasing, so this applies the first n-k merges.
        Clusters are ordered by their lexicographically smallest member.
        """
        n = self.n_leaves
        if not 1 <= k <= n:
            raise ValueError(f"k must be in 1..{n}, got {k}")
        members: dict[int, set[int]] = {i: {i} for i in range(n)}
        for m in self.merges[: n - k]:
            merged = members.pop(m.a) | members.pop(m.b)
            members[m.new_id] = merged
        clusters = [frozenset(self.leaves[i] for i in group) for group in members.values()]
        return sorted(clusters, key=min)

    def leaf_order(self) -> list[str]:
        """Left-to-right leaf labels after a depth-first walk of the tree."""
        n = self.n_leaves
        if not self.merges:
            return list(self.leaves)
        children = {m.new_id: (m.a, m.b) for m in self.merges}
        order: list[str] = []
        stack = [self.merges[-1].new_id]
        while stack:
            node = stack.pop()
            if node < n:
                order.append(self.leaves[node])
            else:
                a, b = children[node]
                stack.append(b)
                stack.append(a)
        return order

    def to_tsv(self) -> str:
        lines = [f"# leaf\t{i}\t{label}\n" for i, label in enumerate(self.leaves)]
        lines += [
            f"{m.a}\t{m.b}\t{fmt_float(m.height)}\t{m.new_id}\n" for m in self.merges
        ]
        return "".join(lines)

    @classmethod
    def from_tsv(cls, text: str) -> "Dendrogram":
        leaves: list[str] = []
        merges: list[Merge] = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            if line.startswith("#"):
                fields = line[1:].strip().split("\t")
                if len(fields) == 3 and fields[0] == "leaf":
                    leaves.append(fields[2])
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise InputFormatError(f"line {lineno}: expected 4 fields")
            try:
                merges.append(
                    Merge(int(fields[0]), int(fields[1]), float(fields[2]), int(fields[3]))
                )
            except ValueError:
                raise InputFormatError(f"line {lineno}: malformed merge row") from None
        return cls(tuple(leaves), tuple(merges))


def agglomerate(labels: Sequence[str], dist: np.ndarray, method: str = "ward") -> Dendrogram:
    """Sequential agglomerative clustering from a full distance matrix.

    Cluster distances are updated with the Lance-Williams recurrence:
    Ward combines squared distances weighted by cluster sizes, average
    linkage takes the size-weighted mean. At every step the minimal-distance
    pair wins, with exact ties broken by the smallest (a, b) node-id pair, so
    the merge tree is fully deterministic.
    """
    if method not in ("ward", "average"):
        raise ValueError(f"unknown linkage method {method!r}")
    n = len(labels)
    dist = np.asarray(dist, dtype=float)
    if dist.shape != (n, n):
        raise ValueError(f"distance matrix shape {dist.shape} does not match {n} labels")
    if not np.all(np.isfinite(dist)):
        raise ValueError("non-finite distances")
    if n < 2:
        return Dendrogram(tuple(labels), ())

    active: dict[int, int] = {i: 1 for i in range(n)}
    d: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            d[(i, j)] = float(dist[i, j])

    merges: list[Merge] = []
    for step in range(n - 1):
        ids = sorted(active)
        best_d = np.inf
        best_pair = (-1, -1)
        for ai, a in enumerate(ids):
            for b in ids[ai + 1 :]:
                dv = d[(a, b)]
                if dv < best_d:
                    best_d = dv
                    best_pair = (a, b)
        a, b = best_pair
        new_id = n + step
        merges.append(Merge(a, b, best_d, new_id))
        na = active.pop(a)
        nb = active.pop(b)
        del d[(a, b)]
        for k, nk in active.items():
            dak = d.pop((min(a, k), max(a, k)))
            dbk = d.pop((min(b, k), max(b, k)))
            if method == "ward":
                d2 = (
                    (na + nk) * dak * dak + (nb + nk) * dbk * dbk - nk * best_d * best_d
                ) / (na + nb + nk)
                d[(k, new_id)] = float(np.sqrt(max(d2, 0.0)))
            else:
                d[(k, new_id)] = (na * dak + nb * dbk) / (na + nb)
        active[new_id] = na + nb
    return Dendrogram(tuple(labels), tuple(merges))


@dataclass(frozen=True, eq=False)
class CountryFeatureMatrix:
    """Row-normalized n-gram frequency profile per country."""

    countries: tuple[str, ...]
    vocabulary: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        object.__setattr__(self, "rows", rows)
        if rows.shape != (len(self.countries), len(self.vocabulary)):
            raise ValueError(f"matrix shape {rows.shape} inconsistent with labels")
        if not np.all(np.isfinite(rows)):
            raise ValueError("non-finite cell values")
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            bad = [self.countries[i] for i in np.nonzero(np.abs(sums - 1.0) > 1e-9)[0]]
            raise InvariantError(f"rows do not sum to 1: {bad}")


def build_country_matrix(
    core_names: Iterable[CoreName],
    config: NGramConfig = NGramConfig(),
    min_core_names: int = 20,
) -> CountryFeatureMatrix:
    """Country x n-gram frequency matrix over core names.

    Cell (c, g) is the share of token g among all n-gram occurrences of
    country c's core names. Countries contributing fewer than min_core_names
    names (or no tokens at all) are excluded; at least two must remain.
    """
    by_country: dict[str, list[str]] = {}
    for name in core_names:
        by_country.setdefault(name.assigned_country, []).append(name.surname)

    counters: dict[str, dict[str, int]] = {}
    for country in sorted(by_country):
        names = by_country[country]
        if len(names) < min_core_names:
            continue
        counts: dict[str, int] = {}
        for surname in names:
            for token, c in extract(surname, config).items():
                counts[token] = counts.get(token, 0) + c
        if not counts:
            log.warning("country %s produced no n-gram tokens, excluded", country)
            continue
        counters[country] = counts

    if len(counters) < 2:
        raise ValueError(
            f"need at least 2 countries with >= {min_core_names} core names, got {len(counters)}"
        )
    countries = tuple(sorted(counters))
    vocabulary = tuple(sorted(set().union(*(counters[c].keys() for c in countries))))
    index = {token: j for j, token in enumerate(vocabulary)}
    rows = np.zeros((len(countries), len(vocabulary)))
    for i, country in enumerate(countries):
        for token, c in counters[country].items():
            rows[i, index[token]] = c
        rows[i] /= rows[i].sum()
    return CountryFeatureMatrix(countries, vocabulary, rows)


def ward_cluster(matrix: CountryFeatureMatrix) -> Dendrogram:
    """Ward-linkage dendrogram over the matrix rows (Euclidean geometry)."""
    rows = matrix.rows
    n = len(matrix.countries)
    if n < 2:
        raise ValueError("need at least 2 rows to cluster")
    dist = np.zeros((n, n))
    for i in range(n - 1):
        diffs = rows[i + 1 :] - rows[i]
        d = np.sqrt((diffs * diffs).sum(axis=1))
        dist[i, i + 1 :] = d
        dist[i + 1 :, i] = d
    return agglomerate(matrix.countries, dist, method="ward")


@dataclass(frozen=True)
class Override:
    """One manual correction applied after the automatic cut."""

    action: str  # REASSIGN or DELETE
    country: str
    region: str | None = None


def load_overrides(path: Path | str) -> tuple[Override, ...]:
    """Parse REASSIGN<TAB>country<TAB>region / DELETE<TAB>country rows."""
    out: list[Override] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.rstrip("\r\n").split("\t")
        action = fields[0].strip().upper()
        if action == "REASSIGN" and len(fields) == 3:
            out.append(Override("REASSIGN", fields[1].strip().upper(), fields[2].strip()))
        elif action == "DELETE" and len(fields) == 2:
            out.append(Override("DELETE", fields[1].strip().upper()))
        else:
            raise InputFormatError(
                f"{path}: line {lineno}: expected REASSIGN<TAB>country<TAB>region"
                " or DELETE<TAB>country"
            )
    return tuple(out)


@dataclass(frozen=True)
class RegionTypology:
    """Country -> region assignment; None marks a deleted country."""

    regions: tuple[str, ...]
    assignment: Mapping[str, str | None]
    overrides: tuple[Override, ...] = ()

    def __post_init__(self) -> None:
        for country, region in self.assignment.items():
            if region is not None and region not in self.regions:
                raise ValueError(f"{country} assigned to unknown region {region!r}")

    def region_of(self, country: str) -> str | None:
        return self.assignment[country]

    def countries(self) -> list[str]:
        return sorted(self.assignment)

    def members(self, region: str) -> list[str]:
        return sorted(c for c, r in self.assignment.items() if r == region)

    def to_tsv(self) -> str:
        lines = []
        for o in self.overrides:
            if o.action == "REASSIGN":
                lines.append(f"# override\tREASSIGN\t{o.country}\t{o.region}\n")
            else:
                lines.append(f"# override\tDELETE\t{o.country}\n")
        for country in self.countries():
            region = self.assignment[country]
            lines.append(f"{country}\t{region if region is not None else DELETED_LABEL}\n")
        return "".join(lines)

    @classmethod
    def from_tsv(cls, text: str) -> "RegionTypology":
        assignment: dict[str, str | None] = {}
        overrides: list[Override] = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            if line.startswith("#"):
                fields = line[1:].strip().split("\t")
                if fields and fields[0] == "override":
                    if len(fields) == 4 and fields[1] == "REASSIGN":
                        overrides.append(Override("REASSIGN", fields[2], fields[3]))
                    elif len(fields) == 3 and fields[1] == "DELETE":
                        overrides.append(Override("DELETE", fields[2]))
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise InputFormatError(f"line {lineno}: expected country<TAB>region")
            country, region = fields[0].strip().upper(), fields[1].strip()
            assignment[country] = None if region == DELETED_LABEL else region
        regions = tuple(sorted({r for r in assignment.values() if r is not None}))
        return cls(regions, assignment, tuple(overrides))


def cut_dendrogram(
    dendrogram: Dendrogram,
    k: int,
    overrides: Sequence[Override] = (),
    leaf_weights: Mapping[str, float] | None = None,
) -> RegionTypology:
    """Region typology from the k-cluster cut plus manual overrides.

    The baseline removes the k-1 highest merges. With k=7 the clusters get
    the default seven region labels (clusters ordered by smallest member
    code, labels in alphabetical order); otherwise each cluster is named
    after its largest member country by leaf weight, falling back to the
    lexicographically first member. Overrides then apply in file order and
    are recorded for provenance.
    """
    clusters = dendrogram.clusters_at(k)
    if len(clusters) == len(DEFAULT_REGION_LABELS):
        labels = list(DEFAULT_REGION_LABELS)
    else:
        labels = []
        for cluster in clusters:
            if leaf_weights:
                label = max(sorted(cluster), key=lambda c: leaf_weights.get(c, 0.0))
            else:
                label = min(cluster)
            labels.append(label)
        if len(set(labels)) != len(labels):
            raise InvariantError(f"duplicate auto-generated region labels: {labels}")

    assignment: dict[str, str | None] = {}
    for label, cluster in zip(labels, clusters):
        for country in cluster:
            assignment[country] = label

    for o in overrides:
        if o.country not in assignment:
            raise ValueError(f"override names unknown country {o.country!r}")
        if o.action == "REASSIGN":
            if o.region not in labels:
                raise ValueError(f"override names unknown region {o.region!r}")
            assignment[o.country] = o.region
        elif o.action == "DELETE":
            assignment[o.country] = None
        else:
            raise ValueError(f"unknown override action {o.action!r}")

    return RegionTypology(tuple(labels), assignment, tuple(overrides))


def relabel(
    core_names: Iterable[CoreName], typology: RegionTypology
) -> tuple[list[tuple[str, str]], dict[str, int]]:
    """Core names as (surname, region) pairs, dropping deleted countries.

    Every core-name country must be covered by the typology; offenders are
    reported together. Also returns the per-region name counts.
    """
    names = sorted(core_names, key=lambda n: n.surname)
    missing = sorted({n.assigned_country for n in names} - set(typology.assignment))
    if missing:
        raise ValueError(f"countries not covered by typology: {', '.join(missing)}")
    labeled: list[tuple[str, str]] = []
    counts = {region: 0 for region in typology.regions}
    for name in names:
        region = typology.assignment[name.assigned_country]
        if region is None:
            continue
        labeled.append((name.surname, region))
        counts[region] += 1
    return labeled, counts
