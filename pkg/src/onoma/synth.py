"""Synthetic multi-region surname corpora with known ground truth.

Each region owns a Markov chain over a letter alphabet; every generated
character is drawn from the region chain or, with probability `overlap`,
from a shared global chain. Overlap 0 gives fully separable regions,
overlap 1 makes them indistinguishable, so the end-to-end pipeline can be
scored against a controllable truth. All draws flow from per-country and
per-population sub-seeds, so generation is deterministic regardless of
scheduling.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classifier import classify, split, train
from .corpus import CountryRegistry, OccurrenceTable, filter_core_names
from .correction import ConfusionCounts, correct_counts, correction_operator, reweight_priors
from .errors import InputFormatError, InvariantError
from .features import NGramConfig
from .typology import build_country_matrix, cut_dendrogram, relabel, ward_cluster
from .util import derive_seed, dumps

__all__ = [
    "STOP",
    "MarkovChain",
    "RegionGenerator",
    "CountrySpec",
    "PopulationSpec",
    "SynthSpec",
    "standard_spec",
    "generate",
    "generate_population",
    "registry_for",
    "Scorecard",
    "score_pipeline",
]

# The stop state is the empty-string symbol.
STOP = ""


def _validate_dist(dist: Mapping[str, float], *, allow_stop: bool, what: str) -> None:
    if not dist:
        raise ValueError(f"{what}: empty distribution")
    total = 0.0
    nonstop = 0.0
    for symbol, prob in dist.items():
        if symbol == STOP and not allow_stop:
            raise ValueError(f"{what}: stop state not allowed here")
        if symbol != STOP and len(symbol) != 1:
            raise ValueError(f"{what}: symbols must be single characters, got {symbol!r}")
        if prob < 0:
            raise ValueError(f"{what}: negative probability for {symbol!r}")
        total += prob
        if symbol != STOP:
            nonstop += prob
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"{what}: probabilities sum to {total!r}, expected 1")
    if nonstop <= 0:
        raise ValueError(f"{what}: needs some non-stop mass")


class _RowSampler:
    """Cumulative tables for one distribution, with and without the stop state."""

    __slots__ = ("symbols", "cum_full", "nonstop_symbols", "cum_nonstop")

    def __init__(self, dist: Mapping[str, float]):
        items = sorted(dist.items())
        self.symbols = [s for s, _ in items]
        self.cum_full = np.cumsum([p for _, p in items])
        nonstop = [(s, p) for s, p in items if s != STOP]
        self.nonstop_symbols = [s for s, _ in nonstop]
        weights = np.array([p for _, p in nonstop])
        self.cum_nonstop = np.cumsum(weights / weights.sum())

    def draw(self, rng: np.random.Generator, allow_stop: bool) -> str:
        u = rng.random()
        if allow_stop:
            idx = int(np.searchsorted(self.cum_full, u, side="right"))
            return self.symbols[min(idx, len(self.symbols) - 1)]
        idx = int(np.searchsorted(self.cum_nonstop, u, side="right"))
        return self.nonstop_symbols[min(idx, len(self.nonstop_symbols) - 1)]


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Character chain: start distribution plus per-context transition rows."""

    order: int
    start: Mapping[str, float]
    transitions: Mapping[str, Mapping[str, float]]

    def __post_init__(self) -> None:
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        _validate_dist(self.start, allow_stop=False, what="start")
        samplers: dict[str, _RowSampler] = {}
        for context, row in self.transitions.items():
            _validate_dist(row, allow_stop=True, what=f"context {context!r}")
            samplers[context] = _RowSampler(row)
        object.__setattr__(self, "_start_sampler", _RowSampler(self.start))
        object.__setattr__(self, "_samplers", samplers)

    def next_symbol(self, generated: str, rng: np.random.Generator, allow_stop: bool) -> str:
        # Unknown contexts (possible after a cross-chain character) fall back
        # to the start distribution.
        if generated:
            sampler = self._samplers.get(generated[-self.order :])  # type: ignore[attr-defined]
            if sampler is None and self.order == 2:
                sampler = self._samplers.get(generated[-1:])  # type: ignore[attr-defined]
        else:
            sampler = None
        if sampler is None:
            sampler = self._start_sampler  # type: ignore[attr-defined]
            allow_stop = False
        return sampler.draw(rng, allow_stop)

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "start": {s: float(p) for s, p in sorted(self.start.items())},
            "transitions": {
                ctx: {s: float(p) for s, p in sorted(row.items())}
                for ctx, row in sorted(self.transitions.items())
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MarkovChain":
        return cls(
            order=int(data["order"]),
            start=dict(data["start"]),
            transitions={ctx: dict(row) for ctx, row in data["transitions"].items()},
        )


@dataclass(frozen=True, eq=False)
class RegionGenerator:
    """Name generator for one region, with hard length bounds."""

    region: str
    chain: MarkovChain
    min_len: int = 3
    max_len: int = 12

    def __post_init__(self) -> None:
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError(f"bad length bounds [{self.min_len}, {self.max_len}]")


@dataclass(frozen=True)
class CountrySpec:
    code: str
    region: str
    n_names: int
    volume: float = 1.0  # mean occurrence count per name, emulating uneven sampling

    def __post_init__(self) -> None:
        if self.n_names < 1:
            raise ValueError("n_names must be >= 1")
        if self.volume < 1:
            raise ValueError("volume must be >= 1")


@dataclass(frozen=True)
class PopulationSpec:
    """A held-out surname list drawn from the region chains with given mix."""

    name: str
    n_names: int
    region_weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.n_names < 1:
            raise ValueError("n_names must be >= 1")
        weights = tuple(float(w) for w in self.region_weights)
        if not weights or min(weights) < 0 or sum(weights) <= 0:
            raise ValueError("region_weights must be nonnegative with positive sum")
        object.__setattr__(self, "region_weights", weights)


@dataclass(frozen=True, eq=False)
class SynthSpec:
    """Full description of a synthetic corpus; JSON-serializable."""

    seed: int
    overlap: float
    generators: tuple[RegionGenerator, ...]
    countries: tuple[CountrySpec, ...]
    global_chain: MarkovChain
    populations: tuple[PopulationSpec, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError(f"overlap must be in [0, 1], got {self.overlap}")
        labels = [g.region for g in self.generators]
        if len(set(labels)) != len(labels) or not labels:
            raise ValueError("region labels must be unique and non-empty")
        codes = [c.code for c in self.countries]
        if len(set(codes)) != len(codes) or not codes:
            raise ValueError("country codes must be unique and non-empty")
        known = set(labels)
        for c in self.countries:
            if c.region not in known:
                raise ValueError(f"country {c.code} references unknown region {c.region!r}")
        for p in self.populations:
            if len(p.region_weights) != len(self.generators):
                raise ValueError(f"population {p.name}: weight count mismatch")

    @property
    def region_labels(self) -> tuple[str, ...]:
        return tuple(g.region for g in self.generators)

    def generator_for(self, region: str) -> RegionGenerator:
        for g in self.generators:
            if g.region == region:
                return g
        raise KeyError(region)

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "overlap": float(self.overlap),
            "global_chain": self.global_chain.to_dict(),
            "regions": [
                {
                    "label": g.region,
                    "min_len": g.min_len,
                    "max_len": g.max_len,
                    "chain": g.chain.to_dict(),
                }
                for g in self.generators
            ],
            "countries": [
                {
                    "code": c.code,
                    "region": c.region,
                    "n_names": c.n_names,
                    "volume": float(c.volume),
                }
                for c in self.countries
            ],
            "populations": [
                {
                    "name": p.name,
                    "n_names": p.n_names,
                    "region_weights": list(p.region_weights),
                }
                for p in self.populations
            ],
        }
        return dumps(doc)

    def save(self, path: Path | str) -> Path:
        from .util import atomic_write

        return atomic_write(path, self.to_json())

    @classmethod
    def from_json(cls, text: str, source: str = "<spec>") -> "SynthSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"{source}: not valid JSON: {exc}") from None
        try:
            return cls(
                seed=int(doc["seed"]),
                overlap=float(doc["overlap"]),
                global_chain=MarkovChain.from_dict(doc["global_chain"]),
                generators=tuple(
                    RegionGenerator(
                        region=str(r["label"]),
                        chain=MarkovChain.from_dict(r["chain"]),
                        min_len=int(r.get("min_len", 3)),
                        max_len=int(r.get("max_len", 12)),
                    )
                    for r in doc["regions"]
                ),
                countries=tuple(
                    CountrySpec(
                        code=str(c["code"]).upper(),
                        region=str(c["region"]),
                        n_names=int(c["n_names"]),
                        volume=float(c.get("volume", 1.0)),
                    )
                    for c in doc["countries"]
                ),
                populations=tuple(
                    PopulationSpec(
                        name=str(p["name"]),
                        n_names=int(p["n_names"]),
                        region_weights=tuple(float(w) for w in p["region_weights"]),
                    )
                    for p in doc.get("populations", [])
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"{source}: malformed spec: {exc}") from None

    @classmethod
    def load(cls, path: Path | str) -> "SynthSpec":
        return cls.from_json(Path(path).read_text(encoding="utf-8"), source=str(path))


def _letter_blocks(n_regions: int, alphabet: str) -> list[str]:
    base, extra = divmod(len(alphabet), n_regions)
    if base < 2:
        raise ValueError(f"alphabet too small for {n_regions} regions")
    blocks = []
    pos = 0
    for i in range(n_regions):
        size = base + (1 if i < extra else 0)
        blocks.append(alphabet[pos : pos + size])
        pos += size
    return blocks


def _random_chain(
    letters: str, rng: np.random.Generator, alphabet: str, leak: float
) -> MarkovChain:
    """Order-1 chain concentrated on `letters`, with rows for every context.

    `leak` spreads that fraction of each row uniformly over the full alphabet,
    blurring the region's letter signature independently of the global-chain
    overlap; 0 keeps region alphabets disjoint.
    """
    def blend(own: np.ndarray, mass: float) -> dict[str, float]:
        row = {ch: leak * mass / len(alphabet) for ch in alphabet}
        for ch, p in zip(letters, own):
            row[ch] = row.get(ch, 0.0) + (1.0 - leak) * mass * float(p)
        return row

    start = blend(rng.dirichlet(np.ones(len(letters))), 1.0)
    transitions: dict[str, dict[str, float]] = {}
    for context in alphabet:
        stop_w = float(rng.uniform(0.12, 0.25))
        row = blend(rng.dirichlet(np.ones(len(letters))), 1.0 - stop_w)
        row[STOP] = stop_w
        transitions[context] = row
    return MarkovChain(order=1, start=start, transitions=transitions)


def _uniform_chain(alphabet: str, stop_weight: float = 0.18) -> MarkovChain:
    start = {ch: 1.0 / len(alphabet) for ch in alphabet}
    row = {ch: (1.0 - stop_weight) / len(alphabet) for ch in alphabet}
    row[STOP] = stop_weight
    return MarkovChain(
        order=1, start=start, transitions={ch: dict(row) for ch in alphabet}
    )


def standard_spec(
    n_regions: int,
    countries_per_region: int,
    names_per_country: int,
    overlap: float,
    seed: int,
    *,
    leak: float = 0.25,
    volumes: Sequence[float] = (1.0, 10.0, 100.0),
    populations: Sequence[PopulationSpec] = (),
) -> SynthSpec:
    """Ready-made spec: one letter block per region, random chains.

    Region i is named R<i> and its countries get two-letter codes sharing a
    first letter, e.g. AA, AB, AC for R0. Country volumes cycle through
    `volumes` to emulate heterogeneous sampling intensity. `leak=0` makes
    region alphabets fully disjoint; the default leaves regions clearly
    separable but with realistic cross-region confusion.
    """
    if n_regions < 2:
        raise ValueError("need at least 2 regions")
    if n_regions > 12:
        raise ValueError("standard_spec supports at most 12 regions")
    if not 0.0 <= leak < 1.0:
        raise ValueError(f"leak must be in [0, 1), got {leak}")
    alphabet = string.ascii_lowercase
    blocks = _letter_blocks(n_regions, alphabet)
    generators = []
    for i, letters in enumerate(blocks):
        label = f"R{i}"
        rng = np.random.default_rng(derive_seed(seed, f"chain:{label}"))
        generators.append(
            RegionGenerator(region=label, chain=_random_chain(letters, rng, alphabet, leak))
        )
    countries = []
    for i in range(n_regions):
        for j in range(countries_per_region):
            countries.append(
                CountrySpec(
                    code=f"{chr(ord('A') + i)}{chr(ord('A') + j)}",
                    region=f"R{i}",
                    n_names=names_per_country,
                    volume=float(volumes[(i * countries_per_region + j) % len(volumes)]),
                )
            )
    return SynthSpec(
        seed=seed,
        overlap=overlap,
        generators=tuple(generators),
        countries=tuple(countries),
        global_chain=_uniform_chain(alphabet),
        populations=tuple(populations),
    )


def _sample_name(
    generator: RegionGenerator,
    global_chain: MarkovChain,
    overlap: float,
    rng: np.random.Generator,
) -> str:
    chars: list[str] = []
    while len(chars) < generator.max_len:
        chain = global_chain if rng.random() < overlap else generator.chain
        allow_stop = len(chars) >= generator.min_len
        symbol = chain.next_symbol("".join(chars[-2:]), rng, allow_stop)
        if symbol == STOP:
            break
        chars.append(symbol)
    return "".join(chars)


def generate(spec: SynthSpec) -> tuple[OccurrenceTable, dict[str, str]]:
    """Synthetic occurrence table plus the surname -> region truth map.

    A name drawn for one region but already owned by another is regenerated
    (up to 100 attempts) so the truth map stays a function; duplicates within
    a region are kept and merge into the occurrence counts.
    """
    truth: dict[str, str] = {}
    pairs: list[tuple[str, str, int]] = []
    for country in sorted(spec.countries, key=lambda c: c.code):
        generator = spec.generator_for(country.region)
        rng = np.random.default_rng(derive_seed(spec.seed, f"corpus:{country.code}"))
        for _ in range(country.n_names):
            for _attempt in range(100):
                name = _sample_name(generator, spec.global_chain, spec.overlap, rng)
                owner = truth.get(name)
                if owner is None or owner == country.region:
                    break
            else:
                raise InvariantError(
                    f"no collision-free name for {country.code} after 100 attempts"
                )
            truth[name] = country.region
            count = 1 + int(rng.poisson(country.volume - 1.0))
            pairs.append((name, country.code, count))
    return OccurrenceTable(pairs), truth


def generate_population(
    spec: SynthSpec, population: PopulationSpec
) -> tuple[list[str], dict[str, int]]:
    """Surname list drawn with the population's region mix, plus truth tallies."""
    if len(population.region_weights) != len(spec.generators):
        raise ValueError(f"population {population.name}: weight count mismatch")
    rng = np.random.default_rng(derive_seed(spec.seed, f"population:{population.name}"))
    weights = np.asarray(population.region_weights, dtype=float)
    cum = np.cumsum(weights / weights.sum())
    names: list[str] = []
    truth_counts = {g.region: 0 for g in spec.generators}
    for _ in range(population.n_names):
        idx = int(np.searchsorted(cum, rng.random(), side="right"))
        idx = min(idx, len(spec.generators) - 1)
        generator = spec.generators[idx]
        names.append(_sample_name(generator, spec.global_chain, spec.overlap, rng))
        truth_counts[generator.region] += 1
    return names, truth_counts


def registry_for(spec: SynthSpec) -> CountryRegistry:
    """Registry accepting exactly the spec's synthetic country codes."""
    return CountryRegistry({c.code: f"{c.code} ({c.region})" for c in spec.countries})


def render_truth_tsv(truth: Mapping[str, str]) -> str:
    return "".join(f"{name}\t{region}\n" for name, region in sorted(truth.items()))


def read_truth_tsv(path: Path | str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise InputFormatError(f"{path}: line {lineno}: expected surname<TAB>region")
        out[fields[0]] = fields[1]
    return out


def default_population(spec: SynthSpec, n_names: int = 2000) -> PopulationSpec:
    """Held-out mix deliberately shifted away from the near-uniform corpus mix."""
    weights = tuple(float(2 ** (i % 4)) for i in range(len(spec.generators)))
    return PopulationSpec(name="heldout", n_names=n_names, region_weights=weights)


@dataclass(frozen=True, eq=False)
class Scorecard:
    """End-to-end pipeline quality measured against the generator's truth."""

    true_regions: tuple[str, ...]
    recall: dict[str, float]  # per true region
    precision: dict[str, float]
    partition_exact: bool
    l1_raw: float
    l1_corrected: float
    n_core_names: int
    n_eval: int
    population_name: str
    region_map: dict[str, str]  # typology label -> true region

    def to_json(self) -> str:
        doc = {
            "true_regions": list(self.true_regions),
            "recall": {r: float(v) for r, v in self.recall.items()},
            "precision": {r: float(v) for r, v in self.precision.items()},
            "partition_exact": self.partition_exact,
            "l1_raw": float(self.l1_raw),
            "l1_corrected": float(self.l1_corrected),
            "n_core_names": self.n_core_names,
            "n_eval": self.n_eval,
            "population": self.population_name,
            "region_map": dict(sorted(self.region_map.items())),
        }
        return dumps(doc)


def _majority_region_map(
    typology_regions: Sequence[str],
    members: Mapping[str, Sequence[str]],
    country_truth: Mapping[str, str],
) -> dict[str, str]:
    mapping: dict[str, str] = {}
    for label in typology_regions:
        votes: dict[str, int] = {}
        for country in members.get(label, []):
            true_region = country_truth[country]
            votes[true_region] = votes.get(true_region, 0) + 1
        if votes:
            best = max(votes.values())
            mapping[label] = min(r for r, v in votes.items() if v == best)
    return mapping


def score_pipeline(
    spec: SynthSpec,
    *,
    hhi_min: float = 0.8,
    freq_min: float = 1e-6,
    min_core_names: int = 20,
    min_df: int = 1,
    feature_config: NGramConfig = NGramConfig(),
    alpha: float = 0.1,
    train_fraction: float = 0.85,
) -> Scorecard:
    """Run corpus -> typology -> train -> evaluate -> correction end to end.

    The typology is cut at the true region count and compared with the true
    country partition; classification metrics are mapped back to true regions
    by majority country vote; the correction step is scored by whether the
    corrected aggregate of a shifted-mixture held-out population beats the
    raw guessed aggregate in L1 distance to the truth.
    """
    table, truth = generate(spec)
    core = filter_core_names(table, hhi_min, freq_min)
    matrix = build_country_matrix(core, feature_config, min_core_names)
    dendrogram = ward_cluster(matrix)
    k = min(len(spec.generators), len(matrix.countries))
    typology = cut_dendrogram(dendrogram, k)

    country_truth = {c.code: c.region for c in spec.countries}
    true_partition = {
        frozenset(c.code for c in spec.countries if c.region == g.region)
        for g in spec.generators
    }
    got_partition = {frozenset(typology.members(r)) for r in typology.regions}
    partition_exact = got_partition == true_partition

    region_map = _majority_region_map(
        typology.regions,
        {r: typology.members(r) for r in typology.regions},
        country_truth,
    )

    labeled, _counts = relabel(core, typology)
    train_set, eval_set = split(labeled, train_fraction, seed=spec.seed)
    model = train(train_set, alpha, feature_config, min_df=min_df)

    # One pass over the evaluation set fills both the typology-space confusion
    # (feeding the correction operator) and the truth-space tallies.
    n_typ = len(model.regions)
    typ_index = model.region_index  # type: ignore[attr-defined]
    true_labels = spec.region_labels
    true_index = {r: i for i, r in enumerate(true_labels)}
    conf_typ = np.zeros((n_typ, n_typ), dtype=np.int64)
    conf_true = np.zeros((len(true_labels), len(true_labels)), dtype=np.int64)
    for surname, actual_typ in eval_set:
        guessed_typ = classify(model, surname).label
        conf_typ[typ_index[guessed_typ], typ_index[actual_typ]] += 1
        guessed_true = region_map.get(guessed_typ)
        actual_true = truth[surname]
        if guessed_true is not None:
            conf_true[true_index[guessed_true], true_index[actual_true]] += 1

    diag = np.diag(conf_true).astype(float)
    col = conf_true.sum(axis=0).astype(float)
    row = conf_true.sum(axis=1).astype(float)
    recall = {
        r: float(diag[i] / col[i]) if col[i] > 0 else 0.0
        for i, r in enumerate(true_labels)
    }
    precision = {
        r: float(diag[i] / row[i]) if row[i] > 0 else 0.0
        for i, r in enumerate(true_labels)
    }

    population = spec.populations[0] if spec.populations else default_population(spec)
    names, truth_counts = generate_population(spec, population)
    from .diversity import tally_guesses

    guessed, _prior_only = tally_guesses(model, names)
    priors = guessed / guessed.sum()
    confusion = ConfusionCounts(model.regions, conf_typ.astype(float))
    operator = correction_operator(
        reweight_priors(confusion, priors),
        provenance={"priors_source": f"population:{population.name}"},
    )
    corrected = correct_counts(guessed, operator)

    def to_true_space(vector: np.ndarray) -> np.ndarray:
        out = np.zeros(len(true_labels))
        for label, value in zip(model.regions, vector):
            mapped = region_map.get(label)
            if mapped is not None:
                out[true_index[mapped]] += value
        return out

    total = float(len(names))
    truth_vec = np.array([truth_counts[r] for r in true_labels], dtype=float)
    l1_raw = float(np.abs(to_true_space(guessed) / total - truth_vec / total).sum())
    l1_corrected = float(np.abs(to_true_space(corrected) / total - truth_vec / total).sum())

    return Scorecard(
        true_regions=true_labels,
        recall=recall,
        precision=precision,
        partition_exact=partition_exact,
        l1_raw=l1_raw,
        l1_corrected=l1_corrected,
        n_core_names=len(core),
        n_eval=len(eval_set),
        population_name=population.name,
        region_map=region_map,
    )
