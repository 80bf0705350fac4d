"""Command-line interface orchestrating the pipeline stages.

Each subcommand reads and validates its inputs completely before any output
file is created, writes outputs atomically, and keeps every byte of output
deterministic for a given (inputs, config, seed) triple. Exit codes: 1 usage,
2 input format, 3 config validation, 4 internal invariant violation.

ONOMA_THREADS caps worker threads where stages parallelize (0 = auto).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import diversity, synth
from .classifier import (
    EvalReport,
    TrainedModel,
    evaluate,
    read_labeled_tsv,
    render_labeled_tsv,
    split,
    train,
)
from .correction import (
    ConfusionCounts,
    CorrectionOperator,
    correction_operator,
    reweight_priors,
)
from .corpus import (
    CountryRegistry,
    filter_core_names,
    read_core_names,
    read_corpus_tsv,
    render_core_names,
    render_corpus_tsv,
)
from .errors import ConfigError, InputFormatError, InvariantError, OnomaError
from .features import NGramConfig
from .typology import (
    build_country_matrix,
    cut_dendrogram,
    load_overrides,
    relabel,
    ward_cluster,
)
from .util import atomic_write, dumps, sha256_file, thread_cap

log = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_INVARIANT = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage problems, not argparse's 2
        raise _UsageError(f"{self.prog}: {message}")


def _parse_n_values(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"bad n-gram sizes {text!r}, expected e.g. 2,3") from None


def _feature_config(args) -> NGramConfig:
    try:
        return NGramConfig(
            n_values=_parse_n_values(args.n_values),
            pad_boundaries=not args.no_pad,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _load_registry(path: str | None) -> CountryRegistry:
    if path is None:
        return CountryRegistry.default()
    return CountryRegistry.from_tsv(path)


def _read_population(path: Path | str) -> list[str]:
    names = [
        line.strip()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if not names:
        raise InputFormatError(f"{path}: no surnames")
    return names


def _add_corpus_opts(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--registry", help="country registry TSV (default: bundled list)")
    parser.add_argument("--header", action="store_true", help="skip the first input row")
    parser.add_argument(
        "--strict", action="store_true", help="fail on unknown country codes instead of skipping"
    )
    parser.add_argument(
        "--strip-diacritics", action="store_true", help="fold accented letters in normalization"
    )


def _add_feature_opts(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-values", default="2,3", help="comma-separated n-gram sizes")
    parser.add_argument(
        "--no-pad", action="store_true", help="disable word-boundary padding markers"
    )


# ---------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    registry = _load_registry(args.registry)
    table = read_corpus_tsv(
        args.corpus,
        registry,
        header=args.header,
        strict=args.strict,
        strip_diacritics=args.strip_diacritics,
    )
    content = render_corpus_tsv(table)
    if args.out:
        atomic_write(args.out, content)
    else:
        sys.stdout.write(content)
    print(
        f"ingested {len(table)} records, {len(table.countries())} countries",
        file=sys.stderr,
    )
    return 0


def cmd_filter_core(args) -> int:
    if not 0 < args.hhi_min <= 1:
        raise ConfigError(f"--hhi-min must be in (0, 1], got {args.hhi_min}")
    if args.freq_min < 0:
        raise ConfigError(f"--freq-min must be >= 0, got {args.freq_min}")
    registry = _load_registry(args.registry)
    table = read_corpus_tsv(
        args.corpus,
        registry,
        header=args.header,
        strict=args.strict,
        strip_diacritics=args.strip_diacritics,
    )
    core = filter_core_names(table, args.hhi_min, args.freq_min, basis=args.basis)
    content = render_core_names(core)
    if args.out:
        atomic_write(args.out, content)
    else:
        sys.stdout.write(content)
    print(f"kept {len(core)} of {len(table.surnames())} surnames", file=sys.stderr)
    return 0


def cmd_typology(args) -> int:
    if args.k < 1:
        raise ConfigError(f"--k must be >= 1, got {args.k}")
    if args.min_core_names < 1:
        raise ConfigError(f"--min-core-names must be >= 1, got {args.min_core_names}")
    config = _feature_config(args)
    core = read_core_names(args.core)
    overrides = load_overrides(args.overrides) if args.overrides else ()

    matrix = build_country_matrix(core, config, args.min_core_names)
    dendrogram = ward_cluster(matrix)
    weights: dict[str, float] = {}
    for name in core:
        weights[name.assigned_country] = weights.get(name.assigned_country, 0.0) + 1.0
    typology = cut_dendrogram(dendrogram, min(args.k, len(matrix.countries)), overrides, weights)

    covered = [n for n in core if n.assigned_country in typology.assignment]
    dropped = len(core) - len(covered)
    if dropped:
        log.warning("%d core names in countries below the matrix threshold; dropped", dropped)
    labeled, counts = relabel(covered, typology)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write(out_dir / "typology.tsv", typology.to_tsv())
    atomic_write(out_dir / "dendrogram.tsv", dendrogram.to_tsv())
    atomic_write(out_dir / "labeled.tsv", render_labeled_tsv(labeled))
    for region in typology.regions:
        print(f"{region}\t{counts[region]}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    if args.alpha <= 0:
        raise ConfigError(f"--alpha must be > 0, got {args.alpha}")
    if not 0 < args.train_fraction < 1:
        raise ConfigError(f"--train-fraction must be in (0, 1), got {args.train_fraction}")
    if args.min_df < 1:
        raise ConfigError(f"--min-df must be >= 1, got {args.min_df}")
    config = _feature_config(args)
    labeled = read_labeled_tsv(args.labeled)
    try:
        train_set, eval_set = split(labeled, args.train_fraction, args.seed)
        model = train(
            train_set,
            args.alpha,
            config,
            min_df=args.min_df,
            strip_diacritics=args.strip_diacritics,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    model.save(args.out)
    if args.eval_out:
        atomic_write(args.eval_out, render_labeled_tsv(eval_set))
    if args.train_out:
        atomic_write(args.train_out, render_labeled_tsv(train_set))
    if args.vocab_out:
        from .features import write_vocabulary

        write_vocabulary(model.vocabulary, args.vocab_out)
    print(
        f"trained on {len(train_set)} names, {len(model.vocabulary)} features,"
        f" {len(model.regions)} regions ({len(eval_set)} held out)",
        file=sys.stderr,
    )
    return 0


def cmd_evaluate(args) -> int:
    if args.confusion:
        counts = ConfusionCounts.from_csv(args.confusion)
        report = EvalReport.from_confusion(counts.regions, counts.matrix)
    else:
        if not args.model:
            raise ConfigError("--eval requires --model")
        model = TrainedModel.load(args.model)
        eval_set = read_labeled_tsv(args.eval)
        report = evaluate(model, eval_set)
    atomic_write(args.out, report.to_json())
    if args.confusion_out:
        from .correction import render_confusion_csv

        atomic_write(args.confusion_out, render_confusion_csv(report.regions, report.confusion))
    for region, p, r in zip(report.regions, report.precision, report.recall):
        print(f"{region}\tprecision={p:.4f}\trecall={r:.4f}", file=sys.stderr)
    return 0


def _normalized_priors(text: str, n: int) -> np.ndarray:
    try:
        values = np.asarray([float(part) for part in text.split(",")], dtype=float)
    except ValueError:
        raise ConfigError(f"bad priors {text!r}, expected comma-separated numbers") from None
    if values.shape != (n,):
        raise ConfigError(f"expected {n} priors, got {len(values)}")
    if np.any(values <= 0):
        raise ConfigError("priors must be strictly positive")
    return values / values.sum()


def cmd_calibrate(args) -> int:
    counts = ConfusionCounts.from_csv(args.confusion)
    provenance: dict[str, object] = {"confusion": Path(args.confusion).name}
    if args.priors:
        priors = _normalized_priors(args.priors, len(counts.regions))
        provenance["priors_source"] = "explicit"
    elif args.reference and args.model:
        model = TrainedModel.load(args.model)
        if model.regions != counts.regions:
            raise ConfigError("model regions do not match the confusion matrix")
        names = _read_population(args.reference)
        guessed, _ = diversity.tally_guesses(model, names)
        if np.any(guessed == 0):
            missing = [r for r, g in zip(model.regions, guessed) if g == 0]
            raise ConfigError(
                f"reference population yields zero guesses for: {', '.join(missing)}"
            )
        priors = guessed / guessed.sum()
        provenance["priors_source"] = f"reference:{Path(args.reference).name}"
    else:
        raise ConfigError("need either --priors or both --reference and --model")
    provenance["priors"] = ",".join(f"{p:.6g}" for p in priors)
    operator = correction_operator(reweight_priors(counts, priors), provenance)
    atomic_write(args.out, operator.to_csv())
    print(f"operator over {len(operator.regions)} regions -> {args.out}", file=sys.stderr)
    return 0


def cmd_classify_population(args) -> int:
    model = TrainedModel.load(args.model)
    operator = CorrectionOperator.from_csv(args.operator)
    names = _read_population(args.input)
    dataset = args.name or Path(args.input).stem
    dist = diversity.distribution(names, model, operator, dataset)
    doc = {
        "dataset": dist.dataset_name,
        "n_names": dist.n_names,
        "n_prior_only": dist.n_prior_only,
        "regions": list(dist.regions),
        "counts": {r: float(c) for r, c in zip(dist.regions, dist.counts)},
        "proportions": {r: float(p) for r, p in zip(dist.regions, dist.proportions)},
    }
    atomic_write(args.out, dumps(doc))
    return 0


def _distributions_for(
    model: TrainedModel,
    operator: CorrectionOperator,
    datasets: Sequence[tuple[str, list[str]]],
) -> list[diversity.OriginDistribution]:
    workers = min(thread_cap(), len(datasets))
    if workers <= 1:
        return [
            diversity.distribution(names, model, operator, dataset)
            for dataset, names in datasets
        ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(diversity.distribution, names, model, operator, dataset)
            for dataset, names in datasets
        ]
        return [f.result() for f in futures]


def cmd_compare(args) -> int:
    model = TrainedModel.load(args.model)
    operator = CorrectionOperator.from_csv(args.operator)
    datasets: list[tuple[str, list[str]]] = []
    seen: set[str] = set()
    for path in [args.reference, *args.targets]:
        name = Path(path).stem
        if name in seen:
            raise ConfigError(f"duplicate dataset name {name!r}")
        seen.add(name)
        datasets.append((name, _read_population(path)))
    dists = _distributions_for(model, operator, datasets)
    reference = dists[0]
    profiles = [diversity.representation_ratios(d, reference) for d in dists]
    provenance = {
        "model_sha256": sha256_file(args.model),
        "operator": Path(args.operator).name,
        "reference": reference.dataset_name,
    }
    paths = diversity.emit_report(profiles, dists, args.out_dir, provenance)
    for key in sorted(paths):
        print(f"{key}: {paths[key]}", file=sys.stderr)
    return 0


def _spec_from_args(args) -> synth.SynthSpec:
    if args.spec:
        return synth.SynthSpec.load(args.spec)
    for option, value in (
        ("--regions", args.regions),
        ("--countries-per-region", args.countries_per_region),
        ("--names", args.names),
        ("--overlap", args.overlap),
        ("--seed", args.seed),
    ):
        if value is None:
            raise ConfigError(f"{option} is required when --spec is not given")
    try:
        return synth.standard_spec(
            args.regions,
            args.countries_per_region,
            args.names,
            args.overlap,
            args.seed,
            populations=(synth.PopulationSpec("heldout", args.population_size,
                                              tuple(float(2 ** (i % 4)) for i in range(args.regions))),),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_synth(args) -> int:
    spec = _spec_from_args(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table, truth = synth.generate(spec)
    spec.save(out_dir / "spec.json")
    atomic_write(out_dir / "corpus.tsv", render_corpus_tsv(table))
    atomic_write(out_dir / "truth.tsv", synth.render_truth_tsv(truth))
    atomic_write(out_dir / "countries.tsv", synth.registry_for(spec).to_tsv())
    for population in spec.populations:
        names, truth_counts = synth.generate_population(spec, population)
        atomic_write(out_dir / f"population_{population.name}.txt", "\n".join(names) + "\n")
        atomic_write(
            out_dir / f"population_{population.name}_truth.json",
            dumps({r: truth_counts[r] for r in sorted(truth_counts)}),
        )
    if args.score:
        card = synth.score_pipeline(
            spec, min_core_names=args.min_core_names, alpha=args.alpha
        )
        atomic_write(out_dir / "scorecard.json", card.to_json())
        print(card.to_json(), end="", file=sys.stderr)
    print(f"corpus: {len(table)} records, {len(truth)} distinct names", file=sys.stderr)
    return 0


# ---------------------------------------------------------------- pipeline


@dataclass
class PipelineConfig:
    """File-based configuration for the all-in-one pipeline command."""

    seed: int
    out_dir: Path
    corpus: Path | None = None
    synth_spec: synth.SynthSpec | None = None
    registry: Path | None = None
    header: bool = False
    strict: bool = False
    strip_diacritics: bool = False
    hhi_min: float = 0.8
    freq_min: float = 1e-6
    basis: str = "frequency"
    min_core_names: int = 20
    min_df: int = 1
    n_values: tuple[int, ...] = (2, 3)
    pad_boundaries: bool = True
    k_regions: int = 7
    overrides: Path | None = None
    alpha: float = 0.1
    train_fraction: float = 0.85
    reference: Path | None = None
    targets: tuple[Path, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer (stochastic stages require it)")
        if not 0 < self.hhi_min <= 1:
            raise ConfigError(f"hhi_min must be in (0, 1], got {self.hhi_min}")
        if self.freq_min < 0:
            raise ConfigError(f"freq_min must be >= 0, got {self.freq_min}")
        if self.basis not in ("frequency", "count"):
            raise ConfigError(f"basis must be frequency or count, got {self.basis!r}")
        if self.min_core_names < 1 or self.min_df < 1 or self.k_regions < 1:
            raise ConfigError("min_core_names, min_df and k_regions must be >= 1")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.corpus is None and self.synth_spec is None:
            raise ConfigError("config needs either a corpus path or a synth block")
        if self.corpus is not None and self.synth_spec is not None:
            raise ConfigError("config cannot have both a corpus path and a synth block")

    @property
    def feature_config(self) -> NGramConfig:
        try:
            return NGramConfig(n_values=self.n_values, pad_boundaries=self.pad_boundaries)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path: Path | str, overrides: Mapping[str, object]) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"{path}: not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise InputFormatError(f"{path}: config must be a JSON object")
        merged = dict(doc)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        base = Path(path).parent

        def path_of(key: str) -> Path | None:
            value = merged.get(key)
            if value is None:
                return None
            p = Path(str(value))
            return p if p.is_absolute() else base / p

        synth_spec = None
        synth_block = merged.get("synth")
        if synth_block is not None:
            if not isinstance(synth_block, dict):
                raise ConfigError("synth block must be an object")
            seed = int(merged.get("seed", 0))
            if "spec" in synth_block:
                synth_spec = synth.SynthSpec.load(base / str(synth_block["spec"]))
            elif "standard" in synth_block:
                params = dict(synth_block["standard"])
                populations = tuple(
                    synth.PopulationSpec(
                        name=str(p["name"]),
                        n_names=int(p["n_names"]),
                        region_weights=tuple(float(w) for w in p["region_weights"]),
                    )
                    for p in synth_block.get("populations", [])
                )
                try:
                    synth_spec = synth.standard_spec(
                        int(params["n_regions"]),
                        int(params["countries_per_region"]),
                        int(params["names_per_country"]),
                        float(params["overlap"]),
                        seed,
                        populations=populations,
                    )
                except (KeyError, ValueError) as exc:
                    raise ConfigError(f"bad synth.standard block: {exc}") from None
            else:
                raise ConfigError("synth block needs a 'spec' path or 'standard' parameters")

        try:
            return cls(
                seed=int(merged["seed"]),
                out_dir=Path(str(merged["out_dir"])),
                corpus=path_of("corpus"),
                synth_spec=synth_spec,
                registry=path_of("registry"),
                header=bool(merged.get("header", False)),
                strict=bool(merged.get("strict", False)),
                strip_diacritics=bool(merged.get("strip_diacritics", False)),
                hhi_min=float(merged.get("hhi_min", 0.8)),
                freq_min=float(merged.get("freq_min", 1e-6)),
                basis=str(merged.get("basis", "frequency")),
                min_core_names=int(merged.get("min_core_names", 20)),
                min_df=int(merged.get("min_df", 1)),
                n_values=tuple(int(n) for n in merged.get("n_values", (2, 3))),
                pad_boundaries=bool(merged.get("pad_boundaries", True)),
                k_regions=int(merged.get("k_regions", 7)),
                overrides=path_of("overrides"),
                alpha=float(merged.get("alpha", 0.1)),
                train_fraction=float(merged.get("train_fraction", 0.85)),
                reference=path_of("reference"),
                targets=tuple(
                    Path(str(t)) if Path(str(t)).is_absolute() else base / str(t)
                    for t in merged.get("targets", [])
                ),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}") from None


def run_pipeline(config: PipelineConfig) -> dict[str, Path]:
    """Run every stage from one config; returns the artifact paths."""
    out_dir = config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}
    feature_config = config.feature_config

    reference_path = config.reference
    target_paths = list(config.targets)
    dataset_names: dict[Path, str] = {}

    if config.synth_spec is not None:
        spec = config.synth_spec
        table, truth = synth.generate(spec)
        registry = synth.registry_for(spec)
        artifacts["spec"] = spec.save(out_dir / "spec.json")
        artifacts["corpus"] = atomic_write(out_dir / "corpus.tsv", render_corpus_tsv(table))
        artifacts["truth"] = atomic_write(out_dir / "truth.tsv", synth.render_truth_tsv(truth))
        artifacts["registry"] = atomic_write(out_dir / "countries.tsv", registry.to_tsv())
        corpus_path = artifacts["corpus"]
        for population in spec.populations:
            names, _ = synth.generate_population(spec, population)
            pop_path = atomic_write(
                out_dir / f"population_{population.name}.txt", "\n".join(names) + "\n"
            )
            artifacts[f"population:{population.name}"] = pop_path
            dataset_names[pop_path] = population.name
            if reference_path is None:
                reference_path = pop_path
            else:
                target_paths.append(pop_path)
    else:
        corpus_path = config.corpus
        registry = (
            CountryRegistry.from_tsv(config.registry)
            if config.registry
            else CountryRegistry.default()
        )

    log.info("stage: ingest (%s)", corpus_path)
    table = read_corpus_tsv(
        corpus_path,
        registry,
        header=config.header,
        strict=config.strict,
        strip_diacritics=config.strip_diacritics,
    )

    log.info("stage: filter-core")
    core = filter_core_names(table, config.hhi_min, config.freq_min, basis=config.basis)
    artifacts["core"] = atomic_write(out_dir / "core.tsv", render_core_names(core))

    log.info("stage: typology")
    try:
        matrix = build_country_matrix(core, feature_config, config.min_core_names)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    dendrogram = ward_cluster(matrix)
    overrides = load_overrides(config.overrides) if config.overrides else ()
    weights: dict[str, float] = {}
    for name in core:
        weights[name.assigned_country] = weights.get(name.assigned_country, 0.0) + 1.0
    k = min(config.k_regions, len(matrix.countries))
    try:
        typology = cut_dendrogram(dendrogram, k, overrides, weights)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    artifacts["typology"] = atomic_write(out_dir / "typology.tsv", typology.to_tsv())
    artifacts["dendrogram"] = atomic_write(out_dir / "dendrogram.tsv", dendrogram.to_tsv())
    covered = [n for n in core if n.assigned_country in typology.assignment]
    if len(covered) < len(core):
        log.warning("%d core names outside the typology dropped", len(core) - len(covered))
    labeled, region_counts = relabel(covered, typology)
    artifacts["labeled"] = atomic_write(out_dir / "labeled.tsv", render_labeled_tsv(labeled))

    log.info("stage: train")
    try:
        train_set, eval_set = split(labeled, config.train_fraction, config.seed)
        model = train(
            train_set,
            config.alpha,
            feature_config,
            min_df=config.min_df,
            strip_diacritics=config.strip_diacritics,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    artifacts["model"] = model.save(out_dir / "model.json")
    artifacts["eval_set"] = atomic_write(out_dir / "eval.tsv", render_labeled_tsv(eval_set))

    log.info("stage: evaluate")
    report = evaluate(model, eval_set)
    from .correction import render_confusion_csv

    artifacts["eval_report"] = atomic_write(out_dir / "eval_report.json", report.to_json())
    artifacts["confusion"] = atomic_write(
        out_dir / "confusion.csv", render_confusion_csv(report.regions, report.confusion)
    )

    log.info("stage: calibrate")
    counts = ConfusionCounts(report.regions, report.confusion.astype(float))
    provenance: dict[str, object] = {"confusion": "confusion.csv"}
    if reference_path is not None:
        reference_names = _read_population(reference_path)
        guessed, _ = diversity.tally_guesses(model, reference_names)
        if np.any(guessed == 0):
            missing = [r for r, g in zip(model.regions, guessed) if g == 0]
            raise ConfigError(
                f"reference population yields zero guesses for: {', '.join(missing)}"
            )
        priors = guessed / guessed.sum()
        counts = reweight_priors(counts, priors)
        provenance["priors_source"] = f"reference:{Path(reference_path).name}"
        provenance["priors"] = ",".join(f"{p:.6g}" for p in priors)
    else:
        provenance["priors_source"] = "evaluation column shares (no reference given)"
    operator = correction_operator(counts, provenance)
    artifacts["operator"] = atomic_write(out_dir / "operator.csv", operator.to_csv())

    if reference_path is not None:
        log.info("stage: compare")
        datasets: list[tuple[str, list[str]]] = []
        for path in [reference_path, *target_paths]:
            name = dataset_names.get(Path(path), Path(path).stem)
            datasets.append((name, _read_population(path)))
        if len({name for name, _ in datasets}) != len(datasets):
            raise ConfigError("duplicate dataset names among reference/targets")
        dists = _distributions_for(model, operator, datasets)
        profiles = [diversity.representation_ratios(d, dists[0]) for d in dists]
        report_paths = diversity.emit_report(
            profiles,
            dists,
            out_dir,
            provenance={
                "model_sha256": sha256_file(artifacts["model"]),
                "operator": "operator.csv",
                "reference": dists[0].dataset_name,
                "config": {
                    "seed": config.seed,
                    "alpha": config.alpha,
                    "train_fraction": config.train_fraction,
                    "hhi_min": config.hhi_min,
                    "freq_min": config.freq_min,
                    "min_core_names": config.min_core_names,
                    "min_df": config.min_df,
                    "n_values": list(config.n_values),
                    "pad_boundaries": config.pad_boundaries,
                    "k_regions": config.k_regions,
                },
            },
        )
        artifacts.update(report_paths)

    summary = {
        "seed": config.seed,
        "n_records": len(table),
        "n_surnames": len(table.surnames()),
        "n_core_names": len(core),
        "regions": {r: region_counts[r] for r in typology.regions},
        "n_train": len(train_set),
        "n_eval": len(eval_set),
        "accuracy": report.accuracy,
        "artifacts": {key: artifacts[key].name for key in sorted(artifacts)},
    }
    artifacts["summary"] = atomic_write(out_dir / "summary.json", dumps(summary))
    return artifacts


def cmd_pipeline(args) -> int:
    overrides: dict[str, object] = {}
    if args.out_dir:
        overrides["out_dir"] = args.out_dir
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.k is not None:
        overrides["k_regions"] = args.k
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    config = PipelineConfig.from_file(args.config, overrides)
    artifacts = run_pipeline(config)
    for key in sorted(artifacts):
        print(f"{key}: {artifacts[key]}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------- parser


FORMATS_HELP = """\
file formats:
  corpus TSV       surname<TAB>country<TAB>count, UTF-8, LF endings, no header
                   by default (--header skips the first row)
  registry TSV     country_code<TAB>name (bundled 176-entry list by default)
  gazetteer TSV    alias<TAB>country_code
  core-name TSV    surname<TAB>country<TAB>hhi<TAB>max_frequency (6 sig. digits)
  labeled TSV      surname<TAB>region (train/eval sets)
  overrides TSV    REASSIGN<TAB>country<TAB>region or DELETE<TAB>country
  typology TSV     country<TAB>region (DELETED marks dropped countries)
  dendrogram TSV   node_a<TAB>node_b<TAB>height<TAB>new_node, leaf ids in
                   leading '# leaf' comment lines
  vocabulary       one n-gram token per line, order defines feature index
  population       one surname per line
  confusion CSV    header row/column of region labels, counts per cell
  operator CSV     row-stochastic matrix with '# key: value' provenance header
  model JSON       versioned document with regions, vocabulary, log priors and
                   log likelihoods (17 significant digits)

environment:
  ONOMA_THREADS    caps worker threads where stages parallelize (0 = auto)
"""


def build_parser() -> _Parser:
    parser = _Parser(
        prog="onoma",
        description="Surname-origin inference pipeline over TSV corpora.",
        epilog=FORMATS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and merge a raw occurrence TSV")
    p.add_argument("corpus", help="surname<TAB>country<TAB>count TSV")
    p.add_argument("--out", help="write merged TSV here (default: stdout)")
    _add_corpus_opts(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("filter-core", help="extract concentration-filtered core names")
    p.add_argument("corpus")
    p.add_argument("--out", help="core-name TSV (default: stdout)")
    p.add_argument("--hhi-min", type=float, default=0.8, help="minimum share concentration")
    p.add_argument("--freq-min", type=float, default=1e-6, help="minimum maximal frequency")
    p.add_argument(
        "--basis",
        choices=("frequency", "count"),
        default="frequency",
        help="share basis for the concentration index",
    )
    _add_corpus_opts(p)
    p.set_defaults(func=cmd_filter_core)

    p = sub.add_parser("typology", help="cluster countries and relabel core names")
    p.add_argument("--core", required=True, help="core-name TSV")
    p.add_argument("--k", type=int, default=7, help="number of regions")
    p.add_argument("--overrides", help="REASSIGN/DELETE override TSV")
    p.add_argument("--min-core-names", type=int, default=20)
    p.add_argument("--out-dir", required=True)
    _add_feature_opts(p)
    p.set_defaults(func=cmd_typology)

    p = sub.add_parser("train", help="split the labeled set and fit the classifier")
    p.add_argument("--labeled", required=True, help="surname<TAB>region TSV")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--alpha", type=float, default=0.1, help="additive smoothing")
    p.add_argument("--train-fraction", type=float, default=0.85)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--min-df", type=int, default=1)
    p.add_argument("--eval-out", help="write the held-out evaluation set here")
    p.add_argument("--train-out", help="write the training set here")
    p.add_argument("--vocab-out", help="write the vocabulary (one token per line)")
    p.add_argument("--strip-diacritics", action="store_true")
    _add_feature_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="confusion matrix and per-region metrics")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--eval", help="labeled evaluation TSV (needs --model)")
    src.add_argument("--confusion", help="precomputed confusion CSV")
    p.add_argument("--model", help="model JSON (with --eval)")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--confusion-out", help="also write the confusion CSV here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "calibrate", help="reweight confusion priors and emit the correction operator"
    )
    p.add_argument("--confusion", required=True, help="confusion CSV")
    p.add_argument("--model", help="model JSON (with --reference)")
    p.add_argument("--reference", help="reference population, one surname per line")
    p.add_argument("--priors", help="explicit comma-separated priors (normalized)")
    p.add_argument("--out", required=True, help="operator CSV path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("classify-population", help="corrected origin distribution of a list")
    p.add_argument("--model", required=True)
    p.add_argument("--operator", required=True)
    p.add_argument("--input", required=True, help="one surname per line")
    p.add_argument("--name", help="dataset name (default: input file stem)")
    p.add_argument("--out", required=True, help="distribution JSON path")
    p.set_defaults(func=cmd_classify_population)

    p = sub.add_parser("compare", help="representativeness ratios against a reference")
    p.add_argument("targets", nargs="+", help="target population files")
    p.add_argument("--reference", required=True, help="reference population file")
    p.add_argument("--model", required=True)
    p.add_argument("--operator", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate a ground-truth synthetic corpus")
    p.add_argument("--spec", help="synthetic spec JSON")
    p.add_argument("--regions", type=int, help="number of regions (without --spec)")
    p.add_argument("--countries-per-region", type=int)
    p.add_argument("--names", type=int, help="names per country")
    p.add_argument("--overlap", type=float, help="0 separable .. 1 indistinguishable")
    p.add_argument("--seed", type=int)
    p.add_argument("--population-size", type=int, default=2000)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--score", action="store_true", help="also run the scored pipeline")
    p.add_argument("--min-core-names", type=int, default=20)
    p.add_argument("--alpha", type=float, default=0.1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="run every stage from one JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="override the config's output directory")
    p.add_argument("--seed", type=int, help="override the config's seed")
    p.add_argument("--k", type=int, help="override the region count")
    p.add_argument("--alpha", type=float, help="override the smoothing parameter")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except InputFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
