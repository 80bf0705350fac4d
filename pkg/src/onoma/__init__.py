"""Surname-origin inference pipeline.

Curates concentration-filtered "core names" from surname-country occurrence
data, derives a data-driven region typology by clustering countries on their
n-gram profiles, trains a multinomial naive Bayes origin classifier, corrects
aggregate guesses through a prior-reweighted confusion matrix, and compares
populations by representativeness ratios.
"""

from .classifier import (
    Classification,
    EvalReport,
    TrainedModel,
    classify,
    evaluate,
    split,
    train,
)
from .corpus import (
    CoreName,
    CountryRegistry,
    Gazetteer,
    OccurrenceRecord,
    OccurrenceTable,
    core_shares,
    filter_core_names,
    hhi,
    ingest,
    normalize_surname,
    tag_affiliation_country,
)
from .correction import (
    ConfusionCounts,
    CorrectionOperator,
    correct_counts,
    correction_operator,
    reweight_priors,
)
from .diversity import (
    OriginDistribution,
    RepresentationProfile,
    canberra,
    distribution,
    emit_report,
    order_profiles,
    representation_ratios,
)
from .errors import ConfigError, InputFormatError, InvariantError, OnomaError
from .features import FeatureVector, NGramConfig, build_vocabulary, extract
from .synth import (
    MarkovChain,
    PopulationSpec,
    RegionGenerator,
    Scorecard,
    SynthSpec,
    generate,
    generate_population,
    score_pipeline,
    standard_spec,
)
from .typology import (
    DEFAULT_REGION_LABELS,
    CountryFeatureMatrix,
    Dendrogram,
    Merge,
    Override,
    RegionTypology,
    agglomerate,
    build_country_matrix,
    cut_dendrogram,
    relabel,
    ward_cluster,
)

__version__ = "0.1.0"
