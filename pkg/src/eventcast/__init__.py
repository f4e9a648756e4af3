"""Per-state daily event forecasting from localized news features.

The library covers the full pipeline: parsing news and incident feeds
into per-state daily feature matrices, moving-average and stacked input
representations (including the rank-test window selection), from-scratch
tree ensembles and minimal neural models, leakage-purged repeated
cross-validation, and the statistical primitives the analyses rely on.
The ``eventcast`` command drives the packaged experiment suite.
"""

__version__ = "0.1.0"

from .cluster import Dendrogram, hier_cluster, join_order
from .configfile import ConfigError, PROFILES, RunConfig, build_model_spec, profile_sizes
from .crossval import (
    CONVENTIONS,
    EvalReport,
    FoldPlan,
    FoldResult,
    fold_row_sets,
    make_folds,
    purge_rows,
    run_cv,
    supplement_training,
)
from .dataset import LocationDataset, date_range, load_state_dir, parse_date
from .ensemble import (
    ADA_EPSILON_FLOOR,
    BoostModel,
    ForestModel,
    SmoteConfig,
    ada_alpha,
    ada_predict,
    ada_train,
    default_subspace,
    rf_predict,
    rf_train,
    smote_balance,
    smote_sample,
)
from .ingest import (
    IncidentRecord,
    NewsRecord,
    ParseCounts,
    build_daily_features,
    build_dataset,
    label_vector,
    parse_incidents,
    parse_news_file,
)
from .models import MODEL_KINDS, FittedModel, ModelSpec, fit_model, load_model, save_model
from .neural import (
    NesterovSGD,
    NetSpec,
    OptimizerConfig,
    TrainingDiverged,
    backward,
    bce,
    forward,
    init_params,
    logit_gradient,
    predict_proba,
    train_net,
    weighted_bce,
)
from .registry import (
    FEATURE_GROUPS,
    FeatureId,
    FeatureRegistry,
    canonical_registry,
    load_states,
    reference_values,
)
from .stats import (
    HTestResult,
    KsResult,
    UndefinedStatisticError,
    auprc,
    auroc,
    chi2_sf,
    kolmogorov_sf,
    kruskal_wallis,
    ks_two_sample,
    rankdata,
    spearman,
)
from .synth import PlantedSignal, SynthConfig, synth_generate, synth_incidents
from .trees import DecisionTree, gini, tree_train
from .windows import (
    FittedWindows,
    MinMaxScaler,
    WindowSpec,
    aggregate_dates,
    ks_fit,
    ks_transform,
    minmax_apply,
    minmax_fit,
    moving_average,
    moving_average_matrix,
    propagate_labels,
    stack,
)

__all__ = [name for name in dir() if not name.startswith("_")]
