"""Lesion classification and fuzzy-clustering/level-set segmentation for CT slices."""

from .boosting import (
    BaggedEnsemble,
    BoostedModel,
    Dataset,
    GbmConfig,
    LogisticLoss,
    RegressionTree,
    SquaredLoss,
    base_score,
    build_tree_second_order,
    fit_bagged_trees,
    fit_gbm_first_order,
    fit_xgboost,
    get_loss,
    grad_hess,
    load_model,
    majority_vote,
    model_from_text,
    model_to_text,
    predict,
    predict_batch,
    predict_class,
    predict_score,
    save_model,
)
from .errors import (
    ConfigError,
    EvolutionDivergedError,
    FcmDataError,
    FeatureFormatError,
    LungCadError,
    ModelFormatError,
    NoLesionRegionError,
    PgmError,
)
from .fcm import (
    FcmConfig,
    FcmResult,
    MembershipMap,
    fcm_fit,
    fcm_objective,
    select_lesion_cluster,
    spatial_regularize,
)
from .features import (
    DESCRIPTOR_DIM,
    FeatureFile,
    FeatureRecord,
    builtin_descriptor,
    format_feature_file,
    parse_feature_file,
    read_features,
    write_features,
)
from .imaging import (
    ImageGrid,
    ScalarField,
    SegMask,
    decode_pgm,
    dice,
    encode_pgm,
    gaussian_smooth,
    gradient_central,
    load_image,
    normalize,
    save_image,
)
from .levelset import (
    EdgeIndicator,
    LevelSetField,
    LevelSetParams,
    balloon_force,
    curvature,
    derive_params,
    dirac,
    edge_indicator,
    evolve,
    fuzzy_level_set_segment,
    init_from_membership,
    zero_level_mask,
)
from .pipeline import (
    ConfusionMatrix,
    PipelineConfig,
    confusion_from_predictions,
    load_config,
    metrics,
    parse_config,
    stratified_split,
)

__version__ = "0.1.0"
