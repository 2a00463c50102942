"""Bijective pixel-level feature matching engine for video object segmentation.

Library surface: tensor and mask primitives (tensors), similarity matching
(matching), mask-history embedding (embedding), the per-frame inference loop
(pipeline), J/F/G metrics (evaluation), synthetic scenes (scenes), and the
bit-exact interchange format (interchange). The hot kernels run on a
compiled extension when built and on numpy otherwise (kernels).
"""

__version__ = "0.1.0"

from .errors import (
    BimatchError,
    ConfigError,
    FormatError,
    InvalidArgumentError,
    InvalidInputError,
    StateError,
    ValidationError,
)
from .evaluation import (
    EvalReport,
    contour_accuracy_f,
    evaluate_sequence,
    region_accuracy_j,
    render_report,
)
from .embedding import (
    ConvWeights,
    MaskStack,
    PositionFeatures,
    embed_position_features,
    init_weights,
    load_weights,
    save_weights,
    stack_history,
)
from .interchange import (
    FEATURE_SCALE,
    FORMAT_VERSION,
    SequenceBundle,
    read_bundle,
    read_tensor,
    render_score_map,
    validate_bundle,
    write_bundle,
    write_tensor,
)
from .matching import (
    MatchMode,
    ScoreMapPair,
    SimMatrix,
    mask_weighted_scores,
    match,
    reduce_query_max,
    similarity_matrix,
    topk_filter,
)
from .pipeline import (
    FramePrediction,
    PipelineConfig,
    ResolutionDecision,
    VideoState,
    fusion_decode,
    init_state,
    run_sequence,
    select_working_resolution,
    soft_aggregate,
    step,
)
from .scenes import DistractorSpec, ObjectSpec, SceneConfig, generate_scene
from .tensors import (
    CoordChannels,
    FeatureMap,
    LabelMask,
    ProbMask,
    coordinate_grid,
    downsample_mask,
    normalize_channels,
    upsample_probmask,
)

__all__ = [name for name in dir() if not name.startswith("_")]
