"""Stride-configuration lab for 2D-CNN speaker-verification backbones.

Compiles backbone specifications from stride-configuration paths on the
downsampling trellis, computes shapes, parameter counts, and FLOPs
analytically, enumerates and ranks the full stride space, and verifies the
analytic results against a minimal numeric kernel.
"""

from .analysis import (
    AnalysisError,
    ShapeUnderflowError,
    analyze,
    compare,
    conv_out_size,
    count_flops,
    count_params,
    propagate_shape,
    trace,
)
from .builder import (
    BuildError,
    BuildRequest,
    attach_head,
    build,
    depth_from_blocks,
    make_request,
    request_from_spec,
)
from .catalog import CATALOG_NAMES, PRINCIPAL_CONFIG, catalog_paths, is_cataloged
from .layers import (
    BlockKind,
    ComplexityReport,
    Family,
    LayerEntry,
    ModelSpec,
    StageSpec,
    TensorShape,
)
from .metrics import (
    DegenerateScoresError,
    ScoreFileError,
    TrialScoreSet,
    compute_eer,
    compute_min_dcf,
)
from .numkernel import (
    OpCounter,
    conv2d_backward,
    conv2d_forward,
    gradcheck_conv,
    residual_block_forward,
    run_model,
    stats_pooling_forward,
)
from .serialize import TableRow, format_table, model_from_json, model_to_json, parse_table
from .strides import (
    PathClass,
    StridePair,
    TrellisPath,
    UnknownConfigError,
    canonical_name,
    classify_path,
    downsampling_factors,
    final_factors,
    resolve_name,
)
from .trellis import (
    PathFamily,
    TrellisEndpoint,
    enumerate_endpoints,
    enumerate_paths,
    golden_gemini_endpoints,
    rank_paths_by_flops,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "BlockKind",
    "BuildError",
    "BuildRequest",
    "CATALOG_NAMES",
    "ComplexityReport",
    "DegenerateScoresError",
    "Family",
    "LayerEntry",
    "ModelSpec",
    "OpCounter",
    "PRINCIPAL_CONFIG",
    "PathClass",
    "PathFamily",
    "ScoreFileError",
    "ShapeUnderflowError",
    "StageSpec",
    "StridePair",
    "TableRow",
    "TensorShape",
    "TrellisEndpoint",
    "TrellisPath",
    "TrialScoreSet",
    "UnknownConfigError",
    "analyze",
    "attach_head",
    "build",
    "canonical_name",
    "catalog_paths",
    "classify_path",
    "compare",
    "compute_eer",
    "compute_min_dcf",
    "conv2d_backward",
    "conv2d_forward",
    "conv_out_size",
    "count_flops",
    "count_params",
    "depth_from_blocks",
    "downsampling_factors",
    "enumerate_endpoints",
    "enumerate_paths",
    "final_factors",
    "format_table",
    "golden_gemini_endpoints",
    "gradcheck_conv",
    "is_cataloged",
    "make_request",
    "model_from_json",
    "model_to_json",
    "parse_table",
    "propagate_shape",
    "rank_paths_by_flops",
    "request_from_spec",
    "residual_block_forward",
    "resolve_name",
    "run_model",
    "stats_pooling_forward",
    "trace",
]
