"""Open-vocabulary object placement pipeline and placement evaluation suite."""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    BinaryMask,
    DistanceField,
    Heatmap,
    Point2D,
    Point3D,
    argmax_point,
    bottommost_point,
    euclidean_distance_transform,
    innermost_point,
    mask_union,
    nearest_opposite_point,
    signed_distance,
)
from .scene_data import (  # noqa: F401
    AnnotationSet,
    DatasetIndex,
    EvaluablePair,
    LabelMap,
    LabelMask,
    ObjectAnnotation,
    RemapTable,
    SceneImage,
    apply_remap,
    baseline_placements,
    consolidate_mask,
    filter_evaluable_pairs,
    index_digest,
    load_dataset,
    random_placement,
)
from .metrics import (  # noqa: F401
    BackendEmbeddings,
    EmbeddingVector,
    FixtureEmbeddings,
    Stage1Report,
    Stage2Report,
    Stage3Report,
    cosine_similarity,
    in_mask_score,
    pearl_score,
    sbert_max,
    stage1_metrics,
    stage2_metrics,
    stage3_metrics,
)
from .report import EvaluationReport, build_report  # noqa: F401
from .backends import BackendClient, FixtureRecorder, FixtureStore, HttpBridge, open_wire_backend  # noqa: F401
from .pipeline import (  # noqa: F401
    CameraIntrinsics,
    FilterConfig,
    PipelineConfig,
    PlacementRecord,
    backproject,
    preset,
    run_many,
    run_pipeline,
)
