"""Self-labeled pixel-level part parsing and visibility-aware aligned
retrieval on dense feature maps.

The pieces, in data-flow order: a synthetic generator plants part
structure into feature maps (synthetic); cascaded per-identity clustering
turns maps into pseudo part labels (cascade, kmeans); a linear pixel
classifier learns those labels and pools part descriptors (classifier);
descriptors are compared with a visibility-aware aligned distance
(matching); retrieval and parsing quality are scored (metrics, losses);
and the pipeline module ties the loop together behind the CLI.
"""

from .cascade import (CascadePartLabeler, PartOrdering, generate_pseudo_labels,
                      stage1_foreground_split, stage2_part_split)
from .classifier import (ConfidenceMaps, PixelPartClassifier, forward_confidences,
                         labeled_pixels, parsing_gradient, parsing_loss,
                         pool_descriptor, pool_descriptors, train_classifier)
from .errors import (DegenerateInputError, DivergenceError, FormatError,
                     ValidationError)
from .features import (UNLABELED, Descriptor, FeatureMap, FeatureMapSet, LabelMap,
                       activation_map, direction_map)
from .kmeans import LloydKMeans, kmeans
from .losses import IdHead, LossReport, reid_objective, smoothed_ce, triplet_loss
from .matching import (DistanceMatrix, aligned_distance, cosine_distance,
                       distance_matrix, visibility_labels)
from .metrics import MetricReport, cmc_map, parsing_iou
from .pipeline import (IntervalRecord, PipelineResult, RunConfig, parse_config,
                       run_pipeline, split_query_gallery)
from .schedule import LrSchedule
from .synthetic import SyntheticSpec, generate

__version__ = "0.1.0"

__all__ = [
    "CascadePartLabeler", "ConfidenceMaps", "DegenerateInputError", "Descriptor",
    "DistanceMatrix", "DivergenceError", "FeatureMap", "FeatureMapSet",
    "FormatError", "IdHead", "IntervalRecord", "LabelMap", "LloydKMeans",
    "LossReport", "LrSchedule", "MetricReport", "PartOrdering",
    "PipelineResult", "PixelPartClassifier", "RunConfig", "SyntheticSpec",
    "UNLABELED", "ValidationError", "activation_map", "aligned_distance",
    "cmc_map", "cosine_distance", "direction_map", "distance_matrix",
    "forward_confidences", "generate", "generate_pseudo_labels", "kmeans",
    "labeled_pixels", "parse_config", "parsing_gradient", "parsing_iou",
    "parsing_loss", "pool_descriptor", "pool_descriptors", "reid_objective",
    "run_pipeline", "smoothed_ce", "split_query_gallery",
    "stage1_foreground_split", "stage2_part_split", "train_classifier",
    "triplet_loss", "visibility_labels",
]
