"""Driver activity localization from pose keypoints.

Graph-based changed-interval detection on k-MST similarity graphs proposes
activity intervals per camera view; proposals are fused across views,
classified through a question-answering port and scored with an
overlap-based metric.
"""

from .config import DetectionConfig, RunConfig
from .evaluate import (Activity, EvaluationReport, GroundTruth, evaluate, match_and_score,
                       overlap_score, within_tolerance)
from .graph import SimilarityGraph, graph_stats, kmst, pairwise_distances
from .intervals import ActivityInterval
from .keypoints import KeypointSeries, View
from .scan import ScanResult, detect, permutation_pvalue, scan

__version__ = "0.1.0"

__all__ = [
    "Activity", "ActivityInterval", "DetectionConfig", "EvaluationReport", "GroundTruth",
    "KeypointSeries", "RunConfig", "ScanResult", "SimilarityGraph", "View", "detect",
    "evaluate", "graph_stats", "kmst", "match_and_score", "overlap_score",
    "pairwise_distances", "permutation_pvalue", "scan", "within_tolerance",
]
