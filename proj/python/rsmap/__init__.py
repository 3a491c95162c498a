"""Vectorized road-marking maps from roadside camera masks and LiDAR."""

from ._rsmap import (
    RsmapError,
    alpha_shape,
    average_precision_from_ranking,
    chamfer_one_way,
    cluster_nn,
    evaluate,
    extract_ground,
    fit_line_segment,
    grid_index,
    mean_intensity,
    project_point,
    run_pipeline,
    sor_denoise,
    synth,
)

__all__ = [
    "RsmapError",
    "alpha_shape",
    "average_precision_from_ranking",
    "chamfer_one_way",
    "cluster_nn",
    "evaluate",
    "extract_ground",
    "fit_line_segment",
    "grid_index",
    "mean_intensity",
    "project_point",
    "run_pipeline",
    "sor_denoise",
    "synth",
]
