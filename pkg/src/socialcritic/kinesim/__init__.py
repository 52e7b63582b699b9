"""Kinematic execution: forward kinematics, rendering, trajectories, keyframes."""

from .dataset import JointVisuals, VisualDataset, build_visual_dataset, sample_values
from .fk import forward_kinematics
from .keyframes import Keyframe, VisualLog, capture_keyframes, capture_multiview, zero_velocity_indices
from .render import Camera, RasterImage, render_pose, zoom_bounds
from .trajectory import JointTrajectory, compile_trajectory

__all__ = [
    "Camera",
    "JointTrajectory",
    "JointVisuals",
    "Keyframe",
    "RasterImage",
    "VisualDataset",
    "VisualLog",
    "build_visual_dataset",
    "capture_keyframes",
    "capture_multiview",
    "compile_trajectory",
    "forward_kinematics",
    "render_pose",
    "sample_values",
    "zero_velocity_indices",
    "zoom_bounds",
]
