"""Keyframe capture: one frame at completion for single targets, one per
zero-velocity instant for continuous motion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mjcf import RobotModel
from .render import FULL_SIZE, MULTI_VIEW_CAMERAS, ZOOM_SIZE, Camera, RasterImage, render_pose
from .trajectory import JointTrajectory

VELOCITY_EPS = 1e-4  # rad (or m) per sample
DEDUP_SAMPLES = 2


@dataclass
class Keyframe:
    time: float
    sample_index: int
    pose: np.ndarray
    views: dict[str, RasterImage] = field(default_factory=dict)


@dataclass
class VisualLog:
    steps: dict[int, list[Keyframe]]

    def images(self, include_zoom: bool = True) -> list[tuple[str, RasterImage]]:
        out = []
        for k in sorted(self.steps):
            for n, kf in enumerate(self.steps[k]):
                for view, img in kf.views.items():
                    if view == "zoom" and not include_zoom:
                        continue
                    out.append((f"step{k}_kf{n}_{view}", img))
        return out

    def final_pose(self, step: int) -> np.ndarray:
        return self.steps[step][-1].pose

    def __len__(self) -> int:
        return sum(len(v) for v in self.steps.values())


def zero_velocity_indices(values: np.ndarray, eps: float = VELOCITY_EPS, dedup: int = DEDUP_SAMPLES) -> list[int]:
    """Positions in ``values`` (1-D or (L, m)) where motion momentarily stops.

    A sample qualifies if the forward difference changes sign across it or
    either adjacent difference is below ``eps``. Qualifying samples closer
    than ``dedup`` are merged into one cluster, represented by the sample
    with the smallest central velocity (latest on ties).
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    length = v.shape[0]
    if length == 1:
        return [0]
    d = np.diff(v, axis=0)
    flagged = set()
    for col in range(v.shape[1]):
        dc = d[:, col]
        for k in range(length):
            before = dc[k - 1] if k > 0 else None
            after = dc[k] if k < length - 1 else None
            if before is not None and after is not None and before * after < 0:
                flagged.add(k)
            elif any(x is not None and abs(x) < eps for x in (before, after)):
                flagged.add(k)
    if not flagged:
        return []

    central = np.zeros(length)
    for k in range(length):
        lo, hi = max(k - 1, 0), min(k + 1, length - 1)
        central[k] = float(np.max(np.abs(v[hi] - v[lo]))) / max(hi - lo, 1)

    clusters: list[list[int]] = []
    for k in sorted(flagged):
        if clusters and k - clusters[-1][-1] <= dedup:
            clusters[-1].append(k)
        else:
            clusters.append([k])
    return [min(c, key=lambda k: (central[k], -k)) for c in clusters]


def keyframe_samples(trajectory: JointTrajectory, step: int, model: RobotModel) -> list[int]:
    """Absolute sample indices of the keyframes for one step."""
    idx = trajectory.window_indices(step)
    oscillating = [c.joint for c in trajectory.commands.get(step, ()) if c.oscillates]
    if not oscillating:
        return [int(idx[-1])]
    cols = [model.joint_index(j) for j in oscillating]
    local = zero_velocity_indices(trajectory.samples[idx][:, cols])
    if not local:
        return [int(idx[-1])]
    return [int(idx[i]) for i in local]


def _zoom_joint(trajectory: JointTrajectory, step: int) -> str | None:
    cmds = trajectory.commands.get(step, ())
    for c in cmds:
        if c.oscillates:
            return c.joint
    return cmds[0].joint if cmds else None


def capture_keyframes(
    model: RobotModel,
    trajectory: JointTrajectory,
    *,
    render: bool = True,
    include_zoom: bool = True,
    camera: Camera = Camera(),
    full_size: int = FULL_SIZE,
    zoom_size: int = ZOOM_SIZE,
    steps: list[int] | None = None,
) -> VisualLog:
    if len(trajectory) == 0:
        raise ValueError("trajectory is empty")
    wanted = steps if steps is not None else [k for k, _, _ in trajectory.windows]
    log: dict[int, list[Keyframe]] = {}
    for k in wanted:
        frames = []
        zj = _zoom_joint(trajectory, k)
        for si in keyframe_samples(trajectory, k, model):
            pose = trajectory.pose_at(si)
            t = float(trajectory.times[si])
            views = {}
            if render:
                label = f"step {k} t={t:.2f}s"
                views["full"] = render_pose(model, pose, "full", size=full_size, camera=camera, label=label)
                if include_zoom:
                    views["zoom"] = render_pose(
                        model, pose, "zoom", zj, size=zoom_size, camera=camera, label=f"{label} {zj or 'body'}"
                    )
            frames.append(Keyframe(t, si, pose, views))
        log[k] = frames
    return VisualLog(log)


def capture_multiview(
    model: RobotModel,
    trajectory: JointTrajectory,
    *,
    frames_per_second: float = 4.0,
    size: int = FULL_SIZE,
    steps: list[int] | None = None,
) -> VisualLog:
    """Temporally sampled frames from several fixed cameras, no zoom views."""
    wanted = steps if steps is not None else [k for k, _, _ in trajectory.windows]
    names = ("front", "side", "top")
    log: dict[int, list[Keyframe]] = {}
    for k in wanted:
        idx = trajectory.window_indices(k)
        t0, t1 = trajectory.times[idx[0]], trajectory.times[idx[-1]]
        count = max(int(np.ceil((t1 - t0) * frames_per_second)), 1)
        targets = t0 + (np.arange(1, count + 1) / count) * (t1 - t0)
        picks = sorted({int(idx[np.argmin(np.abs(trajectory.times[idx] - t))]) for t in targets})
        frames = []
        for si in picks:
            pose = trajectory.pose_at(si)
            t = float(trajectory.times[si])
            views = {
                name: render_pose(model, pose, "full", size=size, camera=cam, label=f"step {k} t={t:.2f}s {name}")
                for name, cam in zip(names, MULTI_VIEW_CAMERAS)
            }
            frames.append(Keyframe(t, si, pose, views))
        log[k] = frames
    return VisualLog(log)
