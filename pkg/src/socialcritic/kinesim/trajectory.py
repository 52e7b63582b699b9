"""Turn a timed plan plus per-step commands into sampled joint trajectories."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import EmptyPlan, UnknownJoint
from ..mjcf import RobotModel
from ..plan import BehaviorPlan, ControlCommand, ControlSequence

DEFAULT_SAMPLE_RATE = 50.0
_EPS_T = 1e-9


@dataclass
class JointTrajectory:
    sample_rate: float
    duration: float
    times: np.ndarray  # (N,)
    samples: np.ndarray  # (N, n_joints)
    windows: list[tuple[int, float, float]]
    commands: dict[int, tuple[ControlCommand, ...]]
    joint_names: tuple[str, ...] = ()

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def window_indices(self, step: int) -> np.ndarray:
        """Sample indices inside the step's window (never empty)."""
        for k, ts, te in self.windows:
            if k == step:
                idx = np.nonzero((self.times >= ts - _EPS_T) & (self.times <= te + _EPS_T))[0]
                if idx.size == 0:
                    idx = np.array([int(np.argmin(np.abs(self.times - te)))])
                return idx
        raise KeyError(step)

    def pose_at(self, index: int) -> np.ndarray:
        return self.samples[index].copy()

    def end_pose(self, step: int) -> np.ndarray:
        return self.pose_at(int(self.window_indices(step)[-1]))

    def start_pose(self, step: int) -> np.ndarray:
        return self.pose_at(int(self.window_indices(step)[0]))

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time", *self.joint_names])
            for t, row in zip(self.times, self.samples):
                writer.writerow([f"{t:.6f}", *(f"{v:.9g}" for v in row)])
        return path


def cosine_ease(s: np.ndarray) -> np.ndarray:
    """0 -> 1 with zero slope at both ends."""
    return (1.0 - np.cos(math.pi * np.clip(s, 0.0, 1.0))) / 2.0


def compile_trajectory(
    model: RobotModel,
    sequence: ControlSequence,
    plan: BehaviorPlan,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    start_pose=None,
) -> JointTrajectory:
    if plan is None or not plan.steps:
        raise EmptyPlan("cannot compile an empty plan")
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    for cmds in sequence.per_step.values():
        for c in cmds:
            if not model.has_joint(c.joint):
                raise UnknownJoint(c.joint)

    duration = plan.duration
    n = int(round(duration * sample_rate)) + 1
    times = np.arange(n) / sample_rate
    held = model.default_array() if start_pose is None else np.asarray(start_pose, dtype=float).copy()
    values = np.tile(held, (n, 1))
    lo, hi = model.limits_array()

    for step in plan.steps:
        ts, te = step.t_start, step.t_end
        inside = (times >= ts - _EPS_T) & (times <= te + _EPS_T)
        after = times > te + _EPS_T
        s = (times[inside] - ts) / (te - ts)
        for cmd in sequence.commands(step.index):
            i = model.joint_index(cmd.joint)
            v0 = held[i]
            end = float(np.clip(cmd.value, lo[i], hi[i]))
            profile = v0 + (end - v0) * cosine_ease(s)
            if cmd.oscillates:
                profile = profile + cmd.amplitude * np.sin(2.0 * math.pi * cmd.cycles * s)
            values[inside, i] = profile
            values[after, i] = end
            held[i] = end

    if model.n_joints:
        values = np.clip(values, lo, hi)
    return JointTrajectory(
        sample_rate=float(sample_rate),
        duration=float(duration),
        times=times,
        samples=values,
        windows=[(s.index, s.t_start, s.t_end) for s in plan.steps],
        commands={s.index: tuple(sequence.commands(s.index)) for s in plan.steps},
        joint_names=tuple(model.joint_names),
    )
