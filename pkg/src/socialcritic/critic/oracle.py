"""Geometric stand-in for the critic, driven by known per-step target poses.

Scores map normalized joint error onto the reward bands:

    e <= 0.05                         -> 9
    0.05 < e <= 0.15                  -> 8
    right direction, e <= 0.4         -> 6
    right direction, e > 0.4          -> 5
    refined joint still / no motion wanted, but off target -> 3
    opposite direction                -> 2
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ModelMismatch, OracleUnsupportedRole
from ..kinesim.keyframes import VisualLog
from ..mjcf import RobotModel
from .schema import (
    EvaluationReply,
    PinpointReply,
    PromptBundle,
    ProposalReply,
    Role,
    ScoreReply,
    StructuredReply,
)

SUCCESS_ERROR = 0.15
EXACT_ERROR = 0.05
NEAR_ERROR = 0.4
STILL_TOLERANCE = 0.05


def _pose(model: RobotModel, pose, what: str) -> np.ndarray:
    if isinstance(pose, VisualLog):
        pose = pose.final_pose(max(pose.steps))
    arr = np.asarray(pose, dtype=float)
    if arr.shape != (model.n_joints,):
        raise ModelMismatch(f"{what} has shape {arr.shape}, model {model.name!r} has {model.n_joints} joints")
    return arr


def score_oracle(model: RobotModel, target_pose, candidate, previous_pose, joint: str) -> int:
    """Reward in 1..10 for ``candidate`` against ``target_pose`` on ``joint``.

    ``candidate`` may be a pose vector or a visual log (its last keyframe's
    pose is used). ``previous_pose`` is the configuration before the change
    being scored and fixes the direction test.
    """
    target = _pose(model, target_pose, "target pose")
    cand = _pose(model, candidate, "candidate")
    prev = _pose(model, previous_pose, "previous pose")
    i = model.joint_index(joint)
    span = model.joints[i].span
    e = abs(cand[i] - target[i]) / span
    if e <= EXACT_ERROR:
        return 9
    if e <= SUCCESS_ERROR:
        return 8
    moved = np.sign(cand[i] - prev[i])
    wanted = np.sign(target[i] - prev[i])
    if moved != 0 and moved == wanted:
        return 6 if e <= NEAR_ERROR else 5
    if moved != 0 and wanted != 0:
        return 2
    return 3


@dataclass
class StepIssue:
    joint: str
    kind: str  # "off_target" | "extraneous"
    error: float
    direction: str


class OracleCritic:
    """Answers from target poses: ``{step: {joint: value}}``.

    Steps absent from ``targets`` are unconstrained; listed steps require the
    listed joints to end near their targets and every other joint to stay
    put. Besides scoring and proposing, the oracle also judges and pinpoints
    so a fully oracle-backed refinement loop can run to completion.
    """

    roles = frozenset(
        {Role.REWARD_SCORER, Role.REFINEMENT_PROPOSER, Role.HOLISTIC_EVALUATOR, Role.STEP_PINPOINTER}
    )

    def __init__(self, model: RobotModel, targets: dict):
        self.model = model
        self.targets = {int(k): {j: float(v) for j, v in joints.items()} for k, joints in targets.items()}
        for joints in self.targets.values():
            for name in joints:
                model.joint(name)

    @classmethod
    def from_file(cls, model: RobotModel, path: str | Path) -> "OracleCritic":
        return cls(model, json.loads(Path(path).read_text()))

    def target_pose(self, step: int, start_pose) -> np.ndarray:
        pose = np.array(start_pose, dtype=float)
        for name, value in self.targets.get(step, {}).items():
            pose[self.model.joint_index(name)] = self.model.joint(name).clip(value)
        return pose

    def issues(self, step: int, start_pose, end_pose) -> list[StepIssue]:
        if step not in self.targets:
            return []
        start = np.asarray(start_pose, dtype=float)
        end = np.asarray(end_pose, dtype=float)
        wanted = self.targets[step]
        out = []
        for i, j in enumerate(self.model.joints):
            if j.name in wanted:
                goal = j.clip(wanted[j.name])
                err = abs(end[i] - goal) / j.span
                if err > SUCCESS_ERROR:
                    out.append(StepIssue(j.name, "off_target", err, "increase" if goal > end[i] else "decrease"))
            else:
                moved = abs(end[i] - start[i]) / j.span
                if moved > STILL_TOLERANCE:
                    out.append(StepIssue(j.name, "extraneous", moved, "unspecified"))
        return out

    def complete(self, bundle: PromptBundle) -> StructuredReply:
        if bundle.role not in self.roles:
            raise OracleUnsupportedRole(f"the oracle cannot answer role {bundle.role.value!r}")
        f = bundle.facts()
        if bundle.role is Role.REWARD_SCORER:
            step = int(f["step"])
            target = self.target_pose(step, f["start_pose"])
            return ScoreReply(score_oracle(self.model, target, f["candidate_pose"], f["previous_pose"], f["joint"]))
        if bundle.role in (Role.HOLISTIC_EVALUATOR, Role.STEP_PINPOINTER):
            bad = {}
            for key, s in sorted(f["steps"].items(), key=lambda kv: int(kv[0])):
                found = self.issues(int(key), s["start_pose"], s["end_pose"])
                if found:
                    bad[int(key)] = found
            if bundle.role is Role.STEP_PINPOINTER:
                return PinpointReply(tuple(sorted(bad)) or (1,))
            if not bad:
                return EvaluationReply("pass")
            parts = [
                f"Step {k}: " + ", ".join(f"{x.joint} {x.kind.replace('_', ' ')} by {x.error:.2f} of its range" for x in v)
                for k, v in bad.items()
            ]
            return EvaluationReply("fail", "; ".join(parts) + ".")
        return self._propose(f)

    def _propose(self, f: dict) -> ProposalReply:
        step = int(f["step"])
        blacklist = set(f.get("blacklist", []))
        commanded = {c["joint"]: c for c in f.get("commands", [])}
        found = [x for x in self.issues(step, f["start_pose"], f["end_pose"]) if x.joint not in blacklist]
        found.sort(key=lambda x: (x.kind != "extraneous", -x.error, self.model.joint_index(x.joint)))
        for x in found:
            if x.kind == "extraneous":
                if x.joint in commanded:
                    return ProposalReply("Delete", x.joint, "unspecified", rationale="joint should not move in this step")
                continue
            goal = self.targets[step][x.joint]
            if x.joint in commanded:
                current = float(commanded[x.joint]["value"])
                kind = "Adjust"
            else:
                current = float(f["start_pose"][self.model.joint_index(x.joint)])
                kind = "Add"
            direction = "increase" if goal > current else "decrease"
            return ProposalReply(kind, x.joint, direction, rationale=f"{x.joint} is off target")
        for name in commanded:
            if name not in blacklist:
                return ProposalReply("Adjust", name, "unspecified", rationale="no geometric issue found")
        for j in self.model.joints:
            if j.name not in blacklist and j.name not in commanded:
                return ProposalReply("Add", j.name, "unspecified", rationale="no geometric issue found")
        raise OracleUnsupportedRole(f"no joint left to propose for step {step}")
