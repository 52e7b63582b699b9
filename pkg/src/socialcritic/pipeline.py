"""Behavior planning, joint code generation and motion evaluation as critic queries."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

import numpy as np

from .critic.schema import PromptBundle, Role, facts_section
from .errors import (
    CapabilityMismatch,
    IndexOutOfRange,
    InvalidProposal,
    NoCandidateJoints,
    PreconditionError,
    SchemaViolation,
    UnknownJoint,
)
from .kinesim.dataset import VisualDataset
from .kinesim.keyframes import VisualLog
from .kinesim.trajectory import JointTrajectory
from .mjcf import MorphologySummary, RobotModel, summarize_morphology
from .plan import (
    BehaviorPlan,
    BehaviorStep,
    ControlCommand,
    Critique,
    InvalidPlan,
    InteractionContext,
    RefinementProposal,
    check_proposal,
    clip_command,
    plan_problems,
)

logger = logging.getLogger(__name__)

# Limb words a translation may use, and the name fragments that count as
# having that limb. A word is allowed if any fragment appears in a joint name
# or in the name of a body that carries a joint.
LIMB_VOCABULARY: dict[str, tuple[str, ...]] = {
    "arm": ("arm", "shoulder", "elbow"),
    "arms": ("arm", "shoulder", "elbow"),
    "shoulder": ("shoulder", "arm"),
    "elbow": ("elbow", "arm"),
    "wrist": ("wrist", "hand", "arm"),
    "hand": ("hand", "wrist", "gripper", "finger"),
    "hands": ("hand", "wrist", "gripper", "finger"),
    "finger": ("finger", "hand", "gripper"),
    "fingers": ("finger", "hand", "gripper"),
    "leg": ("leg", "hip", "knee", "thigh"),
    "legs": ("leg", "hip", "knee", "thigh"),
    "knee": ("knee", "leg"),
    "foot": ("foot", "ankle", "leg"),
    "feet": ("foot", "ankle", "leg"),
    "head": ("head", "neck"),
    "neck": ("neck", "head"),
    "torso": ("torso", "waist", "trunk", "spine", "body", "pelvis", "chest"),
    "waist": ("waist", "torso", "trunk", "spine", "body", "pelvis"),
    "body": ("body", "torso", "waist", "trunk", "spine", "pelvis", "base"),
    "tail": ("tail",),
    "eyes": ("eye",),
    "eye": ("eye",),
    "jaw": ("jaw", "mouth"),
    "mouth": ("mouth", "jaw"),
    "ears": ("ear",),
}
_SIDES = ("left", "right")


def capability_names(model: RobotModel) -> list[str]:
    """Lower-cased model name, joint names and names of bodies that carry joints."""
    if not model.joints:
        return []
    names = {model.name.lower()} | {j.name.lower() for j in model.joints}
    names |= {b.name.lower() for b in model.bodies if b.attached_joints}
    return sorted(names)


def missing_capabilities(text: str, model: RobotModel) -> list[str]:
    """Limb words (optionally side-qualified) in ``text`` the robot lacks."""
    names = capability_names(model)
    words = re.findall(r"[a-z]+", text.lower())
    missing = []
    for pos, word in enumerate(words):
        frags = LIMB_VOCABULARY.get(word)
        if frags is None:
            continue
        side = words[pos - 1] if pos > 0 and words[pos - 1] in _SIDES else None
        pool = [n for n in names if side is None or side in n]
        if not any(f in n for f in frags for n in pool):
            phrase = f"{side} {word}" if side else word
            if phrase not in missing:
                missing.append(phrase)
    return missing


def joint_table(model: RobotModel, names=None) -> str:
    rows = []
    for j in model.joints:
        if names is not None and j.name not in names:
            continue
        unit = "m" if j.kind == "slide" else "rad"
        rows.append(
            f"{j.name}: {j.kind} on body {j.body}, limits [{j.limit_min:.4g}, {j.limit_max:.4g}] {unit}, "
            f"default {j.default_value:.4g}"
        )
    return "\n".join(rows)


def earliest_step(indices, plan_length: int) -> int:
    """Smallest index in 1..plan_length, the step to fix first."""
    valid = [int(i) for i in indices if 1 <= int(i) <= plan_length]
    if not valid:
        raise IndexOutOfRange(f"no step index among {list(indices)} lies in 1..{plan_length}")
    return min(valid)


def _pose_list(pose) -> list[float]:
    return [float(x) for x in np.asarray(pose, dtype=float)]


def _command_payload(c: ControlCommand) -> dict:
    out = {"joint": c.joint, "value": c.value, "mode": c.mode.value}
    if c.oscillates:
        out.update(amplitude=c.amplitude, cycles=c.cycles)
    return out


def step_poses(model: RobotModel, plan: BehaviorPlan, visual_log: VisualLog, trajectory: JointTrajectory | None = None):
    """``{k: (start_pose, end_pose)}`` for every step in the log.

    With a trajectory the window boundaries are exact; otherwise a step
    starts where the previous step's last keyframe ended.
    """
    out = {}
    prev = model.default_array()
    for step in plan.steps:
        if trajectory is not None:
            out[step.index] = (trajectory.start_pose(step.index), trajectory.end_pose(step.index))
        elif step.index in visual_log.steps and visual_log.steps[step.index]:
            end = visual_log.final_pose(step.index)
            out[step.index] = (prev, end)
            prev = end
    return out


@dataclass
class Pipeline:
    """The semantic stages, each one critic query over typed data."""

    critic: object
    model: RobotModel
    dataset: VisualDataset | None = None
    include_zoom: bool = True

    def __post_init__(self):
        self.morphology: MorphologySummary = summarize_morphology(self.model)

    def _ask(self, role: Role, schema: str, sections, images=()):
        return self.critic.complete(PromptBundle(role, tuple(sections), schema, tuple(images)))

    # --- planning --------------------------------------------------------------

    def translate_action(self, context: InteractionContext) -> str:
        sections = [("context", context.description)]
        if context.human_action:
            sections.append(("human_action", context.human_action))
        sections.append(("morphology", self.morphology.text))
        text = self._ask(Role.TRANSLATOR, "translation", sections).text
        missing = missing_capabilities(text, self.model)
        if missing:
            raise CapabilityMismatch(missing)
        return text

    def decompose_steps(self, translated_action: str) -> BehaviorPlan:
        if not translated_action.strip():
            raise PreconditionError("cannot plan an empty action")
        sections = [("action", translated_action), ("morphology", self.morphology.text)]
        raw = []
        for attempt in (1, 2):
            reply = self._ask(Role.PLANNER, "plan", sections)
            raw.append(reply.to_payload())
            problems = plan_problems(list(reply.steps))
            if not problems:
                return BehaviorPlan(translated_action, reply.steps)
            logger.warning("plan attempt %d rejected: %s", attempt, "; ".join(problems))
            sections = sections + [("rejected_plan", "The previous plan was invalid: " + "; ".join(problems))]
        raise SchemaViolation("planner returned an invalid plan twice: " + "; ".join(problems), raw)

    # --- code generation -------------------------------------------------------

    def candidate_groups(self, step: BehaviorStep) -> list[list[str]]:
        """Joint groups for one step; each group yields one command."""
        sections = [
            ("step", f"Step {step.index} ({step.t_start:g}-{step.t_end:g} s): {step.description}"),
            ("morphology", self.morphology.text),
            ("joints", joint_table(self.model)),
        ]
        reply = self._ask(Role.CODE_GENERATOR, "candidates", sections)
        groups = [list(g) for g in reply.groups] if reply.groups else [list(reply.joints)]
        out = []
        for g in groups:
            known = []
            for name in g:
                if self.model.has_joint(name):
                    if name not in known:
                        known.append(name)
                else:
                    logger.warning("step %d: dropping unknown candidate joint %r", step.index, name)
            if known:
                out.append(known)
        if not out:
            raise NoCandidateJoints(f"no real joints among the candidates for step {step.index}")
        return out

    def identify_candidate_joints(self, step: BehaviorStep) -> list[str]:
        names: list[str] = []
        for g in self.candidate_groups(step):
            names.extend(n for n in g if n not in names)
        return names

    def _dataset_images(self, joints) -> list:
        if self.dataset is None:
            return []
        images = []
        for name in joints:
            images.extend(self.dataset[name].image_list(self.include_zoom))
        return images

    def select_joint_and_value(self, step: BehaviorStep, candidates: list[str]) -> ControlCommand:
        if not candidates:
            raise PreconditionError("select_joint_and_value needs at least one candidate")
        lines = []
        for name in candidates:
            values = self.dataset[name].values if self.dataset is not None else None
            extra = f"; pictured at {json.dumps(values, sort_keys=True)}" if values else ""
            lines.append(joint_table(self.model, [name]) + extra)
        sections = [
            ("step", f"Step {step.index} ({step.t_start:g}-{step.t_end:g} s): {step.description}"),
            ("candidates", "\n".join(lines)),
        ]
        reply = self._ask(Role.CODE_GENERATOR, "command", sections, self._dataset_images(candidates))
        if not self.model.has_joint(reply.joint):
            raise UnknownJoint(reply.joint)
        if reply.joint not in candidates:
            logger.warning("step %d: critic chose %r outside the candidates %s", step.index, reply.joint, candidates)
        cmd = ControlCommand(reply.joint, reply.value, reply.mode, reply.amplitude or 0.0, reply.cycles or 0.0)
        return clip_command(self.model, cmd)

    def generate_step_commands(self, step: BehaviorStep) -> tuple[ControlCommand, ...]:
        cmds: list[ControlCommand] = []
        for group in self.candidate_groups(step):
            cmd = self.select_joint_and_value(step, group)
            if any(c.joint == cmd.joint for c in cmds):
                logger.warning("step %d: ignoring a second command on %r", step.index, cmd.joint)
                continue
            cmds.append(cmd)
        return tuple(cmds)

    # --- evaluation ------------------------------------------------------------

    def _log_facts(self, plan: BehaviorPlan, visual_log: VisualLog, trajectory) -> tuple[str, str]:
        poses = step_poses(self.model, plan, visual_log, trajectory)
        return facts_section(
            {"steps": {str(k): {"start_pose": _pose_list(a), "end_pose": _pose_list(b)} for k, (a, b) in poses.items()}}
        )

    def _plan_text(self, plan: BehaviorPlan) -> str:
        return "\n".join(f"Step {s.index} ({s.t_start:g}-{s.t_end:g} s): {s.description}" for s in plan.steps)

    def evaluate_holistic(
        self,
        context: InteractionContext,
        plan: BehaviorPlan,
        visual_log: VisualLog,
        trajectory: JointTrajectory | None = None,
    ) -> Critique:
        if visual_log is None or len(visual_log) == 0:
            raise PreconditionError("cannot evaluate an empty visual log")
        sections = [
            ("context", context.description),
            ("plan", self._plan_text(plan)),
            self._log_facts(plan, visual_log, trajectory),
        ]
        reply = self._ask(Role.HOLISTIC_EVALUATOR, "evaluation", sections, visual_log.images(self.include_zoom))
        return Critique(reply.verdict, reply.critique)

    def pinpoint_erroneous_step(
        self,
        critique: Critique,
        plan: BehaviorPlan,
        visual_log: VisualLog | None = None,
        trajectory: JointTrajectory | None = None,
    ) -> int:
        if critique.passed:
            raise PreconditionError("pinpointing needs a failing critique")
        sections = [("critique", critique.text), ("plan", self._plan_text(plan))]
        images = ()
        if visual_log is not None:
            sections.append(self._log_facts(plan, visual_log, trajectory))
            images = visual_log.images(self.include_zoom)
        reply = self._ask(Role.STEP_PINPOINTER, "pinpoint", sections, images)
        return earliest_step(reply.indices, len(plan))

    def propose_refinement(
        self,
        critique: Critique,
        plan: BehaviorPlan,
        step_index: int,
        commands,
        *,
        start_pose=None,
        end_pose=None,
        blacklist=(),
        visual_log: VisualLog | None = None,
    ) -> RefinementProposal:
        step = plan.step(step_index)
        commands = tuple(commands)
        start = self.model.default_array() if start_pose is None else np.asarray(start_pose, dtype=float)
        end = start if end_pose is None else np.asarray(end_pose, dtype=float)
        facts = {
            "step": step.index,
            "start_pose": _pose_list(start),
            "end_pose": _pose_list(end),
            "commands": [_command_payload(c) for c in commands],
            "blacklist": sorted(blacklist),
        }
        sections = [
            ("critique", critique.text),
            ("step", f"Step {step.index} ({step.t_start:g}-{step.t_end:g} s): {step.description}"),
            ("commands", json.dumps([_command_payload(c) for c in commands], sort_keys=True)),
            ("joints", joint_table(self.model)),
        ]
        if blacklist:
            sections.append(("excluded_joints", ", ".join(sorted(blacklist))))
        sections.append(facts_section(facts))
        images = []
        if visual_log is not None and step.index in visual_log.steps:
            images.extend(
                (label, img) for label, img in visual_log.images(self.include_zoom) if label.startswith(f"step{step.index}_")
            )
        images.extend(self._dataset_images([c.joint for c in commands]))

        reply = self._ask(Role.REFINEMENT_PROPOSER, "proposal", sections, images)
        proposal = RefinementProposal(
            step.index, reply.kind, reply.joint, reply.direction, reply.rationale, reply.magnitude_hint
        )
        check_proposal(proposal, plan, commands, self.model)
        if proposal.joint in blacklist:
            raise InvalidProposal(f"{proposal.joint!r} already failed in step {step.index}")
        return proposal


__all__ = [
    "InvalidPlan",
    "LIMB_VOCABULARY",
    "Pipeline",
    "capability_names",
    "earliest_step",
    "joint_table",
    "missing_capabilities",
    "step_poses",
]
