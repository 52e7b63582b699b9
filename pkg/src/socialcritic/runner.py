"""Generate, evaluate and refine a behavior end to end."""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .artifact import (
    ArtifactStatus,
    BehaviorArtifact,
    OutcomeRecord,
    StepRecord,
    append_step_record,
    write_artifact,
)
from .critic.backends import BackendConfig, make_critic
from .critic.schema import PromptBundle, Role, facts_section
from .errors import PipelineError, PreconditionError
from .kinesim.dataset import VisualDataset, build_visual_dataset
from .kinesim.keyframes import VisualLog, capture_keyframes, capture_multiview
from .kinesim.render import FULL_SIZE, ZOOM_SIZE, Camera
from .kinesim.trajectory import DEFAULT_SAMPLE_RATE, JointTrajectory, compile_trajectory
from .mjcf import RobotModel, load_mjcf
from .pipeline import Pipeline
from .plan import (
    MIN_AMPLITUDE,
    BehaviorPlan,
    ControlCommand,
    ControlSequence,
    Critique,
    InteractionContext,
    ProposalKind,
    RefinementProposal,
    clip_command,
)
from .ras import RasConfig, RefinementOutcome, Status, run_refinement

logger = logging.getLogger(__name__)

DEFAULT_MAX_REPLANS = 10

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2
EXIT_JOINT_FAILURE = 3


class Variant(str, enum.Enum):
    FULL = "full"
    SINGLE_CANDIDATE = "m1"  # one candidate per search round
    WHOLE_PLAN = "m2"  # refine every step each cycle, no pinpointing
    MULTI_VIEW = "m3"  # time-sampled multi-camera logs instead of keyframes
    NO_ZOOM = "m4"  # zoom views left out of every image bundle


class StageFailure(PipelineError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage} stage failed: {type(cause).__name__}: {cause}")


@dataclass(frozen=True)
class RunConfig:
    model_path: str
    context: InteractionContext
    backend: BackendConfig
    ras: RasConfig = field(default_factory=RasConfig)
    variant: Variant = Variant.FULL
    out_dir: str | None = None
    full_size: int = FULL_SIZE
    zoom_size: int = ZOOM_SIZE
    max_replans: int = DEFAULT_MAX_REPLANS
    sample_rate: float = DEFAULT_SAMPLE_RATE
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.max_replans < 0:
            raise ValueError("max_replans must be >= 0")
        if min(self.full_size, self.zoom_size) < 16:
            raise ValueError("render sizes must be at least 16 pixels")
        if self.ras.candidates_per_iteration != 3:
            raise ValueError("the search samples 3 candidates per round; use variant m1 for a single candidate")

    @property
    def search_config(self) -> RasConfig:
        if self.variant is Variant.SINGLE_CANDIDATE:
            return replace(self.ras, candidates_per_iteration=1)
        return self.ras

    def snapshot(self) -> dict:
        """Settings that shape the result; paths and endpoints are left out so artifacts compare across machines."""
        return {
            "model_file": Path(self.model_path).name,
            "backend": self.backend.kind,
            "variant": self.variant.value,
            "ras": asdict(self.search_config),
            "max_replans": self.max_replans,
            "sample_rate": self.sample_rate,
            "full_size": self.full_size,
            "zoom_size": self.zoom_size,
        }


@dataclass
class Rollout:
    sequence: ControlSequence
    trajectory: JointTrajectory
    visual_log: VisualLog


@dataclass
class RunResult:
    artifact: BehaviorArtifact
    exit_code: int
    reason: str
    artifact_path: Path | None = None
    evaluation_image_counts: list[int] = field(default_factory=list)
    rollout: Rollout | None = None


class Runner:
    """Owns one behavior's model, critic, dataset and artifact.

    Stage methods (``plan``, ``codegen``, ``evaluate``, ``refine``) each
    advance the artifact by one stage; ``run`` chains them.
    """

    def __init__(self, config: RunConfig, critic=None, model: RobotModel | None = None):
        self.config = config
        self.model = model if model is not None else load_mjcf(config.model_path)
        self.critic = critic if critic is not None else make_critic(config.backend, self.model)
        self.camera = Camera.for_model_file(config.model_path) if Path(config.model_path).exists() else Camera()
        self.pipeline = Pipeline(self.critic, self.model, include_zoom=config.variant is not Variant.NO_ZOOM)
        self._dataset: VisualDataset | None = None
        self._rollout: Rollout | None = None
        self.evaluation_image_counts: list[int] = []

    # --- helpers ---------------------------------------------------------------

    @property
    def dataset(self) -> VisualDataset:
        if self._dataset is None:
            self._dataset = build_visual_dataset(
                self.model,
                camera=self.camera,
                full_size=self.config.full_size,
                zoom_size=self.config.zoom_size,
                max_workers=self.config.jobs,
            )
            self.pipeline.dataset = self._dataset
        return self._dataset

    def new_artifact(self) -> BehaviorArtifact:
        return BehaviorArtifact(
            context=self.config.context,
            robot_name=self.model.name,
            robot_hash=self.model.source_hash,
            config=self.config.snapshot(),
            seed=self.config.ras.rng_seed,
        )

    def capture(self, trajectory: JointTrajectory, steps=None) -> VisualLog:
        c = self.config
        if c.variant is Variant.MULTI_VIEW:
            return capture_multiview(self.model, trajectory, size=c.full_size, steps=steps)
        return capture_keyframes(
            self.model,
            trajectory,
            include_zoom=c.variant is not Variant.NO_ZOOM,
            camera=self.camera,
            full_size=c.full_size,
            zoom_size=c.zoom_size,
            steps=steps,
        )

    def rollout(self, plan: BehaviorPlan, sequence: ControlSequence) -> Rollout:
        if self._rollout is not None and self._rollout.sequence == sequence:
            return self._rollout
        traj = compile_trajectory(self.model, sequence, plan, self.config.sample_rate)
        self._rollout = Rollout(sequence, traj, self.capture(traj))
        return self._rollout

    # --- stages ----------------------------------------------------------------

    def plan(self, artifact: BehaviorArtifact) -> BehaviorPlan:
        artifact.translated_action = self.pipeline.translate_action(artifact.context)
        artifact.plan = self.pipeline.decompose_steps(artifact.translated_action)
        return artifact.plan

    def codegen(self, artifact: BehaviorArtifact) -> ControlSequence:
        if artifact.plan is None:
            raise PreconditionError("code generation needs a plan")
        _ = self.dataset
        artifact.sequence = ControlSequence(
            {s.index: self.pipeline.generate_step_commands(s) for s in artifact.plan.steps}
        )
        return artifact.sequence

    def evaluate(self, artifact: BehaviorArtifact) -> Critique:
        if artifact.plan is None or artifact.sequence is None:
            raise PreconditionError("evaluation needs a plan and a control sequence")
        ro = self.rollout(artifact.plan, artifact.sequence)
        self.evaluation_image_counts.append(len(ro.visual_log.images(self.pipeline.include_zoom)))
        critique = self.pipeline.evaluate_holistic(artifact.context, artifact.plan, ro.visual_log, ro.trajectory)
        artifact.critiques.append(critique)
        return critique

    def refine(self, artifact: BehaviorArtifact, critique: Critique | None = None) -> bool:
        """One refinement cycle. False if some step has no joint left to try."""
        critique = critique if critique is not None else (artifact.critiques[-1] if artifact.critiques else None)
        if critique is None or critique.passed:
            raise PreconditionError("refinement needs a failing critique")
        if artifact.plan is None or artifact.sequence is None:
            raise PreconditionError("refinement needs a plan and a control sequence")
        _ = self.dataset
        plan = artifact.plan
        ro = self.rollout(plan, artifact.sequence)
        if self.config.variant is Variant.WHOLE_PLAN:
            targets = [s.index for s in plan.steps]
        else:
            targets = [self.pipeline.pinpoint_erroneous_step(critique, plan, ro.visual_log, ro.trajectory)]
        artifact.replans += 1
        for k in targets:
            if not self._refine_step(artifact, critique, k):
                return False
        return True

    def _refine_step(self, artifact: BehaviorArtifact, critique: Critique, k: int) -> bool:
        plan = artifact.plan
        ro = self.rollout(plan, artifact.sequence)
        log = artifact.step_log(k)
        if set(self.model.joint_names) <= set(log.blacklist):
            logger.warning("step %d: every joint has failed; nothing left to try", k)
            return False
        cmds = artifact.sequence.commands(k)
        proposal = self.pipeline.propose_refinement(
            critique,
            plan,
            k,
            cmds,
            start_pose=ro.trajectory.start_pose(k),
            end_pose=ro.trajectory.end_pose(k),
            blacklist=log.blacklist,
            visual_log=ro.visual_log,
        )
        pidx = len(artifact.proposals)
        artifact.proposals.append(proposal)
        logger.info("proposal %d: %s %s in step %d (%s)", pidx, proposal.kind.value, proposal.joint, k, proposal.direction.value)

        if proposal.kind is ProposalKind.DELETE:
            artifact.outcomes.append(None)
            artifact.sequence = artifact.sequence.with_step(k, [c for c in cmds if c.joint != proposal.joint])
            return True

        outcome, make = self._search(artifact, proposal, pidx, ro)
        for cs in outcome.history:
            log = append_step_record(
                log, StepRecord(pidx, cs.t, cs.values, cs.rewards, cs.sigma, cs.chosen, cs.best_reward)
            )
        artifact.outcomes.append(
            OutcomeRecord(outcome.status.value, outcome.joint, outcome.value, outcome.reward, outcome.iterations)
        )
        if outcome.status is Status.JOINT_FAILURE:
            log = log.with_blacklisted(proposal.joint)
        else:
            # budget_exhausted still applies the best value seen
            artifact.sequence = artifact.sequence.with_step(k, make(outcome.value))
        artifact.step_logs[k] = log
        logger.info("proposal %d: %s after %d iterations", pidx, outcome.status.value, outcome.iterations)
        return True

    def _search(self, artifact: BehaviorArtifact, proposal: RefinementProposal, pidx: int, ro: Rollout):
        plan, seq, k = artifact.plan, artifact.sequence, proposal.step_index
        joint = self.model.joint(proposal.joint)
        i = self.model.joint_index(joint.name)
        cmds = list(seq.commands(k))
        start = ro.trajectory.start_pose(k)
        before = ro.trajectory.end_pose(k)

        existing = next((c for c in cmds if c.joint == joint.name), None)
        if existing is not None and existing.oscillates:
            # oscillations are refined through their amplitude
            current, limits = existing.amplitude, (MIN_AMPLITUDE, joint.half_range)
            build = lambda v: replace(existing, amplitude=v)  # noqa: E731
        elif existing is not None:
            current, limits = existing.value, (joint.limit_min, joint.limit_max)
            build = lambda v: replace(existing, value=v)  # noqa: E731
        else:
            current, limits = float(start[i]), (joint.limit_min, joint.limit_max)
            build = lambda v: ControlCommand(joint.name, v)  # noqa: E731

        def make(v: float) -> list[ControlCommand]:
            new = clip_command(self.model, build(float(v)))
            if existing is None:
                return cmds + [new]
            return [new if c.joint == joint.name else c for c in cmds]

        step = plan.step(k)

        def score(v: float) -> int:
            cand = seq.with_step(k, make(v))
            traj = compile_trajectory(self.model, cand, plan, self.config.sample_rate)
            log = self.capture(traj, steps=[k])
            facts = {
                "step": k,
                "joint": joint.name,
                "start_pose": [float(x) for x in start],
                "previous_pose": [float(x) for x in before],
                "candidate_pose": [float(x) for x in traj.end_pose(k)],
            }
            sections = [
                ("context", artifact.context.description),
                ("step", f"Step {k} ({step.t_start:g}-{step.t_end:g} s): {step.description}"),
                ("goal", f"{proposal.kind.value} {joint.name} ({proposal.direction.value}). {proposal.rationale}".strip()),
                ("candidate", f"{joint.name} = {float(v):.4f}"),
                facts_section(facts),
            ]
            bundle = PromptBundle(
                Role.REWARD_SCORER, tuple(sections), "score", tuple(log.images(self.pipeline.include_zoom))
            )
            return self.critic.complete(bundle).score

        rng = np.random.default_rng([self.config.ras.rng_seed, pidx])
        outcome: RefinementOutcome = run_refinement(
            joint.name, current, proposal.direction, limits, score, self.config.search_config, rng
        )
        return outcome, make

    # --- whole run -------------------------------------------------------------

    def run(self) -> RunResult:
        c = self.config
        artifact = self.new_artifact()
        stage = "analyze"
        try:
            if c.out_dir:
                self.dataset.write(Path(c.out_dir) / "dataset")
            stage = "plan"
            self.plan(artifact)
            stage = "codegen"
            self.codegen(artifact)
            while True:
                stage = "evaluate"
                critique = self.evaluate(artifact)
                if critique.passed:
                    artifact.status = ArtifactStatus.ACCEPTED
                    code, reason = EXIT_OK, "accepted"
                    break
                if artifact.replans >= c.max_replans:
                    artifact.status = ArtifactStatus.ABANDONED
                    code, reason = EXIT_BUDGET, f"replan budget of {c.max_replans} exhausted"
                    break
                stage = "refine"
                if not self.refine(artifact, critique):
                    artifact.status = ArtifactStatus.ABANDONED
                    code, reason = EXIT_JOINT_FAILURE, "every joint failed for a step"
                    break
        except Exception as exc:
            artifact.status = ArtifactStatus.IN_PROGRESS
            if c.out_dir:
                write_artifact(artifact, Path(c.out_dir) / "artifact.json")
            raise StageFailure(stage, exc) from exc

        result = RunResult(artifact, code, reason, None, list(self.evaluation_image_counts), self._rollout)
        if c.out_dir:
            result.artifact_path = self.write_outputs(artifact, Path(c.out_dir))
        return result

    def write_outputs(self, artifact: BehaviorArtifact, out: Path) -> Path:
        out.mkdir(parents=True, exist_ok=True)
        path = write_artifact(artifact, out / "artifact.json")
        if artifact.plan is not None and artifact.sequence is not None:
            ro = self.rollout(artifact.plan, artifact.sequence)
            ro.trajectory.write_csv(out / "trajectory.csv")
            frames = out / "visual_log"
            frames.mkdir(exist_ok=True)
            for label, img in ro.visual_log.images(include_zoom=True):
                img.save(frames / f"{label}.png")
        return path


def load_oracle_targets(path: str | Path) -> dict:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError(f"{path}: oracle targets must map step index to {{joint: value}}")
    return data


def run_behavior(config: RunConfig, critic=None, model: RobotModel | None = None) -> RunResult:
    return Runner(config, critic, model).run()
