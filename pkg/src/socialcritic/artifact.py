"""Behavior artifact and step logs, persisted as canonical JSON.

Canonical form: sorted keys, two-space indent, LF newlines, floats rounded
to 9 significant digits, ``-0.0`` written as ``0.0``. Writing the same
artifact twice gives identical bytes and re-serializing a file read back
reproduces it exactly.
"""

from __future__ import annotations

import enum
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArtifactError, ArtifactIoError, NonMonotonicIteration, SchemaVersionMismatch
from .plan import (
    BehaviorPlan,
    BehaviorStep,
    ControlCommand,
    ControlSequence,
    Critique,
    InteractionContext,
    RefinementProposal,
    Verdict,
)

SCHEMA_VERSION = 1
SIGNIFICANT_DIGITS = 9


class ArtifactStatus(str, enum.Enum):
    IN_PROGRESS = "in_progress"
    ACCEPTED = "accepted"
    ABANDONED = "abandoned"


@dataclass(frozen=True)
class StepRecord:
    """One scored round of a refinement. ``proposal`` indexes the artifact's proposals."""

    proposal: int
    t: int
    values: tuple[float, ...]
    rewards: tuple[int, ...]
    sigma: float
    chosen: float
    best_reward: int

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "rewards", tuple(int(r) for r in self.rewards))
        if not self.values:
            raise ArtifactError("a step record needs at least one value")
        if len(self.rewards) != len(self.values):
            raise ArtifactError(f"{len(self.values)} values but {len(self.rewards)} rewards")
        if any(not 1 <= r <= 10 for r in self.rewards):
            raise ArtifactError(f"rewards must lie in 1..10, got {self.rewards}")
        if self.t < 0:
            raise ArtifactError("iteration t must be >= 0")


@dataclass(frozen=True)
class StepLog:
    step_index: int
    records: tuple[StepRecord, ...] = ()
    blacklist: tuple[str, ...] = ()

    def with_blacklisted(self, joint: str) -> "StepLog":
        if joint in self.blacklist:
            return self
        return StepLog(self.step_index, self.records, self.blacklist + (joint,))


def append_step_record(log: StepLog, record: StepRecord) -> StepLog:
    """Return a new log with ``record`` appended.

    Within one proposal the iteration counter must advance by exactly one;
    a record for a new proposal must start again at 0.
    """
    last = log.records[-1] if log.records else None
    if last is None or record.proposal != last.proposal:
        if last is not None and record.proposal < last.proposal:
            raise NonMonotonicIteration(f"proposal {record.proposal} recorded after proposal {last.proposal}")
        expected = 0
    else:
        expected = last.t + 1
    if record.t != expected:
        raise NonMonotonicIteration(f"step {log.step_index}: expected t={expected}, got t={record.t}")
    return StepLog(log.step_index, log.records + (record,), log.blacklist)


@dataclass(frozen=True)
class OutcomeRecord:
    """Result of acting on one proposal; deletions have no search and so no outcome."""

    status: str
    joint: str
    value: float | None
    reward: int | None
    iterations: int


@dataclass
class BehaviorArtifact:
    context: InteractionContext
    robot_name: str
    robot_hash: str
    translated_action: str | None = None
    plan: BehaviorPlan | None = None
    sequence: ControlSequence | None = None
    critiques: list[Critique] = field(default_factory=list)
    proposals: list[RefinementProposal] = field(default_factory=list)
    outcomes: list[OutcomeRecord | None] = field(default_factory=list)
    step_logs: dict[int, StepLog] = field(default_factory=dict)
    status: ArtifactStatus = ArtifactStatus.IN_PROGRESS
    config: dict = field(default_factory=dict)
    seed: int = 0
    replans: int = 0

    def check(self) -> None:
        if len(self.proposals) != len(self.outcomes):
            raise ArtifactError(f"{len(self.proposals)} proposals but {len(self.outcomes)} outcomes")
        if ArtifactStatus(self.status) is ArtifactStatus.ACCEPTED and (
            not self.critiques or self.critiques[-1].verdict is not Verdict.PASS
        ):
            raise ArtifactError("an accepted artifact must end with a passing critique")

    def step_log(self, index: int) -> StepLog:
        return self.step_logs.get(index, StepLog(index))


# --- canonical JSON --------------------------------------------------------------


def canonical(value):
    """Plain-JSON copy of ``value`` with floats rounded to 9 significant digits."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if not math.isfinite(x):
            raise ArtifactError(f"cannot store non-finite float {x}")
        x = float(f"{x:.{SIGNIFICANT_DIGITS}g}")
        return 0.0 if x == 0 else x
    if isinstance(value, enum.Enum):
        return canonical(value.value)
    if isinstance(value, dict):
        return {str(k): canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [canonical(v) for v in value]
    raise ArtifactError(f"cannot serialize {type(value).__name__}")


def dumps_canonical(data) -> str:
    return json.dumps(canonical(data), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _command_dict(c: ControlCommand) -> dict:
    return {"joint": c.joint, "value": c.value, "mode": c.mode.value, "amplitude": c.amplitude, "cycles": c.cycles}


def artifact_to_dict(a: BehaviorArtifact) -> dict:
    a.check()
    return {
        "schema_version": SCHEMA_VERSION,
        "context": {"description": a.context.description, "human_action": a.context.human_action},
        "robot": {"name": a.robot_name, "source_hash": a.robot_hash},
        "translated_action": a.translated_action,
        "plan": None
        if a.plan is None
        else {
            "translated_action": a.plan.translated_action,
            "steps": [
                {"index": s.index, "description": s.description, "t_start": s.t_start, "t_end": s.t_end}
                for s in a.plan.steps
            ],
        },
        "sequence": None
        if a.sequence is None
        else {str(k): [_command_dict(c) for c in cmds] for k, cmds in a.sequence.per_step.items()},
        "critiques": [{"verdict": c.verdict.value, "text": c.text} for c in a.critiques],
        "proposals": [
            {
                "step_index": p.step_index,
                "kind": p.kind.value,
                "joint": p.joint,
                "direction": p.direction.value,
                "rationale": p.rationale,
                "magnitude_hint": p.magnitude_hint,
            }
            for p in a.proposals
        ],
        "outcomes": [
            None
            if o is None
            else {"status": o.status, "joint": o.joint, "value": o.value, "reward": o.reward, "iterations": o.iterations}
            for o in a.outcomes
        ],
        "step_logs": {
            str(k): {
                "step_index": log.step_index,
                "blacklist": list(log.blacklist),
                "records": [
                    {
                        "proposal": r.proposal,
                        "t": r.t,
                        "values": list(r.values),
                        "rewards": list(r.rewards),
                        "sigma": r.sigma,
                        "chosen": r.chosen,
                        "best_reward": r.best_reward,
                    }
                    for r in log.records
                ],
            }
            for k, log in sorted(a.step_logs.items())
        },
        "status": ArtifactStatus(a.status).value,
        "config": a.config,
        "seed": a.seed,
        "replans": a.replans,
    }


def artifact_from_dict(d: dict) -> BehaviorArtifact:
    version = d.get("schema_version") if isinstance(d, dict) else None
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(version, SCHEMA_VERSION)
    try:
        plan = None
        if d["plan"] is not None:
            plan = BehaviorPlan(
                d["plan"]["translated_action"],
                tuple(BehaviorStep(s["index"], s["description"], s["t_start"], s["t_end"]) for s in d["plan"]["steps"]),
            )
        sequence = None
        if d["sequence"] is not None:
            sequence = ControlSequence(
                {
                    int(k): tuple(
                        ControlCommand(c["joint"], c["value"], c["mode"], c["amplitude"], c["cycles"]) for c in cmds
                    )
                    for k, cmds in d["sequence"].items()
                }
            )
        logs = {}
        for k, log in d["step_logs"].items():
            entry = StepLog(log["step_index"], blacklist=tuple(log["blacklist"]))
            for r in log["records"]:
                entry = append_step_record(entry, StepRecord(**r))
            logs[int(k)] = entry
        artifact = BehaviorArtifact(
            context=InteractionContext(d["context"]["description"], d["context"]["human_action"]),
            robot_name=d["robot"]["name"],
            robot_hash=d["robot"]["source_hash"],
            translated_action=d["translated_action"],
            plan=plan,
            sequence=sequence,
            critiques=[Critique(c["verdict"], c["text"]) for c in d["critiques"]],
            proposals=[
                RefinementProposal(p["step_index"], p["kind"], p["joint"], p["direction"], p["rationale"], p["magnitude_hint"])
                for p in d["proposals"]
            ],
            outcomes=[None if o is None else OutcomeRecord(**o) for o in d["outcomes"]],
            step_logs=logs,
            status=ArtifactStatus(d["status"]),
            config=d["config"],
            seed=d["seed"],
            replans=d["replans"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"malformed artifact: {exc!r}") from exc
    artifact.check()
    return artifact


def atomic_write_text(path: str | Path, text: str) -> Path:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise ArtifactIoError(f"cannot write {path}: {exc}") from exc
    return path


def serialize_artifact(a: BehaviorArtifact) -> str:
    return dumps_canonical(artifact_to_dict(a))


def write_artifact(a: BehaviorArtifact, path: str | Path) -> Path:
    return atomic_write_text(path, serialize_artifact(a))


def parse_artifact(text: str) -> BehaviorArtifact:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"artifact is not valid JSON: {exc}") from None
    return artifact_from_dict(data)


def read_artifact(path: str | Path) -> BehaviorArtifact:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ArtifactIoError(f"cannot read {path}: {exc}") from exc
    return parse_artifact(text)
