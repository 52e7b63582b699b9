"""Behavior-level data: plans, steps, commands, critiques and proposals."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .errors import EmptyPlan, InvalidProposal, PreconditionError, UnknownJoint
from .mjcf import RobotModel


class InvalidPlan(PreconditionError):
    pass


@dataclass(frozen=True)
class InteractionContext:
    description: str
    human_action: str | None = None

    def __post_init__(self):
        if not self.description.strip():
            raise PreconditionError("interaction context needs a non-empty description")


@dataclass(frozen=True)
class BehaviorStep:
    index: int
    description: str
    t_start: float
    t_end: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def plan_problems(steps: list[BehaviorStep]) -> list[str]:
    """Every way ``steps`` breaks the plan invariants (empty list if none)."""
    problems = []
    if not steps:
        problems.append("plan has no steps")
    for pos, s in enumerate(steps, start=1):
        if s.index != pos:
            problems.append(f"step at position {pos} has index {s.index}; indices must run 1..m contiguously")
        if not s.t_start < s.t_end:
            problems.append(f"step {s.index} window [{s.t_start}, {s.t_end}] is empty")
        if s.t_start < 0:
            problems.append(f"step {s.index} starts before t=0")
        if not s.description.strip():
            problems.append(f"step {s.index} has no description")
    for a, b in zip(steps, steps[1:]):
        if b.t_start < a.t_end - 1e-9:
            problems.append(f"steps {a.index} and {b.index} overlap or are out of order")
    return problems


@dataclass(frozen=True)
class BehaviorPlan:
    translated_action: str
    steps: tuple[BehaviorStep, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise EmptyPlan("a behavior plan needs at least one step")
        problems = plan_problems(list(self.steps))
        if problems:
            raise InvalidPlan("; ".join(problems))

    def __len__(self) -> int:
        return len(self.steps)

    def step(self, index: int) -> BehaviorStep:
        if not 1 <= index <= len(self.steps):
            raise IndexError(f"step {index} outside 1..{len(self.steps)}")
        return self.steps[index - 1]

    @property
    def duration(self) -> float:
        return self.steps[-1].t_end


class Mode(str, enum.Enum):
    TARGET = "target"
    OSCILLATE = "oscillate"


@dataclass(frozen=True)
class ControlCommand:
    """One joint command. For oscillations ``value`` is the center."""

    joint: str
    value: float
    mode: Mode = Mode.TARGET
    amplitude: float = 0.0
    cycles: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("value", "amplitude", "cycles"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.mode is Mode.OSCILLATE and (self.amplitude <= 0 or self.cycles <= 0):
            raise PreconditionError(f"oscillate command on {self.joint!r} needs amplitude > 0 and cycles > 0")

    @property
    def oscillates(self) -> bool:
        return self.mode is Mode.OSCILLATE


# smallest amplitude an oscillation may be shrunk to before its center is moved
MIN_AMPLITUDE = 1e-4


def clip_command(model: RobotModel, cmd: ControlCommand) -> ControlCommand:
    """Force ``cmd`` inside its joint's limits.

    Targets are clipped. Oscillations keep their (clipped) center and shrink
    their amplitude to fit; if the center sits too close to a limit for any
    useful amplitude, the center is moved inward instead.
    """
    j = model.joint(cmd.joint)
    value = j.clip(cmd.value)
    if not cmd.oscillates:
        return replace(cmd, value=value)
    amp = min(cmd.amplitude, value - j.limit_min, j.limit_max - value)
    if amp < MIN_AMPLITUDE:
        amp = min(cmd.amplitude, j.half_range)
        value = min(max(value, j.limit_min + amp), j.limit_max - amp)
    # value +/- amp can overshoot a limit by rounding; shave off the last ulps
    while amp > 0 and (value + amp > j.limit_max or value - amp < j.limit_min):
        amp = math.nextafter(amp, 0.0)
    return replace(cmd, value=value, amplitude=amp)


@dataclass(frozen=True)
class ControlSequence:
    per_step: dict[int, tuple[ControlCommand, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "per_step", {int(k): tuple(v) for k, v in sorted(self.per_step.items())}
        )

    @classmethod
    def empty(cls, plan: BehaviorPlan) -> "ControlSequence":
        return cls({s.index: () for s in plan.steps})

    def commands(self, index: int) -> tuple[ControlCommand, ...]:
        return self.per_step.get(index, ())

    def with_step(self, index: int, commands) -> "ControlSequence":
        return ControlSequence({**self.per_step, index: tuple(commands)})

    def check_against(self, model: RobotModel, plan: BehaviorPlan) -> None:
        missing = [s.index for s in plan.steps if s.index not in self.per_step]
        if missing:
            raise PreconditionError(f"control sequence is missing steps {missing}")
        extra = sorted(set(self.per_step) - {s.index for s in plan.steps})
        if extra:
            raise PreconditionError(f"control sequence has commands for unknown steps {extra}")
        for cmds in self.per_step.values():
            for c in cmds:
                if not model.has_joint(c.joint):
                    raise UnknownJoint(c.joint)


class Verdict(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"


@dataclass(frozen=True)
class Critique:
    verdict: Verdict
    text: str = ""

    def __post_init__(self):
        object.__setattr__(self, "verdict", Verdict(self.verdict))
        if self.verdict is Verdict.FAIL and not self.text.strip():
            raise PreconditionError("a failing critique needs text")

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS


class ProposalKind(str, enum.Enum):
    ADJUST = "Adjust"
    DELETE = "Delete"
    ADD = "Add"


class Direction(str, enum.Enum):
    INCREASE = "increase"
    DECREASE = "decrease"
    UNSPECIFIED = "unspecified"

    @property
    def sign(self) -> int:
        # an unspecified hint searches upward from the current value
        return -1 if self is Direction.DECREASE else 1


@dataclass(frozen=True)
class RefinementProposal:
    step_index: int
    kind: ProposalKind
    joint: str
    direction: Direction = Direction.UNSPECIFIED
    rationale: str = ""
    magnitude_hint: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ProposalKind(self.kind))
        object.__setattr__(self, "direction", Direction(self.direction))


def check_proposal(proposal: RefinementProposal, plan: BehaviorPlan, commands, model: RobotModel) -> None:
    """Validate a proposal against the targeted step's current commands."""
    if not 1 <= proposal.step_index <= len(plan):
        raise InvalidProposal(f"proposal targets step {proposal.step_index}, plan has {len(plan)} steps")
    if not model.has_joint(proposal.joint):
        raise InvalidProposal(f"proposal names unknown joint {proposal.joint!r}")
    commanded = {c.joint for c in commands}
    if proposal.kind in (ProposalKind.ADJUST, ProposalKind.DELETE) and proposal.joint not in commanded:
        raise InvalidProposal(
            f"{proposal.kind.value} needs an existing command on {proposal.joint!r} in step {proposal.step_index}"
        )
    if proposal.kind is ProposalKind.ADD and proposal.joint in commanded:
        raise InvalidProposal(f"Add would duplicate the command on {proposal.joint!r} in step {proposal.step_index}")
