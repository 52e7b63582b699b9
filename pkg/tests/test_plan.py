import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socialcritic.errors import EmptyPlan, InvalidProposal, PreconditionError, UnknownJoint
from socialcritic.plan import (
    MIN_AMPLITUDE,
    BehaviorPlan,
    BehaviorStep,
    ControlCommand,
    ControlSequence,
    Critique,
    Direction,
    InteractionContext,
    InvalidPlan,
    Mode,
    ProposalKind,
    RefinementProposal,
    check_proposal,
    clip_command,
    plan_problems,
)


def two_steps():
    return BehaviorPlan("a", (BehaviorStep(1, "x", 0, 1), BehaviorStep(2, "y", 1, 2.5)))


def test_plan_basics():
    plan = two_steps()
    assert len(plan) == 2 and plan.duration == 2.5
    assert plan.step(2).duration == 1.5
    with pytest.raises(IndexError):
        plan.step(3)


@pytest.mark.parametrize(
    "steps",
    [
        [BehaviorStep(1, "x", 0, 1), BehaviorStep(3, "y", 1, 2)],
        [BehaviorStep(1, "x", 1, 1)],
        [BehaviorStep(1, "x", 0, 2), BehaviorStep(2, "y", 1, 3)],
        [BehaviorStep(1, "x", -1, 1)],
        [BehaviorStep(1, " ", 0, 1)],
    ],
)
def test_invalid_plans(steps):
    assert plan_problems(steps)
    with pytest.raises(InvalidPlan):
        BehaviorPlan("a", steps)


def test_empty_plan():
    with pytest.raises(EmptyPlan):
        BehaviorPlan("a", ())


def test_context_needs_text():
    with pytest.raises(PreconditionError):
        InteractionContext("  ")


def test_command_coercion_and_validation():
    c = ControlCommand("j1", 1, "oscillate", 1, 2)
    assert c.mode is Mode.OSCILLATE and isinstance(c.cycles, float) and c.oscillates
    with pytest.raises(PreconditionError):
        ControlCommand("j1", 0.0, "oscillate", 0.0, 2)


def test_clip_target(arm3):
    assert clip_command(arm3, ControlCommand("j3", 4.0)).value == 1.0
    with pytest.raises(UnknownJoint):
        clip_command(arm3, ControlCommand("nope", 0.0))


def test_clip_oscillation_shrinks_then_recentres(arm3):
    c = clip_command(arm3, ControlCommand("j3", 0.8, "oscillate", 0.5, 1))
    assert (c.value, c.amplitude) == (0.8, pytest.approx(0.2))
    c = clip_command(arm3, ControlCommand("j3", 1.0, "oscillate", 0.3, 1))
    assert c.value == pytest.approx(0.7) and c.amplitude == 0.3


@given(st.floats(-10, 10), st.floats(0.001, 10), st.floats(0.1, 5))
@settings(max_examples=200, deadline=None)
def test_clipped_oscillation_stays_inside(arm3, centre, amplitude, cycles):
    c = clip_command(arm3, ControlCommand("j3", centre, "oscillate", amplitude, cycles))
    assert -1.0 <= c.value - c.amplitude + 1e-12 and c.value + c.amplitude <= 1.0 + 1e-12
    assert c.amplitude >= min(MIN_AMPLITUDE, amplitude) - 1e-15


def test_sequence_checks(arm3):
    plan = two_steps()
    seq = ControlSequence.empty(plan).with_step(1, [ControlCommand("j1", 0.1)])
    seq.check_against(arm3, plan)
    assert seq.commands(1)[0].joint == "j1" and seq.commands(7) == ()
    with pytest.raises(PreconditionError):
        ControlSequence({1: []}).check_against(arm3, plan)
    with pytest.raises(PreconditionError):
        seq.with_step(3, []).check_against(arm3, plan)
    with pytest.raises(UnknownJoint):
        seq.with_step(2, [ControlCommand("x", 0)]).check_against(arm3, plan)


def test_critique_rules():
    assert Critique("pass").passed
    with pytest.raises(PreconditionError):
        Critique("fail", "")


def test_direction_sign():
    assert Direction.DECREASE.sign == -1
    assert Direction.INCREASE.sign == Direction.UNSPECIFIED.sign == 1


def test_check_proposal(arm3):
    plan = two_steps()
    cmds = [ControlCommand("j1", 0.1)]
    check_proposal(RefinementProposal(1, "Adjust", "j1"), plan, cmds, arm3)
    check_proposal(RefinementProposal(1, ProposalKind.ADD, "j2"), plan, cmds, arm3)
    bad = [
        RefinementProposal(3, "Adjust", "j1"),
        RefinementProposal(1, "Adjust", "elbow"),
        RefinementProposal(1, "Delete", "j2"),
        RefinementProposal(1, "Add", "j1"),
    ]
    for p in bad:
        with pytest.raises(InvalidProposal):
            check_proposal(p, plan, cmds, arm3)
