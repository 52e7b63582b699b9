import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socialcritic.artifact import (
    ArtifactStatus,
    BehaviorArtifact,
    OutcomeRecord,
    StepLog,
    StepRecord,
    append_step_record,
    artifact_to_dict,
    atomic_write_text,
    canonical,
    dumps_canonical,
    parse_artifact,
    read_artifact,
    serialize_artifact,
    write_artifact,
)
from socialcritic.errors import ArtifactError, ArtifactIoError, NonMonotonicIteration, SchemaVersionMismatch
from socialcritic.plan import (
    BehaviorPlan,
    BehaviorStep,
    ControlCommand,
    ControlSequence,
    Critique,
    InteractionContext,
    RefinementProposal,
)


def rec(t, proposal=0, values=(0.1, 0.2, 0.3)):
    return StepRecord(proposal, t, values, (4, 6, 2), 0.6, values[1], 6)


def sample_artifact() -> BehaviorArtifact:
    plan = BehaviorPlan("wave", (BehaviorStep(1, "raise", 0, 1), BehaviorStep(2, "wave", 1, 2.5)))
    seq = ControlSequence(
        {1: [ControlCommand("a", -0.0)], 2: [ControlCommand("b", 0.1, "oscillate", 0.3, 2), ControlCommand("c", 1 / 3)]}
    )
    log = append_step_record(append_step_record(StepLog(2), rec(0)), rec(1))
    return BehaviorArtifact(
        context=InteractionContext("someone waves", "waving"),
        robot_name="bot",
        robot_hash="abc123",
        translated_action="wave",
        plan=plan,
        sequence=seq,
        critiques=[Critique("fail", "more wrist"), Critique("pass")],
        proposals=[RefinementProposal(2, "Adjust", "b", "increase", "why", "a bit")],
        outcomes=[OutcomeRecord("success", "b", 0.2, 8, 1)],
        step_logs={2: log.with_blacklisted("c")},
        status=ArtifactStatus.ACCEPTED,
        config={"tau": 8, "sigma_base": 0.6},
        seed=42,
        replans=1,
    )


def test_round_trip_and_byte_identity(tmp_path):
    a = sample_artifact()
    p1 = write_artifact(a, tmp_path / "one.json")
    p2 = write_artifact(a, tmp_path / "two.json")
    assert p1.read_bytes() == p2.read_bytes()
    back = read_artifact(p1)
    assert canonical(artifact_to_dict(back)) == canonical(artifact_to_dict(a))
    assert back.plan == a.plan and back.step_logs == a.step_logs and back.proposals == a.proposals


def test_canonical_text_form():
    text = serialize_artifact(sample_artifact())
    assert text.endswith("}\n") and "\r" not in text
    assert '"schema_version": 1' in text
    assert "-0.0" not in text
    assert "0.333333333" in text and "0.3333333333" not in text
    data = json.loads(text)
    assert list(data) == sorted(data)


def test_canonical_floats():
    assert canonical(-0.0) == 0.0 and str(canonical(-0.0)) == "0.0"
    assert canonical(0.1 + 0.2) == 0.3
    assert canonical(123456789012.0) == 123456789000.0
    with pytest.raises(ArtifactError):
        canonical(float("nan"))
    assert dumps_canonical({"b": 1, "a": [True, None]}) == '{\n  "a": [\n    true,\n    null\n  ],\n  "b": 1\n}\n'


def test_schema_version_mismatch():
    data = json.loads(serialize_artifact(sample_artifact()))
    data["schema_version"] = 0
    with pytest.raises(SchemaVersionMismatch):
        parse_artifact(json.dumps(data))


def test_malformed_artifacts():
    with pytest.raises(ArtifactError):
        parse_artifact("{")
    data = json.loads(serialize_artifact(sample_artifact()))
    del data["robot"]
    with pytest.raises(ArtifactError):
        parse_artifact(json.dumps(data))


def test_accepted_needs_passing_critique():
    a = sample_artifact()
    a.critiques = [Critique("fail", "no")]
    with pytest.raises(ArtifactError):
        serialize_artifact(a)


def test_step_log_append_rules():
    log = append_step_record(StepLog(1), rec(0))
    assert len(log.records) == 1
    with pytest.raises(NonMonotonicIteration):
        append_step_record(log, rec(2))
    log3 = append_step_record(append_step_record(log, rec(1)), rec(2))
    assert [r.t for r in log3.records] == [0, 1, 2]
    # the earlier log is untouched
    assert len(log.records) == 1
    # a new proposal restarts at 0; going back to an older proposal is refused
    log4 = append_step_record(log3, rec(0, proposal=1))
    assert log4.records[-1].proposal == 1
    with pytest.raises(NonMonotonicIteration):
        append_step_record(log4, rec(3, proposal=0))
    with pytest.raises(NonMonotonicIteration):
        append_step_record(log3, rec(1, proposal=1))


def test_step_record_validation():
    with pytest.raises(ArtifactError):
        StepRecord(0, 0, (0.1,), (11,), 0.6, 0.1, 11)
    with pytest.raises(ArtifactError):
        StepRecord(0, 0, (0.1, 0.2), (5,), 0.6, 0.1, 5)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "a.json"
    atomic_write_text(target, "first\n")
    atomic_write_text(target, "second\n")
    assert target.read_text() == "second\n"
    assert [p.name for p in target.parent.iterdir()] == ["a.json"]


def test_atomic_write_failure_keeps_old_file(tmp_path):
    target = tmp_path / "a.json"
    target.write_text("old")
    with pytest.raises(ArtifactIoError):
        atomic_write_text(tmp_path / "a.json" / "nested", "x")
    assert target.read_text() == "old"
    with pytest.raises(ArtifactIoError):
        read_artifact(tmp_path / "missing.json")


# --- generated artifacts ----------------------------------------------------------------

nine = st.floats(-1e3, 1e3, allow_nan=False).map(lambda x: float(f"{x:.9g}"))
name = st.text("abcdefgh_", min_size=1, max_size=6)
text = st.text(min_size=1, max_size=20).filter(str.strip)


@st.composite
def artifacts(draw):
    n_steps = draw(st.integers(1, 4))
    bounds = sorted(draw(st.lists(st.integers(0, 100), min_size=n_steps + 1, max_size=n_steps + 1, unique=True)))
    steps = tuple(BehaviorStep(i + 1, draw(text), bounds[i] / 10, bounds[i + 1] / 10) for i in range(n_steps))
    plan = BehaviorPlan(draw(text), steps)
    per_step = {}
    for k in range(1, n_steps + 1):
        cmds = []
        for j in draw(st.lists(name, max_size=3, unique=True)):
            if draw(st.booleans()):
                cmds.append(ControlCommand(j, draw(nine), "oscillate", float(f"{abs(draw(nine)) + 0.5:.9g}"), draw(st.integers(1, 4))))
            else:
                cmds.append(ControlCommand(j, draw(nine)))
        per_step[k] = cmds
    proposals, outcomes, logs = [], [], {}
    for p in range(draw(st.integers(0, 3))):
        k = draw(st.integers(1, n_steps))
        proposals.append(RefinementProposal(k, draw(st.sampled_from(["Adjust", "Delete", "Add"])), draw(name)))
        if draw(st.booleans()):
            outcomes.append(None)
            continue
        log = logs.get(k, StepLog(k))
        rounds = draw(st.integers(1, 3))
        for t in range(rounds):
            values = tuple(draw(st.lists(nine, min_size=3, max_size=3)))
            rewards = tuple(draw(st.lists(st.integers(1, 10), min_size=3, max_size=3)))
            log = append_step_record(log, StepRecord(p, t, values, rewards, draw(nine), values[0], max(rewards)))
        if draw(st.booleans()):
            log = log.with_blacklisted(draw(name))
        logs[k] = log
        outcomes.append(OutcomeRecord("success", proposals[-1].joint, draw(nine), draw(st.integers(1, 10)), rounds - 1))
    passed = draw(st.booleans())
    return BehaviorArtifact(
        context=InteractionContext(draw(text), draw(st.none() | text)),
        robot_name=draw(name),
        robot_hash=draw(st.text("0123456789abcdef", min_size=8, max_size=8)),
        translated_action=plan.translated_action,
        plan=plan,
        sequence=ControlSequence(per_step),
        critiques=[Critique("fail", draw(text))] + ([Critique("pass")] if passed else []),
        proposals=proposals,
        outcomes=outcomes,
        step_logs=logs,
        status=ArtifactStatus.ACCEPTED if passed else draw(st.sampled_from(list(ArtifactStatus)[::2])),
        config={"tau": draw(st.integers(1, 10)), "sigma": draw(nine)},
        seed=draw(st.integers(0, 2**31)),
        replans=draw(st.integers(0, 10)),
    )


@given(artifacts())
@settings(max_examples=100, deadline=None)
def test_generated_round_trip(a):
    text = serialize_artifact(a)
    back = parse_artifact(text)
    assert back == a
    assert serialize_artifact(back) == text


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_canonical_float_is_idempotent(x):
    once = canonical(x)
    assert canonical(once) == once
    assert json.loads(json.dumps(once)) == once
