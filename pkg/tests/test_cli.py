import json

import pytest
from PIL import Image

from socialcritic.artifact import read_artifact
from socialcritic.cli import main

from conftest import DATA, script_lines

SMALL = ["--full-size", "32", "--zoom-size", "32"]
WAVE = ["--context", "A person waves at the robot", "--script", str(DATA / "wave_humanoid12.jsonl"), "--seed", "42"]


def test_analyze_arm3(tmp_path, capsys):
    assert main(["analyze", "--model", str(DATA / "arm3.xml"), "--out", str(tmp_path), *SMALL]) == 0
    out = capsys.readouterr().out
    assert "model arm3: 3 joints" in out
    assert "j2: hinge on body link2, limits [-2, 2] rad" in out
    assert len(list(tmp_path.glob("*.png"))) == 18
    assert json.loads((tmp_path / "manifest.json").read_text())["model"] == "arm3"


def test_analyze_humanoid_counts(tmp_path):
    assert main(["analyze", "--model", str(DATA / "humanoid12.xml"), "--out", str(tmp_path), "--jobs", "4", *SMALL]) == 0
    assert len(list(tmp_path.glob("*.png"))) == 72


def test_analyze_without_render(tmp_path):
    assert main(["analyze", "--model", str(DATA / "duck.xml"), "--out", str(tmp_path), "--no-render"]) == 0
    assert not list(tmp_path.glob("*.png"))
    assert (tmp_path / "manifest.json").exists()


def test_analyze_malformed_xml(tmp_path, capsys):
    bad = tmp_path / "bad.xml"
    bad.write_text("<mujoco>\n<worldbody>\n<body>\n</mujoco>\n")
    assert main(["analyze", "--model", str(bad), "--out", str(tmp_path / "ds")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and "line 4" in err


def test_analyze_missing_file(tmp_path, capsys):
    assert main(["analyze", "--model", str(tmp_path / "nope.xml")]) == 1


def test_visualize(tmp_path):
    out = tmp_path / "pose.png"
    args = ["visualize", "--model", str(DATA / "arm3.xml"), "--set", "j1=0.5", "--size", "64", "--out", str(out)]
    assert main(args) == 0
    assert Image.open(out).size == (64, 64)
    zoom = tmp_path / "zoom.png"
    assert main(["visualize", "--model", str(DATA / "arm3.xml"), "--view", "zoom", "--joint", "j3", "--out", str(zoom)]) == 0
    assert Image.open(zoom).size == (256, 256)
    assert main(["visualize", "--model", str(DATA / "arm3.xml"), "--pose", "0,0", "--out", str(out)]) == 1
    assert main(["visualize", "--model", str(DATA / "arm3.xml"), "--set", "elbow=1", "--out", str(out)]) == 1


def test_stage_commands(tmp_path, capsys):
    model = ["--model", str(DATA / "humanoid12.xml")]
    common = ["--out", str(tmp_path), "--script", str(DATA / "wave_humanoid12.jsonl"), "--seed", "42", *SMALL]
    assert main(["plan", *model, "--context", "A person waves at the robot", *common]) == 0
    assert "4. [3.5-4 s]" in capsys.readouterr().out
    assert read_artifact(tmp_path / "artifact.json").sequence is None
    assert main(["codegen", *model, *common]) == 0
    assert read_artifact(tmp_path / "artifact.json").sequence.commands(3)[0].joint == "left_arm_3"
    assert main(["evaluate", *model, *common]) == 0
    assert "fail: The wrist" in capsys.readouterr().out
    assert main(["refine", *model, *common]) == 0
    a = read_artifact(tmp_path / "artifact.json")
    assert a.proposals[0].joint == "left_arm_6" and a.replans == 1
    assert (tmp_path / "trajectory.csv").exists()
    # a stage run against another model file is refused
    assert main(["codegen", "--model", str(DATA / "arm3.xml"), *common]) == 1


def test_run_accepts(tmp_path):
    assert main(["run", "--model", str(DATA / "humanoid12.xml"), *WAVE, "--out", str(tmp_path), *SMALL]) == 0
    assert read_artifact(tmp_path / "artifact.json").status.value == "accepted"


def test_run_budget_exit(tmp_path):
    args = ["run", "--model", str(DATA / "humanoid12.xml"), *WAVE, "--max-replans", "0", "--out", str(tmp_path), *SMALL]
    assert main(args) == 2
    assert read_artifact(tmp_path / "artifact.json").status.value == "abandoned"


def test_run_joint_failure_exit(tmp_path):
    model = tmp_path / "probe.xml"
    model.write_text(
        '<mujoco model="probe"><worldbody><body name="link"><joint name="q" axis="0 1 0" range="-1 1"/>'
        '<geom type="capsule" fromto="0 0 0 0.3 0 0" size="0.02"/></body></worldbody></mujoco>'
    )
    script = tmp_path / "s.jsonl"
    script.write_text(
        script_lines(
            [
                ("translator", {"text": "Lift the probe"}),
                ("planner", {"steps": [{"index": 1, "description": "lift", "t_start": 0, "t_end": 1}]}),
                ("code_generator", {"joints": ["q"]}),
                ("code_generator", {"joint": "q", "value": 0.2, "mode": "target"}),
                *[("holistic_evaluator", {"verdict": "fail", "critique": "wrong way"})] * 2,
                *[("step_pinpointer", {"indices": [1]})] * 2,
                ("refinement_proposer", {"kind": "Adjust", "joint": "q", "direction": "increase"}),
                *[("reward_scorer", {"score": 1})] * 6,
            ]
        )
    )
    args = ["run", "--model", str(model), "--context", "lift it", "--script", str(script), "--out", str(tmp_path / "o"), *SMALL]
    assert main(args) == 3


def test_run_stage_error_exit(tmp_path, capsys):
    script = tmp_path / "s.jsonl"
    script.write_text(script_lines([("translator", {"text": "Lift the arm"})]))
    args = ["run", "--model", str(DATA / "arm3.xml"), "--context", "x", "--script", str(script), "--out", str(tmp_path), *SMALL]
    assert main(args) == 1
    assert "plan stage failed" in capsys.readouterr().err
    assert read_artifact(tmp_path / "artifact.json").status.value == "in_progress"


def test_run_several_pairs_in_parallel(tmp_path):
    args = [
        "run",
        "--model",
        str(DATA / "humanoid12.xml"),
        *WAVE,
        "--context",
        "A child waves hello",
        "--out",
        str(tmp_path),
        "--jobs",
        "2",
        *SMALL,
    ]
    assert main(args) == 0
    a = read_artifact(tmp_path / "humanoid12-0" / "artifact.json")
    b = read_artifact(tmp_path / "humanoid12-1" / "artifact.json")
    assert a.context.description == "A person waves at the robot"
    assert b.context.description == "A child waves hello"


def test_oracle_backend_needs_targets(tmp_path, capsys):
    args = ["run", "--model", str(DATA / "arm3.xml"), "--context", "x", "--backend", "oracle", "--out", str(tmp_path)]
    assert main(args) == 1
    assert "--oracle-targets" in capsys.readouterr().err


def test_oracle_run(tmp_path):
    args = [
        "run",
        "--model",
        str(DATA / "arm3.xml"),
        "--context",
        "Someone asks where the book is",
        "--backend",
        "oracle",
        "--oracle-targets",
        str(DATA / "point_arm3.targets.json"),
        "--script",
        str(DATA / "point_arm3.jsonl"),
        "--out",
        str(tmp_path),
        *SMALL,
    ]
    assert main(args) == 0
    assert read_artifact(tmp_path / "artifact.json").replans <= 10


def test_bad_search_flags(tmp_path, capsys):
    assert main(["run", "--model", str(DATA / "arm3.xml"), *WAVE, "--alpha", "1.5", "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit):
        main(["run", "--model", str(DATA / "arm3.xml"), *WAVE, "--variant", "m9", "--out", str(tmp_path)])


def test_config_file_sets_defaults(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"script": str(DATA / "wave_humanoid12.jsonl"), "seed": 42, "max-replans": 0, "full_size": 32, "zoom_size": 32}))
    base = ["run", "--config", str(cfg), "--model", str(DATA / "humanoid12.xml"), "--context", "A person waves at the robot"]
    assert main([*base, "--out", str(tmp_path / "a")]) == 2
    # an explicit flag beats the file
    assert main([*base, "--max-replans", "3", "--out", str(tmp_path / "b")]) == 0
    cfg.write_text(json.dumps({"variant": "m9"}))
    with pytest.raises(SystemExit):
        main([*base, "--out", str(tmp_path / "c")])
    cfg.write_text(json.dumps({"model": "x.xml"}))
    with pytest.raises(SystemExit):
        main([*base, "--out", str(tmp_path / "c")])
    assert "disallowed setting 'model'" in capsys.readouterr().err
