import importlib.resources
import json
import re
from pathlib import Path

import pytest

from socialcritic.mjcf import load_mjcf, parse_mjcf

DATA = Path(str(importlib.resources.files("socialcritic") / "data"))
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def arm3():
    return load_mjcf(DATA / "arm3.xml")


@pytest.fixture(scope="session")
def duck():
    return load_mjcf(DATA / "duck.xml")


@pytest.fixture(scope="session")
def humanoid():
    return load_mjcf(DATA / "humanoid12.xml")


def one_joint_model(lo: float = -1.0, hi: float = 1.0, kind: str = "hinge", default: float | None = None):
    ref = f' ref="{default}"' if default is not None else ""
    return parse_mjcf(
        f"""<mujoco model="probe"><compiler angle="radian"/><worldbody>
        <body name="base"><geom type="sphere" size="0.05"/>
          <body name="link" pos="0 0 0.1">
            <joint name="q" type="{kind}" axis="0 1 0" range="{lo} {hi}"{ref}/>
            <geom type="capsule" fromto="0 0 0 0.3 0 0" size="0.02"/>
          </body></body></worldbody></mujoco>"""
    )


def script_lines(entries) -> str:
    return "\n".join(json.dumps({"role": r, "request_hash": "*", "reply": p}, sort_keys=True) for r, p in entries) + "\n"


class StubCritic:
    """Answers each role from a queue and remembers the bundles it saw."""

    def __init__(self, replies=None, **by_role):
        from socialcritic.critic.schema import parse_reply

        self._parse = parse_reply
        self.queues = {role: list(v) for role, v in (replies or {}).items()}
        for role, v in by_role.items():
            self.queues[role] = list(v)
        self.bundles = []

    def complete(self, bundle):
        self.bundles.append(bundle)
        queue = self.queues.get(bundle.role.value)
        if not queue:
            raise AssertionError(f"unexpected {bundle.role.value} call")
        return self._parse(bundle.reply_schema, queue.pop(0))


# --- acceptance summary: one PASS/FAIL line per criterion --------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}
_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or "test_acceptance" not in report.nodeid:
        return
    n = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        prev = _CRITERIA.get(n, ("PASS", ""))[0]
        outcome = "PASS" if report.passed and prev == "PASS" else "FAIL"
        _CRITERIA[n] = (outcome, m.group(2).replace("_", " "))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        outcome, name = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {outcome}  {name}")
