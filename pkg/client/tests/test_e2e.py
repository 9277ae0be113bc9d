"""End-to-end runs against the evaluation harness CLI over stdio.

The harness is consumed purely through its external interfaces: the CLI,
the wire protocol, and the JSONL report files.
"""

import json
import shlex
import subprocess
import sys
from pathlib import Path

import pytest

HARNESS = [sys.executable, "-m", "advloop.cli"]
BADCLIENTS = Path(__file__).parent / "badclients.py"


def harness(*args):
    proc = subprocess.run(
        HARNESS + list(args), capture_output=True, text=True, timeout=300
    )
    assert proc.returncode == 0, proc.stderr
    return proc


def read_epochs(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


@pytest.fixture(scope="module")
def straight_scenario(tmp_path_factory):
    path = tmp_path_factory.mktemp("scenarios") / "straight.json"
    harness("synth", "--kind", "straight", "--seed", "3", "--out", str(path))
    return path


def client_endpoint(*extra):
    parts = [sys.executable, "-m", "advloop_client", "--stdio", *extra]
    return " ".join(shlex.quote(p) for p in parts)


class TestLaneFollowRoundTrip:
    def test_completes_straight_scenario(self, straight_scenario, tmp_path):
        out = tmp_path / "out"
        harness(
            "run", "--scenario", str(straight_scenario),
            "--planner", "external", "--endpoint", client_endpoint("--planner", "lane_follow"),
            "--no-adv", "--seed", "0", "--out", str(out), "--quiet",
        )
        epoch = read_epochs(out / "epochs.jsonl")[0]
        episode = epoch["episode1"]
        assert episode["aborted"] is False
        assert episode["abort_reason"] is None  # zero protocol violations
        assert episode["terminated"] == "completed"
        assert episode["rc"] >= 0.99

    def test_brake_ttc_also_runs_clean(self, straight_scenario, tmp_path):
        out = tmp_path / "out"
        harness(
            "run", "--scenario", str(straight_scenario),
            "--planner", "external", "--endpoint", client_endpoint("--planner", "brake_ttc"),
            "--no-adv", "--seed", "0", "--out", str(out), "--quiet",
        )
        episode = read_epochs(out / "epochs.jsonl")[0]["episode1"]
        assert episode["aborted"] is False
        assert episode["terminated"] in ("completed", "timeout")


class TestHarnessSideFailures:
    def bad_endpoint(self, mode):
        return " ".join(
            shlex.quote(p) for p in [sys.executable, str(BADCLIENTS), "--mode", mode]
        )

    def test_nan_waypoints_recorded_as_protocol_violation(self, straight_scenario, tmp_path):
        out = tmp_path / "out"
        harness(
            "run", "--scenario", str(straight_scenario),
            "--planner", "external", "--endpoint", self.bad_endpoint("nan"),
            "--no-adv", "--seed", "0", "--out", str(out), "--quiet",
        )
        episode = read_epochs(out / "epochs.jsonl")[0]["episode1"]
        assert episode["aborted"] is True
        assert "protocol_violation" in episode["abort_reason"]
        failures = json.loads((out / "failures.json").read_text())
        assert failures and "protocol_violation" in failures[0]["error"]

    def test_slow_client_recorded_as_timeout(self, straight_scenario, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("[protocol]\ntimeout_s = 0.5\n")
        out = tmp_path / "out"
        harness(
            "run", "--scenario", str(straight_scenario),
            "--planner", "external", "--endpoint", self.bad_endpoint("sleepy"),
            "--config", str(cfg),
            "--no-adv", "--seed", "0", "--out", str(out), "--quiet",
        )
        episode = read_epochs(out / "epochs.jsonl")[0]["episode1"]
        assert episode["aborted"] is True
        assert episode["terminated"] == "timeout"
        assert "planner_timeout" in episode["abort_reason"]
