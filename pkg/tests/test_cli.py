import csv

import pytest

from advloop.cli import main
from advloop.reports import read_epochs_jsonl
from advloop.scenario import load_scenario


def run_cli(*argv):
    return main(list(argv))


class TestSynthCommand:
    def test_writes_loadable_scenario(self, tmp_path, capsys):
        out = tmp_path / "s.json"
        assert run_cli("synth", "--kind", "straight", "--seed", "1", "--out", str(out)) == 0
        scenario = load_scenario(out)
        assert scenario.duration_steps == 80
        assert "wrote" in capsys.readouterr().out

    def test_param_override(self, tmp_path):
        out = tmp_path / "s.json"
        run_cli("synth", "--kind", "straight", "--seed", "1",
                "--param", "duration_steps=40", "--out", str(out))
        assert load_scenario(out).duration_steps == 40

    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli("synth", "--kind", "cut_in", "--seed", "9", "--out", str(a))
        run_cli("synth", "--kind", "cut_in", "--seed", "9", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()


@pytest.fixture
def straight_file(tmp_path):
    path = tmp_path / "straight.json"
    run_cli("synth", "--kind", "straight", "--seed", "3", "--out", str(path))
    return path


class TestRunCommand:
    def test_run_with_adversary(self, straight_file, tmp_path, capsys):
        out = tmp_path / "out"
        code = run_cli("run", "--scenario", str(straight_file), "--planner", "idm",
                       "--seed", "42", "--out", str(out), "--quiet")
        assert code == 0
        results = read_epochs_jsonl(out / "epochs.jsonl")
        assert len(results) == 1
        assert results[0].episode2 is not None
        assert (out / "summary.csv").exists()
        table = capsys.readouterr().out
        assert "w/o adv" in table and "w/ adv" in table

    def test_no_adv_runs_episode_one_only(self, straight_file, tmp_path):
        out = tmp_path / "out"
        run_cli("run", "--scenario", str(straight_file), "--planner", "log_replay",
                "--no-adv", "--out", str(out), "--quiet")
        results = read_epochs_jsonl(out / "epochs.jsonl")
        assert results[0].episode2 is None
        assert results[0].episode1.terminated == "completed"

    def test_seed_determinism_byte_identical(self, straight_file, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            run_cli("run", "--scenario", str(straight_file), "--planner", "idm",
                    "--seed", "42", "--out", str(out), "--quiet")
        assert (out_a / "epochs.jsonl").read_bytes() == (out_b / "epochs.jsonl").read_bytes()

    def test_scenario_dir_and_seed_list(self, tmp_path):
        scen_dir = tmp_path / "scenarios"
        scen_dir.mkdir()
        for i in range(2):
            run_cli("synth", "--kind", "straight", "--seed", str(i),
                    "--out", str(scen_dir / f"s{i}.json"))
        out = tmp_path / "out"
        run_cli("run", "--scenario-dir", str(scen_dir), "--planner", "log_replay",
                "--seeds", "0,1", "--no-adv", "--out", str(out), "--quiet")
        assert len(read_epochs_jsonl(out / "epochs.jsonl")) == 4

    def test_no_scenarios_errors(self, tmp_path):
        with pytest.raises(SystemExit):
            run_cli("run", "--out", str(tmp_path / "x"), "--quiet")


class TestScoreCommand:
    def test_rescore_changes_weights(self, straight_file, tmp_path):
        out = tmp_path / "out"
        run_cli("run", "--scenario", str(straight_file), "--planner", "idm",
                "--seed", "1", "--out", str(out), "--quiet")
        cfg = tmp_path / "weights.toml"
        cfg.write_text("[metrics.weights]\nep = 1.0\nttc = 0.0\ncomfort = 0.0\n")
        rescored_path = tmp_path / "rescored.jsonl"
        run_cli("score", "--reports", str(out / "epochs.jsonl"),
                "--config", str(cfg), "--out", str(rescored_path))
        original = read_epochs_jsonl(out / "epochs.jsonl")[0]
        rescored = read_epochs_jsonl(rescored_path)[0]
        # with ep-only weights every clean frame's pdms equals its ep
        for frame in rescored.episode1.frames:
            if frame.nc and frame.dac:
                assert frame.pdms == pytest.approx(frame.ep, abs=1e-12)
        assert rescored.episode1.ds == pytest.approx(
            rescored.episode1.pdms_avg * rescored.episode1.rc, abs=1e-9
        )
        # submetrics unchanged
        assert [f.ep for f in rescored.episode1.frames] == [f.ep for f in original.episode1.frames]


class TestFlowBenchCommand:
    def test_csv_monotone(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        run_cli("flow-bench", "--steps", "5,10,20", "--seeds", "500",
                "--out", str(out))
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert [r["n_steps"] for r in rows] == ["5", "10", "20"]
        errs = [float(r["mean_error"]) for r in rows]
        assert errs[0] > errs[1] > errs[2]


class TestReportCommand:
    def test_prints_table(self, straight_file, tmp_path, capsys):
        out = tmp_path / "out"
        run_cli("run", "--scenario", str(straight_file), "--planner", "idm",
                "--seed", "2", "--out", str(out), "--quiet")
        capsys.readouterr()
        csv_path = tmp_path / "table.csv"
        run_cli("report", "--reports", str(out / "epochs.jsonl"), "--csv", str(csv_path))
        printed = capsys.readouterr().out
        assert "w/o adv" in printed
        assert csv_path.exists()
        header = csv_path.read_text().splitlines()[0]
        assert header.startswith("condition,nc,dac,ttc,c,ep,pdms,rc,ds,sc")
