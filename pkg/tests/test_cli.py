import csv
import json

import pytest

from specbandit.cli import main


def _write(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


SMALL = {"drafters": [0.8, 0.5], "budget": 300, "replications": 10, "n_max": 4}


def test_run_scenario_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--scenario", "stationary_k5", "--out", str(out), "--override", "replications=5"])
    assert rc == 0
    assert (out / "results.json").exists() and (out / "curve.csv").exists() and (out / "plot.svg").exists()
    assert not (out / "traces.csv").exists()
    assert "stopping_regret\t" in capsys.readouterr().out


def test_invalid_n_max_exit_2(tmp_path, capsys):
    rc = main(["run", "--config", _write(tmp_path, {**SMALL, "n_max": 0}), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "n_max" in capsys.readouterr().err


def test_override_echoed(tmp_path):
    out = tmp_path / "o"
    rc = main(["run", "--config", _write(tmp_path, SMALL), "--out", str(out), "--override", "policy.beta=0.05", "-q"])
    assert rc == 0
    data = json.loads((out / "results.json").read_text())
    assert data["config"]["policy"]["beta"] == 0.05
    assert data["overrides"] == ["policy.beta=0.05"]


def test_seed_precedence(tmp_path, monkeypatch):
    cfg = _write(tmp_path, {**SMALL, "seed": 3})

    def seed_of(*extra):
        out = tmp_path / f"o{len(list(tmp_path.iterdir()))}"
        assert main(["run", "--config", cfg, "--out", str(out), "-q", "--no-plot", *extra]) == 0
        return json.loads((out / "results.json").read_text())["seed"]

    assert seed_of() == 3
    monkeypatch.setenv("SPECBANDIT_SEED", "11")
    assert seed_of() == 11
    assert seed_of("--seed", "12") == 12
    monkeypatch.setenv("SPECBANDIT_SEED", "eleven")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "x"), "-q"]) == 2


def test_config_problems_exit_2(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", _write(tmp_path, SMALL), "--seed", "-1"]) == 2
    assert main(["run"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["launch"])
    assert exc.value.code == 2


def test_runtime_failure_exit_1(tmp_path, capsys):
    blocker = tmp_path / "f"
    blocker.write_text("")
    rc = main(["run", "--config", _write(tmp_path, SMALL), "--out", str(blocker / "sub"), "-q"])
    assert rc == 1
    assert str(blocker) in capsys.readouterr().err


def test_verify_subset(capsys):
    assert main(["verify", "--checks", "lossless"]) == 0
    out = capsys.readouterr().out
    assert "lossless" in out and "var_nacc" not in out


def test_verify_failure_names_check(monkeypatch, capsys):
    from specbandit import analytics

    monkeypatch.setattr(analytics, "var_nacc", lambda a, n: -1.0)
    assert main(["verify", "--checks", "var_nacc,expected_nacc"]) == 1
    assert "failed checks: var_nacc" in capsys.readouterr().err
    assert main(["verify", "--checks", "bogus"]) == 2


def test_compare_rewards_single_arm(tmp_path):
    out = tmp_path / "cmp"
    rc = main(["compare-rewards", "--config", _write(tmp_path, {**SMALL, "drafters": [0.6]}), "--out", str(out),
               "--groups", "2", "-q"])
    assert rc == 0
    data = json.loads((out / "compare.json").read_text())
    be, bd = data["rewards"]["be"], data["rewards"]["bd"]
    assert be["report"] == bd["report"]
    assert be["group_rounds_to_threshold"] == bd["group_rounds_to_threshold"] == [0, 0]


def test_compare_rewards_identical_arms_flat(tmp_path):
    out = tmp_path / "cmp"
    raw = {"drafters": [{"dist": {"kind": "beta", "a": 2, "b": 2}}] * 3, "budget": 400, "replications": 200,
           "n_max": 3}
    assert main(["compare-rewards", "--config", _write(tmp_path, raw), "--out", str(out), "-q", "--no-plot"]) == 0
    with open(out / "compare.csv") as fh:
        rows = [r for r in csv.DictReader(fh) if int(r["bd_active"]) == 200][3:]
    se = (1 / 3 * 2 / 3 / 200) ** 0.5
    outside = [r for r in rows if abs(float(r["bd_ratio"]) - 1 / 3) > 3 * se]
    assert len(outside) <= 0.05 * len(rows)


def test_sweep_n_max_monotone(tmp_path):
    out = tmp_path / "sw"
    raw = {"drafters": [0.8, 0.5], "budget": 2000, "replications": 20}
    rc = main(["sweep", "--config", _write(tmp_path, raw), "--param", "n_max", "--values", "1,2,3,5,8,12",
               "--out", str(out), "-q"])
    assert rc == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["value"] for r in rows] == ["1", "2", "3", "5", "8", "12"]
    means = [float(r["mean_n_acc_per_round"]) for r in rows]
    assert all(b >= a for a, b in zip(means, means[1:]))
    assert (out / "plot.svg").exists()


def test_sweep_beta_rows(tmp_path):
    out = tmp_path / "sw"
    rc = main(["sweep", "--config", _write(tmp_path, SMALL), "--param", "policy.beta",
               "--values", "0.001,0.01,0.1,1", "--out", str(out), "-q", "--no-plot"])
    assert rc == 0
    assert len((out / "sweep.csv").read_text().splitlines()) == 5


def test_sweep_empty_values(tmp_path):
    assert main(["sweep", "--config", _write(tmp_path, SMALL), "--param", "n_max", "--values", "",
                 "--out", str(tmp_path / "s")]) == 2


def test_scenario_print_config(capsys):
    assert main(["scenario", "switching_cost", "--print-config"]) == 0
    raw = json.loads(capsys.readouterr().out)
    assert raw["lambda_switch"] > 0 and raw["policy"]["kind"] == "petc"


def test_scenario_run(tmp_path):
    out = tmp_path / "sc"
    rc = main(["scenario", "query_stream", "--out", str(out), "--override", "replications=3",
               "--override", "budget=50", "-q", "--traces"])
    assert rc == 0
    assert (out / "traces.csv").exists()
