import json

import pytest

from airpid import neural
from airpid.cli import main
from airpid.csvio import read_csv
from airpid.evaluation import frozen_gains
from airpid.simenv import SimConfig

SMALL = "horizon = 256\nminibatch = 64\nepochs = 1\ntotal_timesteps = 512\n"


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


@pytest.fixture
def trained(tmp_path, small_cfg):
    out = tmp_path / "train"
    assert main(["train", str(small_cfg), "--out", str(out)]) == 0
    return out


def test_train_outputs(trained):
    names = {p.name for p in trained.iterdir()}
    assert {"config.txt", "training.csv", "training_legs.csv", "final.airppo",
            "checkpoint_0001.airppo", "checkpoint_0002.airppo"} <= names
    assert "total_timesteps = 512" in (trained / "config.txt").read_text()


def test_train_single_iteration(tmp_path, small_cfg):
    out = tmp_path / "one"
    assert main(["train", str(small_cfg), "--out", str(out), "--total-timesteps", "256"]) == 0
    assert len(read_csv(out / "training.csv")[2]) == 1


def test_train_missing_config(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["train", str(tmp_path / "missing.cfg"), "--out", str(out)]) == 2
    assert not out.exists()
    assert "cannot read config" in capsys.readouterr().err


def test_train_bad_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("seed = 1\nlearning_rate = 3\n")
    assert main(["train", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "bad.cfg:2: unknown key 'learning_rate'" in capsys.readouterr().err


def test_airpid_out_env(tmp_path, small_cfg, monkeypatch):
    monkeypatch.setenv("AIRPID_OUT", str(tmp_path / "envout"))
    assert main(["eval", "--mode", "fixed", "--episodes", "1", "--config", str(small_cfg)]) == 0
    assert (tmp_path / "envout" / "eval_fixed" / "metrics.csv").exists()


def test_eval_fixed_needs_no_checkpoint_and_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["eval", "--mode", "fixed", "--episodes", "2", "--seed", "3", "--out", str(out)]) == 0
    for name in ("trajectory.csv", "legs.csv", "gains.csv", "metrics.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_eval_adaptive_requires_checkpoint(tmp_path):
    assert main(["eval", "--mode", "adaptive", "--out", str(tmp_path / "x")]) == 2


def test_eval_frozen_records_extracted_gains(tmp_path, trained):
    out = tmp_path / "ev"
    ckpt = trained / "final.airppo"
    assert main(["eval", str(ckpt), "--mode", "frozen", "--episodes", "1", "--seed", "5", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    net = neural.ActorCritic(neural.load_checkpoint(ckpt))
    g, _ = frozen_gains(net, SimConfig(seed=5))
    assert summary["gains"] == {"kp": g.kp, "ki": g.ki, "kd": g.kd}
    _, _, rows = read_csv(out / "gains.csv")
    assert {(r[1], r[2], r[3]) for r in rows} == {(g.kp, g.ki, g.kd)}


def test_eval_corrupt_checkpoint(tmp_path, capsys):
    bad = tmp_path / "bad.airppo"
    bad.write_bytes(b"AIRPPO1" + b"\x01" * 20)
    assert main(["eval", str(bad), "--out", str(tmp_path / "x")]) == 4
    assert "corrupt artifact" in capsys.readouterr().err


def test_compare_outputs(tmp_path, trained, capsys):
    out = tmp_path / "cmp"
    assert main(["compare", str(trained / "final.airppo"), "--episodes", "2", "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert set(report["success_rate"]) == {"adaptive", "frozen", "fixed"}
    assert set(report["vs_frozen"]) == {"speed_pct", "settling_pct", "overshoot_pct"}
    kind, _, rows = read_csv(out / "adaptive_gains.csv")
    assert kind == "gains" and rows
    assert len({r[5] for r in rows}) > 1  # several legs traced
    assert "adaptive vs frozen" in capsys.readouterr().out


def test_compare_against_itself_is_zero(trained):
    from airpid.controller import AdaptivePolicy
    from airpid.evaluation import evaluate
    from airpid.metrics import improvement_report
    net = neural.ActorCritic(neural.load_checkpoint(trained / "final.airppo"))
    a = evaluate(AdaptivePolicy(net), SimConfig(seed=2), episodes=1)
    b = evaluate(AdaptivePolicy(net), SimConfig(seed=2), episodes=1)
    r = improvement_report(a.metrics, b.metrics)
    assert (r["speed_pct"], r["settling_pct"], r["overshoot_pct"]) == (0.0, 0.0, 0.0)


MAP = "workspace_lo = 0 0 0\nworkspace_hi = 4 4 2\n"


def test_plan_straight_and_rate(tmp_path):
    m = tmp_path / "empty.map"
    m.write_text(MAP)
    out = tmp_path / "plan"
    assert main(["plan", str(m), "--start", "0.1,0.1,1.1", "--goal", "2.1,0.1,1.1", "--out", str(out)]) == 0
    _, _, sched = read_csv(out / "schedule.csv", "path")
    assert [r[0] for r in sched] == [float(i) for i in range(len(sched))]
    assert {(r[2], r[3]) for r in sched} == {(0.125, 1.125)}
    _, _, wp = read_csv(out / "waypoints.csv", "waypoints")
    assert len(wp) == 9


def test_plan_rate_two_hz(tmp_path):
    m = tmp_path / "empty.map"
    m.write_text(MAP)
    out = tmp_path / "plan"
    assert main(["plan", str(m), "--start", "0.1,0.1,1.1", "--goal", "1.1,0.1,1.1",
                 "--rate", "2", "--out", str(out)]) == 0
    assert [r[0] for r in read_csv(out / "schedule.csv")[2]] == [0.0, 0.5, 1.0, 1.5, 2.0]


def test_plan_no_path(tmp_path, capsys):
    m = tmp_path / "wall.map"
    m.write_text(MAP + "box = 1.5 -1 -1 2.5 5 3\n")
    assert main(["plan", str(m), "--start", "0.5,0.5,1", "--goal", "3.5,0.5,1", "--out", str(tmp_path / "p")]) == 3
    assert "NO_PATH" in capsys.readouterr().err


def test_plan_blocked_start(tmp_path):
    m = tmp_path / "box.map"
    m.write_text(MAP + "box = 0 0 0 1 1 2\n")
    assert main(["plan", str(m), "--start", "0.5,0.5,1", "--goal", "3.5,0.5,1", "--out", str(tmp_path / "p")]) == 2


def test_plan_simulate(tmp_path):
    m = tmp_path / "room.map"
    m.write_text(MAP + "box = 1.5 0 0 2.5 3 2\n")
    out = tmp_path / "plan"
    assert main(["plan", str(m), "--start", "0.5,0.5,1", "--goal", "3.5,0.5,1", "--simulate", "--out", str(out)]) == 0
    track = json.loads((out / "tracking.json").read_text())
    assert track["settled_at_goal"] and track["goal_error"] <= 0.1
    kind, _, rows = read_csv(out / "tracking.csv")
    assert kind == "trajectory" and rows


def test_plot_kinds(tmp_path, trained):
    svg = tmp_path / "t.svg"
    assert main(["plot", str(trained / "training_legs.csv"), "--kind", "training", str(svg)]) == 0
    text = svg.read_text()
    assert text.startswith("<svg") and "Effective speed" in text and "Settling time" in text and "Overshoot" in text


def test_plot_empty_csv(tmp_path, capsys):
    src = tmp_path / "g.csv"
    src.write_text("#airpid:gains/1\nt,kp,ki,kd,pe,leg_id\n")
    dst = tmp_path / "g.svg"
    assert main(["plot", str(src), "--kind", "gains", str(dst)]) == 4
    assert not dst.exists()
    assert "no data rows" in capsys.readouterr().err


def test_plot_malformed_names_row(tmp_path, capsys):
    src = tmp_path / "g.csv"
    src.write_text("#airpid:gains/1\nt,kp,ki,kd,pe,leg_id\n0,1,2,3,4,0\n0.04,1,2,3\n")
    dst = tmp_path / "g.svg"
    assert main(["plot", str(src), "--kind", "gains", str(dst)]) == 4
    assert not dst.exists()
    assert "row 4" in capsys.readouterr().err


def test_bad_point_argument(tmp_path):
    with pytest.raises(SystemExit):
        main(["plan", "m", "--start", "1,2", "--goal", "1,2,3"])

