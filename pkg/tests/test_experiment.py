import logging
import subprocess
import sys

import numpy as np
import pytest

from fedfair import experiment as ex
from fedfair.cli import build_parser, main
from fedfair.errors import ConfigError
from fedfair.metrics import ConfusionMatrix

SMALL = """\
num_agents = 3
model_dim = 3
iterations = 40
record_every = 7
train_size_base = 20
train_size_step = 5
test_size = 100
seed = 5
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def test_parse_kv_basic():
    v = ex.parse_kv("# header\nnum_agents = 4  # trailing\n\nseed: 9\npenalty_weight = 2, 3 4\nbias_feature = no\n")
    assert v == {"num_agents": 4, "seed": 9, "penalty_weight": (2.0, 3.0, 4.0), "bias_feature": False}


@pytest.mark.parametrize(
    "text, line, key",
    [
        ("seed = 1\nlearning_rate = 3\n", 2, "learning_rate"),
        ("seed = 1\nseed = 2\n", 2, "seed"),
        ("\n\niterations = many\n", 3, "iterations"),
        ("iterations =\n", 1, "iterations"),
        ("just words\n", 1, None),
    ],
)
def test_parse_kv_diagnostics(text, line, key):
    with pytest.raises(ConfigError) as exc:
        ex.parse_kv(text)
    assert exc.value.line == line and exc.value.key == key
    assert str(exc.value).startswith(f"line {line}: ")


def test_build_config_defaults_and_broadcast_weight():
    cfg = ex.build_config({})
    assert cfg.run.num_agents == 12 and cfg.run.model_dim == 4 and cfg.run.ball_radius == 10.0
    assert cfg.run.weights.p == (2.0,) * 12
    assert cfg.data.sizes[0] == 50 and cfg.data.n_agents == 12
    cfg = ex.build_config({"num_agents": 2, "penalty_weight": (3.0, 4.0)})
    assert cfg.run.weights.p == (3.0, 4.0)


@pytest.mark.parametrize(
    "values",
    [{"penalty_weight": (1.0,)}, {"channel_dist": "rician"}, {"channel_lo": -1.0}, {"record_every": 0}, {"step_exponent": 0.5}, {"num_agents": 2, "penalty_weight": (2.0, 2.0, 2.0)}],
)
def test_build_config_rejects(values):
    with pytest.raises(ConfigError):
        ex.build_config(values)


def test_shipped_config_matches_defaults():
    from pathlib import Path

    cfg = ex.load_config(Path(__file__).parents[1] / "configs" / "sec5.cfg")
    default = ex.build_config({})
    assert cfg.run == default.run and cfg.data == default.data
    assert cfg.record_every == 10


def test_trace_csv_round_trip(tmp_path, rng):
    rows = []
    for k in range(30):
        row = dict.fromkeys(ex.TRACE_COLUMNS)
        row.update(k=k, eta=rng.random(), alpha=float(rng.normal()) * 1e-300, minmax_obj=1 / 3 + k, theta_norm=np.nextafter(10.0, 0), slots_used=3 * k)
        if k % 2:
            row["gap"] = -0.0 if k == 1 else rng.random()
        rows.append(row)
    p = tmp_path / "t.csv"
    ex.write_trace(rows, p)
    back = ex.read_trace(p)
    assert back == rows
    assert p.read_text().splitlines()[0] == ",".join(ex.TRACE_COLUMNS)


def test_confusion_and_summary_files(tmp_path):
    cm = ConfusionMatrix(5, 1, 2, 7)
    ex.write_confusion(cm, tmp_path / "c.csv")
    assert ex.read_confusion(tmp_path / "c.csv") == cm
    assert (tmp_path / "c.csv").read_text().splitlines() == [",pred_0,pred_1", "true_0,5,1", "true_1,2,7"]
    ex.write_summary({"a": 1, "b": "x y"}, tmp_path / "s.txt")
    assert ex.read_summary(tmp_path / "s.txt") == {"a": "1", "b": "x y"}


def test_recorder_stride_and_last_row(toy_agents):
    from fedfair.config import RunConfig
    from fedfair.engine import run

    rec = ex.TraceRecorder(toy_agents, record_every=4, alpha_star=1.0, w=[2.0, 2.0], last_k=10)
    run(RunConfig(num_agents=2, model_dim=1, iterations=10), toy_agents, rec)
    assert [r["k"] for r in rec.rows] == [0, 4, 8, 10]
    assert all(r["gap"] >= -1e-12 for r in rec.rows)
    assert rec.rows[-1]["slots_used"] == 30
    assert rec.rows[0]["test_accuracy"] is None


def test_run_both_writes_outputs(small_cfg, tmp_path):
    out = tmp_path / "out"
    assert main(["--method", "both", "--config", str(small_cfg), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["confusion_fedavg.csv", "confusion_fedfair.csv", "summary.txt", "trace_fedavg.csv", "trace_fedfair.csv"]
    s = ex.read_summary(out / "summary.txt")
    assert s["slot_ratio_fedavg_to_fedfair"] == "1"  # N = 3
    assert int(s["fedfair_slots_total"]) == 3 * 40 and int(s["fedavg_slots_total"]) == 3 * 40
    fair = ex.read_trace(out / "trace_fedfair.csv")
    assert [r["k"] for r in fair] == [0, 7, 14, 21, 28, 35, 40]
    avg = ex.read_trace(out / "trace_fedavg.csv")
    assert all(r["alpha"] is None and r["penalty_obj"] is None for r in avg)
    cm = ex.read_confusion(out / "confusion_fedfair.csv")
    assert cm.total == 100
    assert float(s["fedfair_test_accuracy"]) == (cm.tn + cm.tp) / 100


def test_slot_ratio_four_at_twelve_agents(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("iterations = 2\ntest_size = 10\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    s = ex.read_summary(tmp_path / "o" / "summary.txt")
    assert s["slot_ratio_fedavg_to_fedfair"] == "4"
    assert int(s["fedavg_slots_total"]) == 4 * int(s["fedfair_slots_total"])


def test_single_method_has_no_ratio(small_cfg, tmp_path):
    assert main(["--method", "fedavg", "--config", str(small_cfg), "--out", str(tmp_path)]) == 0
    assert not (tmp_path / "trace_fedfair.csv").exists()
    assert "slot_ratio_fedavg_to_fedfair" not in ex.read_summary(tmp_path / "summary.txt")


def test_seed_and_stride_overrides(small_cfg, tmp_path):
    main(["--method", "fedfair", "--config", str(small_cfg), "--out", str(tmp_path / "a"), "--seed", "0x10"])
    main(["--method", "fedfair", "--config", str(small_cfg), "--out", str(tmp_path / "b"), "--seed", "16", "--record-every", "20"])
    sa, sb = (ex.read_summary(tmp_path / d / "summary.txt") for d in "ab")
    assert sa["seed"] == sb["seed"] == "16"
    assert sa["fedfair_theta"] == sb["fedfair_theta"]
    assert [r["k"] for r in ex.read_trace(tmp_path / "b" / "trace_fedfair.csv")] == [0, 20, 40]


def test_same_seed_same_bytes(small_cfg, tmp_path):
    for d in "ab":
        main(["--config", str(small_cfg), "--out", str(tmp_path / d)])
    for name in ("trace_fedfair.csv", "trace_fedavg.csv", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unknown_key_exits_nonzero_naming_key(tmp_path, caplog):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("seed = 1\nlearning_rate = 0.1\n")
    with caplog.at_level(logging.ERROR):
        status = main(["--config", str(cfg), "--out", str(tmp_path / "o")])
    assert status != 0
    assert "learning_rate" in caplog.text and "line 2" in caplog.text
    assert not (tmp_path / "o").exists()


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2


def test_abort_surfaces_iteration(tmp_path, caplog, monkeypatch):
    from fedfair import losses

    monkeypatch.setattr(losses.LogisticLoss, "value_and_grad", lambda self, t, d: (float("nan"), t))
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL)
    with caplog.at_level(logging.ERROR):
        assert main(["--method", "fedfair", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "iteration 0" in caplog.text


def test_parser_rejects_bad_flags():
    p = build_parser()
    for argv in (["--method", "sgd"], ["--seed", "-1"], ["--seed", str(2**64)], ["--record-every", "0"]):
        with pytest.raises(SystemExit):
            p.parse_args(argv)
    assert p.parse_args(["--seed", str(2**64 - 1)]).seed == 2**64 - 1


def test_module_entry_point(small_cfg, tmp_path):
    r = subprocess.run([sys.executable, "-m", "fedfair", "--method", "fedavg", "--config", str(small_cfg), "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "summary.txt").exists()
