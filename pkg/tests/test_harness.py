"""Experiment harness: config parsing, compressor building, sweep outputs."""

from __future__ import annotations

import json

import numpy as np
import pytest

import smoothquant as sq
from smoothquant import cli
from smoothquant.harness import _slug
from smoothquant.errors import ConfigParse, DatasetNotFound


CONFIG_TEMPLATE = """\
# demo sweep
dataset = synthetic:logistic:60x8:seed=3
n = 3
l2 = 0.01
methods = dcgd+
compressors = quant+(beta=4), identity
seeds = 0,1
iterations = 30
output_dir = {out}
"""


def _write_config(tmp_path, text=None, **overrides):
    text = CONFIG_TEMPLATE.format(out=tmp_path / "out") if text is None else text
    for key, value in overrides.items():
        lines = []
        for line in text.splitlines():
            if line.split("=")[0].strip() == key:
                line = f"{key} = {value}"
            lines.append(line)
        text = "\n".join(lines) + "\n"
    path = tmp_path / "sweep.cfg"
    path.write_text(text)
    return path


def test_parse_config_happy_path(tmp_path):
    cfg = sq.parse_config(_write_config(tmp_path))
    assert cfg.dataset == "synthetic:logistic:60x8:seed=3"
    assert cfg.n == 3 and cfg.l2 == 0.01
    assert cfg.methods == ["dcgd+"]
    assert cfg.compressors == ["quant+(beta=4)", "identity"]
    assert cfg.seeds == [0, 1]
    assert cfg.iterations == 30
    assert cfg.diag_only is False
    assert cfg.level_coding == "unary"


def test_parse_config_optional_keys(tmp_path):
    text = CONFIG_TEMPLATE.format(out=tmp_path) + "diag_only = yes\nlevel_coding = elias\n"
    cfg = sq.parse_config(_write_config(tmp_path, text))
    assert cfg.diag_only is True
    assert cfg.level_coding == "elias"


def test_parse_config_error_paths(tmp_path):
    with pytest.raises(ConfigParse, match="does not exist"):
        sq.parse_config(tmp_path / "missing.cfg")
    with pytest.raises(ConfigParse, match="key = value"):
        sq.parse_config(_write_config(tmp_path, "dataset synthetic\n"))
    with pytest.raises(ConfigParse, match="missing required key"):
        sq.parse_config(_write_config(tmp_path, "dataset = x\nn = 2\n"))
    with pytest.raises(ConfigParse, match="unknown method"):
        sq.parse_config(_write_config(tmp_path, methods="sgd"))
    with pytest.raises(ConfigParse, match="seeds"):
        sq.parse_config(_write_config(tmp_path, seeds="0,x"))
    with pytest.raises(ConfigParse, match="non-empty"):
        sq.parse_config(_write_config(tmp_path, methods=" "))
    with pytest.raises(ConfigParse, match="level_coding"):
        sq.parse_config(
            _write_config(
                tmp_path,
                text=CONFIG_TEMPLATE.format(out=tmp_path) + "level_coding = golomb\n",
            )
        )
    with pytest.raises(ConfigParse, match="boolean"):
        sq.parse_config(
            _write_config(
                tmp_path,
                text=CONFIG_TEMPLATE.format(out=tmp_path) + "diag_only = maybe\n",
            )
        )
    with pytest.raises(ConfigParse, match="integer"):
        sq.parse_config(_write_config(tmp_path, n="two"))
    with pytest.raises(ConfigParse, match="number"):
        sq.parse_config(_write_config(tmp_path, l2="small"))


def test_parse_compressor_spec_frozen():
    assert sq.parse_compressor_spec("quant(s=2)") == ("quant", {"s": 2.0})
    assert sq.parse_compressor_spec("quant+(beta=5)") == ("quant+", {"beta": 5.0})
    assert sq.parse_compressor_spec("block_quant+(B=6,beta=11)") == (
        "block_quant+",
        {"B": 6.0, "beta": 11.0},
    )
    assert sq.parse_compressor_spec("rand_tau+(tau=5)") == ("rand_tau+", {"tau": 5.0})
    assert sq.parse_compressor_spec("identity") == ("identity", {})
    assert sq.parse_compressor_spec("quant+") == ("quant+", {})


def test_parse_compressor_spec_errors():
    with pytest.raises(ConfigParse, match="unknown compressor"):
        sq.parse_compressor_spec("topk(k=3)")
    with pytest.raises(ConfigParse, match="bad parameter"):
        sq.parse_compressor_spec("quant+(s=2)")  # s belongs to quant, not quant+
    with pytest.raises(ConfigParse, match="non-numeric"):
        sq.parse_compressor_spec("quant+(beta=big)")
    with pytest.raises(ConfigParse, match="cannot parse"):
        sq.parse_compressor_spec("quant+(beta=3")


def test_slug():
    assert _slug("diana+") == "dianap"
    assert _slug("quant+(beta=3)") == "quantp-beta-3"
    assert _slug("block_quant+(B=2,beta=8)") == "block-quantp-b-2-beta-8"


def test_load_dataset_synthetic():
    ds = sq.load_dataset("synthetic:logistic:25x6:seed=4")
    assert ds.m == 25 and ds.dim == 6
    skewed = sq.load_dataset("synthetic:logistic:25x6:seed=4:skew=2.5")
    assert skewed.m == 25
    assert not np.array_equal(skewed.rows, ds.rows)


def test_load_dataset_file_and_errors(tmp_path):
    path = tmp_path / "tiny.libsvm"
    path.write_text("+1 1:0.5 2:-1\n-1 1:-0.5 2:1\n")
    ds = sq.load_dataset(str(path))
    assert ds.m == 2 and ds.dim == 2
    with pytest.raises(DatasetNotFound):
        sq.load_dataset(str(tmp_path / "nope.libsvm"))
    with pytest.raises(ConfigParse, match="synthetic"):
        sq.load_dataset("synthetic:quadratic:10x4:seed=1")


def test_build_worker_compressor_defaults():
    rng = np.random.default_rng(0)
    basis, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    factor = sq.build_factor(basis @ np.diag(rng.uniform(0.5, 3.0, 8)) @ basis.T)
    n, mu = 4, 0.01

    raw, deployed, payload = sq.build_worker_compressor("quant", {}, "dcgd", factor, n, mu)
    assert isinstance(raw, sq.StandardQuantizer)
    assert raw.s == max(1, int(np.ceil(np.sqrt(8) / 4)))
    assert payload == 0
    assert deployed is raw  # baseline methods run the raw compressor

    raw, deployed, payload = sq.build_worker_compressor(
        "quant+", {}, "dcgd+", factor, n, mu
    )
    assert isinstance(raw, sq.VaryingStepQuantizer)
    assert isinstance(deployed, sq.SmoothnessWrappedCompressor)
    assert payload == 32 * 8
    # default beta = d/n: the solved steps meet that budget
    assert sq.bits_proxy(raw.steps) == pytest.approx(8 / 4, rel=1e-10)

    raw, _, payload = sq.build_worker_compressor(
        "block_quant+", {}, "diana+", factor, n, mu
    )
    assert isinstance(raw, sq.BlockQuantizer)
    assert len(raw.block_sizes) == min(n, 8)
    assert payload == 32 * min(n, 8)

    raw, _, payload = sq.build_worker_compressor("rand_tau+", {}, "dcgd+", factor, n, mu)
    assert isinstance(raw, sq.RandTauSparsifier)
    assert raw.probs.sum() == pytest.approx(8 / 4, rel=1e-8)
    assert payload == 32 * 8

    raw, deployed, payload = sq.build_worker_compressor("identity", {}, "dcgd", factor, n, mu)
    assert isinstance(raw, sq.IdentityCompressor)
    assert payload == 0


def test_build_worker_compressor_diana_uses_coupled_solver():
    factor = sq.build_factor(np.diag([1.0, 4.0, 9.0]))
    n, mu, beta = 2, 0.05, 5.0
    raw_d, _, _ = sq.build_worker_compressor(
        "quant+", {"beta": beta}, "diana+", factor, n, mu
    )
    raw_g, _, _ = sq.build_worker_compressor(
        "quant+", {"beta": beta}, "dcgd+", factor, n, mu
    )
    expect_d = sq.solve_varying_diana(factor, beta, n, mu).steps
    expect_g = sq.solve_varying_dcgd(factor, beta).steps
    np.testing.assert_allclose(raw_d.steps, expect_d, rtol=1e-12)
    np.testing.assert_allclose(raw_g.steps, expect_g, rtol=1e-12)
    assert not np.allclose(raw_d.steps, raw_g.steps)


def _tiny_problems(n=3, d=6, m=40, l2=0.02, seed=5):
    ds = sq.synthetic_logistic(m, d, seed=seed)
    shards = sq.heterogeneous_split(ds, n)
    return [sq.LogisticProblem(s.rows, s.labels, l2) for s in shards]


def test_prepare_combo_one_time_accounting(tmp_path):
    problems = _tiny_problems()
    n, d = 3, 6
    base = dict(
        dataset="unused",
        n=n,
        l2=0.02,
        methods=["dcgd+"],
        compressors=["quant+(beta=3)"],
        seeds=[0],
        iterations=5,
        output_dir=str(tmp_path),
    )
    full = sq.ExperimentConfig(**base)
    setup = sq.prepare_combo(problems, "dcgd+", "quant+(beta=3)", full)
    assert setup["one_time_bits"] == n * (32 * d * d + 32 * d)

    diag = sq.ExperimentConfig(**{**base, "diag_only": True})
    setup = sq.prepare_combo(problems, "dcgd+", "quant+(beta=3)", diag)
    assert setup["one_time_bits"] == n * (32 * d + 32 * d)

    setup = sq.prepare_combo(problems, "dcgd", "quant(s=2)", full)
    assert setup["one_time_bits"] == 0
    # omega = min(d h^2, sqrt(d) h): sqrt(6)/2 wins over 6/4 here
    assert setup["omega_max"] == pytest.approx(np.sqrt(6) / 2, rel=1e-12)

    gamma, alpha = sq.default_stepsizes(
        setup["lips"], setup["calL_max"], setup["omega_max"], n, "dcgd"
    )
    assert setup["gamma"] == pytest.approx(gamma, rel=1e-12)


def test_run_experiment_outputs(tmp_path):
    out = tmp_path / "out"
    cfg = sq.parse_config(_write_config(tmp_path))
    summary = sq.run_experiment(cfg)

    expected = {
        "dcgdp__quantp-beta-4__seed0.csv",
        "dcgdp__quantp-beta-4__seed1.csv",
        "dcgdp__quantp-beta-4__avg.csv",
        "dcgdp__identity__seed0.csv",
        "dcgdp__identity__seed1.csv",
        "dcgdp__identity__avg.csv",
        "plot_iters.svg",
        "plot_mbytes.svg",
        "summary.json",
    }
    assert {p.name for p in out.iterdir()} == expected

    on_disk = json.loads((out / "summary.json").read_text())
    assert on_disk == summary
    assert set(summary) == {
        "dataset",
        "n",
        "l2",
        "iterations",
        "seeds",
        "heterogeneity",
        "reference_grad_norm",
        "combos",
        "diverged",
    }
    assert summary["diverged"] is False
    assert len(summary["combos"]) == 2
    quant_row = summary["combos"][0]
    assert quant_row["compressor"] == "quant+(beta=4)"
    assert quant_row["one_time_bits"] == 3 * (32 * 64 + 32 * 8)
    # identity under a +-method still ships the factors (the server
    # must unwhiten) but adds no step-vector payload
    identity_row = summary["combos"][1]
    assert identity_row["one_time_bits"] == 3 * 32 * 64
    assert identity_row["omega_max"] == 0.0

    table = sq.format_summary(summary)
    assert "dcgd+" in table and "identity" in table and "nu=" in table


def test_encode_bench_shape_and_degenerate():
    result = sq.encode_bench(dim=10, trials=12, seed=0)
    assert set(result) == {"rows", "pearson_r", "pairs"}
    assert len(result["rows"]) == 12
    # 3 magnitudes x 4 densities per trial, minus skipped all-zero draws
    assert 100 < result["pairs"] <= 12 * 12
    assert -1.0 <= result["pearson_r"] <= 1.0
    empty = sq.encode_bench(dim=4, trials=0, seed=0)
    assert empty["pearson_r"] is None and empty["pairs"] == 0


def test_cli_exit_codes(tmp_path, capsys):
    # config errors exit 2
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 2
    capsys.readouterr()

    cfg_path = _write_config(tmp_path, iterations=10, seeds="0")
    assert cli.main(["run", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "dcgd+" in out

    assert (
        cli.main(
            [
                "solve-steps",
                "--dataset",
                "synthetic:logistic:40x6:seed=2",
                "--n",
                "2",
                "--beta",
                "5",
                "--mode",
                "varying-dcgd",
            ]
        )
        == 0
    )
    payload = json.loads(capsys.readouterr().out)
    assert payload["mode"] == "varying-dcgd"
    assert len(payload["workers"]) == 2
    assert len(payload["workers"][0]["steps"]) == 6

    assert (
        cli.main(
            ["smoothness", "--dataset", "synthetic:logistic:40x6:seed=2", "--n", "2"]
        )
        == 0
    )
    stats = json.loads(capsys.readouterr().out)
    assert set(stats) >= {"workers", "global_lambda_max", "nu", "nu1"}

    assert cli.main(["encode-bench", "--dim", "8", "--trials", "5"]) == 0
    assert "pearson_r" in capsys.readouterr().out


def test_cli_plot(tmp_path, capsys):
    cfg_path = _write_config(tmp_path, iterations=10, seeds="0")
    cli.main(["run", str(cfg_path)])
    capsys.readouterr()
    csv = tmp_path / "out" / "dcgdp__identity__avg.csv"
    target = tmp_path / "custom.svg"
    assert (
        cli.main(["plot", "--x-axis", "mbytes", "--out", str(target), str(csv)]) == 0
    )
    assert target.exists()
    # argparse rejects unknown axes with the usage exit code
    with pytest.raises(SystemExit) as exc:
        cli.main(["plot", "--x-axis", "epochs", "--out", str(target), str(csv)])
    assert exc.value.code == 2


def test_cli_run_reports_divergence(tmp_path, monkeypatch, capsys):
    """Exit code 1 when the sweep summary flags a diverged run."""
    cfg_path = _write_config(tmp_path, iterations="2", seeds="0")
    real = sq.run_experiment

    def flagged(config):
        summary = real(config)
        summary["diverged"] = True
        return summary

    monkeypatch.setattr(cli, "run_experiment", flagged)
    assert cli.main(["run", str(cfg_path)]) == 1
    capsys.readouterr()
