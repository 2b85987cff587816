"""Experiment orchestration: configs, sweeps, bit accounting, summaries.

A config file is flat `key = value` text.  Keys:

    dataset     path to a LibSVM file, or synthetic:logistic:MxD:seed=S[:skew=K]
    n           number of workers
    l2          ridge parameter (also the strong convexity constant)
    methods     comma list from {dcgd, dcgd+, diana, diana+}
    compressors comma list, e.g. quant(s=1), quant+(beta=5),
                block_quant+(B=6,beta=11), rand_tau+(tau=5), identity
    seeds       comma list of integers
    iterations  rounds per run
    output_dir  where CSV/SVG/JSON artifacts go
    diag_only   true/false: share only diag(L_i) (cheaper one-time cost)
    level_coding unary | elias

Every (method, compressor, seed) combination runs; per-seed CSVs, the
seed-averaged CSV per combination, two SVG plots and summary.json are
written to output_dir.  The sweep honors SMOOTHQUANT_THREADS.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import methods as methods_mod
from .compressors import (
    BlockQuantizer,
    IdentityCompressor,
    RandTauSparsifier,
    StandardQuantizer,
    VaryingStepQuantizer,
    certify,
    optimal_sampling_probs,
    wrap_with_smoothness,
)
from .encoding import bits_proxy, encoded_bit_count
from .errors import ConfigParse, DatasetNotFound, NonfiniteGradient, UnknownKind
from .methods import MethodConfig, default_stepsizes, sigma_plus_star
from .plotting import emit_svg_plot
from .problems import (
    Dataset,
    LogisticProblem,
    heterogeneous_split,
    parse_libsvm,
    reference_solution,
    synthetic_logistic,
)
from .smoothness import build_factor, global_factor, heterogeneity, identity_factor
from .step_solver import (
    solve_block_dcgd,
    solve_block_diana,
    solve_varying_dcgd,
    solve_varying_diana,
)
from .traces import Trace, average_traces

METHODS = ("dcgd", "dcgd+", "diana", "diana+")
COMPRESSOR_NAMES = ("quant", "quant+", "block_quant+", "rand_tau+", "identity")
SUMMARY_THRESHOLDS = (1e-2, 1e-4, 1e-6)

FLOAT_BITS = 32


@dataclass
class ExperimentConfig:
    dataset: str
    n: int
    l2: float
    methods: list[str]
    compressors: list[str]
    seeds: list[int]
    iterations: int
    output_dir: str
    diag_only: bool = False
    level_coding: str = "unary"


def _parse_bool(text: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigParse(f"key {key!r}: expected a boolean, got {text!r}")


def parse_config(path: str | Path) -> ExperimentConfig:
    """Read a flat key = value config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigParse(f"config file {path} does not exist")
    values: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigParse(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()

    required = ("dataset", "n", "l2", "methods", "compressors", "seeds", "iterations", "output_dir")
    for key in required:
        if key not in values:
            raise ConfigParse(f"missing required key {key!r}")

    def _int(key):
        try:
            return int(values[key])
        except ValueError:
            raise ConfigParse(f"key {key!r}: expected an integer, got {values[key]!r}")

    def _float(key):
        try:
            return float(values[key])
        except ValueError:
            raise ConfigParse(f"key {key!r}: expected a number, got {values[key]!r}")

    methods = [m.strip() for m in values["methods"].split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigParse(f"unknown method {m!r}; choose from {METHODS}")
    compressors = _split_compressor_list(values["compressors"])
    for spec in compressors:
        parse_compressor_spec(spec)  # validate early
    try:
        seeds = [int(s) for s in values["seeds"].split(",") if s.strip()]
    except ValueError:
        raise ConfigParse(f"key 'seeds': expected comma-separated integers, got {values['seeds']!r}")
    if not methods or not compressors or not seeds:
        raise ConfigParse("methods, compressors and seeds must be non-empty")

    level_coding = values.get("level_coding", "unary")
    if level_coding not in ("unary", "elias"):
        raise ConfigParse(f"key 'level_coding': must be unary or elias, got {level_coding!r}")

    return ExperimentConfig(
        dataset=values["dataset"],
        n=_int("n"),
        l2=_float("l2"),
        methods=methods,
        compressors=compressors,
        seeds=seeds,
        iterations=_int("iterations"),
        output_dir=values["output_dir"],
        diag_only=_parse_bool(values.get("diag_only", "false"), "diag_only"),
        level_coding=level_coding,
    )


def _split_compressor_list(text: str) -> list[str]:
    """Split on commas outside parentheses."""
    out, depth, current = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            token = "".join(current).strip()
            if token:
                out.append(token)
            current = []
        else:
            current.append(ch)
    token = "".join(current).strip()
    if token:
        out.append(token)
    return out


_SPEC_RE = re.compile(r"^([a-z_+]+)(?:\((.*)\))?$")

_SPEC_KEYS = {
    "quant": {"s"},
    "quant+": {"beta"},
    "block_quant+": {"B", "beta"},
    "rand_tau+": {"tau"},
    "identity": set(),
}


def parse_compressor_spec(spec: str) -> tuple[str, dict]:
    """Parse e.g. 'quant+(beta=5)' into ('quant+', {'beta': 5.0})."""
    match = _SPEC_RE.match(spec.strip())
    if not match:
        raise ConfigParse(f"cannot parse compressor spec {spec!r}")
    name, arglist = match.group(1), match.group(2)
    if name not in COMPRESSOR_NAMES:
        raise ConfigParse(f"unknown compressor {name!r}; choose from {COMPRESSOR_NAMES}")
    params: dict[str, float] = {}
    if arglist:
        for item in arglist.split(","):
            item = item.strip()
            if not item:
                continue
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or key not in _SPEC_KEYS[name]:
                raise ConfigParse(f"compressor {name!r}: bad parameter {item!r}")
            try:
                params[key] = float(value)
            except ValueError:
                raise ConfigParse(f"compressor {name!r}: non-numeric value in {item!r}")
    return name, params


def _slug(text: str) -> str:
    text = text.replace("+", "p")
    text = re.sub(r"[^a-zA-Z0-9]+", "-", text).strip("-")
    return text.lower()


_SYNTH_RE = re.compile(r"^synthetic:logistic:(\d+)x(\d+):seed=(\d+)(?::skew=([0-9.eE+-]+))?$")


def load_dataset(spec: str) -> Dataset:
    """Load a LibSVM file or generate a synthetic:... dataset."""
    match = _SYNTH_RE.match(spec.strip())
    if match:
        m, d, seed = int(match.group(1)), int(match.group(2)), int(match.group(3))
        skew = float(match.group(4)) if match.group(4) else 1.0
        return synthetic_logistic(m, d, seed, skew=skew)
    if spec.startswith("synthetic:"):
        raise ConfigParse(
            f"bad synthetic dataset spec {spec!r}; expected synthetic:logistic:MxD:seed=S[:skew=K]"
        )
    path = Path(spec)
    if not path.exists():
        raise DatasetNotFound(f"dataset file {spec!r} does not exist")
    return parse_libsvm(path.read_text())


def _balanced_blocks(dim: int, count: int) -> list[int]:
    base, extra = divmod(dim, count)
    return [base + (1 if i < extra else 0) for i in range(count)]


def build_worker_compressor(
    name: str,
    params: dict,
    method: str,
    factor,
    n: int,
    mu: float,
    level_coding: str = "unary",
):
    """Construct (raw, deployed) compressors for one worker.

    The raw compressor is what certificates are computed against; the
    deployed one is wrapped with the worker factor for +-methods.
    steps/probabilities for the +-compressors are solved against the
    factor actually shared with the server.
    """
    d = factor.dim
    diana = method.rstrip("+") == "diana"
    per_coordinate_payload = 0

    if name == "quant":
        s = int(params.get("s", max(1, int(np.ceil(np.sqrt(d) / n)))))
        raw = StandardQuantizer(s, level_coding)
    elif name == "quant+":
        beta = float(params.get("beta", d / n))
        if diana:
            solution = solve_varying_diana(factor, beta, n, mu)
        else:
            solution = solve_varying_dcgd(factor, beta)
        raw = VaryingStepQuantizer(solution.steps, level_coding)
        per_coordinate_payload = FLOAT_BITS * d
    elif name == "block_quant+":
        count = int(params.get("B", min(n, d)))
        sizes = _balanced_blocks(d, count)
        beta = float(params.get("beta", d / n + count))
        if diana:
            solution = solve_block_diana(factor, sizes, beta, n, mu)
        else:
            solution = solve_block_dcgd(factor, sizes, beta)
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
        raw = BlockQuantizer(sizes, solution.steps[starts], level_coding)
        per_coordinate_payload = FLOAT_BITS * count
    elif name == "rand_tau+":
        tau = float(params.get("tau", d / n))
        raw = RandTauSparsifier(optimal_sampling_probs(factor.diag, tau))
        per_coordinate_payload = FLOAT_BITS * d
    elif name == "identity":
        raw = IdentityCompressor()
    else:
        raise UnknownKind(f"unknown compressor {name!r}")

    deployed = wrap_with_smoothness(raw, factor) if method.endswith("+") else raw
    return raw, deployed, per_coordinate_payload


def prepare_combo(problems, method: str, compressor_spec: str, config: ExperimentConfig):
    """Factors, compressors, stepsizes and one-time cost for one combo."""
    name, params = parse_compressor_spec(compressor_spec)
    n = len(problems)
    d = problems[0].dim

    if method.endswith("+"):
        if config.diag_only:
            factors = [build_factor(np.diag(p.factor.diag)) for p in problems]
            factor_payload = FLOAT_BITS * d
        else:
            factors = [p.factor for p in problems]
            factor_payload = FLOAT_BITS * d * d
    else:
        factors = [identity_factor(d, p.factor.lambda_max) for p in problems]
        factor_payload = 0

    built = [
        build_worker_compressor(name, params, method, fac, n, config.l2, config.level_coding)
        for fac in factors
    ]
    raws = [b[0] for b in built]
    deployed = [b[1] for b in built]
    one_time = sum(factor_payload + b[2] for b in built) if method.endswith("+") else 0

    certs = [certify(raw, fac) for raw, fac in zip(raws, factors)]
    calL_max = max(c.calL_bound for c in certs)
    omega_max = max(c.omega_bound for c in certs)
    lips = global_factor(factors).lambda_max
    gamma, alpha = default_stepsizes(lips, calL_max, omega_max, n, method)
    return {
        "compressors": deployed,
        "certificates": certs,
        "gamma": gamma,
        "alpha": alpha,
        "omega_max": omega_max,
        "calL_max": calL_max,
        "lips": lips,
        "one_time_bits": int(one_time),
    }


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute the full sweep and write CSV/SVG/JSON artifacts."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    dataset = load_dataset(config.dataset)
    shards = heterogeneous_split(dataset, config.n)
    problems = [LogisticProblem(sh.rows, sh.labels, config.l2) for sh in shards]
    reference = reference_solution(problems, config.l2)
    hetero = heterogeneity([p.factor for p in problems])

    combos = [(m, c) for m in config.methods for c in config.compressors]
    prepared = {combo: prepare_combo(problems, combo[0], combo[1], config) for combo in combos}

    tasks = [(method, comp, seed) for (method, comp) in combos for seed in config.seeds]

    def _one(task):
        method, comp, seed = task
        setup = prepared[(method, comp)]
        run_cfg = MethodConfig(
            gamma=setup["gamma"],
            iterations=config.iterations,
            seed=seed,
            alpha=setup["alpha"],
        )
        try:
            trace = methods_mod.run(
                method,
                problems,
                setup["compressors"],
                run_cfg,
                reference,
                one_time_bits=setup["one_time_bits"],
                omega_max=setup["omega_max"],
            )
        except NonfiniteGradient:
            trace = Trace(
                iters=np.array([0]),
                rel_error=np.array([1.0]),
                f_gap=np.array([0.0]),
                bits_cum=np.array([float(setup["one_time_bits"])]),
                time_ms=np.array([0.0]),
                meta={"method": method, "seed": seed, "diverged_at": 0},
            )
        trace.meta["label"] = f"{method} {comp}"
        trace.meta["compressor"] = comp
        return task, trace

    threads = max(1, int(os.environ.get("SMOOTHQUANT_THREADS", "1")))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(_one, tasks))
    else:
        results = dict(_one(t) for t in tasks)

    summary_rows = []
    averaged = []
    diverged = False
    for method, comp in combos:
        setup = prepared[(method, comp)]
        seed_traces = []
        for seed in config.seeds:
            trace = results[(method, comp, seed)]
            trace.to_csv(out_dir / f"{_slug(method)}__{_slug(comp)}__seed{seed}.csv")
            seed_traces.append(trace)
            if trace.meta.get("diverged_at") is not None:
                diverged = True
        mean_trace = average_traces(seed_traces)
        mean_trace.meta["label"] = f"{method} {comp}"
        mean_trace.to_csv(out_dir / f"{_slug(method)}__{_slug(comp)}__avg.csv")
        averaged.append(mean_trace)

        reach = {
            f"{thr:g}": mean_trace.first_reach(thr) for thr in SUMMARY_THRESHOLDS
        }
        summary_rows.append(
            {
                "method": method,
                "compressor": comp,
                "gamma": setup["gamma"],
                "alpha": setup["alpha"] if method.rstrip("+") == "diana" else None,
                "omega_max": setup["omega_max"],
                "calL_max": setup["calL_max"],
                "one_time_bits": setup["one_time_bits"],
                "reached": reach,
            }
        )

    emit_svg_plot(averaged, "iters", out_dir / "plot_iters.svg")
    emit_svg_plot(averaged, "mbytes", out_dir / "plot_mbytes.svg")

    summary = {
        "dataset": config.dataset,
        "n": config.n,
        "l2": config.l2,
        "iterations": config.iterations,
        "seeds": config.seeds,
        "heterogeneity": {"nu": hetero.nu, "nu1": hetero.nu1, "l_max": hetero.l_max},
        "reference_grad_norm": reference.grad_norm,
        "combos": summary_rows,
        "diverged": diverged,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def format_summary(summary: dict) -> str:
    """Human-readable sweep table."""
    lines = [
        f"dataset={summary['dataset']} n={summary['n']} l2={summary['l2']}",
        f"heterogeneity nu={summary['heterogeneity']['nu']:.3f} "
        f"nu1={summary['heterogeneity']['nu1']:.3f}",
        "",
        f"{'method':<8} {'compressor':<26} {'gamma':>10} {'rel<=1e-2':>16} "
        f"{'rel<=1e-4':>16} {'rel<=1e-6':>16}",
    ]
    for row in summary["combos"]:
        cells = []
        for thr in SUMMARY_THRESHOLDS:
            hit = row["reached"][f"{thr:g}"]
            if hit is None:
                cells.append(f"{'-':>16}")
            else:
                cells.append(f"{hit['iter']:>5}it {hit['bits'] / 8e6:>7.3f}MB")
        lines.append(
            f"{row['method']:<8} {row['compressor']:<26} {row['gamma']:>10.3e} "
            + " ".join(cells)
        )
    return "\n".join(lines)


def encode_bench(dim: int = 50, trials: int = 1000, seed: int = 0, level_coding: str = "unary") -> dict:
    """Payload size versus the budget proxy ||h^-1|| on random sparse inputs.

    For each trial draw steps h = |N(0,1)| coordinate-wise, then quantize
    sparse vectors with Poisson({1,10,100}) magnitudes at densities
    {0.25, 0.5, 0.75, 1.0} and record (bit_count, ||h^-1||) pairs.
    """
    from .compressors import quantize_varying

    rng = np.random.default_rng(seed)
    rows = []
    pair_bits = []
    pair_proxy = []
    for trial in range(trials):
        steps = np.abs(rng.standard_normal(dim))
        steps[steps == 0] = 1.0  # measure-zero guard
        proxy = bits_proxy(steps)
        trial_bits = []
        for lam in (1, 10, 100):
            for density in (0.25, 0.5, 0.75, 1.0):
                magnitudes = rng.poisson(lam, dim).astype(float)
                signs = rng.choice((-1.0, 1.0), dim)
                mask = rng.random(dim) < density
                vec = magnitudes * signs * mask
                q = quantize_varying(vec, steps, rng) if vec.any() else None
                if q is None:
                    continue
                bits, _ = encoded_bit_count(q.levels, dim, q.block_starts, level_coding)
                trial_bits.append(bits)
                pair_bits.append(float(bits))
                pair_proxy.append(proxy)
        rows.append(
            {
                "trial": trial,
                "h_inv_norm": proxy,
                "mean_bits": float(np.mean(trial_bits)) if trial_bits else 0.0,
            }
        )

    if len(pair_bits) >= 2 and np.std(pair_proxy) > 0 and np.std(pair_bits) > 0:
        pearson = float(np.corrcoef(pair_bits, pair_proxy)[0, 1])
    else:
        pearson = None
    return {"rows": rows, "pearson_r": pearson, "pairs": len(pair_bits)}
