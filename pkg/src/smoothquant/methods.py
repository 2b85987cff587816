"""Distributed compressed-gradient methods (plain and variance-reduced).

Both methods run the same loop shape: every worker compresses something
about its local gradient, the server averages the reconstructions and
takes a proximal step.  The variance-reduced variant additionally learns
per-worker shift vectors u_i so the compressed quantity (grad f_i - u_i)
shrinks along the run, removing the compression-noise floor.

Smoothness awareness lives entirely in the compressors: pass compressors
wrapped via wrap_with_smoothness for the matrix-aware variants, or raw
ones for the scalar baselines.  Everything is deterministic given the
seed; per-(worker, iteration) streams are derived by seeding a generator
with the tuple (seed, worker, iteration).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compressors import SmoothnessWrappedCompressor
from .errors import AlphaTooLarge, NonfiniteGradient, OutOfRange, ZeroDenominator
from .problems import ReferenceSolution, make_prox
from .traces import Trace

DIVERGENCE_FACTOR = 1e12

# Simulated clock constants: compute throughput, uplink bandwidth and
# per-round latency.  The clock is deterministic so traces replay byte
# for byte; only relative timings are meaningful.
SIM_FLOPS_PER_MS = 1e6
SIM_BITS_PER_MS = 1e6
SIM_LATENCY_MS = 0.05


@dataclass
class MethodConfig:
    gamma: float
    iterations: int
    seed: int = 0
    alpha: float = 0.0
    prox: tuple[str, float] = ("none", 0.0)

    def __post_init__(self):
        if self.gamma <= 0:
            raise OutOfRange(f"stepsize gamma must be positive, got {self.gamma}")
        if self.iterations < 0:
            raise OutOfRange("iteration count must be nonnegative")
        if self.seed < 0:
            raise OutOfRange("seed must be nonnegative")


@dataclass
class ServerState:
    """Server iterate plus (for variance-reduced runs) the shift average."""

    x: np.ndarray
    u: np.ndarray | None = None


def worker_rng(seed: int, worker: int, iteration: int) -> np.random.Generator:
    """Independent stream per (seed, worker, iteration) triple."""
    return np.random.default_rng(np.random.SeedSequence([seed, worker, iteration]))


def default_stepsizes(
    lips: float, calL_max: float, omega_max: float, n: int, method: str
) -> tuple[float, float]:
    """Theory-matched stepsizes.

    dcgd family:  gamma = 1 / (L + 2 calL_max / n), alpha unused.
    diana family: gamma = 1 / (L + 6 calL_max / n), alpha = 1/(1 + omega_max).
    """
    if n < 1:
        raise OutOfRange(f"need at least one worker, got n={n}")
    kind = method.rstrip("+")
    if kind == "dcgd":
        denom = lips + 2.0 * calL_max / n
        alpha = 0.0
    elif kind == "diana":
        denom = lips + 6.0 * calL_max / n
        alpha = 1.0 / (1.0 + omega_max)
    else:
        raise OutOfRange(f"unknown method {method!r}")
    if denom <= 0:
        raise ZeroDenominator("both L and calL_max are zero")
    return 1.0 / denom, alpha


def _mean_gradient_estimate(x, workers, compressors, rngs):
    acc = np.zeros_like(x)
    bits = 0
    for worker, compressor, rng in zip(workers, compressors, rngs):
        grad = worker.grad(x)
        if not np.all(np.isfinite(grad)):
            raise NonfiniteGradient("a worker gradient is not finite")
        vec, cost = compressor.transmit(grad, rng)
        acc += vec
        bits += cost
    return acc / len(workers), bits


def dcgd_plus_step(
    state: ServerState, workers, compressors, gamma: float, rngs, prox=None
) -> tuple[ServerState, int]:
    """One round of compressed gradient descent."""
    estimate, bits = _mean_gradient_estimate(state.x, workers, compressors, rngs)
    prox = prox if prox is not None else make_prox()
    return ServerState(x=prox(state.x - gamma * estimate, gamma)), bits


def diana_plus_step(
    state: ServerState,
    shifts: list[np.ndarray],
    workers,
    compressors,
    gamma: float,
    alpha: float,
    rngs,
    prox=None,
) -> tuple[ServerState, list[np.ndarray], int]:
    """One variance-reduced round.

    Workers compress grad f_i(x) - u_i; both sides advance the shifts by
    alpha times the reconstructed difference, so the server average u
    always equals the mean of the worker shifts.
    """
    n = len(workers)
    x = state.x
    u = state.u if state.u is not None else np.zeros_like(x)
    deltas = []
    bits = 0
    for worker, compressor, shift, rng in zip(workers, compressors, shifts, rngs):
        grad = worker.grad(x)
        if not np.all(np.isfinite(grad)):
            raise NonfiniteGradient("a worker gradient is not finite")
        vec, cost = compressor.transmit(grad - shift, rng)
        deltas.append(vec)
        bits += cost
    mean_delta = np.zeros_like(x)
    for vec in deltas:  # fixed worker order keeps runs reproducible
        mean_delta += vec
    mean_delta /= n

    estimate = mean_delta + u
    prox = prox if prox is not None else make_prox()
    new_state = ServerState(x=prox(x - gamma * estimate, gamma), u=u + alpha * mean_delta)
    new_shifts = [shift + alpha * vec for shift, vec in zip(shifts, deltas)]
    return new_state, new_shifts, bits


def sigma_plus(workers, shifts, x_star: np.ndarray) -> float:
    """Shift suboptimality (1/n) sum_i ||u_i - grad f_i(x*)||^2_{pinv(L_i)}."""
    total = 0.0
    for worker, shift in zip(workers, shifts):
        total += worker.factor.dual_sqnorm(shift - worker.grad(x_star))
    return total / len(workers)


def sigma_plus_star(workers, certificates, x_star: np.ndarray) -> float:
    """Gradient-noise floor (1/n) sum_i calL_i ||grad f_i(x*)||^2_{pinv(L_i)}."""
    total = 0.0
    for worker, cert in zip(workers, certificates):
        total += cert.calL_bound * worker.factor.dual_sqnorm(worker.grad(x_star))
    return total / len(workers)


def _iteration_cost_ms(workers, compressors, dim: int, bits: int) -> float:
    flops = 0.0
    for worker, compressor in zip(workers, compressors):
        flops += getattr(worker, "grad_cost", 2.0 * dim * dim)
        if isinstance(compressor, SmoothnessWrappedCompressor):
            flops += 4.0 * dim * dim  # whiten + unwhiten matvecs
        else:
            flops += 4.0 * dim
    flops += len(workers) * dim  # server aggregation
    return flops / SIM_FLOPS_PER_MS + bits / SIM_BITS_PER_MS + SIM_LATENCY_MS


def run(
    method: str,
    workers,
    compressors,
    config: MethodConfig,
    reference: ReferenceSolution,
    one_time_bits: int = 0,
    x0: np.ndarray | None = None,
    omega_max: float | None = None,
) -> Trace:
    """Run a method for config.iterations rounds and record a Trace.

    method is one of dcgd, dcgd+, diana, diana+; the +-variants differ
    only in the compressors supplied (wrapped against worker factors).
    one_time_bits charges the upfront cost of sharing factors and step
    vectors at iteration 0.  Deterministic given the config.
    """
    kind = method.rstrip("+")
    if kind not in ("dcgd", "diana"):
        raise OutOfRange(f"unknown method {method!r}")
    variance_reduced = kind == "diana"
    if variance_reduced:
        if not 0 < config.alpha <= 1:
            raise OutOfRange(f"alpha must lie in (0, 1], got {config.alpha}")
        if omega_max is not None and config.alpha > 1.0 / (1.0 + omega_max) * (1 + 1e-9):
            raise AlphaTooLarge(
                f"alpha {config.alpha} exceeds 1/(1+omega_max) = {1.0 / (1.0 + omega_max)}"
            )

    dim = reference.x_star.size
    x0 = np.zeros(dim) if x0 is None else np.asarray(x0, dtype=float)
    prox = make_prox(*config.prox)
    state = ServerState(x=x0.copy(), u=np.zeros(dim) if variance_reduced else None)
    shifts = [np.zeros(dim) for _ in workers] if variance_reduced else None

    distance0 = float(np.sum((x0 - reference.x_star) ** 2))
    denom = distance0 if distance0 > 0 else 1.0
    guard = DIVERGENCE_FACTOR * (1.0 + float(np.linalg.norm(x0)))

    def objective(x):
        return float(np.mean([w.loss(x) for w in workers]))

    iters = [0]
    rel_error = [distance0 / denom]
    f_gap = [objective(x0) - reference.f_star]
    bits_cum = [int(one_time_bits)]
    time_ms = [one_time_bits / SIM_BITS_PER_MS]
    diverged_at = None

    clock = time_ms[0]
    total_bits = int(one_time_bits)
    for k in range(1, config.iterations + 1):
        rngs = [worker_rng(config.seed, i, k) for i in range(len(workers))]
        if variance_reduced:
            state, shifts, bits = diana_plus_step(
                state, shifts, workers, compressors, config.gamma, config.alpha, rngs, prox
            )
        else:
            state, bits = dcgd_plus_step(state, workers, compressors, config.gamma, rngs, prox)
        total_bits += bits
        clock += _iteration_cost_ms(workers, compressors, dim, bits)

        iters.append(k)
        rel_error.append(float(np.sum((state.x - reference.x_star) ** 2)) / denom)
        f_gap.append(objective(state.x) - reference.f_star)
        bits_cum.append(total_bits)
        time_ms.append(clock)
        if float(np.linalg.norm(state.x)) > guard:
            diverged_at = k
            break

    meta = {
        "method": method,
        "gamma": config.gamma,
        "alpha": config.alpha if variance_reduced else None,
        "seed": config.seed,
        "one_time_bits": int(one_time_bits),
        "diverged_at": diverged_at,
    }
    return Trace(
        iters=np.asarray(iters, dtype=int),
        rel_error=np.asarray(rel_error),
        f_gap=np.asarray(f_gap),
        bits_cum=np.asarray(bits_cum, dtype=float),
        time_ms=np.asarray(time_ms),
        meta=meta,
    )
