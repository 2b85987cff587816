"""Unbiased compressors and their smoothness-aware variance certificates.

All operators C here satisfy E[C(x)] = x and E||C(x) - x||^2 <= omega ||x||^2.
Given a smoothness factor L, the matching weighted constant is

    calL(C, L) = inf { c : E||C(x) - x||_L^2 <= c ||x||^2 for all x },

always bounded by omega * lambda_max(L) but often far smaller when the
steps or sampling probabilities are tuned to diag(L).  certify() returns
both constants as a VarianceCertificate.

The quantizers share one wire format: per block, a 31-bit magnitude
(the block norm at float32 precision) plus integer levels produced by
stochastic rounding of |x_j| / (||x|| h_j).  Magnitudes are rounded to
float32 when the vector is built, so encoding round-trips exactly and
unbiasedness holds with respect to the rounded magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.optimize import brentq

from .encoding import encoded_bit_count
from .errors import (
    BlockSizesMismatch,
    DimensionMismatch,
    InvalidProbability,
    OutOfRange,
    UnknownKind,
)
from .smoothness import SmoothnessFactor

VALUE_BITS = 32  # cost of one raw float on the wire


@dataclass(frozen=True)
class QuantizedVector:
    """Wire form of a quantized vector.

    reconstruct() returns magnitudes[l] * signs[j] * levels[j] * steps[j]
    per coordinate.  signs[j] == 0 exactly when levels[j] == 0, and the
    block magnitudes are the block norms rounded to float32.
    """

    dim: int
    block_starts: np.ndarray
    magnitudes: np.ndarray
    signs: np.ndarray
    levels: np.ndarray
    steps: np.ndarray

    def block_slices(self) -> list[tuple[int, int]]:
        starts = [int(s) for s in self.block_starts]
        return list(zip(starts, starts[1:] + [self.dim]))

    def reconstruct(self) -> np.ndarray:
        out = np.zeros(self.dim)
        for which, (a, b) in enumerate(self.block_slices()):
            out[a:b] = (
                self.magnitudes[which]
                * self.signs[a:b]
                * self.levels[a:b].astype(float)
                * self.steps[a:b]
            )
        return out


@dataclass(frozen=True)
class VarianceCertificate:
    """Euclidean (omega) and L-weighted (calL) variance constants."""

    omega_bound: float
    calL_bound: float


def stochastic_round(value: float, step: float, rng: np.random.Generator) -> float:
    """Round value >= 0 to the lattice {0, h, 2h, ...} without bias.

    For kh <= v < (k+1)h the result is kh with probability k+1 - v/h and
    (k+1)h otherwise, so E[xi(v)] = v and lattice points are fixed.
    """
    if step <= 0:
        raise OutOfRange("step must be positive")
    if value < 0:
        raise OutOfRange("stochastic_round expects a nonnegative value")
    ratio = value / step
    base = np.floor(ratio)
    level = base + (rng.random() < ratio - base)
    return float(level * step)


def _levels_batch(ratios: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Stochastically rounded integer levels for a (draws, width) array."""
    base = np.floor(ratios)
    bump = rng.random(ratios.shape) < (ratios - base)
    return base.astype(np.uint64) + bump.astype(np.uint64)


def _round32(value: float) -> float:
    return float(np.float32(value))


def _block_starts(sizes: list[int], dim: int) -> np.ndarray:
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise BlockSizesMismatch("block sizes must be positive")
    if sum(sizes) != dim:
        raise BlockSizesMismatch(f"block sizes sum to {sum(sizes)}, expected {dim}")
    return np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)


def _quantize_core(
    x: np.ndarray,
    block_starts: np.ndarray,
    steps: np.ndarray,
    rng: np.random.Generator,
    draws: int | None = None,
):
    """Shared kernel: one QuantizedVector, or a (draws, d) batch of
    reconstructions using the identical sampling layout."""
    d = x.size
    starts = [int(s) for s in block_starts]
    slices = list(zip(starts, starts[1:] + [d]))
    n = 1 if draws is None else draws

    magnitudes = np.zeros(len(slices))
    levels = np.zeros((n, d), dtype=np.uint64)
    for which, (a, b) in enumerate(slices):
        mag = _round32(np.linalg.norm(x[a:b]))
        magnitudes[which] = mag
        if mag == 0.0:
            continue  # zero block: deterministic zero output, no draws
        ratios = np.abs(x[a:b]) / mag / steps[a:b]
        levels[:, a:b] = _levels_batch(np.broadcast_to(ratios, (n, b - a)), rng)

    if draws is None:
        lev = levels[0]
        signs = (np.sign(x) * (lev > 0)).astype(np.int8)
        return QuantizedVector(
            dim=d,
            block_starts=np.asarray(starts, dtype=int),
            magnitudes=magnitudes,
            signs=signs,
            levels=lev,
            steps=steps.copy(),
        )
    out = levels.astype(float) * (np.sign(x) * steps)
    for which, (a, b) in enumerate(slices):
        out[:, a:b] *= magnitudes[which]
    return out


def _check_steps(steps: np.ndarray) -> np.ndarray:
    steps = np.asarray(steps, dtype=float)
    if np.any(steps <= 0) or not np.all(np.isfinite(steps)):
        raise OutOfRange("quantization steps must be positive and finite")
    return steps


def quantize_standard(x: np.ndarray, s: int, rng: np.random.Generator) -> QuantizedVector:
    """Single-block quantization on the uniform lattice with step 1/s."""
    if int(s) != s or s < 1:
        raise OutOfRange(f"number of levels s must be a positive integer, got {s}")
    x = np.asarray(x, dtype=float)
    steps = np.full(x.size, 1.0 / int(s))
    return _quantize_core(x, np.array([0]), steps, rng)


def quantize_block(
    x: np.ndarray,
    block_sizes: list[int],
    block_steps: np.ndarray,
    rng: np.random.Generator,
) -> QuantizedVector:
    """Blockwise quantization: one magnitude and one step per block."""
    x = np.asarray(x, dtype=float)
    starts = _block_starts(block_sizes, x.size)
    block_steps = _check_steps(block_steps)
    if block_steps.size != len(block_sizes):
        raise BlockSizesMismatch("need exactly one step per block")
    steps = np.repeat(block_steps, block_sizes)
    return _quantize_core(x, starts, steps, rng)


def quantize_varying(x: np.ndarray, steps: np.ndarray, rng: np.random.Generator) -> QuantizedVector:
    """Global-magnitude quantization with a per-coordinate lattice."""
    x = np.asarray(x, dtype=float)
    steps = _check_steps(steps)
    if steps.size != x.size:
        raise DimensionMismatch("need one step per coordinate")
    return _quantize_core(x, np.array([0]), steps, rng)


def sparsify_rand_tau(x: np.ndarray, probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent sparsification: keep coordinate j w.p. p_j, rescale by 1/p_j."""
    x = np.asarray(x, dtype=float)
    probs = _check_probs(probs, x.size)
    mask = rng.random(x.size) < probs
    return np.where(mask, x / probs, 0.0)


def _check_probs(probs: np.ndarray, dim: int) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.size != dim:
        raise DimensionMismatch("need one inclusion probability per coordinate")
    if np.any(probs <= 0) or np.any(probs > 1):
        raise InvalidProbability("inclusion probabilities must lie in (0, 1]")
    return probs


def optimal_sampling_probs(diag: np.ndarray, tau: float) -> np.ndarray:
    """Inclusion probabilities equalizing (1/p_j - 1) * L_jj at budget tau.

    Minimizes the independent-sampling certificate max_j (1-p_j)/p_j L_jj
    subject to sum p_j = tau; coordinates with zero diagonal never touch
    the certificate and just get the proportional share tau / d.
    """
    diag = np.asarray(diag, dtype=float)
    d = diag.size
    if not 0 < tau <= d:
        raise OutOfRange(f"tau must lie in (0, {d}], got {tau}")
    positive = diag > 0
    k = int(positive.sum())
    share = tau / d
    probs = np.full(d, share)
    if k == 0 or tau == d:
        return np.full(d, min(1.0, share)) if k == 0 else np.ones(d)

    budget = tau - (d - k) * share
    vals = diag[positive]

    def total(c):
        return float(np.sum(vals / (c + vals))) - budget

    if total(0.0) <= 0:
        probs[positive] = budget / k
        return probs
    hi = float(vals.max())
    while total(hi) > 0:
        hi *= 2.0
    c = brentq(total, 0.0, hi, xtol=1e-15, rtol=1e-15)
    probs[positive] = vals / (c + vals)
    return np.clip(probs, 1e-15, 1.0)


class StandardQuantizer:
    """Uniform lattice with s levels on [0, 1]; omega = min(d/s^2, sqrt(d)/s)."""

    kind = "quant"

    def __init__(self, s: int, level_coding: str = "unary"):
        if int(s) != s or s < 1:
            raise OutOfRange(f"number of levels s must be a positive integer, got {s}")
        self.s = int(s)
        self.level_coding = level_coding

    def quantize(self, x, rng):
        return quantize_standard(x, self.s, rng)

    def __call__(self, x, rng):
        return self.quantize(x, rng).reconstruct()

    def sample(self, x, draws, rng):
        x = np.asarray(x, dtype=float)
        steps = np.full(x.size, 1.0 / self.s)
        return _quantize_core(x, np.array([0]), steps, rng, draws=draws)

    def transmit(self, x, rng):
        q = self.quantize(x, rng)
        bits, _ = encoded_bit_count(q.levels, q.dim, q.block_starts, self.level_coding)
        return q.reconstruct(), bits

    def certificate(self, factor: SmoothnessFactor) -> VarianceCertificate:
        d = factor.dim
        h = 1.0 / self.s
        omega = min(d * h * h, np.sqrt(d) * h)
        weighted = min(h * h * factor.diag.sum(), h * np.linalg.norm(factor.diag))
        return _certificate(omega, weighted, factor)


class BlockQuantizer:
    """Per-block magnitudes and steps; certificate is the worst block."""

    kind = "block_quant"

    def __init__(self, block_sizes: list[int], block_steps, level_coding: str = "unary"):
        self.block_sizes = [int(s) for s in block_sizes]
        self.block_steps = _check_steps(block_steps)
        if self.block_steps.size != len(self.block_sizes):
            raise BlockSizesMismatch("need exactly one step per block")
        self.level_coding = level_coding

    def quantize(self, x, rng):
        return quantize_block(x, self.block_sizes, self.block_steps, rng)

    def __call__(self, x, rng):
        return self.quantize(x, rng).reconstruct()

    def sample(self, x, draws, rng):
        x = np.asarray(x, dtype=float)
        starts = _block_starts(self.block_sizes, x.size)
        steps = np.repeat(self.block_steps, self.block_sizes)
        return _quantize_core(x, starts, steps, rng, draws=draws)

    def transmit(self, x, rng):
        q = self.quantize(x, rng)
        bits, _ = encoded_bit_count(q.levels, q.dim, q.block_starts, self.level_coding)
        return q.reconstruct(), bits

    def certificate(self, factor: SmoothnessFactor) -> VarianceCertificate:
        starts = _block_starts(self.block_sizes, factor.dim)
        omega = 0.0
        weighted = 0.0
        for which, a in enumerate(starts):
            b = a + self.block_sizes[which]
            h = self.block_steps[which]
            size = b - a
            block_diag = factor.diag[a:b]
            omega = max(omega, min(h * h * size, h * np.sqrt(size)))
            weighted = max(
                weighted, min(h * h * block_diag.sum(), h * np.linalg.norm(block_diag))
            )
        return _certificate(omega, weighted, factor)


class VaryingStepQuantizer:
    """Single global magnitude, per-coordinate lattice steps h_j.

    Only diag(L) enters the certificate, which is what makes per
    coordinate step tuning cheap to certify.
    """

    kind = "quant_varying"

    def __init__(self, steps, level_coding: str = "unary"):
        self.steps = _check_steps(steps)
        self.level_coding = level_coding

    def quantize(self, x, rng):
        return quantize_varying(x, self.steps, rng)

    def __call__(self, x, rng):
        return self.quantize(x, rng).reconstruct()

    def sample(self, x, draws, rng):
        x = np.asarray(x, dtype=float)
        return _quantize_core(x, np.array([0]), self.steps, rng, draws=draws)

    def transmit(self, x, rng):
        q = self.quantize(x, rng)
        bits, _ = encoded_bit_count(q.levels, q.dim, q.block_starts, self.level_coding)
        return q.reconstruct(), bits

    def certificate(self, factor: SmoothnessFactor) -> VarianceCertificate:
        h = self.steps
        if h.size != factor.dim:
            raise DimensionMismatch("step vector does not match factor dimension")
        omega = min(float(np.sum(h * h)), float(np.linalg.norm(h)))
        weighted = min(
            float(np.sum(factor.diag * h * h)),
            float(np.linalg.norm(factor.diag * h)),
        )
        return _certificate(omega, weighted, factor)


class RandTauSparsifier:
    """Independent coordinate sampling with per-coordinate probabilities."""

    kind = "rand_tau"

    def __init__(self, probs):
        probs = np.asarray(probs, dtype=float)
        self.probs = _check_probs(probs, probs.size)

    def __call__(self, x, rng):
        return sparsify_rand_tau(x, self.probs, rng)

    def sample(self, x, draws, rng):
        x = np.asarray(x, dtype=float)
        mask = rng.random((draws, x.size)) < self.probs
        return np.where(mask, x / self.probs, 0.0)

    def transmit(self, x, rng):
        out = self(x, rng)
        nnz = int(np.count_nonzero(out))
        d = out.size
        bits = (
            VALUE_BITS * nnz
            + int(d).bit_length()
            + (comb(d, nnz) - 1).bit_length()
        )
        return out, bits

    def certificate(self, factor: SmoothnessFactor) -> VarianceCertificate:
        if self.probs.size != factor.dim:
            raise DimensionMismatch("probabilities do not match factor dimension")
        penalty = (1.0 - self.probs) / self.probs
        omega = float(penalty.max())
        # For independent sampling the covariance weight matrix
        # Ptilde is diagonal, so lambda_max(Ptilde o L) is a plain max.
        weighted = float(np.max(penalty * factor.diag))
        return _certificate(omega, weighted, factor)


class IdentityCompressor:
    """Lossless channel: omega = 0, every coordinate costs one float."""

    kind = "identity"

    def __call__(self, x, rng):
        return np.asarray(x, dtype=float).copy()

    def sample(self, x, draws, rng):
        return np.tile(np.asarray(x, dtype=float), (draws, 1))

    def transmit(self, x, rng):
        x = np.asarray(x, dtype=float)
        return x.copy(), VALUE_BITS * x.size

    def certificate(self, factor: SmoothnessFactor) -> VarianceCertificate:
        return VarianceCertificate(omega_bound=0.0, calL_bound=0.0)


class SmoothnessWrappedCompressor:
    """C_bar(x) = L^{1/2} C(L^{+1/2} x): the smoothness-aware composite.

    Unbiased on range(L); the inner compressor sees the whitened vector
    and its wire cost is what travels.
    """

    kind = "wrapped"

    def __init__(self, inner, factor: SmoothnessFactor):
        self.inner = inner
        self.factor = factor

    def __call__(self, x, rng):
        return self.factor.sqrt @ self.inner(self.factor.pinv_sqrt @ x, rng)

    def sample(self, x, draws, rng):
        inner = self.inner.sample(self.factor.pinv_sqrt @ np.asarray(x, float), draws, rng)
        return inner @ self.factor.sqrt  # sqrt is symmetric

    def transmit(self, x, rng):
        vec, bits = self.inner.transmit(self.factor.pinv_sqrt @ x, rng)
        return self.factor.sqrt @ vec, bits

    def certificate(self, factor: SmoothnessFactor | None = None) -> VarianceCertificate:
        return self.inner.certificate(self.factor if factor is None else factor)


def wrap_with_smoothness(compressor, factor: SmoothnessFactor) -> SmoothnessWrappedCompressor:
    """Compose a compressor with the whitening induced by a factor."""
    return SmoothnessWrappedCompressor(compressor, factor)


def certify(compressor, factor: SmoothnessFactor) -> VarianceCertificate:
    """Variance certificate (omega, calL) of a compressor against a factor."""
    try:
        method = compressor.certificate
    except AttributeError:
        raise UnknownKind(f"cannot certify object of type {type(compressor).__name__}")
    return method(factor)


def _certificate(omega: float, weighted: float, factor: SmoothnessFactor) -> VarianceCertificate:
    cap = omega * factor.lambda_max
    if weighted > cap * (1 + 1e-12) + 1e-300:
        raise OutOfRange("weighted bound exceeds omega * lambda_max; certificate is inconsistent")
    return VarianceCertificate(omega_bound=float(omega), calL_bound=float(min(weighted, cap)))
