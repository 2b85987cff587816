"""Closed-form optimal quantization steps under a bit budget.

Block modes control the exact expected message size: with B blocks of
sizes d_l the per-message budget constraint is

    sum_l (1 / h_l^2 + sqrt(d_l) / h_l) + B = beta,

levels plus sign overhead plus one magnitude per block, in units where
the 31-bit magnitudes are counted once outside.  Varying-step modes use
the lighter proxy ||h^-1||_2 = beta.

Each solver minimizes the variance surrogate relevant to its method and
admits an exact solution: the step profile equalizes a per-block or per
coordinate weight, and the remaining scalar is the positive root of a
quadratic (block modes) or a plain normalization (varying modes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BlockSizesMismatch,
    BudgetTooSmall,
    DegenerateBlock,
    NonpositiveBeta,
    NonpositiveMu,
    UnknownKind,
)
from .smoothness import SmoothnessFactor

# Coordinates with a zero diagonal carry no variance weight; they get a
# step this many times larger than the largest finite one.
ZERO_DIAG_STEP_FACTOR = 1e6

MODES = ("block", "varying")


@dataclass(frozen=True)
class BitBudget:
    """Per-message budget beta in the units of the chosen constraint."""

    beta: float
    mode: str


@dataclass(frozen=True)
class StepSolution:
    """Optimal steps (length d, constant within blocks for block modes).

    objective_value is the minimized surrogate: the equalized block
    weight delta for block modes, ||diag(L) h||_2 for varying DCGD and
    sum_j (1 + A_j^2) h_j^2 for varying DIANA.  delta is the quadratic
    root for block modes and None otherwise.
    """

    steps: np.ndarray
    objective_value: float
    delta: float | None = None


def budget_for_bits(target: float, mode: str) -> BitBudget:
    """Validate and wrap a per-message bit budget."""
    if mode not in MODES:
        raise UnknownKind(f"mode must be one of {MODES}, got {mode!r}")
    if not target > 0:
        raise NonpositiveBeta(f"budget must be positive, got {target}")
    return BitBudget(beta=float(target), mode=mode)


def _block_diag_norms(factor: SmoothnessFactor, block_sizes: list[int]) -> np.ndarray:
    sizes = [int(s) for s in block_sizes]
    if any(s < 1 for s in sizes):
        raise BlockSizesMismatch("block sizes must be positive")
    if sum(sizes) != factor.dim:
        raise BlockSizesMismatch(
            f"block sizes sum to {sum(sizes)}, factor dimension is {factor.dim}"
        )
    norms = []
    a = 0
    for s in sizes:
        norms.append(float(np.linalg.norm(factor.diag[a : a + s])))
        a += s
    return np.asarray(norms)


def _block_quadratic(weights: np.ndarray, sizes: np.ndarray, beta: float) -> float:
    """Positive root of (beta - B) delta^2 - a delta - b = 0.

    a = sum_l sqrt(d_l) w_l and b = sum_l w_l^2, from substituting
    the equalized steps h_l = delta / w_l into the budget constraint.
    """
    n_blocks = len(weights)
    if not beta > n_blocks:
        raise BudgetTooSmall(
            f"budget {beta} must exceed the number of blocks {n_blocks}"
        )
    slack = beta - n_blocks
    lin = float(np.sum(np.sqrt(sizes) * weights))
    const = float(np.sum(weights**2))
    return (lin + np.sqrt(lin * lin + 4.0 * slack * const)) / (2.0 * slack)


def solve_block_dcgd(
    factor: SmoothnessFactor, block_sizes: list[int], beta: float
) -> StepSolution:
    """Steps minimizing the blockwise variance weight max_l h_l ||diag(L^ll)||_2."""
    norms = _block_diag_norms(factor, block_sizes)
    if np.any(norms == 0):
        raise DegenerateBlock("a block has an all-zero diagonal")
    sizes = np.asarray([int(s) for s in block_sizes])
    delta = _block_quadratic(norms, sizes, beta)
    block_steps = delta / norms
    return StepSolution(
        steps=np.repeat(block_steps, sizes),
        objective_value=float(delta),
        delta=float(delta),
    )


def solve_block_diana(
    factor: SmoothnessFactor, block_sizes: list[int], beta: float, n: int, mu: float
) -> StepSolution:
    """Block steps for variance-reduced runs.

    The surrogate couples compression noise and the shift-learning term:
    block weight A_l = sqrt(d_l) + ||diag(L^ll)||_2 / (mu n), equalized
    by h_l = delta / A_l.
    """
    if not mu > 0:
        raise NonpositiveMu(f"strong convexity constant must be positive, got {mu}")
    if n < 1:
        raise BudgetTooSmall(f"need at least one worker, got n={n}")
    norms = _block_diag_norms(factor, block_sizes)
    sizes = np.asarray([int(s) for s in block_sizes])
    weights = np.sqrt(sizes) + norms / (mu * n)
    delta = _block_quadratic(weights, sizes, beta)
    block_steps = delta / weights
    return StepSolution(
        steps=np.repeat(block_steps, sizes),
        objective_value=float(delta),
        delta=float(delta),
    )


def _cap_zero_diag(steps: np.ndarray, included: np.ndarray) -> np.ndarray:
    if included.all():
        return steps
    out = steps.copy()
    out[~included] = ZERO_DIAG_STEP_FACTOR * steps[included].max()
    return out


def solve_varying_dcgd(factor: SmoothnessFactor, beta: float) -> StepSolution:
    """Per-coordinate steps minimizing ||diag(L) h||_2 at ||h^-1|| = beta.

    KKT gives h_j = (1/beta) sqrt(sum_t L_tt / L_jj); the minimized value
    collapses to trace(diag(L)) / beta.  Zero-diagonal coordinates are
    excluded from the constraint and get a huge step.
    """
    if not beta > 0:
        raise NonpositiveBeta(f"budget must be positive, got {beta}")
    diag = factor.diag
    included = diag > 0
    if not included.any():
        raise DegenerateBlock("every diagonal entry is zero")
    trace = float(diag[included].sum())
    steps = np.zeros(factor.dim)
    steps[included] = np.sqrt(trace / diag[included]) / beta
    steps = _cap_zero_diag(steps, included)
    return StepSolution(steps=steps, objective_value=trace / beta)


def solve_varying_diana(
    factor: SmoothnessFactor, beta: float, n: int, mu: float
) -> StepSolution:
    """Per-coordinate steps minimizing sum_j (1 + A_j^2) h_j^2.

    A_j = L_jj / (n mu) folds the shift-learning penalty into the
    weight; every coordinate keeps a finite weight >= 1, so no capping
    is needed.
    """
    if not beta > 0:
        raise NonpositiveBeta(f"budget must be positive, got {beta}")
    if not mu > 0:
        raise NonpositiveMu(f"strong convexity constant must be positive, got {mu}")
    if n < 1:
        raise BudgetTooSmall(f"need at least one worker, got n={n}")
    coupled = factor.diag / (n * mu)
    weights = np.sqrt(1.0 + coupled**2)
    total = float(weights.sum())
    steps = np.sqrt(total / weights) / beta
    return StepSolution(steps=steps, objective_value=(total / beta) ** 2)
