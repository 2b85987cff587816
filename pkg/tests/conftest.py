"""Shared builders for the test suite.

Everything here is deterministic: fixtures derive their randomness from
fixed seeds so failures reproduce exactly.
"""

from __future__ import annotations

import numpy as np
import pytest

import smoothquant as sq


def random_spd(rng: np.random.Generator, dim: int, floor: float = 0.05) -> np.ndarray:
    """Random symmetric positive definite matrix with eigenvalues >= floor."""
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eigs = floor + rng.uniform(0.0, 2.0, size=dim)
    return (basis * eigs) @ basis.T


def random_psd_singular(rng: np.random.Generator, dim: int, rank: int) -> np.ndarray:
    """Random PSD matrix of the given rank."""
    root = rng.standard_normal((dim, rank))
    return root @ root.T


@pytest.fixture(scope="session")
def quad_interpolation():
    """Interpolation quadratic: all workers share the planted minimizer."""
    return sq.synthetic_quadratic(4, 20, seed=7, condition=50, interpolation=True)


@pytest.fixture(scope="session")
def quad_heterogeneous():
    """Non-interpolation quadratic: worker optima disagree."""
    return sq.synthetic_quadratic(
        4, 20, seed=7, condition=50, interpolation=False, center_spread=1.0
    )


@pytest.fixture(scope="session")
def logistic_shards():
    """Synthetic 500x30 logistic task split across 6 workers by row norm."""
    data = sq.synthetic_logistic(500, 30, seed=11, skew=2.0)
    shards = sq.heterogeneous_split(data, 6)
    problems = [sq.LogisticProblem(s.rows, s.labels, 1e-3) for s in shards]
    reference = sq.reference_solution(problems, 1e-3)
    return problems, reference
