"""Datasets, worker losses and reference solutions.

Rows are dense, affinely rescaled per column into [-1, 1]; labels live
in {-1, +1}.  Workers are deliberately heterogeneous: rows are sorted
by norm and split into contiguous shards, so shard smoothness factors
differ and smoothness-aware compression has something to exploit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import (
    IndexZero,
    MalformedLine,
    NoConvergence,
    NonfiniteGradient,
    NonNumericValue,
    OutOfRange,
    TooFewRows,
)
from .smoothness import SmoothnessFactor, build_factor, glm_smoothness, global_factor


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix in [-1, 1] with labels in {-1, +1}."""

    rows: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise TooFewRows("dataset needs at least one row")
        if labels.shape != (rows.shape[0],):
            raise OutOfRange("need exactly one label per row")
        if np.abs(rows).max() > 1 + 1e-12:
            raise OutOfRange("feature entries must lie in [-1, 1]")
        if not np.all(np.abs(labels) == 1):
            raise OutOfRange("labels must be -1 or +1")
        rows.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class ReferenceSolution:
    """High-precision minimizer used for error reporting."""

    x_star: np.ndarray
    f_star: float
    grad_norm: float


def rescale_columns(rows: np.ndarray) -> np.ndarray:
    """Affine per-column map onto [-1, 1]; constant columns become zero.

    Columns already spanning exactly [-1, 1] are left untouched, which
    makes the map idempotent bit for bit.
    """
    rows = np.array(rows, dtype=float)
    for j in range(rows.shape[1]):
        col = rows[:, j]
        lo, hi = col.min(), col.max()
        if lo == hi:
            rows[:, j] = 0.0
        elif lo != -1.0 or hi != 1.0:
            rows[:, j] = 2.0 * (col - lo) / (hi - lo) - 1.0
    return rows


def parse_libsvm(text: str | bytes, dim_hint: int | None = None) -> Dataset:
    """Parse LibSVM-format text: `<label> <index>:<value> ...` per line.

    Indices are 1-based; missing entries are zero.  Labels are mapped to
    {-1, +1} (anything positive becomes +1).  Features are rescaled per
    column after parsing.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    entries = []
    labels = []
    max_index = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        try:
            raw_label = float(tokens[0])
        except ValueError:
            raise NonNumericValue(f"line {lineno}: label {tokens[0]!r} is not a number")
        pairs = {}
        for token in tokens[1:]:
            head, sep, tail = token.partition(":")
            if not sep or not tail:
                raise MalformedLine(f"line {lineno}: expected index:value, got {token!r}")
            try:
                index = int(head)
            except ValueError:
                raise MalformedLine(f"line {lineno}: index {head!r} is not an integer")
            if index == 0:
                raise IndexZero(f"line {lineno}: feature indices are 1-based")
            if index < 0:
                raise MalformedLine(f"line {lineno}: negative feature index {index}")
            try:
                value = float(tail)
            except ValueError:
                raise NonNumericValue(f"line {lineno}: value {tail!r} is not a number")
            pairs[index] = value
            max_index = max(max_index, index)
        labels.append(1.0 if raw_label > 0 else -1.0)
        entries.append(pairs)

    if not entries:
        raise TooFewRows("no data rows found")
    dim = dim_hint if dim_hint is not None else max_index
    if dim < max_index:
        raise MalformedLine(f"feature index {max_index} exceeds dim_hint {dim_hint}")
    if dim == 0:
        raise MalformedLine("no feature indices found and no dim_hint given")
    rows = np.zeros((len(entries), dim))
    for i, pairs in enumerate(entries):
        for index, value in pairs.items():
            rows[i, index - 1] = value
    return Dataset(rows=rescale_columns(rows), labels=np.asarray(labels))


def emit_libsvm(dataset: Dataset) -> str:
    """Inverse of parse_libsvm on already-rescaled data (zeros omitted)."""
    lines = []
    for row, label in zip(dataset.rows, dataset.labels):
        parts = [f"{int(label):d}"]
        # repr of a builtin float is the shortest string that parses back
        # to the same bits; numpy scalar reprs do not parse at all.
        parts += [
            f"{j + 1}:{float(value)!r}" for j, value in enumerate(row) if value != 0.0
        ]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def heterogeneous_split(dataset: Dataset, n: int) -> list[Dataset]:
    """Sort rows by norm (ascending) and cut into n contiguous shards.

    The first m mod n shards get the extra row.  Sorting concentrates
    small-norm and large-norm rows on different workers, which is what
    drives the smoothness heterogeneity across shards.
    """
    if n < 1:
        raise OutOfRange(f"need at least one shard, got n={n}")
    if dataset.m < n:
        raise TooFewRows(f"cannot split {dataset.m} rows into {n} shards")
    order = np.argsort(np.linalg.norm(dataset.rows, axis=1), kind="stable")
    rows, labels = dataset.rows[order], dataset.labels[order]
    base, extra = divmod(dataset.m, n)
    shards = []
    start = 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        shards.append(Dataset(rows=rows[start : start + size], labels=labels[start : start + size]))
        start += size
    return shards


class LogisticProblem:
    """l2-regularized logistic loss over one shard.

    f(x) = (1/m) sum log(1 + exp(-b_t a_t' x)) + (l2 / 2) ||x||^2
    """

    def __init__(self, rows: np.ndarray, labels: np.ndarray, l2: float):
        if l2 < 0:
            raise OutOfRange("l2 regularization must be nonnegative")
        self.rows = np.asarray(rows, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        if self.rows.shape[0] == 0:
            raise TooFewRows("worker shard is empty")
        self.l2 = float(l2)
        self._factor: SmoothnessFactor | None = None

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @property
    def mu(self) -> float:
        return self.l2

    @property
    def factor(self) -> SmoothnessFactor:
        if self._factor is None:
            self._factor = glm_smoothness(self.rows, self.l2)
        return self._factor

    @property
    def grad_cost(self) -> float:
        return 4.0 * self.rows.shape[0] * self.rows.shape[1]

    def loss(self, x: np.ndarray) -> float:
        margins = self.labels * (self.rows @ x)
        value = float(np.mean(np.logaddexp(0.0, -margins)))
        return value + 0.5 * self.l2 * float(x @ x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        margins = self.labels * (self.rows @ x)
        weights = -self.labels * expit(-margins)
        return self.rows.T @ weights / self.rows.shape[0] + self.l2 * x


class QuadraticProblem:
    """f(x) = 0.5 (x - c)' M (x - c); its tight smoothness factor is M."""

    def __init__(self, matrix: np.ndarray, center: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=float)
        self.center = np.asarray(center, dtype=float)
        self._factor: SmoothnessFactor | None = None

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def factor(self) -> SmoothnessFactor:
        if self._factor is None:
            self._factor = build_factor(self.matrix)
        return self._factor

    @property
    def grad_cost(self) -> float:
        return 2.0 * self.dim * self.dim

    def loss(self, x: np.ndarray) -> float:
        shift = x - self.center
        return 0.5 * float(shift @ (self.matrix @ shift))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ (x - self.center)


def synthetic_logistic(m: int, d: int, seed: int, skew: float = 1.0) -> Dataset:
    """Random classification data with lognormal row-norm spread.

    Larger skew concentrates the feature mass on a few dominant rows, so
    after the sorted split the worker factors become strongly anisotropic
    (large lambda_max / lambda_min), which smoothness-aware steps exploit.
    """
    if m < 1 or d < 1:
        raise TooFewRows(f"need positive m and d, got {m}x{d}")
    rng = np.random.default_rng(seed)
    planted = rng.normal(size=d) / np.sqrt(d)
    raw = rng.uniform(-1.0, 1.0, size=(m, d))
    scales = np.exp(skew * rng.normal(size=m))
    raw *= (scales / scales.max())[:, None]
    margins = raw @ planted + 0.1 * rng.normal(size=m)
    labels = np.where(margins > 0, 1.0, -1.0)
    return Dataset(rows=rescale_columns(raw), labels=labels)


def synthetic_quadratic(
    n: int,
    d: int,
    seed: int,
    condition: float,
    interpolation: bool = True,
    center_spread: float = 1.0,
) -> tuple[list[QuadraticProblem], ReferenceSolution]:
    """n random quadratics with per-worker condition number `condition`.

    With interpolation=True every worker shares the planted minimizer
    (all gradients vanish there); otherwise the centers are spread out
    and the exact average minimizer is returned.
    """
    if condition < 1:
        raise OutOfRange(f"condition number must be >= 1, got {condition}")
    rng = np.random.default_rng(seed)
    planted = rng.normal(size=d)
    matrices = []
    centers = []
    for _ in range(n):
        basis, _ = np.linalg.qr(rng.normal(size=(d, d)))
        scale = rng.uniform(0.5, 2.0)
        eigvals = np.geomspace(scale / condition, scale, d)
        matrix = (basis * eigvals) @ basis.T
        matrices.append(0.5 * (matrix + matrix.T))
        if interpolation:
            centers.append(planted)
        else:
            centers.append(planted + center_spread * rng.normal(size=d))

    problems = [QuadraticProblem(mat, cen) for mat, cen in zip(matrices, centers)]
    if interpolation:
        reference = ReferenceSolution(x_star=planted, f_star=0.0, grad_norm=0.0)
    else:
        mean_mat = sum(matrices) / n
        mean_rhs = sum(mat @ cen for mat, cen in zip(matrices, centers)) / n
        x_star = np.linalg.solve(mean_mat, mean_rhs)
        f_star = float(np.mean([p.loss(x_star) for p in problems]))
        grad = np.mean([p.grad(x_star) for p in problems], axis=0)
        reference = ReferenceSolution(
            x_star=x_star, f_star=f_star, grad_norm=float(np.linalg.norm(grad))
        )
    return problems, reference


def make_prox(kind: str = "none", weight: float = 0.0):
    """Proximal map of the composite term: identity or l1 soft threshold."""
    if kind == "none":
        return lambda z, gamma: z
    if kind == "l1":
        if weight < 0:
            raise OutOfRange("l1 weight must be nonnegative")
        return lambda z, gamma: np.sign(z) * np.maximum(np.abs(z) - gamma * weight, 0.0)
    raise OutOfRange(f"unknown prox kind {kind!r}")


def reference_solution(
    problems: list,
    l2: float,
    tol: float = 1e-12,
    x0: np.ndarray | None = None,
    max_iter: int = 10_000_000,
    prox=None,
) -> ReferenceSolution:
    """Proximal gradient descent with step 1/L to machine-level accuracy.

    Stops when the gradient mapping norm drops below tol * (1 + ||x||);
    raises NoConvergence if the iteration cap is hit first.
    """
    lips = global_factor([p.factor for p in problems]).lambda_max
    if lips <= 0:
        raise NoConvergence("objective has zero curvature; nothing to solve")
    gamma = 1.0 / lips
    step_prox = prox if prox is not None else make_prox()
    x = np.zeros(problems[0].dim) if x0 is None else np.asarray(x0, dtype=float).copy()

    for _ in range(max_iter):
        grad = np.mean([p.grad(x) for p in problems], axis=0)
        if not np.all(np.isfinite(grad)):
            raise NonfiniteGradient("gradient overflowed during reference solve")
        x_next = step_prox(x - gamma * grad, gamma)
        residual = float(np.linalg.norm(x - x_next)) / gamma
        x = x_next
        if residual <= tol * (1.0 + float(np.linalg.norm(x))):
            f_star = float(np.mean([p.loss(x) for p in problems]))
            return ReferenceSolution(x_star=x, f_star=f_star, grad_norm=residual)
    raise NoConvergence(f"no solution to tolerance {tol} within {max_iter} iterations")


def bregman(problem, x: np.ndarray, y: np.ndarray) -> float:
    """Bregman divergence D_f(x, y) = f(x) - f(y) - <grad f(y), x - y>."""
    return float(problem.loss(x) - problem.loss(y) - problem.grad(y) @ (x - y))
