"""Exact O(n^2) t-SNE producing the 2D space in which labels propagate.

Gaussian affinities are calibrated per row by bisection on the kernel
precision until the row's effective neighbor count (2^entropy) hits the
target perplexity. The embedding minimizes KL(P||Q) with a Student-t
kernel in 2D by plain gradient descent with the classic momentum schedule
(0.5 before iteration 250, 0.8 after) and early exaggeration of P during
the first 250 iterations.

All internal arithmetic is float64 regardless of input dtype so the
finite-difference gradient checks hold at tight tolerances.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateRowError, DimensionError, DivergenceError, SpecError

# Iteration at which early exaggeration ends and momentum switches 0.5 -> 0.8.
SCHEDULE_SWITCH = 250

P_FLOOR = 1e-12
_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class TsneParams:
    """Projection hyper-parameters; defaults follow standard exact t-SNE practice."""

    perplexity: float = 30.0
    iterations: int = 1000
    early_exaggeration_factor: float = 12.0
    learning_rate: float = 200.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    perplexity_tolerance: float = 1e-5
    max_bisection_steps: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.perplexity <= 0 or not np.isfinite(self.perplexity):
            raise SpecError("perplexity must be positive and finite")
        if self.iterations < 1:
            raise SpecError("iterations must be >= 1")
        for name in ("early_exaggeration_factor", "learning_rate",
                     "perplexity_tolerance"):
            if getattr(self, name) <= 0 or not np.isfinite(getattr(self, name)):
                raise SpecError(f"{name} must be positive and finite")
        if self.max_bisection_steps < 1:
            raise SpecError("max_bisection_steps must be >= 1")

    def effective_perplexity(self, n: int) -> float:
        """Target perplexity clamped to (n - 1) / 3."""
        return min(self.perplexity, (n - 1) / 3.0)


def pairwise_sq_distances(x: np.ndarray) -> np.ndarray:
    """Symmetric matrix of squared Euclidean distances with a zero diagonal.

    Computed from coordinate differences (not the expanded dot-product form),
    so the result is exactly invariant under any translation that keeps the
    coordinates exactly representable.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError("feature matrix must be 2-D")
    if not np.isfinite(x).all():
        raise DimensionError("feature matrix contains non-finite values")
    return cdist(x, x, "sqeuclidean")


def calibrate_perplexity(d_sq: np.ndarray, params: TsneParams) -> np.ndarray:
    """Row-stochastic conditional probabilities p(j|i) at the target perplexity.

    Each row gets its own Gaussian precision beta, bisected (after an
    exponential bracketing phase) until |2^H(row) - perplexity| falls within
    ``perplexity_tolerance`` or ``max_bisection_steps`` is exhausted.
    """
    d_sq = np.asarray(d_sq, dtype=np.float64)
    n = d_sq.shape[0]
    if d_sq.shape != (n, n):
        raise DimensionError("distance matrix must be square")
    if n < 2:
        raise DimensionError("need at least two samples")
    if params.perplexity >= n:
        raise SpecError(f"perplexity {params.perplexity} must be < n = {n}")
    target = params.perplexity
    log_target = np.log2(target)

    p_cond = np.zeros((n, n), dtype=np.float64)
    off_diag = ~np.eye(n, dtype=bool)
    for i in range(n):
        row_d = d_sq[i, off_diag[i]]
        if np.all(row_d == 0.0):
            raise DegenerateRowError(
                f"sample {i} is at distance zero from every other sample"
            )
        # shifting by the row minimum keeps the largest kernel value at 1,
        # so extreme betas can never underflow an entire row
        row_d = row_d - row_d.min()
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        row_p = None
        for _ in range(params.max_bisection_steps):
            row_p = np.exp(-row_d * beta)
            row_p /= row_p.sum()
            # entropy in bits; 2^H is the achieved perplexity
            nz = row_p > 0
            entropy = -np.dot(row_p[nz], np.log2(row_p[nz]))
            if abs(2.0 ** entropy - target) <= params.perplexity_tolerance:
                break
            if entropy > log_target:
                # too many effective neighbors: sharpen the kernel
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
        p_cond[i, off_diag[i]] = row_p
    return p_cond


def symmetrize(p_cond: np.ndarray) -> np.ndarray:
    """Joint affinities P = (P_cond + P_cond^T) / 2n, floored and renormalized.

    Off-diagonal entries are floored at 1e-12 so sparse rows cannot drive the
    KL objective to -inf; the matrix is then rescaled to sum exactly to 1.
    """
    p_cond = np.asarray(p_cond, dtype=np.float64)
    n = p_cond.shape[0]
    row_sums = p_cond.sum(axis=1)
    if not np.allclose(row_sums, 1.0, atol=1e-6):
        raise DimensionError("conditional probability rows must sum to 1")
    p = (p_cond + p_cond.T) / (2.0 * n)
    off_diag = ~np.eye(n, dtype=bool)
    p[off_diag] = np.maximum(p[off_diag], P_FLOOR)
    np.fill_diagonal(p, 0.0)
    return p / p.sum()


def _student_t_weights(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized Student-t kernel W and normalized Q over i != j."""
    w = 1.0 / (1.0 + cdist(y, y, "sqeuclidean"))
    np.fill_diagonal(w, 0.0)
    q = np.maximum(w / w.sum(), _EPS)
    return w, q


def kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    """KL(P||Q) with Q the normalized Student-t kernel of the embedding."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _, q = _student_t_weights(y)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_gradient(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of kl_divergence with respect to the embedding.

    grad_i = 4 * sum_j (P_ij - Q_ij) * W_ij * (y_i - y_j), with W the
    unnormalized kernel. Uses einsum rather than BLAS so the reduction
    order (and therefore the bits) never depends on thread count.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w, q = _student_t_weights(y)
    m = (p - q) * w
    row = m.sum(axis=1)
    return 4.0 * (row[:, None] * y - np.einsum("ij,jk->ik", m, y))


def tsne_embed(
    x: np.ndarray,
    params: TsneParams,
    loss_trace: list[float] | None = None,
) -> np.ndarray:
    """Project rows of ``x`` to 2D; deterministic for fixed (x, params).

    The embedding starts from a seeded Gaussian (sigma = 1e-4) and follows
    ``params.iterations`` steps of momentum gradient descent. When
    ``loss_trace`` is given, the true (un-exaggerated) KL value after every
    iteration is appended to it.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 4:
        raise DimensionError("t-SNE needs at least 4 samples")
    calibrated = replace(params, perplexity=params.effective_perplexity(n))
    p = symmetrize(calibrate_perplexity(pairwise_sq_distances(x), calibrated))

    rng = np.random.default_rng(params.seed)
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(y)
    for it in range(params.iterations):
        exaggerate = it < SCHEDULE_SWITCH
        p_eff = p * params.early_exaggeration_factor if exaggerate else p
        momentum = params.momentum_early if exaggerate else params.momentum_late

        w, q = _student_t_weights(y)
        m = (p_eff - q) * w
        row = m.sum(axis=1)
        grad = 4.0 * (row[:, None] * y - np.einsum("ij,jk->ik", m, y))

        mask = p > 0
        kl = float(np.sum(p[mask] * np.log(p[mask] / q[mask])))
        if not np.isfinite(kl) or not np.isfinite(grad).all():
            raise DivergenceError(f"non-finite loss at iteration {it}")
        if loss_trace is not None:
            loss_trace.append(kl)

        velocity = momentum * velocity - params.learning_rate * grad
        y = y + velocity
    return y


def write_embedding_csv(path: str | Path, ids, y: np.ndarray) -> None:
    """Embedding export: CSV ``id,y0,y1``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "y0", "y1"])
        for sid, (y0, y1) in zip(ids, y):
            writer.writerow([sid, repr(float(y0)), repr(float(y1))])


def write_loss_trace_csv(path: str | Path, trace: list[float]) -> None:
    """Loss trace export: CSV ``iteration,kl`` (iterations are 1-based)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "kl"])
        for it, kl in enumerate(trace, start=1):
            writer.writerow([it, repr(float(kl))])
