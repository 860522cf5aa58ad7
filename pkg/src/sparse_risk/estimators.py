"""Least squares, SCAD solvers, thresholding rules, and subset selection.

The two SCAD solvers minimize

    0.5 * sum_t (y_t - x_t' theta)**2 + n * sum_i penalty(|theta_i|)

and produce exact zeros: the quadratic-reweighting solver deletes coordinates
whose magnitude drops below ``zero_tol`` and pins them to zero, mirroring the
standard deletion practice for this algorithm; coordinate descent zeroes
through the exact scalar minimizer. Batched variants (leading axis = problem)
drive the Monte Carlo engine and run the same arithmetic as the single-problem
functions, so both paths give identical results.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np

from .penalties import ScadParams, _derivative_raw, scad_univariate_min_weighted

ZERO_TOL = 1e-8

ESTIMATOR_KINDS = ("ls", "scad", "hard_threshold", "hodges", "bic", "zero")


class SingularDesignError(ValueError):
    """Raised when the design matrix is rank deficient."""


@dataclass(frozen=True)
class SparsityPattern:
    """Binary indicator of exactly-nonzero coefficients."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=np.int8))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparsityPattern):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(
            np.all(self.bits == other.bits)
        )

    def __le__(self, other: "SparsityPattern") -> bool:
        """Componentwise: nonzero here only where ``other`` is nonzero."""
        return bool(np.all(self.bits <= other.bits))

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())

    @property
    def all_zero(self) -> bool:
        return bool(np.all(self.bits == 0))

    def count(self) -> int:
        return int(self.bits.sum())


def sparsity_pattern(theta: np.ndarray) -> SparsityPattern:
    """Exact componentwise zero indicator (1 where the coefficient is nonzero)."""
    theta = np.asarray(theta, dtype=float)
    return SparsityPattern((theta != 0.0).astype(np.int8))


@dataclass(frozen=True)
class EstimatorConfig:
    """Which estimator to run inside the Monte Carlo engine.

    ``lambda_rule`` (a tuning.LambdaRule) is required for kind "scad" and
    ignored otherwise. ``zero`` is the degenerate always-zero stub used by
    risk diagnostics.
    """

    kind: str
    label: str | None = None
    a: float = 3.7
    solver: str = "lqa"
    lambda_rule: Any = None
    exponent: float = 0.25
    tol: float = 1e-8
    max_iter: int = 100

    def __post_init__(self) -> None:
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "scad":
            if not self.a > 2:
                raise ValueError("scad shape parameter must exceed 2")
            if self.solver not in ("lqa", "cd"):
                raise ValueError("scad solver must be 'lqa' or 'cd'")
            if self.lambda_rule is None:
                raise ValueError("scad estimator needs a lambda_rule")
        if self.kind == "hard_threshold" and not 0 < self.exponent < 0.5:
            raise ValueError("hard-threshold exponent must lie in (0, 1/2)")
        if self.label is None:
            object.__setattr__(self, "label", self.kind)


@dataclass(frozen=True)
class FitResult:
    theta_hat: np.ndarray
    pattern: SparsityPattern
    lambda_used: float
    iterations: int
    converged: bool


# ---------------------------------------------------------------------------
# Gram-matrix plumbing shared by the public fits and the batched engine
# ---------------------------------------------------------------------------

def gram_bundle(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be n-by-k and y length n")
    return X.T @ X, X.T @ y, float(y @ y)


def _check_gram(G: np.ndarray) -> None:
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise SingularDesignError("design matrix is rank deficient")


def solve_vec(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Batched linear solve with a stacked vector right-hand side."""
    return np.linalg.solve(A, v[..., None])[..., 0]


def _masked_ridge_matrix(G, act, ridge) -> np.ndarray:
    """Per-problem system with inactive rows replaced by the identity.

    ``G``: (P, k, k); ``act``: (P, k) bool; ``ridge``: (P, k) nonnegative,
    zero on inactive coordinates. Solving against ``b * act`` reproduces the
    reduced active-set system and returns exact zeros elsewhere.
    """
    outer = act[:, :, None] & act[:, None, :]
    M = np.where(outer, G, 0.0)
    k = G.shape[-1]
    idx = np.arange(k)
    M[:, idx, idx] += ridge + (~act)
    return M


def _lqa_batch(G, b, n, lam, a, tol, max_iter, zero_tol=ZERO_TOL):
    """Iteratively reweighted ridge from the least-squares start.

    Each problem iterates theta <- (G_A + n * D)^-1 b_A on its active set,
    with D = diag(penalty'(|theta_j|) / |theta_j|), deleting coordinates whose
    magnitude falls below ``zero_tol``. Problems freeze once their max-norm
    step drops below ``tol``, so batch results match one-at-a-time runs.
    """
    P, k = b.shape
    theta = solve_vec(G, b)
    active = np.ones((P, k), dtype=bool)
    done = np.zeros(P, dtype=bool)
    converged = np.zeros(P, dtype=bool)
    iterations = np.zeros(P, dtype=np.int64)
    idx_all = np.arange(P)

    for it in range(1, max_iter + 1):
        live = idx_all[~done]
        if live.size == 0:
            break
        th = theta[live]
        act = active[live]
        act &= np.abs(th) >= zero_tol
        th = th * act

        absth = np.abs(th)
        lam_l = lam[live, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(act, _derivative_raw(absth, lam_l, a) / absth, 0.0)
        d = np.nan_to_num(d, nan=0.0, posinf=0.0)

        M = _masked_ridge_matrix(G[live], act, n * d)
        new = solve_vec(M, b[live] * act) * act
        step = np.max(np.abs(new - theta[live]), axis=1)

        theta[live] = new
        active[live] = act
        iterations[live] = it
        hit = step < tol
        converged[live] = hit
        done[live] = hit

    small = np.abs(theta) < zero_tol
    theta[small] = 0.0
    return theta, iterations, converged


def _cd_batch(G, b, n, lam, a, tol, max_iter, zero_tol=ZERO_TOL):
    """Cyclic coordinate descent with the exact weighted scalar minimizer.

    Coordinates are visited in index order; each update solves the scalar
    problem for the partial residual with penalty weight n / G_jj, so the
    objective never increases within a sweep. ``max_iter`` counts sweeps.
    """
    P, k = b.shape
    theta = solve_vec(G, b)
    gth = np.einsum("pij,pj->pi", G, theta)
    done = np.zeros(P, dtype=bool)
    converged = np.zeros(P, dtype=bool)
    iterations = np.zeros(P, dtype=np.int64)

    for sweep in range(1, max_iter + 1):
        if done.all():
            break
        sweep_step = np.zeros(P)
        for j in range(k):
            gjj = G[:, j, j]
            u = (b[:, j] - gth[:, j]) / gjj + theta[:, j]
            t = scad_univariate_min_weighted(u, lam, a, n / gjj)
            delta = np.where(done, 0.0, t - theta[:, j])
            changed = delta != 0.0
            if changed.any():
                gth[changed] += G[changed, :, j] * delta[changed, None]
                theta[:, j] += delta
            sweep_step = np.maximum(sweep_step, np.abs(delta))
        iterations[~done] = sweep
        hit = ~done & (sweep_step < tol)
        converged[hit] = True
        done |= hit

    small = np.abs(theta) < zero_tol
    theta[small] = 0.0
    return theta, iterations, converged


def _single_fit(theta, lam, iters, conv) -> FitResult:
    theta = theta[0]
    return FitResult(
        theta_hat=theta,
        pattern=sparsity_pattern(theta),
        lambda_used=float(lam),
        iterations=int(iters[0]),
        converged=bool(conv[0]),
    )


# ---------------------------------------------------------------------------
# Public fitting operations
# ---------------------------------------------------------------------------

def fit_least_squares(X: np.ndarray, y: np.ndarray) -> FitResult:
    """Ordinary least squares via the normal equations; requires full column rank."""
    G, b, _ = gram_bundle(X, y)
    _check_gram(G)
    theta = np.linalg.solve(G, b)
    return FitResult(theta, sparsity_pattern(theta), 0.0, 0, True)


def fit_scad_lqa(
    X: np.ndarray,
    y: np.ndarray,
    p: ScadParams,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> FitResult:
    """SCAD fit by iterated local quadratic reweighting with coordinate deletion.

    Starts at the full least-squares fit; non-convergence within ``max_iter``
    is reported through ``FitResult.converged`` rather than raised.
    """
    G, b, _ = gram_bundle(X, y)
    _check_gram(G)
    n = X.shape[0]
    theta, iters, conv = _lqa_batch(
        G[None], b[None], n, np.array([p.lam]), p.a, tol, max_iter
    )
    return _single_fit(theta, p.lam, iters, conv)


def fit_scad_cd(
    X: np.ndarray,
    y: np.ndarray,
    p: ScadParams,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> FitResult:
    """SCAD fit by cyclic coordinate descent on partial residuals."""
    G, b, _ = gram_bundle(X, y)
    _check_gram(G)
    n = X.shape[0]
    theta, iters, conv = _cd_batch(
        G[None], b[None], n, np.array([p.lam]), p.a, tol, max_iter
    )
    return _single_fit(theta, p.lam, iters, conv)


def fit_hard_threshold(X: np.ndarray, y: np.ndarray, exponent: float = 0.25) -> FitResult:
    """Componentwise hard thresholding of the least-squares fit.

    Coordinate j is zeroed iff |theta_ls_j| <= n**(1/2 - exponent) * se_j,
    where se_j is the usual standard error from the full fit. For a scalar
    intercept-only design this reduces to zeroing the sample mean when it does
    not exceed sigma_hat * n**(-exponent).
    """
    if not 0 < exponent < 0.5:
        raise ValueError("exponent must lie in (0, 1/2)")
    G, b, yty = gram_bundle(X, y)
    _check_gram(G)
    n, k = X.shape
    if n <= k:
        raise ValueError("hard thresholding needs n > k for the error variance")
    theta_ls = np.linalg.solve(G, b)
    rss = float(np.sum((y - X @ theta_ls) ** 2))
    sigma = np.sqrt(max(rss, 0.0) / (n - k))
    se = sigma * np.sqrt(np.diag(np.linalg.inv(G)))
    cut = n ** (0.5 - exponent) * se
    theta = np.where(np.abs(theta_ls) > cut, theta_ls, 0.0)
    return FitResult(theta, sparsity_pattern(theta), 0.0, 0, True)


def hodges_scalar(ybar: float, n: int) -> float:
    """Sample mean thresholded to zero unless |ybar| strictly exceeds n**(-1/4)."""
    if n < 1:
        raise ValueError("n must be positive")
    return float(ybar) if abs(ybar) > n ** (-0.25) else 0.0


@lru_cache(maxsize=8)
def _bic_patterns(k: int) -> tuple[np.ndarray, np.ndarray]:
    """All zero patterns ordered by size then lexicographically by bits."""
    masks = []
    for m in range(2**k):
        bits = tuple((m >> i) & 1 for i in range(k))
        masks.append((sum(bits), bits))
    masks.sort()
    bits = np.array([m[1] for m in masks], dtype=bool)
    sizes = np.array([m[0] for m in masks], dtype=np.int64)
    return bits, sizes


def _bic_batch(G, b, yty, n):
    """Best zero pattern by BIC over all subsets, batched over problems.

    Residual sums of squares are floored at a small multiple of y'y so that
    interpolating fits compare by model size instead of rounding noise; ties
    resolve toward the sparser, lexicographically first pattern.
    """
    P, k = b.shape
    patterns, sizes = _bic_patterns(k)
    logn = np.log(n)
    best_bic = np.full(P, np.inf)
    best_theta = np.zeros((P, k))
    floor = np.maximum(yty * 1e-12, 1e-300)
    for pat, size in zip(patterns, sizes):
        act = np.broadcast_to(pat, (P, k))
        if size == 0:
            theta = np.zeros((P, k))
            rss = yty.copy()
        else:
            M = _masked_ridge_matrix(G, act.copy(), np.zeros((P, k)))
            theta = solve_vec(M, b * act) * act
            rss = yty - np.einsum("pi,pi->p", b, theta)
        rss = np.maximum(rss, floor)
        bic = n * np.log(rss / n) + logn * size
        better = bic < best_bic
        best_bic = np.where(better, bic, best_bic)
        best_theta[better] = theta[better]
    return best_theta


def fit_bic_select(X: np.ndarray, y: np.ndarray) -> FitResult:
    """All-subsets least squares selected by BIC, refit on the winning pattern."""
    G, b, yty = gram_bundle(X, y)
    _check_gram(G)
    n, k = X.shape
    if k > 20:
        raise ValueError("all-subsets selection is limited to k <= 20")
    theta = _bic_batch(G[None], b[None], np.array([yty]), n)[0]
    return FitResult(theta, sparsity_pattern(theta), 0.0, 2**k, True)
