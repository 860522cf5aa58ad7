"""Regularization grids and generalized cross-validation for the SCAD fits.

Grids have the form ``delta * (sigma_hat / sqrt(n)) * scale(n)`` over a fixed
set of multipliers. The scale factor controls how fast sqrt(n) * lambda grows
with n: ``log_ratio`` gives log(n)/log(60) growth, ``pow10`` and ``pow4`` give
polynomial growth, and ``unit`` keeps sqrt(n) * lambda constant, which turns
the zero-finding behavior off asymptotically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import FitResult, _cd_batch, _check_gram, _lqa_batch, _masked_ridge_matrix, gram_bundle, sparsity_pattern
from .penalties import _derivative_raw

DEFAULT_DELTAS = (0.9, 1.1, 1.3, 1.5, 1.7, 1.9, 2.0)

SCALES = ("log_ratio", "pow10", "pow4", "unit")


@dataclass(frozen=True)
class LambdaRule:
    """Multiplier set plus sample-size scaling for the lambda grid."""

    delta_set: tuple[float, ...] = DEFAULT_DELTAS
    scale: str = "log_ratio"

    def __post_init__(self) -> None:
        if len(self.delta_set) == 0:
            raise ValueError("delta_set must be nonempty")
        if any(d < 0 for d in self.delta_set):
            raise ValueError("delta multipliers must be nonnegative")
        if self.scale not in SCALES:
            raise ValueError(f"scale must be one of {SCALES}")
        object.__setattr__(self, "delta_set", tuple(sorted(self.delta_set)))

    def scale_factor(self, n: int) -> float:
        if self.scale == "log_ratio":
            return float(np.log(n) / np.log(60.0))
        if self.scale == "pow10":
            return float((n / 60.0) ** 0.1)
        if self.scale == "pow4":
            return float((n / 60.0) ** 0.25)
        return 1.0


def sigma_hat(X: np.ndarray, y: np.ndarray) -> float:
    """Unbiased residual standard deviation from the full least-squares fit."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if n <= k:
        raise ValueError("sigma_hat needs n > k")
    G, b, _ = gram_bundle(X, y)
    _check_gram(G)
    theta = np.linalg.solve(G, b)
    rss = float(np.sum((y - X @ theta) ** 2))
    return float(np.sqrt(max(rss, 0.0) / (n - k)))


def lambda_grid(rule: LambdaRule, n: int, sigma_hat: float) -> np.ndarray:
    """Ascending grid {delta * (sigma_hat / sqrt(n)) * scale(n)}."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if sigma_hat < 0:
        raise ValueError("sigma_hat must be nonnegative")
    base = sigma_hat / np.sqrt(n) * rule.scale_factor(n)
    return np.sort(np.asarray(rule.delta_set, dtype=float) * base)


def _gcv_df_batch(G, theta, lam, a, n):
    """Effective parameter count trace[X_A (X_A'X_A + n D)^-1 X_A'] per problem."""
    act = theta != 0.0
    absth = np.abs(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(act, _derivative_raw(absth, lam[:, None], a) / absth, 0.0)
    d = np.nan_to_num(d, nan=0.0, posinf=0.0)
    M = _masked_ridge_matrix(G, act, n * d)
    outer = act[:, :, None] & act[:, None, :]
    target = np.where(outer, G, 0.0)
    Z = np.linalg.solve(M, target)
    k = G.shape[-1]
    return Z[:, np.arange(k), np.arange(k)].sum(axis=1)


def _scad_gcv_batch(G, b, yty, n, grids, a, solver, tol, max_iter):
    """Fit every lambda in each problem's grid and keep the GCV minimizer.

    ``grids`` is (problems, grid size) with rows sorted ascending; ties go to
    the smaller lambda. Returns per-problem (theta, lambda, iterations,
    converged, gcv curve).
    """
    B, L = grids.shape
    k = b.shape[1]
    Gf = np.repeat(G, L, axis=0)
    bf = np.repeat(b, L, axis=0)
    lamf = grids.reshape(-1)
    fit = _lqa_batch if solver == "lqa" else _cd_batch
    thetaf, itersf, convf = fit(Gf, bf, n, lamf, a, tol, max_iter)

    df = _gcv_df_batch(Gf, thetaf, lamf, a, n)
    rssf = (
        np.repeat(yty, L)
        - 2.0 * np.einsum("pi,pi->p", thetaf, bf)
        + np.einsum("pi,pij,pj->p", thetaf, Gf, thetaf)
    )
    gcv = (rssf / n) / (1.0 - df / n) ** 2
    gcv = gcv.reshape(B, L)

    pick = np.argmin(gcv, axis=1)
    rows = np.arange(B)
    theta = thetaf.reshape(B, L, k)[rows, pick]
    lam = grids[rows, pick]
    iters = itersf.reshape(B, L)[rows, pick]
    conv = convf.reshape(B, L)[rows, pick]
    return theta, lam, iters, conv, gcv


def gcv_select(
    X: np.ndarray,
    y: np.ndarray,
    grid,
    a: float = 3.7,
    solver: str = "lqa",
    tol: float = 1e-8,
    max_iter: int = 100,
) -> tuple[float, FitResult]:
    """Pick lambda from ``grid`` by generalized cross-validation.

    GCV(lambda) = [RSS(lambda)/n] / (1 - e(lambda)/n)**2 with the effective
    parameter count e computed on the active coordinates of the fit. Returns
    the minimizing lambda and its fit; non-convergence of individual fits is
    carried through FitResult.converged instead of raised.
    """
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("lambda grid must be nonempty")
    if solver not in ("lqa", "cd"):
        raise ValueError("solver must be 'lqa' or 'cd'")
    G, b, yty = gram_bundle(X, y)
    _check_gram(G)
    n = X.shape[0]
    theta, lam, iters, conv, _ = _scad_gcv_batch(
        G[None], b[None], np.array([yty]), n, grid[None], a, solver, tol, max_iter
    )
    result = FitResult(
        theta_hat=theta[0],
        pattern=sparsity_pattern(theta[0]),
        lambda_used=float(lam[0]),
        iterations=int(iters[0]),
        converged=bool(conv[0]),
    )
    return float(lam[0]), result
