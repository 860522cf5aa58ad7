"""Loss measures, the replication engine, and risk-report aggregation.

Every replication draws a fresh design and error vector from its own keyed
stream, fits all requested estimators on the same data, and records model
error, squared error, and exact-zero pattern events. Aggregates are relative
to the full-model least-squares fit, which is always computed as the baseline:
the median of per-replication model-error ratios and the ratio of mean squared
errors. Bootstrap standard errors resample replications.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .datagen import (
    DesignSpec,
    ParameterPath,
    RngStream,
    make_theta,
    sample_design,
    sample_errors,
)
from .estimators import EstimatorConfig, _bic_batch, solve_vec
from .tuning import _scad_gcv_batch

BOOTSTRAP_RESAMPLES = 200
FAILURE_FLAG_RATE = 0.01


@dataclass(frozen=True)
class LossSpec:
    """Nonnegative loss on the estimation error.

    kinds: ``scaled_quadratic`` is n * ||theta_hat - theta||^2;
    ``model_error`` weights the error by the regressor covariance;
    ``abs_coordinate`` is |sqrt(n) * error_i|; ``contrast`` is
    (c' sqrt(n) error)^2.
    """

    kind: str
    coordinate: int = 0
    contrast: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("scaled_quadratic", "model_error", "abs_coordinate", "contrast"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "contrast":
            if self.contrast is None:
                raise ValueError("contrast loss needs a weight vector")
            object.__setattr__(
                self, "contrast", np.asarray(self.contrast, dtype=float)
            )

    def evaluate(
        self,
        theta_hat: np.ndarray,
        theta_true: np.ndarray,
        n: int,
        sigma: np.ndarray | None = None,
    ) -> float:
        delta = np.asarray(theta_hat, dtype=float) - np.asarray(theta_true, dtype=float)
        if self.kind == "scaled_quadratic":
            return float(n * delta @ delta)
        if self.kind == "model_error":
            return model_error(theta_hat, theta_true, sigma)
        if self.kind == "abs_coordinate":
            return float(abs(np.sqrt(n) * delta[self.coordinate]))
        return float((self.contrast @ (np.sqrt(n) * delta)) ** 2)


def model_error(theta_hat, theta_true, sigma) -> float:
    """Covariance-weighted quadratic loss (theta_hat - theta)' Sigma (theta_hat - theta)."""
    delta = np.asarray(theta_hat, dtype=float) - np.asarray(theta_true, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (delta.size, delta.size):
        raise ValueError("covariance dimensions do not match the parameter")
    return float(delta @ sigma @ delta)


def ls_mse_closed_form(n: int) -> float:
    """Exact mean squared error of least squares under the 8-regressor AR(0.5)
    Gaussian design with unit error variance: 38 / (3n - 27), defined for n > 9."""
    if n <= 9:
        raise ValueError("mean squared error is finite only for n > 9")
    return 38.0 / (3.0 * n - 27.0)


@dataclass(frozen=True)
class RiskRow:
    setup: str
    n: int
    gamma: float
    estimator: str
    rel_median_me: float
    rel_mse: float
    sparsity_rate: float
    mc_se: float
    replications: int
    master_seed: int
    mc_se_rel_mse: float = 0.0
    mean_sq_err: float = float("nan")
    mean_model_error: float = float("nan")
    allzero_rate: float = 0.0
    failures: int = 0

    CSV_COLUMNS = (
        "setup", "n", "gamma", "estimator", "rel_median_me", "rel_mse",
        "sparsity_rate", "mc_se", "R", "seed",
    )

    def csv_values(self) -> tuple:
        return (
            self.setup, self.n, repr(self.gamma), self.estimator,
            repr(self.rel_median_me), repr(self.rel_mse),
            repr(self.sparsity_rate), repr(self.mc_se),
            self.replications, self.master_seed,
        )


@dataclass
class RiskReport:
    rows: list[RiskRow] = field(default_factory=list)
    master_seed: int = 0
    replications: int = 0

    def extend(self, rows) -> None:
        self.rows.extend(rows)

    def rows_for(self, estimator=None, n=None, gamma=None) -> list[RiskRow]:
        out = self.rows
        if estimator is not None:
            out = [r for r in out if r.estimator == estimator]
        if n is not None:
            out = [r for r in out if r.n == n]
        if gamma is not None:
            out = [r for r in out if r.gamma == gamma]
        return out

    @property
    def estimator_labels(self) -> list[str]:
        seen = dict.fromkeys(r.estimator for r in self.rows)
        return list(seen)

    @property
    def flagged(self) -> bool:
        return any(
            r.failures > FAILURE_FLAG_RATE * r.replications for r in self.rows
        )

    def sorted_rows(self) -> list[RiskRow]:
        return sorted(self.rows, key=lambda r: (r.n, r.gamma, r.estimator))

    def to_csv(self, path) -> None:
        lines = [
            f"# master_seed={self.master_seed} replications={self.replications} "
            f"version={__version__}",
            ",".join(RiskRow.CSV_COLUMNS),
        ]
        for row in self.sorted_rows():
            lines.append(",".join(str(v) for v in row.csv_values()))
        with open(path, "w", encoding="utf8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Replication engine
# ---------------------------------------------------------------------------

def _normalize_estimators(estimators) -> list[EstimatorConfig]:
    configs = list(estimators)
    if not configs:
        raise ValueError("need at least one estimator")
    labels = [c.label for c in configs]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate estimator labels: {labels}")
    return configs


def _draw_grams(design, path, theta_true, master_seed, tag, lo, hi, G, b, yty):
    n = design.n
    for r in range(lo, hi):
        X = sample_design(design, RngStream(master_seed, r, f"design@{tag}"))
        eps = sample_errors(n, RngStream(master_seed, r, f"errors@{tag}"))
        y = X @ theta_true + eps
        G[r] = X.T @ X
        b[r] = X.T @ y
        yty[r] = y @ y


def _fit_block(config, G, b, yty, th_ls, sig, n, k):
    """Batched fit of one estimator over a block of replications."""
    B = b.shape[0]
    lam = np.zeros(B)
    iters = np.zeros(B, dtype=np.int64)
    conv = np.ones(B, dtype=bool)
    if config.kind == "ls":
        return th_ls.copy(), lam, iters, conv
    if config.kind == "zero":
        return np.zeros((B, k)), lam, iters, conv
    if config.kind == "scad":
        if sig is None:
            raise ValueError("scad tuning needs n > k")
        base = config.lambda_rule.scale_factor(n) / np.sqrt(n)
        deltas = np.asarray(config.lambda_rule.delta_set, dtype=float)
        grids = sig[:, None] * (deltas * base)[None, :]
        theta, lam, iters, conv, _ = _scad_gcv_batch(
            G, b, yty, n, grids, config.a, config.solver, config.tol, config.max_iter
        )
        return theta, lam, iters, conv
    if config.kind == "hard_threshold":
        if sig is None:
            raise ValueError("hard thresholding needs n > k")
        eye = np.broadcast_to(np.eye(k), (B, k, k))
        ginv_diag = np.linalg.solve(G, eye)[:, np.arange(k), np.arange(k)]
        se = sig[:, None] * np.sqrt(ginv_diag)
        cut = n ** (0.5 - config.exponent) * se
        theta = np.where(np.abs(th_ls) > cut, th_ls, 0.0)
        return theta, lam, iters, conv
    if config.kind == "bic":
        if k > 20:
            raise ValueError("all-subsets selection is limited to k <= 20")
        return _bic_batch(G, b, yty, n), lam, iters, conv
    if config.kind == "hodges":
        if k != 1:
            raise ValueError("the scalar threshold estimator needs k = 1")
        theta = np.where(np.abs(th_ls) > n ** (-0.25), th_ls, 0.0)
        return theta, lam, iters, conv
    raise ValueError(f"unknown estimator kind {config.kind!r}")


def _bootstrap_se(values, idx) -> float:
    if values.size == 0:
        return float("nan")
    stats = np.median(values[idx], axis=1)
    return float(np.std(stats, ddof=1))


def _bootstrap_se_ratio(num, den, idx) -> float:
    if num.size == 0:
        return float("nan")
    stats = num[idx].mean(axis=1) / den[idx].mean(axis=1)
    return float(np.std(stats, ddof=1))


def run_mc(
    design: DesignSpec,
    path: ParameterPath,
    gamma: float,
    estimators,
    replications: int,
    master_seed: int,
    *,
    threads: int = 1,
    setup: str = "",
    bootstrap_resamples: int = BOOTSTRAP_RESAMPLES,
) -> list[RiskRow]:
    """Monte Carlo risk comparison at one (design, parameter) cell.

    All estimators see identical data within a replication. Estimator
    exceptions are recorded per replication and excluded from the aggregates;
    the failure count is carried on the report row. Output is identical for
    any ``threads`` value.
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    if design.n != path.n or design.k != path.k:
        raise ValueError("design and parameter path disagree on n or k")
    configs = _normalize_estimators(estimators)
    n, k = design.n, design.k
    R = replications
    theta_true = make_theta(path, gamma)
    sigma = design.covariance()
    true_bits = theta_true != 0.0
    tag = f"{setup or 'cell'}/n={n}/gamma={float(gamma)!r}"

    G = np.empty((R, k, k))
    b = np.empty((R, k))
    yty = np.empty(R)

    workers = max(1, int(threads))
    bounds = np.linspace(0, R, workers + 1).astype(int)
    blocks = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    if len(blocks) == 1:
        _draw_grams(design, path, theta_true, master_seed, tag, 0, R, G, b, yty)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _draw_grams, design, path, theta_true, master_seed, tag,
                    lo, hi, G, b, yty,
                )
                for lo, hi in blocks
            ]
            for fut in futures:
                fut.result()

    failed = np.zeros((len(configs), R), dtype=bool)
    theta_all = np.zeros((len(configs), R, k))

    ls_failed = np.zeros(R, dtype=bool)
    th_ls = np.zeros((R, k))
    try:
        th_ls = solve_vec(G, b)
    except np.linalg.LinAlgError:
        for r in range(R):
            try:
                th_ls[r] = np.linalg.solve(G[r], b[r])
            except np.linalg.LinAlgError:
                ls_failed[r] = True
    rss = np.maximum(yty - np.einsum("ri,ri->r", b, th_ls), 0.0)
    sig = np.sqrt(rss / (n - k)) if n > k else None

    def fit_all(ci: int, config: EstimatorConfig, rows: np.ndarray) -> None:
        try:
            theta, _, _, _ = _fit_block(
                config, G[rows], b[rows], yty[rows], th_ls[rows],
                None if sig is None else sig[rows], n, k,
            )
            theta_all[ci, rows] = theta
        except np.linalg.LinAlgError:
            for r in rows:
                try:
                    theta, _, _, _ = _fit_block(
                        config, G[r : r + 1], b[r : r + 1], yty[r : r + 1],
                        th_ls[r : r + 1],
                        None if sig is None else sig[r : r + 1], n, k,
                    )
                    theta_all[ci, r] = theta[0]
                except np.linalg.LinAlgError:
                    failed[ci, r] = True

    ok_rows = np.flatnonzero(~ls_failed)
    for ci, config in enumerate(configs):
        failed[ci, ls_failed] = True
        if ok_rows.size:
            if len(blocks) == 1 or ok_rows.size < 2 * len(blocks):
                fit_all(ci, config, ok_rows)
            else:
                splits = np.array_split(ok_rows, len(blocks))
                with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
                    futures = [
                        pool.submit(fit_all, ci, config, part)
                        for part in splits if part.size
                    ]
                    for fut in futures:
                        fut.result()

    delta_ls = th_ls - theta_true
    me_ls = np.einsum("ri,ij,rj->r", delta_ls, sigma, delta_ls)
    sq_ls = np.einsum("ri,ri->r", delta_ls, delta_ls)

    rows_out: list[RiskRow] = []
    for ci, config in enumerate(configs):
        ok = ~failed[ci] & ~ls_failed
        nfail = int(R - ok.sum())
        theta = theta_all[ci, ok]
        delta = theta - theta_true
        me = np.einsum("ri,ij,rj->r", delta, sigma, delta)
        sq = np.einsum("ri,ri->r", delta, delta)
        nonzero = theta != 0.0
        spars_ok = ~np.any(nonzero & ~true_bits, axis=1)
        allzero = ~nonzero.any(axis=1)

        n_ok = int(ok.sum())
        boot_gen = RngStream(
            master_seed, 0, f"bootstrap@{tag}/{config.label}"
        ).generator()
        idx = boot_gen.integers(0, max(n_ok, 1), size=(bootstrap_resamples, max(n_ok, 1)))
        # identical fits give elementwise ratios of exactly 1.0, so the
        # least-squares row is exactly 1 without a special case
        ratios = me / me_ls[ok]
        rel_med = float(np.median(ratios)) if n_ok else float("nan")
        rel_mse = float(sq.mean() / sq_ls[ok].mean()) if n_ok else float("nan")
        se_med = _bootstrap_se(ratios, idx) if n_ok else float("nan")
        se_mse = _bootstrap_se_ratio(sq, sq_ls[ok], idx) if n_ok else float("nan")

        rows_out.append(
            RiskRow(
                setup=setup,
                n=n,
                gamma=float(gamma),
                estimator=config.label,
                rel_median_me=rel_med,
                rel_mse=rel_mse,
                sparsity_rate=float(spars_ok.mean()) if n_ok else float("nan"),
                mc_se=se_med,
                replications=R,
                master_seed=master_seed,
                mc_se_rel_mse=se_mse,
                mean_sq_err=float(sq.mean()) if n_ok else float("nan"),
                mean_model_error=float(me.mean()) if n_ok else float("nan"),
                allzero_rate=float(allzero.mean()) if n_ok else float("nan"),
                failures=nfail,
            )
        )
    return rows_out
