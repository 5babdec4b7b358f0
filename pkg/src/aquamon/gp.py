"""Gaussian-process field estimation over the local tangent plane.

Squared-exponential kernel, exact inference via Cholesky factorization.
Hyperparameters are found by maximizing the log marginal likelihood on
normalized observations: an outer golden-section search on lengthscale
nested with a log-grid plus golden-section search on signal variance.
The noise variance is not optimized; it comes from the sensor noise
configuration, which keeps the search well conditioned on few samples.

An eigendecomposition of the unit-variance kernel matrix is reused
across all signal-variance evaluations at a fixed lengthscale, so the
inner search costs O(n) per candidate instead of a fresh factorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .errors import InsufficientData
from .frames import EnuPoint
from .rasters import NODATA, OccupancyGrid, ScalarField

DEFAULT_LENGTHSCALE_BOUNDS = (55.0, 110.0)
DEFAULT_INIT_LENGTHSCALE = 80.0
# search bounds for the signal variance of normalized observations
_SIGMA_BOUNDS = (1e-2, 1e2)
_DUPLICATE_JITTER = 1e-8


@dataclass(frozen=True)
class Kernel:
    """Squared-exponential covariance: variance * exp(-d^2 / (2 l^2))."""

    variance: float
    lengthscale: float

    def __post_init__(self):
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise ValueError("kernel variance must be positive and finite")
        if not (self.lengthscale > 0 and math.isfinite(self.lengthscale)):
            raise ValueError("kernel lengthscale must be positive and finite")

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d2 = _sq_dists(a, b)
        return self.variance * np.exp(-d2 / (2.0 * self.lengthscale**2))


def kernel_eval(k: Kernel, a: EnuPoint, b: EnuPoint) -> float:
    d2 = (a.east - b.east) ** 2 + (a.north - b.north) ** 2
    return k.variance * math.exp(-d2 / (2.0 * k.lengthscale**2))


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _as_points(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
    else:
        seq = list(points)
        if seq and isinstance(seq[0], EnuPoint):
            arr = np.array([(p.east, p.north) for p in seq], dtype=float)
        else:
            arr = np.asarray(seq, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be (n, 2) east/north coordinates")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return arr


@dataclass(frozen=True)
class GpModel:
    """Factorized posterior state; immutable once built."""

    kernel: Kernel
    noise_var: float
    X: np.ndarray
    y: np.ndarray
    y_mean: float
    y_sd: float
    chol: np.ndarray
    alpha: np.ndarray
    warnings: tuple[str, ...] = dc_field(default=())

    @property
    def n_points(self) -> int:
        return self.X.shape[0]


def build_model(
    X, y, kernel: Kernel, noise_var: float, warnings: tuple[str, ...] = ()
) -> GpModel:
    """Factorize (K + noise_var * I) for a fixed kernel, no normalization.

    Falls back to progressively larger diagonal jitter if the factorization
    fails numerically; each retry is recorded on the model.
    """
    Xa = _as_points(X)
    ya = np.asarray(y, dtype=float).ravel()
    if Xa.shape[0] != ya.shape[0]:
        raise ValueError("X and y lengths differ")
    if Xa.shape[0] < 1:
        raise InsufficientData("need at least one observation")
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    K = kernel.matrix(Xa, Xa)
    notes = list(warnings)
    jitter = 0.0
    while True:
        try:
            L = np.linalg.cholesky(K + (noise_var + jitter) * np.eye(Xa.shape[0]))
            break
        except np.linalg.LinAlgError:
            jitter = 1e-10 if jitter == 0.0 else jitter * 10.0
            if jitter > 1e-4 * kernel.variance:
                raise
            notes.append(f"cholesky jitter {jitter:g} added")
    z = solve_triangular(L, ya, lower=True)
    alpha = solve_triangular(L.T, z, lower=False)
    return GpModel(
        kernel=kernel,
        noise_var=noise_var + jitter,
        X=Xa,
        y=ya,
        y_mean=0.0,
        y_sd=1.0,
        chol=L,
        alpha=alpha,
        warnings=tuple(notes),
    )


def log_marginal_likelihood(model: GpModel) -> float:
    """log p(y | X) of the factorized system the model stores."""
    n = model.n_points
    return float(
        -0.5 * model.y @ model.alpha
        - np.sum(np.log(np.diag(model.chol)))
        - 0.5 * n * math.log(2.0 * math.pi)
    )


def _golden_max(f, a: float, b: float, tol: float):
    """Golden-section maximization on [a, b]; returns (x, f(x))."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(200):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _profile_signal_variance(w: np.ndarray, beta2: np.ndarray, noise_var: float, n: int):
    """Best signal variance for fixed lengthscale via the eigenbasis.

    With K = s * E + noise_var * I and E = Q diag(w) Q^T, the likelihood
    at each candidate s costs O(n).
    """

    def lml(log_s: float) -> float:
        s = 10.0**log_s
        d = s * w + noise_var
        if np.any(d <= 0.0):
            return -np.inf
        return float(
            -0.5 * np.sum(beta2 / d)
            - 0.5 * np.sum(np.log(d))
            - 0.5 * n * math.log(2.0 * math.pi)
        )

    lo, hi = math.log10(_SIGMA_BOUNDS[0]), math.log10(_SIGMA_BOUNDS[1])
    grid = np.linspace(lo, hi, 65)
    vals = np.array([lml(g) for g in grid])
    i = int(np.argmax(vals))
    a = grid[max(0, i - 1)]
    b = grid[min(len(grid) - 1, i + 1)]
    x, fx = _golden_max(lml, a, b, tol=1e-5)
    if vals[i] >= fx:
        x, fx = grid[i], vals[i]
    return 10.0**x, fx


def fit(
    X,
    y,
    bounds: tuple[float, float] = DEFAULT_LENGTHSCALE_BOUNDS,
    init_lengthscale: float = DEFAULT_INIT_LENGTHSCALE,
    noise_sd: float = 0.0,
) -> GpModel:
    """Fit kernel hyperparameters by marginal likelihood and factorize.

    Observations are normalized to zero mean and unit sd before the
    search so the signal-variance bounds are scale-free; the returned
    model stores denormalized quantities throughout.
    """
    Xa = _as_points(X)
    ya = np.asarray(y, dtype=float).ravel()
    if Xa.shape[0] != ya.shape[0]:
        raise ValueError("X and y lengths differ")
    if Xa.shape[0] < 2:
        raise InsufficientData("need at least two observations to fit")
    lo, hi = float(bounds[0]), float(bounds[1])
    if not (0.0 < lo < hi):
        raise ValueError("lengthscale bounds must satisfy 0 < low < high")
    if not (lo <= init_lengthscale <= hi):
        init_lengthscale = min(max(init_lengthscale, lo), hi)
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")

    notes: list[str] = []
    d2 = _sq_dists(Xa, Xa)
    off = d2.copy()
    np.fill_diagonal(off, np.inf)
    if np.min(off) < 1e-12:
        notes.append("duplicate training inputs; diagonal jitter added")

    y_mean = float(np.mean(ya))
    y_sd = float(np.std(ya))
    if y_sd < 1e-12:
        y_sd = 1.0
    yn = (ya - y_mean) / y_sd
    noise_var_n = (noise_sd / y_sd) ** 2
    if notes:
        noise_var_n += _DUPLICATE_JITTER
    # floor applied during the search only, protecting the eigenbasis
    # profile against zero-noise degeneracy; the model keeps noise_var_n
    search_noise = max(noise_var_n, 1e-10)
    n = Xa.shape[0]

    cache: dict[float, tuple[float, float]] = {}

    def profiled(ell: float) -> float:
        ell = float(ell)
        if ell in cache:
            return cache[ell][1]
        E = np.exp(-d2 / (2.0 * ell**2))
        w, Q = np.linalg.eigh(E)
        w = np.clip(w, 0.0, None)
        beta2 = (Q.T @ yn) ** 2
        s, val = _profile_signal_variance(w, beta2, search_noise, n)
        cache[ell] = (s, val)
        return val

    # the coarse scan covers a 39-point lattice, a 20-point lattice and
    # the initial guess, then golden-section refines around the best
    grid = np.union1d(
        np.union1d(np.linspace(lo, hi, 39), np.linspace(lo, hi, 20)),
        np.array([float(init_lengthscale)]),
    )
    vals = np.array([profiled(g) for g in grid])
    i = int(np.argmax(vals))
    a = grid[max(0, i - 1)]
    b = grid[min(len(grid) - 1, i + 1)]
    ell_ref, val_ref = _golden_max(profiled, float(a), float(b), tol=1e-3)
    if vals[i] >= val_ref:
        best_ell = float(grid[i])
    else:
        best_ell = float(ell_ref)
    best_ell = min(max(best_ell, lo), hi)
    profiled(best_ell)
    best_sigma = cache[float(best_ell)][0]

    kernel = Kernel(variance=best_sigma * y_sd**2, lengthscale=best_ell)
    noise_var = noise_var_n * y_sd**2
    model = build_model(Xa, ya - y_mean, kernel, noise_var, warnings=tuple(notes))
    return GpModel(
        kernel=model.kernel,
        noise_var=model.noise_var,
        X=model.X,
        y=model.y,
        y_mean=y_mean,
        y_sd=y_sd,
        chol=model.chol,
        alpha=model.alpha,
        warnings=model.warnings,
    )


_PREDICT_CHUNK = 4096


def predict(model: GpModel, points) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at query points.

    mean = k_*^T alpha + y_mean; var = k_** - ||L^-1 k_*||^2, floored at 0.
    """
    P = _as_points(points)
    mean = np.empty(P.shape[0])
    var = np.empty(P.shape[0])
    for s in range(0, P.shape[0], _PREDICT_CHUNK):
        chunk = P[s : s + _PREDICT_CHUNK]
        Ks = model.kernel.matrix(model.X, chunk)
        mean[s : s + _PREDICT_CHUNK] = Ks.T @ model.alpha + model.y_mean
        V = solve_triangular(model.chol, Ks, lower=True)
        var[s : s + _PREDICT_CHUNK] = np.maximum(
            model.kernel.variance - np.einsum("ij,ij->j", V, V), 0.0
        )
    return mean, var


def predict_grid(
    model: GpModel, grid: OccupancyGrid, parameter: str = "", units: str = ""
) -> tuple[ScalarField, ScalarField]:
    """Mean and standard-deviation maps over the navigable cells."""
    rows, cols = np.nonzero(grid.cells)
    east = grid.origin.east + (cols + 0.5) * grid.cell_size
    north = grid.origin.north + (rows + 0.5) * grid.cell_size
    mean, var = predict(model, np.column_stack([east, north]))
    mean_map = np.full(grid.cells.shape, np.nan)
    sd_map = np.full(grid.cells.shape, np.nan)
    mean_map[rows, cols] = mean
    sd_map[rows, cols] = np.sqrt(var)
    return (
        ScalarField(
            origin=grid.origin,
            cell_size=grid.cell_size,
            values=mean_map,
            parameter=parameter,
            units=units,
        ),
        ScalarField(
            origin=grid.origin,
            cell_size=grid.cell_size,
            values=sd_map,
            parameter=parameter,
            units=units,
        ),
    )


@dataclass(frozen=True)
class ParameterVerdict:
    parameter: str
    median: float
    low: float | None
    high: float | None
    passed: bool


@dataclass(frozen=True)
class ComplianceReport:
    verdicts: tuple[ParameterVerdict, ...]
    notices: tuple[str, ...]
    suitable: bool


def compliance(estimates: dict, thresholds: dict) -> ComplianceReport:
    """Judge water suitability from per-parameter mean maps.

    The test statistic is the median over mapped cells; a parameter
    passes when its median sits inside the configured bounds.  Overall
    suitability requires every judged parameter to pass; no judged
    parameters is vacuously suitable.
    """
    verdicts: list[ParameterVerdict] = []
    notices: list[str] = []
    if not thresholds:
        notices.append("no thresholds configured; verdict is vacuous")
    for name in sorted(estimates):
        spec = thresholds.get(name)
        if spec is None:
            notices.append(f"{name}: no threshold configured, skipped")
            continue
        values = estimates[name].values if isinstance(estimates[name], ScalarField) else np.asarray(estimates[name], dtype=float)
        values = np.where(values == NODATA, np.nan, values)
        if not np.any(np.isfinite(values)):
            notices.append(f"{name}: no mapped estimate, skipped")
            continue
        med = float(np.nanmedian(values))
        low = spec.get("min")
        high = spec.get("max")
        if low is None and high is None:
            notices.append(f"{name}: threshold has neither min nor max, skipped")
            continue
        ok = (low is None or med >= low) and (high is None or med <= high)
        verdicts.append(
            ParameterVerdict(
                parameter=name, median=med,
                low=None if low is None else float(low),
                high=None if high is None else float(high),
                passed=ok,
            )
        )
    for name in sorted(thresholds):
        if name not in estimates:
            notices.append(f"{name}: threshold configured but no estimate")
    return ComplianceReport(
        verdicts=tuple(verdicts),
        notices=tuple(notices),
        suitable=all(v.passed for v in verdicts),
    )


class GpFieldEstimator(BaseEstimator, RegressorMixin):
    """Scikit-learn style front end over the field model.

    Parameters mirror fit(); X rows are (east, north) meters.
    """

    def __init__(
        self,
        lengthscale_bounds: tuple[float, float] = DEFAULT_LENGTHSCALE_BOUNDS,
        init_lengthscale: float = DEFAULT_INIT_LENGTHSCALE,
        noise_sd: float = 0.0,
    ):
        self.lengthscale_bounds = lengthscale_bounds
        self.init_lengthscale = init_lengthscale
        self.noise_sd = noise_sd

    def fit(self, X, y):
        self.model_ = fit(
            X,
            y,
            bounds=self.lengthscale_bounds,
            init_lengthscale=self.init_lengthscale,
            noise_sd=self.noise_sd,
        )
        self.prior_sd_ = math.sqrt(self.model_.kernel.variance)
        self.n_features_in_ = 2
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("estimator is not fitted; call fit first")

    def predict(self, X, return_std: bool = False):
        self._check_fitted()
        mean, var = predict(self.model_, X)
        if return_std:
            return mean, np.sqrt(var)
        return mean

    def predict_grid(self, grid: OccupancyGrid, parameter: str = "", units: str = ""):
        self._check_fitted()
        return predict_grid(self.model_, grid, parameter=parameter, units=units)
