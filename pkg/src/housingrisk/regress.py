"""Shared regression engine.

OLS with classical diagnostics, Durbin-Watson, iterative Cochrane-Orcutt
correction, AR(1) pre-whitening with BIC order selection, and linear trend
fits. All functions are pure and use a fixed summation order, so repeated
fits are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import (
    ConvergenceError,
    DegreesOfFreedomError,
    InsufficientHistoryError,
    NonStationaryError,
    SingularDesignError,
    UndefinedStatisticError,
)

__all__ = [
    "RegressionFit",
    "TrendFit",
    "PrewhitenResult",
    "ols_fit",
    "durbin_watson",
    "cochrane_orcutt",
    "ar1_prewhiten",
    "trend_fit",
    "add_intercept",
]


def add_intercept(X: np.ndarray) -> np.ndarray:
    """Prepend a column of ones."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(X.shape[0]), X])


@dataclass(frozen=True)
class RegressionFit:
    """Least-squares fit with classical diagnostics.

    ``durbin_watson`` is NaN when the fit is exact (all residuals zero).
    ``rho`` is populated only for the cochrane_orcutt method.
    """

    names: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_stats: np.ndarray
    r_square: float
    residuals: np.ndarray
    n_obs: int
    durbin_watson: float
    method: str = "ols"
    rho: float | None = None

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def t_stat(self, name: str) -> float:
        return float(self.t_stats[self.names.index(name)])

    def to_dict(self) -> dict:
        """JSON-ready summary keyed by regressor id."""
        out = {
            "coefficients": {n: float(c) for n, c in zip(self.names, self.coefficients)},
            "standard_errors": {
                n: float(s) for n, s in zip(self.names, self.standard_errors)
            },
            "t_stats": {n: float(t) for n, t in zip(self.names, self.t_stats)},
            "n": self.n_obs,
            "r_square": self.r_square,
            "dw": self.durbin_watson,
            "method": self.method,
            "rho": self.rho,
        }
        return out


@dataclass(frozen=True)
class TrendFit:
    """OLS of a series on (1, t) with t = 0, 1, 2, ..."""

    intercept: float
    slope: float
    slope_t_stat: float
    residuals: np.ndarray


def _solve_ls(X: np.ndarray, y: np.ndarray, names: tuple[str, ...]):
    """Pivoted-QR least squares.

    Returns (beta, residuals, diag of (X'X)^-1). Raises SingularDesignError
    naming the pivoted-out columns when X is rank deficient.
    """
    n, k = X.shape
    Q, R, piv = sla.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, k) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < k:
        dependent = [names[piv[i]] for i in range(rank, k)]
        raise SingularDesignError(
            f"design matrix is rank deficient (rank {rank} of {k}); "
            f"dependent columns: {', '.join(dependent)}",
            columns=dependent,
        )
    beta_p = sla.solve_triangular(R, Q.T @ y)
    beta = np.empty(k)
    beta[piv] = beta_p
    resid = y - X @ beta
    r_inv = sla.solve_triangular(R, np.eye(k))
    xtx_inv_diag_p = np.sum(r_inv * r_inv, axis=1)
    xtx_inv_diag = np.empty(k)
    xtx_inv_diag[piv] = xtx_inv_diag_p
    return beta, resid, xtx_inv_diag


def _r_square(y: np.ndarray, resid: np.ndarray) -> float:
    """1 - SSR/SST; a constant response (SST = 0) is defined as 0."""
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        return 0.0
    ssr = float(np.sum(resid**2))
    return 1.0 - ssr / sst


def _t_stats(beta: np.ndarray, se: np.ndarray) -> np.ndarray:
    t = np.zeros_like(beta)
    pos = se > 0
    t[pos] = beta[pos] / se[pos]
    exact = ~pos & (beta != 0)
    t[exact] = np.sign(beta[exact]) * np.inf
    return t


def _fit_core(X, y, names, method, rho) -> RegressionFit:
    """Fit without the public df guard (needs only n >= k + 1)."""
    n, k = X.shape
    if n < k + 1:
        raise DegreesOfFreedomError(
            f"need at least {k + 1} observations for {k} regressors, got {n}"
        )
    beta, resid, xtx_inv_diag = _solve_ls(X, y, names)
    ssr = float(np.sum(resid**2))
    sigma2 = ssr / (n - k)
    se = np.sqrt(np.maximum(sigma2 * xtx_inv_diag, 0.0))
    r2 = _r_square(y, resid)
    denom = float(np.sum(resid**2))
    dw = float(np.sum(np.diff(resid) ** 2) / denom) if denom > 0 else float("nan")
    return RegressionFit(
        names=names,
        coefficients=beta,
        standard_errors=se,
        t_stats=_t_stats(beta, se),
        r_square=r2,
        residuals=resid,
        n_obs=n,
        durbin_watson=dw,
        method=method,
        rho=rho,
    )


def ols_fit(X: np.ndarray, y: np.ndarray, names=None, method: str = "ols",
            rho: float | None = None) -> RegressionFit:
    """Classical OLS on a design matrix that already includes its intercept.

    Requires n >= k + 2 so the error-variance estimate has at least two
    degrees of freedom.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, k) and y (n,)")
    n, k = X.shape
    if n < k + 2:
        raise DegreesOfFreedomError(
            f"need at least {k + 2} observations for {k} regressors, got {n}"
        )
    if names is None:
        names = tuple(f"x{j}" for j in range(k))
    else:
        names = tuple(names)
        if len(names) != k:
            raise ValueError("names must match the number of columns")
    return _fit_core(X, y, names, method, rho)


def durbin_watson(residuals: np.ndarray) -> float:
    """DW = sum_{t>=2}(e_t - e_{t-1})^2 / sum e_t^2, in [0, 4]."""
    e = np.asarray(residuals, dtype=float)
    if e.size < 2:
        raise ValueError("need at least 2 residuals")
    denom = float(np.sum(e**2))
    if denom == 0.0:
        raise UndefinedStatisticError("Durbin-Watson undefined for all-zero residuals")
    return float(np.sum(np.diff(e) ** 2) / denom)


def _rho_estimate(resid: np.ndarray) -> float:
    """Lag-1 serial-correlation estimate sum(e_t e_{t-1}) / sum(e_{t-1}^2)."""
    denom = float(np.sum(resid[:-1] ** 2))
    if denom == 0.0:
        return 0.0
    return float(np.sum(resid[1:] * resid[:-1]) / denom)


def _quasi_difference_fit(X, y, rho, names) -> RegressionFit:
    """Fit on rho-differenced data, reporting original-scale coefficients.

    The transformed intercept column is replaced by ones; the estimated
    intercept and its standard error are rescaled by 1/(1-rho) afterwards.
    """
    ys = y[1:] - rho * y[:-1]
    Xs = X[1:, :] - rho * X[:-1, :]
    Xs[:, 0] = 1.0
    fit = ols_fit(Xs, ys, names=names, method="cochrane_orcutt", rho=rho)
    scale = 1.0 / (1.0 - rho)
    coef = fit.coefficients.copy()
    se = fit.standard_errors.copy()
    coef[0] *= scale
    se[0] *= abs(scale)
    return RegressionFit(
        names=fit.names,
        coefficients=coef,
        standard_errors=se,
        t_stats=_t_stats(coef, se),
        r_square=fit.r_square,
        residuals=fit.residuals,
        n_obs=fit.n_obs,
        durbin_watson=fit.durbin_watson,
        method="cochrane_orcutt",
        rho=rho,
    )


def cochrane_orcutt(
    X: np.ndarray,
    y: np.ndarray,
    names=None,
    tol: float = 1e-6,
    max_iter: int = 50,
    fixed_rho: float | None = None,
) -> RegressionFit:
    """Iterative AR(1) serial-correlation correction.

    Alternates an OLS fit with a lag-1 rho estimate from the original-scale
    residuals, quasi-differencing until |delta rho| < tol. The returned fit
    is the one estimated under the converged rho; when rho converges at the
    first pass (negligible serial correlation) that is plain OLS on all rows.

    ``fixed_rho`` skips the iteration and fits the transformation once.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if n < k + 3:
        raise DegreesOfFreedomError(
            f"need at least {k + 3} observations for Cochrane-Orcutt with "
            f"{k} regressors, got {n}"
        )
    if names is None:
        names = tuple(f"x{j}" for j in range(k))
    else:
        names = tuple(names)

    if fixed_rho is not None:
        if abs(fixed_rho) >= 1.0:
            raise NonStationaryError(f"|rho| >= 1: {fixed_rho}")
        return _quasi_difference_fit(X, y, fixed_rho, names)

    rho_prev = 0.0
    fit = ols_fit(X, y, names=names, method="cochrane_orcutt", rho=0.0)
    last_rho = 0.0
    for _ in range(max_iter):
        resid_orig = y - X @ fit.coefficients
        rho_new = _rho_estimate(resid_orig)
        if abs(rho_new) >= 1.0:
            raise NonStationaryError(
                f"serial-correlation estimate left the unit interval: {rho_new:.4f}"
            )
        last_rho = rho_new
        if abs(rho_new - rho_prev) < tol:
            return RegressionFit(
                names=fit.names,
                coefficients=fit.coefficients,
                standard_errors=fit.standard_errors,
                t_stats=fit.t_stats,
                r_square=fit.r_square,
                residuals=fit.residuals,
                n_obs=fit.n_obs,
                durbin_watson=fit.durbin_watson,
                method="cochrane_orcutt",
                rho=rho_new,
            )
        fit = _quasi_difference_fit(X, y, rho_new, names)
        rho_prev = rho_new
    raise ConvergenceError(
        f"rho did not converge within {max_iter} iterations (last {last_rho:.6f})",
        last_fit=fit,
        last_rho=last_rho,
    )


@dataclass(frozen=True)
class PrewhitenResult:
    """AR pre-whitening output; residuals keep the series mean so scale is
    preserved. ``offset`` is how many leading observations were consumed."""

    residuals: np.ndarray
    phi: float
    order: int
    offset: int
    near_unit_root: bool = False


def ar1_prewhiten(series: np.ndarray) -> PrewhitenResult:
    """Remove AR(1) serial correlation if an information criterion asks for it.

    Fits mean-only AR(0) and conditional-least-squares AR(1) on the common
    sample (observations 2..n), picks the lower BIC (AIC breaks ties), and
    returns residuals with the series mean re-added. A |phi| >= 1 estimate
    flags near_unit_root instead of raising.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 10:
        raise InsufficientHistoryError(
            f"pre-whitening needs at least 10 observations, got {n}"
        )
    mean = float(x.mean())

    y = x[1:]
    x_lag = x[:-1]
    n_eff = n - 1

    # AR(0): mean-only model on the common sample.
    ssr0 = float(np.sum((y - y.mean()) ** 2))

    # AR(1) by conditional least squares; zero lag variance degrades to AR(0).
    lx = x_lag - x_lag.mean()
    denom = float(np.sum(lx**2))
    if denom == 0.0:
        return PrewhitenResult(x.copy(), 0.0, 0, 0, False)
    phi = float(np.sum((y - y.mean()) * lx) / denom)
    c = y.mean() - phi * x_lag.mean()
    resid1 = y - c - phi * x_lag
    ssr1 = float(np.sum(resid1**2))

    def _ic(ssr, k):
        sigma2 = max(ssr / n_eff, np.finfo(float).tiny)
        ll = n_eff * np.log(sigma2)
        return ll + k * np.log(n_eff), ll + 2 * k

    bic0, aic0 = _ic(ssr0, 1)
    bic1, aic1 = _ic(ssr1, 2)
    if bic1 < bic0 or (bic1 == bic0 and aic1 < aic0):
        near_unit = abs(phi) >= 1.0
        return PrewhitenResult(resid1 + mean, phi, 1, 1, near_unit)
    # AR(0): residual is the demeaned series, so +mean gives the series back.
    return PrewhitenResult(x.copy(), 0.0, 0, 0, False)


def trend_fit(series: np.ndarray) -> TrendFit:
    """OLS of a series on (1, t), t = 0..n-1, with the slope t-statistic."""
    y = np.asarray(series, dtype=float)
    n = y.size
    if n < 3:
        raise DegreesOfFreedomError(f"need at least 3 observations, got {n}")
    t = np.arange(n, dtype=float)
    X = np.column_stack([np.ones(n), t])
    fit = _fit_core(X, y, ("const", "t"), "ols", None)
    return TrendFit(
        intercept=float(fit.coefficients[0]),
        slope=float(fit.coefficients[1]),
        slope_t_stat=float(fit.t_stats[1]),
        residuals=fit.residuals,
    )
