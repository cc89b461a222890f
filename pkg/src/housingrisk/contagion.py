"""Spatial contagion regressions.

A satellite MSA's returns are regressed on the contemporaneous and lagged
returns of a primary coastal MSA; a Durbin-Watson check (policy ``auto``)
re-fits via Cochrane-Orcutt when first-order serial correlation cannot be
ruled out at 5%. The interacted variant adds each source lag multiplied by
the contemporaneous boom/bust residual of a log index's time trend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignmentError,
    ConfigError,
    DomainError,
    InsufficientHistoryError,
)
from .regress import RegressionFit, cochrane_orcutt, ols_fit, trend_fit

__all__ = [
    "ContagionFit",
    "SERIAL_POLICIES",
    "PRIMARY_CITY_MENU",
    "dw_bounds",
    "dw_rejects",
    "contagion_fit",
    "contagion_fit_interacted",
    "boombust_residual",
]

SERIAL_POLICIES = ("auto", "never", "always")

#: Default primary coastal cities and their satellite targets, as name
#: fragments matched case-insensitively against MSA names at run time.
PRIMARY_CITY_MENU = {
    "Los Angeles": (
        "Bakersfield",
        "Fresno",
        "Oxnard",
        "Riverside",
        "San Diego",
        "Santa Ana",
        "Santa Barbara",
    ),
    "San Francisco": (
        "Merced",
        "Modesto",
        "Napa",
        "Oakland",
        "Sacramento",
        "Salinas",
        "San Jose",
        "Santa Cruz",
        "Santa Rosa",
        "Stockton",
        "Vallejo",
    ),
    "Santa Barbara": ("Oxnard", "San Luis Obispo"),
}

# Five-percent Durbin-Watson significance bounds (dL, dU), indexed by the
# number of slope regressors (intercept excluded) and sample size. Values
# between tabulated sample sizes are linearly interpolated; outside the
# table the nearest row applies.
_DW_NS = (15, 20, 25, 30, 40, 50, 70, 100, 150, 200)
_DW_TABLE = {
    1: ((1.08, 1.36), (1.20, 1.41), (1.29, 1.45), (1.35, 1.49), (1.44, 1.54),
        (1.50, 1.59), (1.58, 1.64), (1.65, 1.69), (1.72, 1.75), (1.76, 1.78)),
    2: ((0.95, 1.54), (1.10, 1.54), (1.21, 1.55), (1.28, 1.57), (1.39, 1.60),
        (1.46, 1.63), (1.55, 1.67), (1.63, 1.72), (1.71, 1.76), (1.75, 1.79)),
    3: ((0.82, 1.75), (1.00, 1.68), (1.12, 1.66), (1.21, 1.65), (1.34, 1.66),
        (1.42, 1.67), (1.52, 1.70), (1.61, 1.74), (1.69, 1.77), (1.74, 1.80)),
    4: ((0.69, 1.97), (0.90, 1.83), (1.04, 1.77), (1.14, 1.74), (1.29, 1.72),
        (1.38, 1.72), (1.49, 1.74), (1.59, 1.76), (1.68, 1.79), (1.73, 1.81)),
    5: ((0.56, 2.21), (0.79, 1.99), (0.95, 1.89), (1.07, 1.83), (1.23, 1.79),
        (1.34, 1.77), (1.46, 1.77), (1.57, 1.78), (1.66, 1.80), (1.72, 1.82)),
    6: ((0.45, 2.47), (0.69, 2.16), (0.87, 2.01), (1.00, 1.91), (1.18, 1.85),
        (1.29, 1.82), (1.43, 1.80), (1.55, 1.80), (1.65, 1.82), (1.71, 1.83)),
    7: ((0.34, 2.73), (0.60, 2.34), (0.78, 2.14), (0.93, 2.00), (1.12, 1.92),
        (1.25, 1.87), (1.40, 1.84), (1.53, 1.83), (1.64, 1.83), (1.70, 1.84)),
    8: ((0.25, 2.98), (0.50, 2.52), (0.70, 2.26), (0.87, 2.09), (1.07, 1.98),
        (1.21, 1.92), (1.37, 1.87), (1.51, 1.85), (1.62, 1.85), (1.69, 1.85)),
    9: ((0.17, 3.22), (0.41, 2.69), (0.62, 2.39), (0.80, 2.18), (1.02, 2.05),
        (1.16, 1.97), (1.34, 1.91), (1.48, 1.87), (1.61, 1.86), (1.68, 1.86)),
}


def dw_bounds(n: int, k_slopes: int) -> tuple[float, float]:
    """(dL, dU) at 5% for n observations and k_slopes slope regressors."""
    if k_slopes < 1 or k_slopes > max(_DW_TABLE):
        raise ConfigError(
            f"no Durbin-Watson bounds for {k_slopes} slope regressors"
        )
    rows = _DW_TABLE[k_slopes]
    if n <= _DW_NS[0]:
        return rows[0]
    if n >= _DW_NS[-1]:
        return rows[-1]
    hi = next(i for i, nn in enumerate(_DW_NS) if nn >= n)
    lo = hi - 1
    w = (n - _DW_NS[lo]) / (_DW_NS[hi] - _DW_NS[lo])
    dl = rows[lo][0] + w * (rows[hi][0] - rows[lo][0])
    du = rows[lo][1] + w * (rows[hi][1] - rows[lo][1])
    return dl, du


def dw_rejects(dw: float, n: int, k_slopes: int) -> bool:
    """True when no-serial-correlation is rejected (or inconclusive) at 5%.

    Both tails are checked by folding: min(DW, 4-DW) below dU means the
    test rejects or is inconclusive; treating inconclusive as rejection is
    the conservative choice (it triggers the Cochrane-Orcutt re-fit).
    """
    if np.isnan(dw):
        return False
    _, du = dw_bounds(n, k_slopes)
    return min(dw, 4.0 - dw) < du


@dataclass(frozen=True)
class ContagionFit:
    """Lagged-spillover regression record.

    ``names`` is ("const", "lag0", ..) plus ("ix_lag0", ..) when
    interacted; columns dropped as identically zero carry coefficient 0
    with NaN standard error and t-stat.
    """

    target: str
    source: str
    names: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_stats: np.ndarray
    r_square: float
    durbin_watson: float
    n_obs: int
    n_lags: int
    method: str
    rho: float | None
    interacted: bool = False
    dropped_columns: tuple[str, ...] = ()

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def t_stat(self, name: str) -> float:
        return float(self.t_stats[self.names.index(name)])

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    def lag_coefficients(self) -> np.ndarray:
        return np.array([self.coefficient(f"lag{l}") for l in range(self.n_lags + 1)])

    def lag_t_stats(self) -> np.ndarray:
        return np.array([self.t_stat(f"lag{l}") for l in range(self.n_lags + 1)])

    def interaction_coefficients(self) -> np.ndarray | None:
        if not self.interacted:
            return None
        return np.array(
            [self.coefficient(f"ix_lag{l}") for l in range(self.n_lags + 1)]
        )


def _lag_design(target, source, n_lags):
    target = np.asarray(target, dtype=float)
    source = np.asarray(source, dtype=float)
    if target.shape != source.shape or target.ndim != 1:
        raise ValueError("target and source must be equal-length 1-d arrays")
    n = target.size
    if n < n_lags + 8:
        raise InsufficientHistoryError(
            f"need at least {n_lags + 8} aligned quarters, got {n}"
        )
    y = target[n_lags:]
    cols = [np.ones(n - n_lags)]
    names = ["const"]
    for l in range(n_lags + 1):
        cols.append(source[n_lags - l : n - l])
        names.append(f"lag{l}")
    return y, np.column_stack(cols), tuple(names)


def _fit_with_policy(X, y, names, serial: str) -> RegressionFit:
    if serial not in SERIAL_POLICIES:
        raise ConfigError(f"serial policy must be one of {SERIAL_POLICIES}, got {serial!r}")
    if serial == "always":
        return cochrane_orcutt(X, y, names=names)
    fit = ols_fit(X, y, names=names)
    if serial == "auto" and dw_rejects(fit.durbin_watson, fit.n_obs, len(names) - 1):
        return cochrane_orcutt(X, y, names=names)
    return fit


def _as_contagion_fit(fit, target, source, names, n_lags, interacted, dropped):
    coef = np.zeros(len(names))
    se = np.full(len(names), np.nan)
    t = np.full(len(names), np.nan)
    for pos, name in enumerate(names):
        if name in fit.names:
            at = fit.names.index(name)
            coef[pos] = fit.coefficients[at]
            se[pos] = fit.standard_errors[at]
            t[pos] = fit.t_stats[at]
    return ContagionFit(
        target=target,
        source=source,
        names=names,
        coefficients=coef,
        standard_errors=se,
        t_stats=t,
        r_square=fit.r_square,
        durbin_watson=fit.durbin_watson,
        n_obs=fit.n_obs,
        n_lags=n_lags,
        method=fit.method,
        rho=fit.rho,
        interacted=interacted,
        dropped_columns=dropped,
    )


def contagion_fit(
    target,
    source,
    n_lags: int = 3,
    serial: str = "auto",
    target_id: str = "",
    source_id: str = "",
) -> ContagionFit:
    """Regress aligned target returns on source lags 0..n_lags."""
    y, X, names = _lag_design(target, source, n_lags)
    fit = _fit_with_policy(X, y, names, serial)
    return _as_contagion_fit(fit, target_id, source_id, names, n_lags, False, ())


def boombust_residual(index_levels) -> np.ndarray:
    """Residuals of a linear time-trend fit to the log index.

    Positive values mark boom quarters (index above its log-linear trend),
    negative values bust quarters.
    """
    levels = np.asarray(index_levels, dtype=float)
    if levels.size < 12:
        raise InsufficientHistoryError(
            f"need at least 12 index observations, got {levels.size}"
        )
    if np.any(~np.isnan(levels) & (levels <= 0.0)):
        raise DomainError("index levels must be positive")
    return trend_fit(np.log(levels)).residuals


def contagion_fit_interacted(
    target,
    source,
    residual,
    n_lags: int = 3,
    serial: str = "auto",
    target_id: str = "",
    source_id: str = "",
) -> ContagionFit:
    """Contagion fit plus boom/bust interactions source_{t-l} * resid_t.

    The residual is contemporaneous for every lag term. Interaction columns
    that are identically zero (e.g. a zero residual series) are dropped
    before fitting and reported with coefficient 0, leaving the base
    coefficients identical to the plain fit's.
    """
    residual = np.asarray(residual, dtype=float)
    y, X, names = _lag_design(target, source, n_lags)
    if residual.shape != np.asarray(target, dtype=float).shape:
        raise AlignmentError("residual series must align with the target returns")
    res_now = residual[n_lags:]
    ix_cols = X[:, 1:] * res_now[:, None]
    all_names = names + tuple(f"ix_lag{l}" for l in range(n_lags + 1))
    keep = [c for c in range(ix_cols.shape[1]) if np.any(ix_cols[:, c] != 0.0)]
    dropped = tuple(f"ix_lag{c}" for c in range(ix_cols.shape[1]) if c not in keep)
    X_full = np.column_stack([X, ix_cols[:, keep]]) if keep else X
    fit_names = names + tuple(f"ix_lag{c}" for c in keep)
    fit = _fit_with_policy(X_full, y, fit_names, serial)
    return _as_contagion_fit(fit, target_id, source_id, all_names, n_lags, True, dropped)
