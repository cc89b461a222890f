"""Equal-weighted portfolio construction, rolling risk, diversification.

Diversification is the share of average member risk removed by pooling:
(average member rolling sigma - portfolio rolling sigma) / average member
rolling sigma, per 20-quarter window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import QuarterIndex, ReturnPanel
from .errors import InsufficientHistoryError

__all__ = [
    "PortfolioSeries",
    "portfolio_returns",
    "rolling_sigma",
    "diversification_series",
    "series_correlation",
]


@dataclass(frozen=True)
class PortfolioSeries:
    """Equal-weighted portfolio path and per-window risk decomposition."""

    members: tuple[str, ...]
    return_codes: np.ndarray
    returns: np.ndarray
    window: int
    sigma_codes: np.ndarray
    portfolio_sigma: np.ndarray
    avg_member_sigma: np.ndarray
    diversification: np.ndarray
    dropped_quarters: tuple[int, ...]

    def quarters(self) -> list[QuarterIndex]:
        return [QuarterIndex.from_code(int(c)) for c in self.sigma_codes]


def _member_matrix(panel: ReturnPanel, members):
    members = tuple(sorted(members))
    if not members:
        raise ValueError("portfolio membership is empty")
    V = np.column_stack([panel.values[:, panel.column(m)] for m in members])
    return members, V


def portfolio_returns(
    panel: ReturnPanel, members
) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Equal-weighted mean return per quarter where every member reports.

    Returns (quarter codes, returns, dropped quarter codes).
    """
    members, V = _member_matrix(panel, members)
    full = np.all(np.isfinite(V), axis=1)
    if not np.any(full):
        raise InsufficientHistoryError("no quarter has all members present")
    codes = np.arange(panel.start.code, panel.start.code + panel.n_quarters)
    dropped = tuple(int(c) for c in codes[~full])
    return codes[full], V[full].mean(axis=1), dropped


def rolling_sigma(series: np.ndarray, window: int = 20) -> np.ndarray:
    """Sample standard deviation over each trailing window, window-end
    stamped: output[i] covers series[i..i+window-1]."""
    s = np.asarray(series, dtype=float)
    if window < 2:
        raise ValueError(f"window must be at least 2, got {window}")
    if s.size < window:
        raise InsufficientHistoryError(
            f"need at least {window} observations, got {s.size}"
        )
    return sliding_window_view(s, window).std(axis=1, ddof=1)


def diversification_series(
    panel: ReturnPanel, members, window: int = 20
) -> PortfolioSeries:
    """Portfolio sigma vs average member sigma per window-end quarter.

    All sigmas are computed over the quarters where every member reports,
    so member and portfolio windows line up exactly. Diversification is
    NaN only if every member is constant within a window.
    """
    members, V = _member_matrix(panel, members)
    codes, port, dropped = portfolio_returns(panel, members)
    lookup = np.searchsorted(
        np.arange(panel.start.code, panel.start.code + panel.n_quarters), codes
    )
    common = V[lookup]
    port_sigma = rolling_sigma(port, window)
    member_sigmas = np.column_stack(
        [rolling_sigma(common[:, c], window) for c in range(common.shape[1])]
    )
    avg_sigma = member_sigmas.mean(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        diversification = np.where(
            avg_sigma > 0, (avg_sigma - port_sigma) / avg_sigma, np.nan
        )
        # Identical members give avg == port exactly; make the zero exact.
        diversification = np.where(avg_sigma == port_sigma, 0.0, diversification)
    return PortfolioSeries(
        members=members,
        return_codes=codes,
        returns=port,
        window=window,
        sigma_codes=codes[window - 1 :],
        portfolio_sigma=port_sigma,
        avg_member_sigma=avg_sigma,
        diversification=diversification,
        dropped_quarters=dropped,
    )


def series_correlation(
    codes_a, values_a, codes_b, values_b,
    start: QuarterIndex | None = None,
    end: QuarterIndex | None = None,
) -> tuple[float, int]:
    """Pearson correlation of two quarter-stamped series over their overlap
    (optionally clipped to [start, end]). Returns (r, n); r is NaN when
    either series is constant over the overlap.
    """
    codes_a = np.asarray(codes_a, dtype=int)
    codes_b = np.asarray(codes_b, dtype=int)
    common = np.intersect1d(codes_a, codes_b)
    if start is not None:
        common = common[common >= start.code]
    if end is not None:
        common = common[common <= end.code]
    if common.size < 8:
        raise InsufficientHistoryError(
            f"need at least 8 overlapping quarters, got {common.size}"
        )
    a = np.asarray(values_a, dtype=float)[np.searchsorted(codes_a, common)]
    b = np.asarray(values_b, dtype=float)[np.searchsorted(codes_b, common)]
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt(np.sum(da**2) * np.sum(db**2))
    if denom == 0.0:
        return float("nan"), int(common.size)
    return float(np.sum(da * db) / denom), int(common.size)
