"""Pairwise return and jump correlations across MSAs.

Contemporaneous return pairs are unordered (i < j); lead pairs correlate
r_i,t with r_j,t+1 over all ordered pairs including i = j. Jump pairs use
the uncentered cosine of jump-masked L statistics (L where the big flag is
set, else zero) over quarters both MSAs are testable and at least one is
nonzero. All pair grids are evaluated with sufficient-statistic matrix
products, so full 384-MSA panels take well under a second.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import ReturnPanel
from .errors import ConfigError
from .jumps import JumpSeries

__all__ = [
    "PairCorrelation",
    "CorrelationSummary",
    "DivisionRow",
    "DIVISION_STATES",
    "DIVISIONS",
    "division_for_state",
    "return_pair_correlations",
    "jump_pair_correlations",
    "correlation_summary",
    "cohort_correlation_report",
]

#: Census-division state lists, California broken out of division 1.
DIVISION_STATES = {
    "D1": ("AK", "HI", "OR", "WA"),
    "D2": ("AZ", "CO", "ID", "MT", "NM", "NV", "UT", "WY"),
    "D3": ("IA", "KS", "MN", "MO", "ND", "NE", "SD"),
    "D4": ("AR", "LA", "OK", "TX"),
    "D5": ("IL", "IN", "MI", "OH", "WI"),
    "D6": ("AL", "KY", "MS", "TN"),
    "D7": ("DC", "DE", "FL", "GA", "MD", "NC", "SC", "VA", "WV"),
    "D8": ("NJ", "NY", "PA"),
    "D9": ("CT", "MA", "ME", "NH", "RI", "VT"),
    "CA": ("CA",),
}

DIVISIONS = tuple(DIVISION_STATES)

_STATE_TO_DIVISION = {
    state: div for div, states in DIVISION_STATES.items() for state in states
}


def division_for_state(state: str) -> str:
    try:
        return _STATE_TO_DIVISION[state.upper()]
    except KeyError:
        raise ConfigError(f"state {state!r} is not in the census-division map") from None


@dataclass(frozen=True)
class PairCorrelation:
    msa_i: str
    msa_j: str
    kind: str  # return | jump
    timing: str  # contemporaneous | lead
    r: float
    n_effective: int
    t_stat: float


@dataclass(frozen=True)
class CorrelationSummary:
    """Cross-pair moments after an optional per-pair |t| filter.

    ``t_stat`` = mean/(sigma/sqrt(N)); it and the moments are NaN when the
    filtered set is empty or (for t) the sigma is zero.
    """

    kind: str
    timing: str
    threshold: float | None
    n: int
    mean: float
    sigma: float
    t_stat: float
    max: float
    min: float


@dataclass(frozen=True)
class DivisionRow:
    division: str
    kind: str
    timing: str
    n: int
    n_significant: int
    pct_significant: float
    mean_r: float


def _pair_t(r: np.ndarray, n: np.ndarray) -> np.ndarray:
    """t = r * sqrt(n-2) / sqrt(1-r^2); +/-inf at |r| = 1, NaN for n < 3."""
    r = np.clip(r, -1.0, 1.0)
    t = np.full(r.shape, np.nan)
    ok = n >= 3
    with np.errstate(divide="ignore", invalid="ignore"):
        t[ok] = r[ok] * np.sqrt(n[ok] - 2.0) / np.sqrt(1.0 - r[ok] ** 2)
    return t


def _mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-against-column sums with a fixed (non-BLAS) reduction order,
    so outputs are byte-identical regardless of thread count."""
    return np.einsum("ti,tj->ij", a, b, optimize=False)


def _pearson_grids(Za, Ma, Zb, Mb):
    """Sufficient statistics for all-pairs Pearson correlations.

    ``Za``/``Zb`` are zero-filled value arrays, ``Ma``/``Mb`` the matching
    presence masks (floats); column i of the a-side is correlated with
    column j of the b-side over rows where both are present.
    """
    N = _mm(Ma, Mb)
    Sa = _mm(Za, Mb)
    Sb = _mm(Ma, Zb)
    Qa = _mm(Za * Za, Mb)
    Qb = _mm(Ma, Zb * Zb)
    P = _mm(Za, Zb)
    with np.errstate(divide="ignore", invalid="ignore"):
        cov = N * P - Sa * Sb
        var_a = N * Qa - Sa**2
        var_b = N * Qb - Sb**2
        r = cov / np.sqrt(var_a * var_b)
    return N, r, var_a, var_b


def return_pair_correlations(
    panel: ReturnPanel,
    timing: str = "contemporaneous",
    min_overlap: int = 8,
) -> tuple[list[PairCorrelation], list[tuple[str, str, str]]]:
    """Pearson correlations for every MSA pair; returns (pairs, omitted).

    Pairs whose overlap is below ``min_overlap`` or degenerate (zero
    variance) are omitted with a reason.
    """
    if timing not in ("contemporaneous", "lead"):
        raise ValueError(f"unknown timing {timing!r}")
    ids = panel.msa_ids()
    V = panel.values
    M = np.isfinite(V)
    Z = np.where(M, V, 0.0)
    Mf = M.astype(float)
    if timing == "contemporaneous":
        N, r, var_a, var_b = _pearson_grids(Z, Mf, Z, Mf)
        index_pairs = [(i, j) for i in range(len(ids)) for j in range(i + 1, len(ids))]
    else:
        N, r, var_a, var_b = _pearson_grids(Z[:-1], Mf[:-1], Z[1:], Mf[1:])
        index_pairs = [(i, j) for i in range(len(ids)) for j in range(len(ids))]
    t = _pair_t(r, N)

    pairs: list[PairCorrelation] = []
    omitted: list[tuple[str, str, str]] = []
    for i, j in index_pairs:
        n = int(N[i, j])
        if n < min_overlap:
            omitted.append((ids[i], ids[j], f"overlap {n} < {min_overlap}"))
            continue
        if var_a[i, j] <= 0.0 or var_b[i, j] <= 0.0:
            omitted.append((ids[i], ids[j], "zero variance over overlap"))
            continue
        pairs.append(
            PairCorrelation(
                msa_i=ids[i],
                msa_j=ids[j],
                kind="return",
                timing=timing,
                r=float(np.clip(r[i, j], -1.0, 1.0)),
                n_effective=n,
                t_stat=float(t[i, j]),
            )
        )
    return pairs, omitted


def _jump_grid(series: list[JumpSeries]):
    lo = min(int(s.quarter_codes[0]) for s in series)
    hi = max(int(s.quarter_codes[-1]) for s in series)
    n_q = hi - lo + 1
    J = np.zeros((n_q, len(series)))
    T = np.zeros((n_q, len(series)))
    for c, s in enumerate(series):
        sl = slice(int(s.quarter_codes[0]) - lo, int(s.quarter_codes[0]) - lo + s.n_quarters)
        T[sl, c] = s.testable
        J[sl, c] = np.where(s.big_flag, np.nan_to_num(s.L), 0.0)
    return J, T


def jump_pair_correlations(
    series: list[JumpSeries] | tuple[JumpSeries, ...],
    timing: str = "contemporaneous",
    min_quarters: int = 4,
    centered: bool = False,
) -> tuple[list[PairCorrelation], list[tuple[str, str, str]]]:
    """Correlations of jump-masked L statistics; returns (pairs, omitted).

    The masked series is L where the big flag is set, else 0. A pair is
    measured over quarters where both MSAs are testable, counting only
    quarters where at least one masked value is nonzero; it needs at least
    ``min_quarters`` such quarters and a positive norm on both sides.
    ``centered`` swaps the cosine for a Pearson correlation over the same
    restricted set (sensitivity variant).
    """
    if timing not in ("contemporaneous", "lead"):
        raise ValueError(f"unknown timing {timing!r}")
    series = list(series)
    ids = [s.msa_id for s in series]
    J, T = _jump_grid(series)
    A = (J != 0.0).astype(float)
    if timing == "contemporaneous":
        JA, TA, AA = J, T, A
        JB, TB, AB = J, T, A
        index_pairs = [(i, j) for i in range(len(ids)) for j in range(i + 1, len(ids))]
    else:
        JA, TA, AA = J[:-1], T[:-1], A[:-1]
        JB, TB, AB = J[1:], T[1:], A[1:]
        index_pairs = [(i, j) for i in range(len(ids)) for j in range(len(ids))]

    # Sums over the restricted set equal sums over the common testable
    # range, because excluded quarters contribute only zeros.
    n_eff = _mm(AA, TB) + _mm(TA, AB) - _mm(AA, AB)
    P = _mm(JA, JB)
    Qa = _mm(JA * JA, TB)
    Qb = _mm(TA, JB * JB)
    with np.errstate(divide="ignore", invalid="ignore"):
        if centered:
            Sa = _mm(JA, TB)
            Sb = _mm(TA, JB)
            cov = P - Sa * Sb / n_eff
            var_a = Qa - Sa**2 / n_eff
            var_b = Qb - Sb**2 / n_eff
            r = cov / np.sqrt(var_a * var_b)
            norm_a, norm_b = var_a, var_b
        else:
            r = P / np.sqrt(Qa * Qb)
            norm_a, norm_b = Qa, Qb
    t = _pair_t(r, n_eff)

    pairs: list[PairCorrelation] = []
    omitted: list[tuple[str, str, str]] = []
    for i, j in index_pairs:
        n = int(n_eff[i, j])
        if n < min_quarters:
            omitted.append((ids[i], ids[j], f"{n} usable quarters < {min_quarters}"))
            continue
        if not (norm_a[i, j] > 0.0 and norm_b[i, j] > 0.0):
            omitted.append((ids[i], ids[j], "degenerate masked series"))
            continue
        pairs.append(
            PairCorrelation(
                msa_i=ids[i],
                msa_j=ids[j],
                kind="jump",
                timing=timing,
                r=float(np.clip(r[i, j], -1.0, 1.0)),
                n_effective=n,
                t_stat=float(t[i, j]),
            )
        )
    return pairs, omitted


def correlation_summary(
    pairs: list[PairCorrelation],
    thresholds=(None, 2.0, 3.0),
) -> list[CorrelationSummary]:
    """Cross-pair moment summaries, one per t-stat threshold filter."""
    if not pairs:
        raise ValueError("no pairs to summarise")
    kind = pairs[0].kind
    timing = pairs[0].timing
    rs = np.array([p.r for p in pairs])
    ts = np.array([p.t_stat for p in pairs])
    out = []
    for thr in thresholds:
        sel = rs if thr is None else rs[ts > thr]
        n = sel.size
        if n == 0:
            out.append(
                CorrelationSummary(kind, timing, thr, 0, *(float("nan"),) * 5)
            )
            continue
        mean = float(sel.mean())
        sigma = float(sel.std())
        t = mean / (sigma / np.sqrt(n)) if sigma > 0 else float("nan")
        out.append(
            CorrelationSummary(
                kind=kind,
                timing=timing,
                threshold=thr,
                n=n,
                mean=mean,
                sigma=sigma,
                t_stat=float(t),
                max=float(sel.max()),
                min=float(sel.min()),
            )
        )
    return out


def cohort_correlation_report(
    pairs: list[PairCorrelation],
    states: Mapping[str, str],
    sig_t: float = 5.0,
) -> list[DivisionRow]:
    """Within-division pair counts, significance shares, and mean r.

    ``states`` maps every MSA id to its state; a pair contributes only to
    the division holding both members, so no pair is double-counted.
    """
    divisions = {m: division_for_state(s) for m, s in states.items()}
    buckets: dict[tuple[str, str, str], list[PairCorrelation]] = {}
    combos = set()
    for p in pairs:
        combos.add((p.kind, p.timing))
        di = divisions[p.msa_i]
        if di == divisions[p.msa_j]:
            buckets.setdefault((di, p.kind, p.timing), []).append(p)
    present = sorted({d for d in divisions.values()}, key=DIVISIONS.index)
    rows = []
    for div in present:
        for kind, timing in sorted(combos):
            members = buckets.get((div, kind, timing), [])
            n = len(members)
            n_sig = sum(1 for p in members if p.t_stat > sig_t)
            rows.append(
                DivisionRow(
                    division=div,
                    kind=kind,
                    timing=timing,
                    n=n,
                    n_significant=n_sig,
                    pct_significant=100.0 * n_sig / n if n else float("nan"),
                    mean_r=float(np.mean([p.r for p in members])) if n else float("nan"),
                )
            )
    return rows
