"""Synthetic panel generator with known ground truth.

Scenarios plant a factor structure, AR(1) idiosyncratic noise, jumps, and
lagged contagion into a return panel, then cumulate index levels from a
base of 100. The generator draws from numpy's default_rng (PCG64) in a
fixed, documented order — factors, then pre-sample AR states, then one
innovation block — so a seed pins every byte of output. The closed-form
signal share per MSA (explained over total stationary variance) is the
oracle for the integration estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .core import FactorTable, IndexPanel, LOG_LEVEL, MsaInfo, QuarterIndex, parse_quarter
from .errors import ConfigError

__all__ = [
    "JumpPlan",
    "ContagionPlan",
    "ScenarioConfig",
    "GroundTruth",
    "generate_panel",
    "ground_truth_report",
    "loading_for_signal_share",
    "scenario_from_json",
    "default_states",
]

# Cycled through for synthetic MSA states so division reports have
# something to chew on without extra configuration.
_DEFAULT_STATES = ("CA", "TX", "NY", "FL", "IL", "WA", "MA", "CO", "GA", "MN")


def default_states(n: int) -> tuple[str, ...]:
    return tuple(_DEFAULT_STATES[i % len(_DEFAULT_STATES)] for i in range(n))


@dataclass(frozen=True)
class JumpPlan:
    """One planted jump: ``quarter`` is a 0-based return-quarter offset or a
    QuarterIndex; ``magnitude`` is in stationary idiosyncratic-sigma units."""

    quarter: int | QuarterIndex
    msas: tuple
    magnitude: float


@dataclass(frozen=True)
class ContagionPlan:
    """Adds sum_l weights[l] * base_return[t - l, source] to the target."""

    source: int | str
    target: int | str
    weights: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    n_msas: int
    n_quarters: int
    n_factors: int
    loadings: object = 0.0  # scalar, (n_factors,), (n_msas, n_factors), or a full (n_quarters, n_msas, n_factors) path
    idio_sigma: object = 1.0  # scalar or per-MSA
    phi: object = 0.0  # scalar or per-MSA
    mu: object = 0.0  # scalar or per-MSA drift
    jumps: tuple[JumpPlan, ...] = ()
    contagion: tuple[ContagionPlan, ...] = ()
    seed: int = 0
    start: QuarterIndex = field(default_factory=lambda: QuarterIndex(1980, 1))
    states: tuple[str, ...] | None = None

    def msa_ids(self) -> tuple[str, ...]:
        return tuple(f"S{i + 1:03d}" for i in range(self.n_msas))


@dataclass(frozen=True)
class GroundTruth:
    """What the generator planted, in closed form, for test harnesses."""

    msa_ids: tuple[str, ...]
    signal_share: np.ndarray
    jumps: tuple[tuple[str, int, float], ...]  # (msa_id, quarter code, magnitude)
    contagion: tuple[tuple[str, str, tuple[float, ...]], ...]

    def jump_quarters(self, msa_id: str) -> list[int]:
        return [code for m, code, _ in self.jumps if m == msa_id]


def loading_for_signal_share(
    share: float, n_factors: int, idio_sigma: float, phi: float = 0.0
) -> float:
    """Uniform per-factor loading giving the requested signal share."""
    if not 0.0 <= share < 1.0:
        raise ValueError("share must be in [0, 1)")
    idio_var = idio_sigma**2 / (1.0 - phi**2)
    return float(np.sqrt(share / (1.0 - share) * idio_var / n_factors))


def _per_msa(value, n: int, name: str, problems: list[str]) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        problems.append(f"{name} must be a scalar or length-{n}, got shape {arr.shape}")
        return np.zeros(n)
    return arr.copy()


def _resolve_msa(ref, ids: tuple[str, ...], problems: list[str], context: str) -> int:
    if isinstance(ref, (int, np.integer)):
        if 0 <= int(ref) < len(ids):
            return int(ref)
        problems.append(f"{context}: MSA index {ref} out of range")
        return 0
    try:
        return ids.index(ref)
    except ValueError:
        problems.append(f"{context}: unknown MSA {ref!r}")
        return 0


def _normalize(config: ScenarioConfig):
    """Validate the config, collecting every problem before raising."""
    problems: list[str] = []
    if config.n_msas < 1:
        problems.append("n_msas must be >= 1")
    if config.n_quarters < 2:
        problems.append("n_quarters must be >= 2")
    if config.n_factors < 0:
        problems.append("n_factors must be >= 0")
    if problems:
        raise ConfigError("invalid scenario: " + "; ".join(problems))

    n_m, n_q, n_f = config.n_msas, config.n_quarters, config.n_factors
    ids = config.msa_ids()

    L = np.asarray(config.loadings, dtype=float)
    if L.ndim == 0:
        L = np.full((n_m, n_f), float(L))
    elif L.ndim == 1 and L.shape == (n_f,):
        L = np.tile(L, (n_m, 1))
    elif L.ndim == 2 and L.shape == (n_m, n_f):
        pass
    elif L.ndim == 3 and L.shape == (n_q, n_m, n_f):
        pass
    else:
        problems.append(
            f"loadings shape {L.shape} fits neither ({n_m}, {n_f}) nor "
            f"({n_q}, {n_m}, {n_f})"
        )
        L = np.zeros((n_m, n_f))

    sigma = _per_msa(config.idio_sigma, n_m, "idio_sigma", problems)
    if np.any(sigma < 0):
        problems.append("idio_sigma must be non-negative")
    phi = _per_msa(config.phi, n_m, "phi", problems)
    if np.any(np.abs(phi) >= 1.0):
        problems.append("phi must satisfy |phi| < 1")
    mu = _per_msa(config.mu, n_m, "mu", problems)

    states = config.states if config.states is not None else default_states(n_m)
    if len(states) != n_m:
        problems.append(f"states must have {n_m} entries, got {len(states)}")

    jumps = []
    for p in config.jumps:
        if isinstance(p.quarter, QuarterIndex):
            q = p.quarter.code - (config.start.code + 1)
        else:
            q = int(p.quarter)
        if not 0 <= q < n_q:
            problems.append(f"jump quarter {p.quarter} outside the return range")
            continue
        idx = [_resolve_msa(m, ids, problems, "jump plan") for m in p.msas]
        jumps.append((q, tuple(idx), float(p.magnitude)))

    contagion = []
    for p in config.contagion:
        src = _resolve_msa(p.source, ids, problems, "contagion plan")
        tgt = _resolve_msa(p.target, ids, problems, "contagion plan")
        if src == tgt:
            problems.append(f"contagion plan maps {ids[src]} onto itself")
        if not 1 <= len(p.weights) <= n_q:
            problems.append("contagion weights must have between 1 and n_quarters entries")
        contagion.append((src, tgt, tuple(float(w) for w in p.weights)))

    if problems:
        raise ConfigError("invalid scenario: " + "; ".join(problems))
    return L, sigma, phi, mu, tuple(states), jumps, contagion


def _signal_share(L: np.ndarray, sigma: np.ndarray, phi: np.ndarray) -> np.ndarray:
    if L.ndim == 3:
        sig_var = (L**2).sum(axis=2).mean(axis=0)
    else:
        sig_var = (L**2).sum(axis=1)
    idio_var = sigma**2 / (1.0 - phi**2)
    total = sig_var + idio_var
    with np.errstate(invalid="ignore"):
        share = np.where(total > 0, sig_var / np.where(total > 0, total, 1.0), 0.0)
    return share


def generate_panel(config: ScenarioConfig) -> tuple[IndexPanel, FactorTable, GroundTruth]:
    """Build (IndexPanel, FactorTable, GroundTruth) from a scenario.

    Returns start one quarter after ``config.start`` (the level base
    quarter); the factor table is aligned to return quarters. Contagion
    weights are applied to the source's base returns (factors + noise +
    jumps), so chained plans never feed back.
    """
    L, sigma, phi, mu, states, jumps, contagion = _normalize(config)
    n_m, n_q, n_f = config.n_msas, config.n_quarters, config.n_factors
    ids = config.msa_ids()

    rng = np.random.default_rng(config.seed)
    F = rng.standard_normal((n_q, n_f))
    pre = rng.standard_normal(n_m)
    eta = rng.standard_normal((n_q, n_m))

    stat_sd = sigma / np.sqrt(1.0 - phi**2)
    idio = np.empty((n_q, n_m))
    for i in range(n_m):
        innov = sigma[i] * eta[:, i]
        if phi[i] == 0.0:
            idio[:, i] = innov
        else:
            # AR(1) started from its stationary distribution.
            e_pre = stat_sd[i] * pre[i]
            idio[:, i] = lfilter(
                [1.0], [1.0, -phi[i]], innov, zi=np.array([phi[i] * e_pre])
            )[0]

    if L.ndim == 3:
        common = np.einsum("tif,tf->ti", L, F, optimize=False)
    else:
        common = np.einsum("if,tf->ti", L, F, optimize=False)
    base = common + idio + mu[None, :]

    for q, idx, mag in jumps:
        for i in idx:
            base[q, i] += mag * stat_sd[i]

    returns = base.copy()
    for src, tgt, weights in contagion:
        for lag, w in enumerate(weights):
            returns[lag:, tgt] += w * base[: n_q - lag, src]

    levels = np.empty((n_q + 1, n_m))
    levels[0] = 100.0
    levels[1:] = 100.0 * np.exp(np.cumsum(returns, axis=0) / 100.0)

    infos = tuple(MsaInfo(ids[i], ids[i], states[i]) for i in range(n_m))
    panel = IndexPanel(infos, config.start, levels)
    factor_ids = tuple(f"F{k + 1:02d}" for k in range(n_f))
    table = FactorTable(
        factor_ids,
        config.start + 1,
        F.copy(),
        transforms={f: LOG_LEVEL for f in factor_ids},
    )
    truth = GroundTruth(
        msa_ids=ids,
        signal_share=_signal_share(L, sigma, phi),
        jumps=tuple(
            (ids[i], config.start.code + 1 + q, mag)
            for q, idx, mag in jumps
            for i in idx
        ),
        contagion=tuple((ids[s], ids[t], w) for s, t, w in contagion),
    )
    return panel, table, truth


def ground_truth_report(truth: GroundTruth) -> dict:
    """JSON-ready table of planted quantities."""
    return {
        "signal_share": {
            m: float(s) for m, s in zip(truth.msa_ids, truth.signal_share)
        },
        "jumps": [
            {
                "msa_id": m,
                "quarter": str(QuarterIndex.from_code(code)),
                "magnitude": mag,
            }
            for m, code, mag in truth.jumps
        ],
        "contagion": [
            {"source": s, "target": t, "weights": list(w)}
            for s, t, w in truth.contagion
        ],
    }


def scenario_from_json(obj: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a parsed JSON scenario file.

    ``loadings`` may be a number, a nested list, or {"kind": "ramp",
    "start": a, "end": b} for a loading that rises linearly over the sample
    (the rising-integration emulation).
    """
    if not isinstance(obj, dict):
        raise ConfigError("scenario file must hold a JSON object")
    required = ("n_msas", "n_quarters", "n_factors")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(f"scenario is missing: {', '.join(missing)}")
    n_m = int(obj["n_msas"])
    n_q = int(obj["n_quarters"])
    n_f = int(obj["n_factors"])

    loadings = obj.get("loadings", 0.0)
    if isinstance(loadings, dict):
        if loadings.get("kind") != "ramp":
            raise ConfigError(f"unknown loadings spec: {loadings!r}")
        a = float(loadings["start"])
        b = float(loadings["end"])
        ramp = a + (b - a) * np.arange(n_q) / max(n_q - 1, 1)
        loadings = np.broadcast_to(
            ramp[:, None, None], (n_q, n_m, n_f)
        ).copy()

    jumps = tuple(
        JumpPlan(
            quarter=(
                parse_quarter(j["quarter"])
                if isinstance(j["quarter"], str)
                else int(j["quarter"])
            ),
            msas=tuple(j["msas"]),
            magnitude=float(j["magnitude"]),
        )
        for j in obj.get("jumps", ())
    )
    contagion = tuple(
        ContagionPlan(
            source=c["source"], target=c["target"],
            weights=tuple(float(w) for w in c["weights"]),
        )
        for c in obj.get("contagion", ())
    )
    return ScenarioConfig(
        n_msas=n_m,
        n_quarters=n_q,
        n_factors=n_f,
        loadings=loadings,
        idio_sigma=obj.get("idio_sigma", 1.0),
        phi=obj.get("phi", 0.0),
        mu=obj.get("mu", 0.0),
        jumps=jumps,
        contagion=contagion,
        seed=int(obj.get("seed", 0)),
        start=(
            parse_quarter(obj["start"])
            if isinstance(obj.get("start"), str)
            else QuarterIndex(1980, 1)
        ),
        states=tuple(obj["states"]) if "states" in obj else None,
    )
