"""Command-line driver: ingestion -> analysis -> CSV/JSON artifacts.

Commands: ingest, integrate, jumps, correlate, contagion, portfolio, synth,
report, all. Settings merge in precedence order defaults < config file <
environment (HOUSINGRISK_*) < flags. Every command validates its inputs
before writing anything, writes each artifact atomically, and finishes
with a run_manifest.json recording the resolved-config hash and the
SHA-256 of every input and output — no timestamps, so identical runs are
byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .contagion import (
    PRIMARY_CITY_MENU,
    SERIAL_POLICIES,
    boombust_residual,
    contagion_fit,
    contagion_fit_interacted,
)
from .core import (
    QuarterIndex,
    ReturnPanel,
    compute_returns,
    default_factor_transforms,
    parse_quarter,
)
from .correlations import (
    cohort_correlation_report,
    correlation_summary,
    jump_pair_correlations,
    return_pair_correlations,
)
from .errors import ConfigError, HousingRiskError, InsufficientHistoryError
from .integration import beta_average, cohort_average, integrate_panel, integration_summary
from .io import (
    load_factor_table,
    load_hpi_panel,
    load_transform_config,
    write_csv_atomic,
    write_factor_csv,
    write_hpi_csv,
    write_json_atomic,
)
from .jumps import jump_incidence, lm_series
from .portfolio import diversification_series, series_correlation
from .synth import generate_panel, ground_truth_report, scenario_from_json

__all__ = ["RunConfig", "run", "main", "COMMANDS", "ENV_PREFIX"]

COMMANDS = (
    "ingest",
    "integrate",
    "jumps",
    "correlate",
    "contagion",
    "portfolio",
    "synth",
    "report",
    "all",
)

ENV_PREFIX = "HOUSINGRISK_"

INTERACTION_SOURCES = ("coastal", "ca-equal-weighted")

DEFAULT_TIME_COHORTS = {
    "cohort1": "1983:Q4",
    "cohort2": "1989:Q2",
    "cohort3": "1992:Q1",
}

DEFAULT_CA_COASTAL = (
    "Los Angeles",
    "Oakland",
    "Oxnard",
    "San Diego",
    "San Francisco",
    "San Jose",
    "San Luis Obispo",
    "Santa Ana",
    "Santa Barbara",
    "Santa Cruz",
)

DEFAULT_PORTFOLIOS = {
    "us": {"available_from": "1983:Q4"},
    "ca": {"state": "CA", "available_from": "1994:Q4"},
}

DEFAULT_SUB_RANGES = {"2000s": ("2000:Q1", "2009:Q4")}


@dataclass
class RunConfig:
    """Resolved settings for one run; see the README for the file format."""

    hpi: str | None = None
    factors: str | None = None
    transforms: object = None  # path, inline mapping, or None for defaults
    out: str = "out"
    window: int = 20
    bipower_window: int = 20
    prewhiten: bool = True
    serial: str = "auto"
    interaction_residual: str = "coastal"
    seed: int | None = None
    income_as_level: bool = False
    jump_threshold: float = 1.65
    big_threshold: float = 2.0
    pair_sig_t: float = 5.0
    min_overlap: int = 8
    jump_pair_floor: int = 4
    time_cohorts: dict = field(default_factory=lambda: dict(DEFAULT_TIME_COHORTS))
    ca_coastal: tuple = DEFAULT_CA_COASTAL
    contagion_menu: dict | None = None
    portfolios: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_PORTFOLIOS)))
    sub_ranges: dict = field(default_factory=lambda: {k: tuple(v) for k, v in DEFAULT_SUB_RANGES.items()})
    synth_scenario: str | None = None

    def validate(self) -> None:
        problems = []
        for label, path in (
            ("inputs.hpi", self.hpi),
            ("inputs.factors", self.factors),
            ("synth_scenario", self.synth_scenario),
        ):
            if path is not None and not Path(path).is_file():
                problems.append(f"{label}: no such file: {path}")
        if isinstance(self.transforms, str) and not Path(self.transforms).is_file():
            problems.append(f"inputs.transforms: no such file: {self.transforms}")
        for label, value in (
            ("thresholds.jump", self.jump_threshold),
            ("thresholds.big", self.big_threshold),
            ("thresholds.pair_sig_t", self.pair_sig_t),
        ):
            if not value > 0:
                problems.append(f"{label} must be positive, got {value}")
        if self.window < 3:
            problems.append(f"window must be at least 3, got {self.window}")
        if self.serial not in SERIAL_POLICIES:
            problems.append(f"serial must be one of {SERIAL_POLICIES}, got {self.serial!r}")
        if self.interaction_residual not in INTERACTION_SOURCES:
            problems.append(
                f"interaction_residual must be one of {INTERACTION_SOURCES}, "
                f"got {self.interaction_residual!r}"
            )
        if problems:
            raise ConfigError("; ".join(problems))

    def resolved_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["version"] = __version__
        return d


def _apply_config_file(cfg: RunConfig, path: str) -> None:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    inputs = obj.get("inputs", {})
    cfg.hpi = inputs.get("hpi", cfg.hpi)
    cfg.factors = inputs.get("factors", cfg.factors)
    cfg.transforms = inputs.get("transforms", cfg.transforms)
    for key in (
        "out",
        "window",
        "bipower_window",
        "prewhiten",
        "serial",
        "interaction_residual",
        "seed",
        "income_as_level",
        "synth_scenario",
    ):
        if key in obj:
            setattr(cfg, key, obj[key])
    thresholds = obj.get("thresholds", {})
    cfg.jump_threshold = thresholds.get("jump", cfg.jump_threshold)
    cfg.big_threshold = thresholds.get("big", cfg.big_threshold)
    cfg.pair_sig_t = thresholds.get("pair_sig_t", cfg.pair_sig_t)
    pairs = obj.get("pairs", {})
    cfg.min_overlap = pairs.get("min_overlap", cfg.min_overlap)
    cfg.jump_pair_floor = pairs.get("jump_floor", cfg.jump_pair_floor)
    cohorts = obj.get("cohorts", {})
    if "time" in cohorts:
        cfg.time_cohorts = dict(cohorts["time"])
    if "ca_coastal" in cohorts:
        cfg.ca_coastal = tuple(cohorts["ca_coastal"])
    if "contagion" in obj:
        cfg.contagion_menu = {k: list(v) for k, v in obj["contagion"].items()}
    if "portfolios" in obj:
        cfg.portfolios = {k: dict(v) for k, v in obj["portfolios"].items()}
    if "sub_ranges" in obj:
        cfg.sub_ranges = {k: tuple(v) for k, v in obj["sub_ranges"].items()}


def _apply_env(cfg: RunConfig, env) -> None:
    def get(name):
        return env.get(ENV_PREFIX + name)

    if get("OUT"):
        cfg.out = get("OUT")
    if get("WINDOW"):
        cfg.window = int(get("WINDOW"))
    if get("BIPOWER_WINDOW"):
        cfg.bipower_window = int(get("BIPOWER_WINDOW"))
    if get("NO_PREWHITEN"):
        cfg.prewhiten = get("NO_PREWHITEN") in ("0", "false", "no")
    if get("SERIAL"):
        cfg.serial = get("SERIAL")
    if get("INTERACTION_RESIDUAL"):
        cfg.interaction_residual = get("INTERACTION_RESIDUAL")
    if get("SEED"):
        cfg.seed = int(get("SEED"))


def build_config(args, env=None) -> RunConfig:
    """Merge defaults < config file < environment < flags."""
    env = os.environ if env is None else env
    cfg = RunConfig()
    config_path = args.config or env.get(ENV_PREFIX + "CONFIG")
    if config_path:
        _apply_config_file(cfg, config_path)
    _apply_env(cfg, env)
    if args.out is not None:
        cfg.out = args.out
    if args.window is not None:
        cfg.window = args.window
    if args.bipower_window is not None:
        cfg.bipower_window = args.bipower_window
    if args.no_prewhiten:
        cfg.prewhiten = False
    if args.serial is not None:
        cfg.serial = args.serial
    if args.interaction_residual is not None:
        cfg.interaction_residual = args.interaction_residual
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class _Runner:
    """Holds loaded inputs and collects artifact/output bookkeeping."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self._panel = None
        self._factors = None
        self._returns = None
        self._integration = None
        self._jumps = None
        self._contagion = None

    # -- input plumbing ---------------------------------------------------

    def _materialize_synth(self) -> None:
        """Emit synthetic artifacts and point the inputs at them."""
        cfg = self.cfg
        scenario = json.loads(Path(cfg.synth_scenario).read_text(encoding="utf-8"))
        self.inputs[cfg.synth_scenario] = _sha256(Path(cfg.synth_scenario))
        sc = scenario_from_json(scenario)
        if cfg.seed is not None:
            sc = dataclasses.replace(sc, seed=cfg.seed)
        panel, table, truth = generate_panel(sc)
        self.out.mkdir(parents=True, exist_ok=True)
        write_hpi_csv(self.out / "hpi_synth.csv", panel)
        # Raw factor levels exp(f) under an all-log_level transform map load
        # back to exactly the generated factors.
        write_factor_csv(
            self.out / "factors_synth.csv",
            table.factor_ids,
            table.start,
            np.exp(table.values),
        )
        write_json_atomic(
            self.out / "transforms_synth.json",
            {f: "log_level" for f in table.factor_ids},
        )
        write_json_atomic(self.out / "ground_truth.json", ground_truth_report(truth))
        self.outputs += [
            "hpi_synth.csv",
            "factors_synth.csv",
            "transforms_synth.json",
            "ground_truth.json",
        ]
        cfg.hpi = str(self.out / "hpi_synth.csv")
        cfg.factors = str(self.out / "factors_synth.csv")
        cfg.transforms = str(self.out / "transforms_synth.json")

    def load(self) -> None:
        cfg = self.cfg
        if cfg.hpi is None:
            if cfg.synth_scenario is None:
                raise ConfigError(
                    "no inputs: set inputs.hpi/inputs.factors or synth_scenario"
                )
            self._materialize_synth()
        if cfg.factors is None:
            raise ConfigError("inputs.factors is required alongside inputs.hpi")
        hpi_path, fac_path = Path(cfg.hpi), Path(cfg.factors)
        self._panel = load_hpi_panel(hpi_path)
        self.inputs[str(hpi_path)] = _sha256(hpi_path)
        if isinstance(cfg.transforms, dict):
            transforms = dict(cfg.transforms)
        elif isinstance(cfg.transforms, str):
            transforms = load_transform_config(Path(cfg.transforms))
            self.inputs[cfg.transforms] = _sha256(Path(cfg.transforms))
        else:
            transforms = default_factor_transforms(cfg.income_as_level)
        self._factors = load_factor_table(fac_path, transforms)
        self.inputs[str(fac_path)] = _sha256(fac_path)
        self._returns = compute_returns(self._panel)

    @property
    def panel(self):
        return self._panel

    @property
    def returns(self) -> ReturnPanel:
        return self._returns

    @property
    def factors(self):
        return self._factors

    def integration(self):
        if self._integration is None:
            self._integration = integrate_panel(
                self.returns, self.factors, self.cfg.window, self.cfg.prewhiten
            )
        return self._integration

    def jump_series_all(self):
        if self._jumps is None:
            series = []
            skipped = []
            for msa_id in self.returns.msa_ids():
                start, values = self.returns.series(msa_id)
                try:
                    series.append(
                        lm_series(
                            values,
                            self.cfg.bipower_window,
                            msa_id=msa_id,
                            start_code=start.code,
                            jump_threshold=self.cfg.jump_threshold,
                            big_threshold=self.cfg.big_threshold,
                        )
                    )
                except InsufficientHistoryError as exc:
                    skipped.append((msa_id, str(exc)))
            self._jumps = (series, skipped)
        return self._jumps

    # -- cohort helpers ---------------------------------------------------

    def match_names(self, fragments) -> list[str]:
        """MSA ids whose display name contains any fragment (case folded)."""
        hits = []
        for info in self.panel.msas:
            name = info.name.lower()
            if any(f.lower() in name for f in fragments):
                hits.append(info.msa_id)
        return hits

    def state_members(self, state: str) -> list[str]:
        return [m.msa_id for m in self.panel.msas if m.state.upper() == state.upper()]

    def ca_cohorts(self) -> dict[str, list[str]]:
        """us / ca / ca_coastal / ca_inland memberships (empty ones omitted)."""
        out = {"us": self.panel.msa_ids()}
        ca = self.state_members("CA")
        if ca:
            out["ca"] = ca
            coastal = [m for m in self.match_names(self.cfg.ca_coastal) if m in ca]
            if coastal:
                out["ca_coastal"] = coastal
                inland = [m for m in ca if m not in coastal]
                if inland:
                    out["ca_inland"] = inland
        return out

    def write_csv(self, name: str, header, rows) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        write_csv_atomic(self.out / name, header, rows)
        self.outputs.append(name)

    def write_manifest(self, command: str) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        resolved = json.dumps(self.cfg.resolved_dict(), sort_keys=True)
        manifest = {
            "tool": "housingrisk",
            "version": __version__,
            "command": command,
            "config_sha256": hashlib.sha256(resolved.encode()).hexdigest(),
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {
                name: _sha256(self.out / name) for name in sorted(set(self.outputs))
            },
        }
        write_json_atomic(self.out / "run_manifest.json", manifest)


# -- command implementations ---------------------------------------------


def _cmd_ingest(r: _Runner) -> None:
    rows = []
    for info in r.panel.msas:
        first = r.panel.first_quarter(info.msa_id)
        _, values = r.panel.series(info.msa_id)
        rows.append(
            [info.msa_id, info.name, info.state, first, r.panel.end, values.size]
        )
    r.write_csv(
        "panel_summary.csv",
        ["msa_id", "msa_name", "state", "first_quarter", "last_quarter", "n_obs"],
        rows,
    )


def _cmd_integrate(r: _Runner) -> None:
    result = r.integration()
    header = ["msa_id", "quarter", "r_square"]
    if result.series:
        header += [f"beta_{n}" for n in result.series[0].names]
    rows = []
    for s in result.series:
        for w in range(s.n_windows):
            rows.append(
                [s.msa_id, QuarterIndex.from_code(int(s.window_ends[w])), s.r_squares[w]]
                + list(s.betas[w])
            )
    r.write_csv("integration_series.csv", header, rows)

    summary = integration_summary(result.series, r.returns)
    from .integration import CHARACTERISTICS

    sum_header = (
        ["row_type", "key"]
        + list(CHARACTERISTICS)
        + [f"rank_{c}" for c in CHARACTERISTICS]
        + ["note"]
    )
    sum_rows = []
    for m in summary.rows:
        sum_rows.append(
            ["msa", m.msa_id]
            + [m.value(c) for c in CHARACTERISTICS]
            + [summary.ranks[c][m.msa_id] for c in CHARACTERISTICS]
            + [""]
        )
    for stat in ("mean", "sd", "min", "max"):
        sum_rows.append(
            ["cross", stat]
            + [summary.cross[c][stat] for c in CHARACTERISTICS]
            + [""] * len(CHARACTERISTICS)
            + [""]
        )
    for q in range(5):
        sum_rows.append(
            ["quintile_min", f"q{q + 1}"]
            + [summary.quintile_minima[c][q] for c in CHARACTERISTICS]
            + [""] * len(CHARACTERISTICS)
            + [""]
        )
    for msa_id, reason in summary.excluded:
        sum_rows.append(
            ["excluded", msa_id] + [""] * (2 * len(CHARACTERISTICS)) + [reason]
        )
    for msa_id, reason in result.skipped:
        sum_rows.append(
            ["skipped", msa_id] + [""] * (2 * len(CHARACTERISTICS)) + [reason]
        )
    r.write_csv("integration_summary.csv", sum_header, sum_rows)

    # Cohort averages: entry-time cohorts plus the CA coastal/inland split.
    rows = []
    for name, members, start in _cohort_plan(r, result):
        codes, avg = cohort_average(result.series, members, start)
        for c, v in zip(codes, avg):
            rows.append([name, QuarterIndex.from_code(int(c)), v])
    r.write_csv("cohort_averages.csv", ["cohort", "quarter", "avg_r_square"], rows)


def _cohort_plan(r: _Runner, result):
    """(name, members, start) triples for every non-empty cohort."""
    plan = []
    have = {s.msa_id: int(s.window_ends[0]) for s in result.series}
    if have:
        plan.append(("us", sorted(have), None))
    starts = sorted(
        ((name, parse_quarter(q)) for name, q in r.cfg.time_cohorts.items()),
        key=lambda kv: kv[1].code,
    )
    prev_code = None
    for name, start in starts:
        members = [
            m
            for m, first in sorted(have.items())
            if first <= start.code and (prev_code is None or first > prev_code)
        ]
        if members:
            plan.append((name, members, start))
        prev_code = start.code
    cohorts = r.ca_cohorts()
    for name in ("ca_coastal", "ca_inland"):
        members = [m for m in cohorts.get(name, []) if m in have]
        if members:
            plan.append((name, members, None))
    return plan


def _cmd_jumps(r: _Runner) -> None:
    series, skipped = r.jump_series_all()
    rows = []
    for s in series:
        for i in range(s.n_quarters):
            rows.append(
                [
                    s.msa_id,
                    QuarterIndex.from_code(int(s.quarter_codes[i])),
                    s.L[i],
                    s.L_scaled[i],
                    bool(s.jump_flag[i]),
                    bool(s.big_flag[i]),
                    bool(s.testable[i]),
                ]
            )
    r.write_csv(
        "jump_series.csv",
        ["msa_id", "quarter", "L", "L_scaled", "jump_flag", "big_flag", "testable"],
        rows,
    )

    by_id = {s.msa_id: s for s in series}
    rows = []
    for cohort, members in r.ca_cohorts().items():
        chosen = [by_id[m] for m in members if m in by_id]
        if not chosen:
            continue
        codes, pct, flagged, testable = jump_incidence(chosen, flag="big")
        for i in range(codes.size):
            rows.append(
                [
                    cohort,
                    QuarterIndex.from_code(int(codes[i])),
                    pct[i],
                    int(flagged[i]),
                    int(testable[i]),
                ]
            )
    r.write_csv(
        "jump_incidence.csv",
        ["cohort", "quarter", "pct", "n_flagged", "n_testable"],
        rows,
    )


def _pair_sets(r: _Runner):
    sets = []
    for timing in ("contemporaneous", "lead"):
        pairs, _ = return_pair_correlations(r.returns, timing, r.cfg.min_overlap)
        sets.append(pairs)
    series, _ = r.jump_series_all()
    for timing in ("contemporaneous", "lead"):
        pairs, _ = jump_pair_correlations(series, timing, r.cfg.jump_pair_floor)
        sets.append(pairs)
    return sets


def _cmd_correlate(r: _Runner) -> None:
    sets = _pair_sets(r)
    rows = []
    for pairs in sets:
        for p in pairs:
            rows.append([p.msa_i, p.msa_j, p.kind, p.timing, p.r, p.n_effective, p.t_stat])
    r.write_csv(
        "pair_correlations.csv",
        ["msa_i", "msa_j", "kind", "timing", "r", "n", "t"],
        rows,
    )

    rows = []
    for pairs in sets:
        if not pairs:
            continue
        for s in correlation_summary(pairs):
            rows.append(
                [
                    s.kind,
                    s.timing,
                    "none" if s.threshold is None else s.threshold,
                    s.n,
                    s.mean,
                    s.sigma,
                    s.t_stat,
                    s.max,
                    s.min,
                ]
            )
    r.write_csv(
        "correlation_summary.csv",
        ["kind", "timing", "threshold", "n", "mean", "sigma", "t_stat", "max", "min"],
        rows,
    )

    states = {m.msa_id: m.state for m in r.panel.msas if m.state}
    rows = []
    if states:
        all_pairs = [p for pairs in sets for p in pairs if p.msa_i in states and p.msa_j in states]
        for row in cohort_correlation_report(all_pairs, states, r.cfg.pair_sig_t):
            rows.append(
                [
                    row.division,
                    row.kind,
                    row.timing,
                    row.n,
                    row.n_significant,
                    row.pct_significant,
                    row.mean_r,
                ]
            )
    r.write_csv(
        "division_report.csv",
        ["division", "kind", "timing", "n", "n_significant", "pct_significant", "mean_r"],
        rows,
    )


def _resolve_contagion_menu(r: _Runner) -> list[tuple[str, str]]:
    """(source id, target id) pairs for the contagion command.

    Priority: explicit config (ids or name fragments) > default city menu
    matched against MSA names > pairs planted by a synthetic scenario's
    ground truth > a first-vs-next fallback so the artifact always exists.
    """
    ids = set(self_ids := r.panel.msa_ids())

    def resolve_one(ref):
        if ref in ids:
            return [ref]
        return r.match_names([ref])

    pairs = []
    menu = r.cfg.contagion_menu
    if menu is not None:
        for src_ref, targets in menu.items():
            srcs = resolve_one(src_ref)
            if not srcs:
                raise ConfigError(f"contagion source {src_ref!r} matches no MSA")
            for tgt_ref in targets:
                tgts = resolve_one(tgt_ref)
                if not tgts:
                    raise ConfigError(f"contagion target {tgt_ref!r} matches no MSA")
                for s in srcs:
                    for t in tgts:
                        if s != t:
                            pairs.append((s, t))
        return pairs

    for src_ref, targets in PRIMARY_CITY_MENU.items():
        srcs = resolve_one(src_ref)
        for tgt_ref in targets:
            for s in srcs:
                for t in resolve_one(tgt_ref):
                    if s != t:
                        pairs.append((s, t))
    if pairs:
        return pairs

    gt_path = r.out / "ground_truth.json"
    if gt_path.is_file():
        truth = json.loads(gt_path.read_text(encoding="utf-8"))
        for entry in truth.get("contagion", []):
            pairs.append((entry["source"], entry["target"]))
    if pairs:
        return pairs

    ordered = sorted(self_ids)
    return [(ordered[0], t) for t in ordered[1 : min(4, len(ordered))]]


def _interaction_residual(r: _Runner, source_id: str):
    """(quarter codes, residual values) per the configured residual source."""
    if r.cfg.interaction_residual == "coastal":
        first, levels = r.panel.series(source_id)
        resid = boombust_residual(levels)
        codes = np.arange(first.code, first.code + levels.size)
        return codes, resid
    members = r.state_members("CA")
    if not members:
        raise ConfigError(
            "interaction_residual=ca-equal-weighted needs MSAs with state CA"
        )
    from .portfolio import portfolio_returns

    codes, rets, _ = portfolio_returns(r.returns, members)
    levels = np.empty(rets.size + 1)
    levels[0] = 100.0
    levels[1:] = 100.0 * np.exp(np.cumsum(rets) / 100.0)
    resid = boombust_residual(levels)
    return np.concatenate([[codes[0] - 1], codes]), resid


def _contagion_rows(r: _Runner) -> tuple[list[str], list[list]]:
    """Fit every configured source→target pair once; cached on the runner."""
    if r._contagion is not None:
        return r._contagion
    n_lags = 3
    header = ["target", "source", "variant", "n", "method", "rho", "r_square", "dw", "const", "const_t"]
    for l in range(n_lags + 1):
        header += [f"lag{l}", f"lag{l}_t"]
    for l in range(n_lags + 1):
        header += [f"ix_lag{l}", f"ix_lag{l}_t"]
    rows = []
    for source_id, target_id in sorted(
        (s, t) for s, t in _resolve_contagion_menu(r)
    ):
        t_start, t_vals = r.returns.series(target_id)
        s_start, s_vals = r.returns.series(source_id)
        t_codes = np.arange(t_start.code, t_start.code + t_vals.size)
        s_codes = np.arange(s_start.code, s_start.code + s_vals.size)
        common = np.intersect1d(t_codes, s_codes)
        if common.size < n_lags + 8:
            rows.append(
                [target_id, source_id, "skipped", common.size, "insufficient overlap"]
                + [""] * (len(header) - 5)
            )
            continue
        tv = t_vals[np.searchsorted(t_codes, common)]
        sv = s_vals[np.searchsorted(s_codes, common)]
        base = contagion_fit(
            tv, sv, n_lags, r.cfg.serial, target_id=target_id, source_id=source_id
        )
        fits = [base]
        try:
            res_codes, res_vals = _interaction_residual(r, source_id)
        except InsufficientHistoryError:
            res_codes = np.empty(0, dtype=int)
            res_vals = np.empty(0)
        sel = np.searchsorted(res_codes, common) if res_codes.size else np.array([], dtype=int)
        usable = (
            (sel < res_codes.size)
            & (res_codes[np.minimum(sel, max(res_codes.size - 1, 0))] == common)
        ) if res_codes.size else np.zeros(common.size, dtype=bool)
        if usable.size and usable.all():
            fits.append(
                contagion_fit_interacted(
                    tv,
                    sv,
                    res_vals[sel],
                    n_lags,
                    r.cfg.serial,
                    target_id=target_id,
                    source_id=source_id,
                )
            )
        for fit in fits:
            row = [
                fit.target,
                fit.source,
                "interacted" if fit.interacted else "base",
                fit.n_obs,
                fit.method,
                fit.rho if fit.rho is not None else "",
                fit.r_square,
                fit.durbin_watson,
                fit.coefficient("const"),
                fit.t_stat("const"),
            ]
            for l in range(n_lags + 1):
                row += [fit.coefficient(f"lag{l}"), fit.t_stat(f"lag{l}")]
            for l in range(n_lags + 1):
                if fit.interacted:
                    row += [fit.coefficient(f"ix_lag{l}"), fit.t_stat(f"ix_lag{l}")]
                else:
                    row += ["", ""]
            rows.append(row)
    r._contagion = (header, rows)
    return header, rows


def _cmd_contagion(r: _Runner) -> None:
    header, rows = _contagion_rows(r)
    r.write_csv("contagion_fits.csv", header, rows)


def _portfolio_members(r: _Runner, spec: dict) -> list[str]:
    if "members" in spec:
        return sorted(spec["members"])
    members = r.returns.msa_ids()
    if "state" in spec:
        members = [m for m in members if r.panel.info(m).state.upper() == spec["state"].upper()]
    if "available_from" in spec:
        from_q = parse_quarter(spec["available_from"])
        members = [
            m for m in members if r.returns.first_quarter(m).code <= from_q.code
        ]
    return sorted(members)


def _cmd_portfolio(r: _Runner) -> None:
    result = r.integration()
    rows = []
    corr_rows = []
    for name, spec in sorted(r.cfg.portfolios.items()):
        members = _portfolio_members(r, spec)
        if len(members) == 0:
            continue
        try:
            ps = diversification_series(r.returns, members, r.cfg.window)
        except (InsufficientHistoryError, ValueError):
            continue
        sigma_at = {int(c): i for i, c in enumerate(ps.sigma_codes)}
        for i, code in enumerate(ps.return_codes):
            code = int(code)
            j = sigma_at.get(code)
            rows.append(
                [
                    name,
                    QuarterIndex.from_code(code),
                    ps.returns[i],
                    ps.portfolio_sigma[j] if j is not None else "",
                    ps.avg_member_sigma[j] if j is not None else "",
                    ps.diversification[j] if j is not None else "",
                ]
            )
        have = {s.msa_id for s in result.series}
        int_members = [m for m in members if m in have]
        if not int_members:
            continue
        codes, avg_r2 = cohort_average(result.series, int_members)
        ranges: list[tuple[str, QuarterIndex | None, QuarterIndex | None]] = [
            ("full", None, None)
        ]
        for rng_name, (lo, hi) in sorted(r.cfg.sub_ranges.items()):
            ranges.append((rng_name, parse_quarter(lo), parse_quarter(hi)))
        for rng_name, lo, hi in ranges:
            for series_b, vals_b in (
                ("port_sigma", ps.portfolio_sigma),
                ("diversification", ps.diversification),
            ):
                try:
                    rho, n = series_correlation(
                        codes, avg_r2, ps.sigma_codes, vals_b, lo, hi
                    )
                except InsufficientHistoryError:
                    continue
                corr_rows.append([name, "integration", series_b, rng_name, rho, n])
    r.write_csv(
        "portfolio_series.csv",
        ["portfolio", "quarter", "port_return", "port_sigma", "avg_member_sigma", "diversification"],
        rows,
    )
    r.write_csv(
        "series_correlations.csv",
        ["portfolio", "series_a", "series_b", "range", "r", "n"],
        corr_rows,
    )


def _cmd_synth(r: _Runner) -> None:
    if r.cfg.synth_scenario is None:
        raise ConfigError("synth needs a synth_scenario in the config")
    r._materialize_synth()


def _cmd_report(r: _Runner) -> None:
    result = r.integration()
    summary = integration_summary(result.series, r.returns)
    from .integration import CHARACTERISTICS

    rows = []
    for m in summary.rows:
        rows.append(
            [m.msa_id]
            + [m.value(c) for c in CHARACTERISTICS]
            + [summary.ranks[c][m.msa_id] for c in CHARACTERISTICS]
        )
    r.write_csv(
        "table1.csv",
        ["msa_id"] + list(CHARACTERISTICS) + [f"rank_{c}" for c in CHARACTERISTICS],
        rows,
    )
    rows = [
        [m.msa_id, m.trend_t_stat, summary.ranks["trend_t_stat"][m.msa_id]]
        for m in sorted(summary.rows, key=lambda m: summary.ranks["trend_t_stat"][m.msa_id])
    ]
    r.write_csv("table2.csv", ["msa_id", "trend_t_stat", "rank"], rows)

    sets = _pair_sets(r)
    rows = []
    for pairs in sets:
        if not pairs:
            continue
        for s in correlation_summary(pairs):
            rows.append(
                [
                    s.kind,
                    s.timing,
                    "none" if s.threshold is None else s.threshold,
                    s.n,
                    s.mean,
                    s.sigma,
                    s.t_stat,
                    s.max,
                    s.min,
                ]
            )
    r.write_csv(
        "table3.csv",
        ["kind", "timing", "threshold", "n", "mean", "sigma", "t_stat", "max", "min"],
        rows,
    )
    states = {m.msa_id: m.state for m in r.panel.msas if m.state}
    rows = []
    if states:
        all_pairs = [p for pairs in sets for p in pairs if p.msa_i in states and p.msa_j in states]
        for row in cohort_correlation_report(all_pairs, states, r.cfg.pair_sig_t):
            rows.append(
                [row.division, row.kind, row.timing, row.n, row.n_significant, row.pct_significant, row.mean_r]
            )
    r.write_csv(
        "table4.csv",
        ["division", "kind", "timing", "n", "n_significant", "pct_significant", "mean_r"],
        rows,
    )

    # Figure-shaped long-format data.
    rows = []
    for name, members, start in _cohort_plan(r, result):
        codes, avg = cohort_average(result.series, members, start)
        for c, v in zip(codes, avg):
            rows.append([name, QuarterIndex.from_code(int(c)), v])
    r.write_csv("fig2.csv", ["series", "quarter", "value"], rows)

    rows = []
    if result.series:
        for factor_id in result.series[0].names:
            if factor_id == "const":
                continue
            codes, avg = beta_average(result.series, factor_id)
            for c, v in zip(codes, avg):
                rows.append([factor_id, QuarterIndex.from_code(int(c)), v])
    r.write_csv("fig3.csv", ["series", "quarter", "value"], rows)

    series, _ = r.jump_series_all()
    by_id = {s.msa_id: s for s in series}
    rows = []
    for cohort, members in r.ca_cohorts().items():
        chosen = [by_id[m] for m in members if m in by_id]
        if not chosen:
            continue
        codes, pct, _, _ = jump_incidence(chosen, flag="big")
        for c, v in zip(codes, pct):
            rows.append([cohort, QuarterIndex.from_code(int(c)), v])
    r.write_csv("fig4.csv", ["series", "quarter", "value"], rows)

    rows = []
    have = {s.msa_id for s in result.series}
    for name, spec in sorted(r.cfg.portfolios.items()):
        members = _portfolio_members(r, spec)
        if not members:
            continue
        try:
            ps = diversification_series(r.returns, members, r.cfg.window)
        except (InsufficientHistoryError, ValueError):
            continue
        for c, v in zip(ps.sigma_codes, ps.portfolio_sigma):
            rows.append([f"{name}_sigma", QuarterIndex.from_code(int(c)), v])
        for c, v in zip(ps.sigma_codes, ps.diversification):
            rows.append([f"{name}_diversification", QuarterIndex.from_code(int(c)), v])
        int_members = [m for m in members if m in have]
        if int_members:
            codes, avg_r2 = cohort_average(result.series, int_members)
            for c, v in zip(codes, avg_r2):
                rows.append([f"{name}_integration", QuarterIndex.from_code(int(c)), v])
    r.write_csv("fig5.csv", ["series", "quarter", "value"], rows)

    header, all_rows = _contagion_rows(r)
    keep = [i for i, name in enumerate(header) if name != "variant" and not name.startswith("ix_")]
    r.write_csv(
        "table5.csv",
        [header[i] for i in keep],
        [[row[i] for i in keep] for row in all_rows if row[2] == "base"],
    )
    keep = [i for i, name in enumerate(header) if name != "variant"]
    r.write_csv(
        "table6.csv",
        [header[i] for i in keep],
        [[row[i] for i in keep] for row in all_rows if row[2] == "interacted"],
    )


def run(command: str, cfg: RunConfig) -> int:
    """Execute one command; returns the exit status (artifacts in cfg.out)."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")
    cfg.validate()
    runner = _Runner(cfg)
    if command == "synth":
        _cmd_synth(runner)
        runner.write_manifest(command)
        return 0
    runner.load()
    steps = {
        "ingest": (_cmd_ingest,),
        "integrate": (_cmd_integrate,),
        "jumps": (_cmd_jumps,),
        "correlate": (_cmd_correlate,),
        "contagion": (_cmd_contagion,),
        "portfolio": (_cmd_portfolio,),
        "report": (_cmd_report,),
        "all": (
            _cmd_ingest,
            _cmd_integrate,
            _cmd_jumps,
            _cmd_correlate,
            _cmd_contagion,
            _cmd_portfolio,
            _cmd_report,
        ),
    }[command]
    for step in steps:
        step(runner)
    runner.write_manifest(command)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="housingrisk",
        description="Housing-market integration, jump, contagion, and "
        "diversification analytics over quarterly HPI panels.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run-config path")
    common.add_argument("--out", help="output directory")
    common.add_argument("--window", type=int, help="rolling regression window (quarters)")
    common.add_argument(
        "--bipower-window", type=int, help="trailing window for bipower variation"
    )
    common.add_argument(
        "--no-prewhiten",
        action="store_true",
        help="feed raw returns to the factor model instead of AR(1) residuals",
    )
    common.add_argument("--serial", choices=SERIAL_POLICIES, help="serial-correlation policy")
    common.add_argument(
        "--interaction-residual",
        choices=INTERACTION_SOURCES,
        help="boom/bust residual source for interacted contagion fits",
    )
    common.add_argument("--seed", type=int, help="override the scenario seed")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return run(args.command, cfg)
    except HousingRiskError as exc:
        print(f"housingrisk: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"housingrisk: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
