"""Experiment configuration, sweep drivers, and artifact output.

Configs are flat INI files with [scenario], [montecarlo], [detectors] and
[sweep] sections; unknown sections or keys are hard errors.  Every sweep
writes one UTF-8 CSV whose leading '#' lines echo the full configuration and
a hash of it, so a result file pins down exactly what produced it.  Output is
byte-stable for a fixed (config, seed, code version); wall-clock timestamps
are deliberately kept out of the payload and belong to the run log.
"""
from __future__ import annotations

import configparser
import hashlib
import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, stats as sp_stats

from . import __version__
from .analytic import (AnalyticParams, esnr_params, has_analytic,
                       invert_threshold, pd_for, pdf_beta_h0, pdf_beta_h1,
                       pfa_for, _cdf_glrt_central_array)
from .detectors import (DetectorKind, DetectorSpec, statistic_values,
                        sufficient_pair, sufficient_pair_reference)
from .errors import ConfigError
from .montecarlo import (STREAM_H0, binomial_se, empirical_threshold,
                         simulate_pairs)
from .scenario import Scenario, make_scenario, mismatch_metrics, sample_batch

log = logging.getLogger("twabort")

_DEFAULT_DETECTORS = ("glrt-i", "2s-glrt-i", "abort-i", "w-abort-i",
                      "tw-abort-i:0.8", "tw-abort-i:2.5")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs; field defaults give the reference setup."""
    n: int = 12
    l: int = 24
    p: int = 1
    q: int = 2
    eps: float = 0.9
    snr_db: float = 17.0
    inr_db: float = 10.0
    sin2psi: float = 0.8
    cos2theta: float = 1.0
    scenario_seed: int = 20190824
    trials_threshold: int = 100_000
    trials_pd: int = 10_000
    pfa_target: float = 1e-3
    base_seed: int = 1
    workers: int = 1
    detectors: tuple[str, ...] = _DEFAULT_DETECTORS
    snr_grid: tuple[float, ...] = tuple(float(v) for v in range(0, 31, 2))
    sin2psi_grid: tuple[float, ...] = tuple(round(0.1 * k, 10) for k in range(1, 11))
    kappa_grid: tuple[float, ...] = tuple(round(0.25 * k, 10) for k in range(0, 13))
    cos2theta_values: tuple[float, ...] = (0.3, 1.0)
    cos2theta_grid: tuple[float, ...] = tuple(round(0.1 * k, 10) for k in range(0, 11))

    def detector_specs(self) -> tuple[DetectorSpec, ...]:
        return tuple(DetectorSpec.parse(text) for text in self.detectors)


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


_GRID_KEYS = {"snr_grid", "sin2psi_grid", "kappa_grid", "cos2theta_values", "cos2theta_grid"}

_SCHEMA: dict[str, dict[str, str]] = {
    "scenario": {"n": "int", "l": "int", "p": "int", "q": "int", "eps": "float",
                 "snr_db": "float", "inr_db": "float", "sin2psi": "float",
                 "cos2theta": "float", "seed": "int"},
    "montecarlo": {"trials_threshold": "int", "trials_pd": "int", "pfa": "float",
                   "seed": "int", "workers": "int"},
    "detectors": {"list": "detectors"},
    "sweep": {key: "grid" for key in _GRID_KEYS},
}

_FIELD_OF = {
    ("scenario", "seed"): "scenario_seed",
    ("montecarlo", "pfa"): "pfa_target",
    ("montecarlo", "seed"): "base_seed",
    ("detectors", "list"): "detectors",
}


def parse_grid(text: str) -> tuple[float, ...]:
    """Parse 'lo:hi:step' (inclusive endpoints) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid must be lo:hi:step or a comma list, got {text!r}")
        lo, hi, step = (float(v) for v in parts)
        if step <= 0 or hi < lo:
            raise ConfigError(f"grid {text!r} must have positive step and hi >= lo")
        count = int(round((hi - lo) / step))
        values = tuple(round(lo + k * step, 12) for k in range(count + 1))
        if values[-1] > hi + 1e-12:
            values = values[:-1]
        return values
    return tuple(float(v) for v in text.split(","))


def _find_line(path: str, section: str, key: str) -> int | None:
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError:
        return None
    current = None
    for idx, line in enumerate(lines, start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip().lower()
        elif current == section and stripped.lower().startswith(key.lower()):
            after = stripped[len(key):].lstrip()
            if after.startswith("=") or after.startswith(":"):
                return idx
    return None


def load_config(path: str) -> ExperimentConfig:
    """Parse and schema-check an experiment config file."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    updates: dict[str, object] = {}
    for section in parser.sections():
        sec = section.lower()
        if sec not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            kind = _SCHEMA[sec].get(key.lower())
            if kind is None:
                line = _find_line(path, sec, key)
                where = f"{path}:{line}" if line else path
                raise ConfigError(f"{where}: unknown key {key!r} in section [{section}]")
            field_name = _FIELD_OF.get((sec, key.lower()), key.lower())
            try:
                if kind == "int":
                    updates[field_name] = int(raw)
                elif kind == "float":
                    updates[field_name] = float(raw)
                elif kind == "grid":
                    updates[field_name] = parse_grid(raw)
                elif kind == "detectors":
                    specs = tuple(part.strip() for part in raw.split(",") if part.strip())
                    for text in specs:
                        DetectorSpec.parse(text)  # fail fast on typos
                    updates[field_name] = specs
            except (ValueError, ConfigError) as exc:
                line = _find_line(path, sec, key)
                where = f"{path}:{line}" if line else path
                raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from exc
    cfg = replace(default_config(), **updates)
    _check_config(cfg)
    return cfg


def _check_config(cfg: ExperimentConfig) -> None:
    if not 0.0 < cfg.pfa_target < 1.0:
        raise ConfigError(f"pfa must lie in (0, 1), got {cfg.pfa_target}")
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")
    if not 0.0 < cfg.sin2psi <= 1.0:
        raise ConfigError("scenario sin2psi must lie in (0, 1]")
    if any(not 0.0 < v <= 1.0 for v in cfg.sin2psi_grid):
        raise ConfigError("sin2psi grid values must lie in (0, 1]; the mismatch "
                          "angle is undefined for a signal inside the interference span")
    if any(k < 0.0 for k in cfg.kappa_grid):
        raise ConfigError("kappa grid values must be nonnegative")
    for key in sorted(_GRID_KEYS):
        grid = getattr(cfg, key)
        if len(grid) == 0:
            raise ConfigError(f"{key} must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"{key} must be strictly increasing, got {grid}")
    cfg.detector_specs()


def _base_scenario(cfg: ExperimentConfig, **overrides) -> Scenario:
    kwargs = dict(n=cfg.n, l=cfg.l, p=cfg.p, q=cfg.q, eps=cfg.eps, snr_db=cfg.snr_db,
                  inr_db=cfg.inr_db, sin2psi=cfg.sin2psi, cos2theta=cfg.cos2theta,
                  seed=cfg.scenario_seed)
    kwargs.update(overrides)
    return make_scenario(**kwargs)


def config_items(cfg: ExperimentConfig, command: str) -> tuple[tuple[str, str], ...]:
    """Canonical flat echo of the configuration, for CSV headers and hashing."""
    def fmt_grid(values):
        return ", ".join(f"{v:g}" for v in values)
    return (
        ("artifact", f"twabort {__version__}"),
        ("command", command),
        ("scenario.n", str(cfg.n)),
        ("scenario.l", str(cfg.l)),
        ("scenario.p", str(cfg.p)),
        ("scenario.q", str(cfg.q)),
        ("scenario.eps", f"{cfg.eps:g}"),
        ("scenario.snr_db", f"{cfg.snr_db:g}"),
        ("scenario.inr_db", f"{cfg.inr_db:g}"),
        ("scenario.sin2psi", f"{cfg.sin2psi:g}"),
        ("scenario.cos2theta", f"{cfg.cos2theta:g}"),
        ("scenario.seed", str(cfg.scenario_seed)),
        ("montecarlo.trials_threshold", str(cfg.trials_threshold)),
        ("montecarlo.trials_pd", str(cfg.trials_pd)),
        ("montecarlo.pfa", f"{cfg.pfa_target:g}"),
        ("montecarlo.seed", str(cfg.base_seed)),
        ("montecarlo.workers", str(cfg.workers)),
        ("detectors.list", ", ".join(cfg.detectors)),
        ("sweep.snr_grid", fmt_grid(cfg.snr_grid)),
        ("sweep.sin2psi_grid", fmt_grid(cfg.sin2psi_grid)),
        ("sweep.kappa_grid", fmt_grid(cfg.kappa_grid)),
        ("sweep.cos2theta_values", fmt_grid(cfg.cos2theta_values)),
        ("sweep.cos2theta_grid", fmt_grid(cfg.cos2theta_grid)),
    )


def _config_hash(items) -> str:
    body = "\n".join(f"{k} = {v}" for k, v in items)
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CurveResult:
    """A sweep outcome: ordered metadata echo plus tabular rows."""
    command: str
    meta: tuple[tuple[str, str], ...]
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def to_csv(self) -> str:
        lines = [f"# {key} = {value}" for key, value in self.meta]
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(_format_cell(cell) for cell in row))
        return "\n".join(lines) + "\n"


def _format_cell(cell) -> str:
    if cell is None:
        return ""
    if isinstance(cell, str):
        return cell
    return f"{float(cell):.8e}"


def _make_result(cfg: ExperimentConfig, command: str, columns, rows) -> CurveResult:
    items = config_items(cfg, command)
    meta = (("config_hash", _config_hash(items)),) + items
    return CurveResult(command=command, meta=meta, columns=tuple(columns), rows=tuple(rows))


def _thresholds(cfg: ExperimentConfig, h0_pairs, specs) -> tuple[dict, dict]:
    """Empirical and (where available) analytic thresholds per detector."""
    central = AnalyticParams(n=cfg.n, l=cfg.l, p=cfg.p, q=cfg.q)
    thr_mc, thr_an = {}, {}
    for det in specs:
        thr_mc[det] = empirical_threshold(h0_pairs.statistics(det), cfg.pfa_target)
        thr_an[det] = invert_threshold(det, cfg.pfa_target, central) if has_analytic(det) else None
    return thr_mc, thr_an


_SWEEP_COLUMNS = ("pd_analytic", "pd_mc", "pd_mc_se", "threshold_analytic", "threshold_mc")


def _point_rows(cfg, specs, h1_pairs, params, thr_mc, thr_an, prefix) -> list[tuple]:
    rows = []
    for det in specs:
        stats = h1_pairs.statistics(det)
        pd_mc = float(np.mean(stats > thr_mc[det]))
        pd_an = pd_for(det, thr_an[det], params) if thr_an[det] is not None else None
        rows.append(prefix + (det.label, pd_an, pd_mc,
                              binomial_se(pd_mc, len(stats)), thr_an[det], thr_mc[det]))
    return rows


def run_sweep_snr(cfg: ExperimentConfig) -> CurveResult:
    """Detection probability versus SNR at fixed geometry (one threshold set)."""
    specs = cfg.detector_specs()
    scenario = _base_scenario(cfg)
    log.info("sweep-snr: calibrating thresholds from %d null trials", cfg.trials_threshold)
    h0 = simulate_pairs(scenario, "H0", cfg.trials_threshold, cfg.base_seed,
                        STREAM_H0, workers=cfg.workers)
    thr_mc, thr_an = _thresholds(cfg, h0, specs)
    rows = []
    for i, snr in enumerate(cfg.snr_grid):
        point = scenario.with_snr(snr)
        params = esnr_params(point)
        h1 = simulate_pairs(point, "H1", cfg.trials_pd, cfg.base_seed, 1 + i,
                            workers=cfg.workers)
        rows.extend(_point_rows(cfg, specs, h1, params, thr_mc, thr_an, (snr,)))
        log.info("sweep-snr: snr=%g dB done", snr)
    return _make_result(cfg, "sweep-snr", ("snr_db", "detector") + _SWEEP_COLUMNS, rows)


def run_sweep_sin2psi(cfg: ExperimentConfig) -> CurveResult:
    """Detection probability versus the interference-rejection angle.

    The null law of every statistic depends only on (n, l, p, q), so one
    threshold calibration serves every grid point.
    """
    specs = cfg.detector_specs()
    first = _base_scenario(cfg, sin2psi=cfg.sin2psi_grid[0])
    h0 = simulate_pairs(first, "H0", cfg.trials_threshold, cfg.base_seed,
                        STREAM_H0, workers=cfg.workers)
    thr_mc, thr_an = _thresholds(cfg, h0, specs)
    rows = []
    for i, value in enumerate(cfg.sin2psi_grid):
        point = first if i == 0 else _base_scenario(cfg, sin2psi=value)
        params = esnr_params(point)
        h1 = simulate_pairs(point, "H1", cfg.trials_pd, cfg.base_seed, 1 + i,
                            workers=cfg.workers)
        rows.extend(_point_rows(cfg, specs, h1, params, thr_mc, thr_an, (value,)))
        log.info("sweep-sin2psi: sin2psi=%g done", value)
    return _make_result(cfg, "sweep-sin2psi", ("sin2psi", "detector") + _SWEEP_COLUMNS, rows)


def run_sweep_kappa(cfg: ExperimentConfig) -> CurveResult:
    """Detection probability versus the tuning exponent, with GLRT-I reference.

    Sweeps the tunable detector over kappa_grid at each mismatch level in
    cos2theta_values; the configured detector list does not apply here.
    """
    glrt = DetectorSpec(DetectorKind.GLRT_I)
    tunables = [DetectorSpec(DetectorKind.T_W_ABORT_I, kappa=k) for k in cfg.kappa_grid]
    first = _base_scenario(cfg, cos2theta=cfg.cos2theta_values[0])
    h0 = simulate_pairs(first, "H0", cfg.trials_threshold, cfg.base_seed,
                        STREAM_H0, workers=cfg.workers)
    thr_mc, thr_an = _thresholds(cfg, h0, tunables + [glrt])
    rows = []
    for i, c2t in enumerate(cfg.cos2theta_values):
        point = first if i == 0 else _base_scenario(cfg, cos2theta=c2t)
        params = esnr_params(point)
        h1 = simulate_pairs(point, "H1", cfg.trials_pd, cfg.base_seed, 1 + i,
                            workers=cfg.workers)
        for det in tunables:
            rows.extend(_point_rows(cfg, [det], h1, params, thr_mc, thr_an,
                                    (det.kappa, c2t)))
        for k in cfg.kappa_grid:  # flat reference line, one row per axis point
            rows.extend(_point_rows(cfg, [glrt], h1, params, thr_mc, thr_an, (k, c2t)))
        log.info("sweep-kappa: cos2theta=%g done", c2t)
    return _make_result(cfg, "sweep-kappa", ("kappa", "cos2theta", "detector") + _SWEEP_COLUMNS, rows)


def run_mesa(cfg: ExperimentConfig) -> CurveResult:
    """Detection surface over (snr_db, cos2theta) at fixed rejection angle."""
    specs = cfg.detector_specs()
    first = _base_scenario(cfg, cos2theta=cfg.cos2theta_grid[0])
    h0 = simulate_pairs(first, "H0", cfg.trials_threshold, cfg.base_seed,
                        STREAM_H0, workers=cfg.workers)
    thr_mc, thr_an = _thresholds(cfg, h0, specs)
    rows = []
    for i, c2t in enumerate(cfg.cos2theta_grid):
        base = first if i == 0 else _base_scenario(cfg, cos2theta=c2t)
        for j, snr in enumerate(cfg.snr_grid):
            point = base.with_snr(snr)
            params = esnr_params(point)
            stream = 1 + i * len(cfg.snr_grid) + j
            h1 = simulate_pairs(point, "H1", cfg.trials_pd, cfg.base_seed, stream,
                                workers=cfg.workers)
            rows.extend(_point_rows(cfg, specs, h1, params, thr_mc, thr_an, (snr, c2t)))
        log.info("mesa: cos2theta=%g done", c2t)
    return _make_result(cfg, "mesa", ("snr_db", "cos2theta", "detector") + _SWEEP_COLUMNS, rows)


def run_calibrate(cfg: ExperimentConfig) -> CurveResult:
    """Thresholds (empirical and analytic) for every configured detector."""
    specs = cfg.detector_specs()
    scenario = _base_scenario(cfg)
    h0 = simulate_pairs(scenario, "H0", cfg.trials_threshold, cfg.base_seed,
                        STREAM_H0, workers=cfg.workers)
    thr_mc, thr_an = _thresholds(cfg, h0, specs)
    rows = []
    for det in specs:
        pfa_at_analytic = (float(np.mean(h0.statistics(det) > thr_an[det]))
                           if thr_an[det] is not None else None)
        rows.append((det.label, cfg.pfa_target, thr_an[det], thr_mc[det],
                     pfa_at_analytic, cfg.trials_threshold))
    columns = ("detector", "pfa_target", "threshold_analytic", "threshold_mc",
               "pfa_mc_at_analytic", "trials_threshold")
    return _make_result(cfg, "calibrate", columns, rows)


# ---------------------------------------------------------------------------
# validation suite


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    bound: float
    passed: bool

    def render(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: measured={self.measured:.6e} bound={self.bound:.6e}"


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]
    seed: int
    config_hash: str

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self) -> str:
        lines = [f"validation seed={self.seed} config_hash={self.config_hash}"]
        lines.extend(c.render() for c in self.checks)
        lines.append("OVERALL " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"


def _quantile_edges(pdf, count: int) -> np.ndarray:
    grid = np.linspace(0.0, 1.0, 4001)
    dens = np.array([pdf(float(b)) for b in grid])
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5 * np.diff(grid))])
    cdf /= cdf[-1]
    probs = np.linspace(0.0, 1.0, count + 1)
    edges = np.interp(probs, cdf, grid)
    edges[0], edges[-1] = 0.0, 1.0
    return edges


def chi_square_fit(samples: np.ndarray, pdf, bins: int = 20) -> tuple[float, float]:
    """Chi-square statistic of samples against a density on (0, 1).

    Bins are equal-probability cells of the fitted density; expected masses
    come from adaptive quadrature of the density over each cell.  Returns the
    statistic and the 1% critical value at bins - 1 degrees of freedom.
    """
    edges = _quantile_edges(pdf, bins)
    observed, _ = np.histogram(samples, edges)
    expected = np.array([integrate.quad(pdf, lo, hi, epsabs=1e-10, epsrel=1e-10)[0]
                         for lo, hi in zip(edges[:-1], edges[1:])]) * len(samples)
    statistic = float((((observed - expected) ** 2) / expected).sum())
    critical = float(sp_stats.chi2.ppf(0.99, bins - 1))
    return statistic, critical


def run_validate(cfg: ExperimentConfig, tolerance_scale: float = 1.0) -> ValidationReport:
    """End-to-end consistency suite tying the closed forms to the simulator."""
    checks: list[CheckResult] = []

    def add(name: str, measured: float, bound: float):
        scaled = bound * tolerance_scale
        checks.append(CheckResult(name, measured, scaled, bool(measured <= scaled)))

    central = AnalyticParams(n=cfg.n, l=cfg.l, p=cfg.p, q=cfg.q)
    specs = [DetectorSpec(DetectorKind.GLRT_I), DetectorSpec(DetectorKind.ABORT_I),
             DetectorSpec(DetectorKind.W_ABORT_I),
             DetectorSpec(DetectorKind.T_W_ABORT_I, 0.8),
             DetectorSpec(DetectorKind.T_W_ABORT_I, 2.5)]

    # closed-form structure
    worst = 0.0
    for delta2 in (0.0, 2.0, 7.3, 20.0):
        total, _ = integrate.quad(lambda b: pdf_beta_h1(b, delta2, central), 0.0, 1.0,
                                  epsabs=1e-12, epsrel=1e-12)
        worst = max(worst, abs(total - 1.0))
    add("loss_density_normalization", worst, 1e-8)

    scenario = _base_scenario(cfg)
    metrics = mismatch_metrics(scenario.r_cov, scenario.h_mat, scenario.j_mat, scenario.s0)
    add("energy_split_identity",
        abs(metrics.rho_eff + metrics.delta2 - metrics.rho_snr * metrics.sin2psi), 1e-10)
    add("energy_product_identity",
        abs(metrics.rho_eff - metrics.rho_snr * metrics.sin2psi * metrics.cos2theta), 1e-10)

    # statistic identities on simulated pairs
    pairs = simulate_pairs(scenario, "H0", 1000, cfg.base_seed, 90, workers=cfg.workers)
    glrt = pairs.statistics(DetectorSpec(DetectorKind.GLRT_I))
    beta = pairs.loss_factors
    abort = pairs.statistics(DetectorSpec(DetectorKind.ABORT_I))
    wabort = pairs.statistics(DetectorSpec(DetectorKind.W_ABORT_I))
    tw1 = pairs.statistics(DetectorSpec(DetectorKind.T_W_ABORT_I, 1.0))
    ident = max(float(np.max(np.abs(abort - (glrt + beta)))),
                float(np.max(np.abs(wabort - (1.0 + glrt) * beta))),
                float(np.max(np.abs(tw1 - (1.0 + glrt)))))
    add("statistic_identities", ident, 1e-12)
    tw2 = pairs.statistics(DetectorSpec(DetectorKind.T_W_ABORT_I, 2.0))
    add("wabort_kappa2_bit_equality", float(np.max(np.abs(tw2 - wabort))), 0.0)

    worst = 0.0
    for i in range(100):
        batch = sample_batch(scenario, "H0", np.random.SeedSequence(cfg.base_seed, spawn_key=(91, i)))
        fast = sufficient_pair(batch, scenario.h_mat, scenario.j_mat)
        ref = sufficient_pair_reference(batch, scenario.h_mat, scenario.j_mat)
        worst = max(worst, abs(fast.t_j - ref.t_j), abs(fast.t_h - ref.t_h))
    add("factorization_invariance", worst, 1e-10)

    # distributional fits
    h0 = simulate_pairs(scenario, "H0", cfg.trials_threshold, cfg.base_seed,
                        STREAM_H0, workers=cfg.workers)
    ks = sp_stats.kstest(h0.statistics(DetectorSpec(DetectorKind.GLRT_I)),
                         lambda e: _cdf_glrt_central_array(e, central))
    ks_critical = 1.6276 / math.sqrt(cfg.trials_threshold)
    add("h0_glrt_cdf_ks", float(ks.statistic), ks_critical)

    chi2_h0, crit = chi_square_fit(h0.loss_factors, lambda b: pdf_beta_h0(b, central))
    add("loss_factor_chi2_h0", chi2_h0, crit)

    h1 = simulate_pairs(scenario, "H1", cfg.trials_pd, cfg.base_seed, 92, workers=cfg.workers)
    params = esnr_params(scenario)
    chi2_h1, crit = chi_square_fit(h1.loss_factors, lambda b: pdf_beta_h1(b, params.delta2, central))
    add("loss_factor_chi2_h1", chi2_h1, crit)

    # thresholds: inversion round trip and empirical false alarm
    worst_rt, worst_z = 0.0, 0.0
    for det in specs:
        threshold = invert_threshold(det, cfg.pfa_target, central)
        worst_rt = max(worst_rt, abs(pfa_for(det, threshold, central) - cfg.pfa_target))
        pfa_emp = float(np.mean(h0.statistics(det) > threshold))
        se = binomial_se(cfg.pfa_target, cfg.trials_threshold)
        worst_z = max(worst_z, abs(pfa_emp - cfg.pfa_target) / se)
    add("threshold_roundtrip", worst_rt, 1e-9)
    add("analytic_threshold_pfa_z", worst_z, 3.0)

    # null reduction: detection formulas with central parameters are false alarms
    worst = 0.0
    for det in specs:
        for eta in (0.3, 0.8, 1.3, 2.0):
            worst = max(worst, abs(pd_for(det, eta, central) - pfa_for(det, eta, central)))
    add("pd_pfa_null_reduction", worst, 1e-9)

    # detection probability must not depend on the interference power
    pd_by_inr = {}
    threshold = invert_threshold(DetectorSpec(DetectorKind.GLRT_I), cfg.pfa_target, central)
    for idx, inr in enumerate((0.0, 10.0, 30.0)):
        variant = _base_scenario(cfg, inr_db=inr)
        hv = simulate_pairs(variant, "H1", cfg.trials_pd, cfg.base_seed, 93 + idx,
                            workers=cfg.workers)
        stats = hv.statistics(DetectorSpec(DetectorKind.GLRT_I))
        pd_by_inr[inr] = float(np.mean(stats > threshold))
    values = list(pd_by_inr.values())
    se = math.sqrt(2.0) * binomial_se(float(np.mean(values)), cfg.trials_pd)
    spread = max(values) - min(values)
    add("inr_invariance_z", spread / se if se > 0 else 0.0, 3.0)

    items = config_items(cfg, "validate")
    return ValidationReport(checks=tuple(checks), seed=cfg.base_seed,
                            config_hash=_config_hash(items))


RUNNERS = {
    "sweep-snr": run_sweep_snr,
    "sweep-sin2psi": run_sweep_sin2psi,
    "sweep-kappa": run_sweep_kappa,
    "mesa": run_mesa,
    "calibrate": run_calibrate,
}
