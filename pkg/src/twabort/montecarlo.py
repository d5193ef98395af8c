"""Monte Carlo calibration and power estimation for the detector family.

Trials are generated one seed per trial, derived from (base_seed, stream,
trial index) through numpy's SeedSequence spawn keys, so results are
bit-reproducible and independent of how trials are chunked across workers.
Within a plan the null-hypothesis statistic samples are shared by all
detectors (same batches, one statistic map each).
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import AnalyticParams, has_analytic, invert_threshold
from .detectors import DetectorSpec, statistic_values, sufficient_pairs
from .errors import InsufficientTrialsError, InvalidParameterError
from .scenario import Scenario, _workspace, sample_batch

# Fixed chunk size; the unit of work is identical for any worker count.
CHUNK_TRIALS = 4096
STREAM_H0 = 0
STREAM_H1 = 1


@dataclass(frozen=True)
class TrialPlan:
    """A complete Monte Carlo experiment description."""
    scenario: Scenario
    detectors: tuple[DetectorSpec, ...]
    trials_threshold: int = 100_000
    trials_pd: int = 10_000
    pfa_target: float = 1e-3
    base_seed: int = 0
    fixed_phi: bool = False

    def __post_init__(self):
        if not 0.0 < self.pfa_target < 1.0:
            raise InvalidParameterError(f"false-alarm target must lie in (0, 1), got {self.pfa_target}")
        if self.trials_pd < 1:
            raise InvalidParameterError("need at least one detection trial")
        if self.trials_threshold * self.pfa_target < 10.0:
            raise InvalidParameterError(
                f"{self.trials_threshold} trials are too few to calibrate at "
                f"false-alarm {self.pfa_target}; need at least {math.ceil(10.0 / self.pfa_target)}")


@dataclass(frozen=True)
class PairSamples:
    """Sufficient pairs for a block of trials."""
    t_j: np.ndarray
    t_h: np.ndarray

    def statistics(self, spec: DetectorSpec) -> np.ndarray:
        return statistic_values(self.t_j, self.t_h, spec)

    @property
    def loss_factors(self) -> np.ndarray:
        return 1.0 / (1.0 + self.t_j - self.t_h)


@dataclass
class EstimateResult:
    """Per-detector outcome of a plan."""
    detector: DetectorSpec
    threshold_mc: float
    pd_hat: float
    pd_se: float
    pfa_hat: float
    pfa_se: float
    trials_threshold: int
    trials_pd: int
    threshold_analytic: float | None = None
    seconds: float = field(default=0.0)


def _chunk_task(args) -> tuple[int, np.ndarray, np.ndarray]:
    scenario, hypothesis, base_seed, stream, start, count, fixed_phi = args
    work = _workspace(scenario)
    x = np.empty((count, scenario.n), dtype=np.complex128)
    training = np.empty((count, scenario.n, scenario.l), dtype=np.complex128)
    for i in range(count):
        seed = np.random.SeedSequence(entropy=base_seed, spawn_key=(stream, start + i))
        batch = sample_batch(scenario, hypothesis, seed, fixed_phi=fixed_phi, _work=work)
        x[i] = batch.x
        training[i] = batch.training
    t_j, t_h = sufficient_pairs(x, training, scenario.h_mat, scenario.j_mat)
    return start, t_j, t_h


def simulate_pairs(scenario: Scenario, hypothesis: str, n_trials: int, base_seed: int,
                   stream: int, workers: int = 1, fixed_phi: bool = False) -> PairSamples:
    """Sufficient pairs for n_trials independent trials.

    The trial at index i always uses the seed derived from
    (base_seed, stream, i); workers only change how chunks are scheduled.
    """
    if n_trials < 1:
        raise InvalidParameterError("need at least one trial")
    starts = list(range(0, n_trials, CHUNK_TRIALS))
    tasks = [(scenario, hypothesis, base_seed, stream, s,
              min(CHUNK_TRIALS, n_trials - s), fixed_phi) for s in starts]
    t_j = np.empty(n_trials)
    t_h = np.empty(n_trials)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chunk_task, tasks))
    else:
        results = [_chunk_task(t) for t in tasks]
    for start, cj, ch in results:
        t_j[start:start + len(cj)] = cj
        t_h[start:start + len(ch)] = ch
    return PairSamples(t_j=t_j, t_h=t_h)


def empirical_threshold(stats: np.ndarray, pfa_target: float) -> float:
    """Empirical (1 - pfa_target) quantile as an order statistic.

    Uses the ceil(trials * (1 - pfa)) smallest value; duplicates resolve
    toward the larger value, which errs on the conservative (lower
    false-alarm) side.
    """
    trials = len(stats)
    if trials * pfa_target < 1.0:
        raise InsufficientTrialsError(
            f"{trials} trials cannot resolve false-alarm {pfa_target}")
    rank = math.ceil(trials * (1.0 - pfa_target))
    ordered = np.sort(np.asarray(stats))
    return float(ordered[rank - 1])


def calibrate_threshold(plan: TrialPlan, detector: DetectorSpec, workers: int = 1) -> float:
    """Empirical threshold for one detector from the plan's null stream."""
    pairs = simulate_pairs(plan.scenario, "H0", plan.trials_threshold, plan.base_seed,
                           STREAM_H0, workers=workers, fixed_phi=plan.fixed_phi)
    return empirical_threshold(pairs.statistics(detector), plan.pfa_target)


def estimate_pd(plan: TrialPlan, detector: DetectorSpec, threshold: float,
                workers: int = 1) -> EstimateResult:
    """Detection-probability estimate for one detector at a given threshold."""
    tic = time.perf_counter()
    pairs = simulate_pairs(plan.scenario, "H1", plan.trials_pd, plan.base_seed,
                           STREAM_H1, workers=workers, fixed_phi=plan.fixed_phi)
    stats = pairs.statistics(detector)
    pd_hat = float(np.mean(stats > threshold))
    return EstimateResult(
        detector=detector, threshold_mc=threshold,
        pd_hat=pd_hat, pd_se=binomial_se(pd_hat, plan.trials_pd),
        pfa_hat=math.nan, pfa_se=math.nan,
        trials_threshold=plan.trials_threshold, trials_pd=plan.trials_pd,
        seconds=time.perf_counter() - tic)


def binomial_se(p_hat: float, trials: int) -> float:
    return math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / trials)


def run_plan(plan: TrialPlan, workers: int = 1) -> list[EstimateResult]:
    """Calibrate and estimate every detector in the plan.

    Null and alternative batches are simulated once and shared across
    detectors; results come back in the plan's detector order.
    """
    if not plan.detectors:
        return []
    tic = time.perf_counter()
    h0 = simulate_pairs(plan.scenario, "H0", plan.trials_threshold, plan.base_seed,
                        STREAM_H0, workers=workers, fixed_phi=plan.fixed_phi)
    h1 = simulate_pairs(plan.scenario, "H1", plan.trials_pd, plan.base_seed,
                        STREAM_H1, workers=workers, fixed_phi=plan.fixed_phi)
    shared_seconds = (time.perf_counter() - tic) / len(plan.detectors)
    central = AnalyticParams(n=plan.scenario.n, l=plan.scenario.l,
                             p=plan.scenario.p, q=plan.scenario.q)
    results = []
    for det in plan.detectors:
        tic = time.perf_counter()
        null_stats = h0.statistics(det)
        threshold = empirical_threshold(null_stats, plan.pfa_target)
        pfa_hat = float(np.mean(null_stats > threshold))
        stats = h1.statistics(det)
        pd_hat = float(np.mean(stats > threshold))
        analytic = (invert_threshold(det, plan.pfa_target, central)
                    if has_analytic(det) else None)
        results.append(EstimateResult(
            detector=det, threshold_mc=threshold,
            pd_hat=pd_hat, pd_se=binomial_se(pd_hat, plan.trials_pd),
            pfa_hat=pfa_hat, pfa_se=binomial_se(pfa_hat, plan.trials_threshold),
            trials_threshold=plan.trials_threshold, trials_pd=plan.trials_pd,
            threshold_analytic=analytic,
            seconds=shared_seconds + (time.perf_counter() - tic)))
    return results
