"""Acceptance suite: every analytic claim checked against simulation.

Reference setup throughout: a 12-element array, 24 training vectors, one
nominal signal dimension, rank-2 interference, one-lag correlation 0.9,
interference-to-noise 10 dB, design false-alarm 1e-3, rejection angle
sin^2 psi = 0.8.  Each criterion prints a single PASS/FAIL line with its
measured margin and pinned tolerance.
"""
import math

import numpy as np
import pytest
from scipy import integrate, stats as sp_stats

from twabort import (AnalyticParams, DetectorKind, DetectorSpec, binomial_se,
                     complex_gaussian, covariance_exponential, esnr_params,
                     generate_interference_subspace, invert_threshold,
                     make_scenario, mismatch_metrics, pd_for, pdf_beta_h1,
                     sample_batch, simulate_pairs, sufficient_pair,
                     sufficient_pair_reference)
from twabort.analytic import _cdf_glrt_central_array
from twabort.experiments import chi_square_fit
from twabort.montecarlo import STREAM_H0
from twabort.scenario import coloring_factor

BASE_SEED = 1
TRIALS_THRESHOLD = 100_000
TRIALS_PD = 10_000
PFA = 1e-3

GLRT = DetectorSpec(DetectorKind.GLRT_I)
ABORT = DetectorSpec(DetectorKind.ABORT_I)
WABORT = DetectorSpec(DetectorKind.W_ABORT_I)
AED = DetectorSpec(DetectorKind.AED)


def tw(kappa):
    return DetectorSpec(DetectorKind.T_W_ABORT_I, kappa=kappa)


ANALYTIC_FIVE = (GLRT, ABORT, WABORT, tw(0.8), tw(2.5))


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{criterion}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{criterion}: {detail}"


@pytest.fixture(scope="module")
def h0_pairs(ref_scenario):
    return simulate_pairs(ref_scenario, "H0", TRIALS_THRESHOLD, BASE_SEED,
                          STREAM_H0, workers=4)


@pytest.fixture(scope="module")
def analytic_thresholds(central_params):
    return {det.label: invert_threshold(det, PFA, central_params)
            for det in ANALYTIC_FIVE + (AED,)}


def test_criterion_1_analytic_pd_matches_simulation(ref_scenario, h0_pairs,
                                                    analytic_thresholds):
    """Closed-form detection curves track simulation within 0.02 everywhere."""
    worst = 0.0
    for i, snr in enumerate((5.0, 10.0, 15.0, 17.0, 20.0, 25.0)):
        point = ref_scenario.with_snr(snr)
        params = esnr_params(point)
        h1 = simulate_pairs(point, "H1", TRIALS_PD, BASE_SEED, 10 + i, workers=4)
        for det in ANALYTIC_FIVE:
            from twabort import empirical_threshold
            threshold = empirical_threshold(h0_pairs.statistics(det), PFA)
            pd_mc = float(np.mean(h1.statistics(det) > threshold))
            pd_an = pd_for(det, analytic_thresholds[det.label], params)
            worst = max(worst, abs(pd_an - pd_mc))
    report("criterion-1", worst <= 0.02,
           f"max |pd_analytic - pd_mc| = {worst:.4f} over 6 SNRs x 5 detectors "
           f"(tol 0.02, {TRIALS_THRESHOLD}/{TRIALS_PD} trials)")


def test_criterion_2_analytic_thresholds_hit_design_pfa(h0_pairs,
                                                        analytic_thresholds):
    """Analytic thresholds reproduce the design false alarm within 3 SE."""
    se = binomial_se(PFA, TRIALS_THRESHOLD)
    worst = 0.0
    for det in ANALYTIC_FIVE:
        pfa_emp = float(np.mean(h0_pairs.statistics(det) > analytic_thresholds[det.label]))
        worst = max(worst, abs(pfa_emp - PFA) / se)
    report("criterion-2", worst <= 3.0,
           f"max |pfa_emp - {PFA}| = {worst:.2f} SE over 5 detectors "
           f"(tol 3 SE, SE = {se:.2e})")


def test_criterion_3_null_distributions(ref_scenario, mismatched_scenario,
                                        h0_pairs, central_params):
    """The null CDF and both loss-factor densities fit at the 1% level."""
    ks = sp_stats.kstest(h0_pairs.statistics(GLRT),
                         lambda v: _cdf_glrt_central_array(v, central_params))
    ks_crit = 1.6276 / math.sqrt(TRIALS_THRESHOLD)
    from twabort import pdf_beta_h0
    chi2_h0, crit_h0 = chi_square_fit(h0_pairs.loss_factors,
                                      lambda b: pdf_beta_h0(b, central_params))
    h1 = simulate_pairs(mismatched_scenario, "H1", TRIALS_THRESHOLD, BASE_SEED,
                        20, workers=4)
    delta2 = esnr_params(mismatched_scenario).delta2
    chi2_h1, crit_h1 = chi_square_fit(h1.loss_factors,
                                      lambda b: pdf_beta_h1(b, delta2, central_params))
    ok = ks.statistic <= ks_crit and chi2_h0 <= crit_h0 and chi2_h1 <= crit_h1
    report("criterion-3", ok,
           f"KS = {ks.statistic:.4f} (crit {ks_crit:.4f}), "
           f"chi2_h0 = {chi2_h0:.1f}, chi2_h1 = {chi2_h1:.1f} (crit {crit_h0:.1f}, "
           f"20 bins, 1% level)")


def test_criterion_4_family_identities(ref_scenario, central_params):
    """The tunable family embeds its three named endpoints exactly."""
    pairs = simulate_pairs(ref_scenario, "H1", 1_000, BASE_SEED, 30)
    bit_equal = np.array_equal(pairs.statistics(tw(2.0)), pairs.statistics(WABORT))

    aed_values = pairs.statistics(AED)
    order = np.argsort(aed_values)
    monotone = bool(np.all(np.diff(pairs.statistics(tw(0.0))[order]) > 0))

    decisions = simulate_pairs(ref_scenario, "H1", 10_000, BASE_SEED, 31, workers=4)
    eta_glrt = invert_threshold(GLRT, PFA, central_params)
    eta_one = invert_threshold(tw(1.0), PFA, central_params)
    same_decisions = np.array_equal(decisions.statistics(tw(1.0)) > eta_one,
                                    decisions.statistics(GLRT) > eta_glrt)
    threshold_shift = abs(eta_one - (1.0 + eta_glrt))
    ok = bit_equal and monotone and same_decisions and threshold_shift < 1e-9
    report("criterion-4", ok,
           f"kappa=2 bit-identical to W-ABORT-I: {bit_equal} (1e3 trials); "
           f"kappa=0 strictly increasing in AED: {monotone}; kappa=1 decisions "
           f"match GLRT-I at matched pfa: {same_decisions} (1e4 trials, "
           f"threshold shift {threshold_shift:.1e})")


def test_criterion_5_rejection_hierarchy(analytic_thresholds):
    """Strongly mismatched strong signals are rejected, hardest by kappa=2.5."""
    rho_snr = 10.0 ** 3.0  # 30 dB
    params = AnalyticParams(12, 24, 1, 2, rho_eff=rho_snr * 0.8 * 0.3,
                            delta2=rho_snr * 0.8 * 0.7)
    pd_abort = pd_for(ABORT, analytic_thresholds["ABORT-I"], params)
    pd_wabort = pd_for(WABORT, analytic_thresholds["W-ABORT-I"], params)
    pd_tw25 = pd_for(tw(2.5), analytic_thresholds["T-W-ABORT-I(kappa=2.5)"], params)
    ok = pd_abort < 0.5 and pd_tw25 <= pd_wabort <= pd_abort
    report("criterion-5", ok,
           f"cos2theta=0.3 at 30 dB: pd ABORT-I = {pd_abort:.4f} (< 0.5), "
           f"W-ABORT-I = {pd_wabort:.2e}, kappa=2.5 = {pd_tw25:.2e} (ordered)")


def test_criterion_6_tuning_behaviour(ref_scenario, mismatched_scenario,
                                      central_params):
    """Exponent tuning: unimodal when matched, monotone damping mismatched."""
    kappas = [0.25 * k for k in range(13)]
    matched = esnr_params(ref_scenario)
    mismatched = esnr_params(mismatched_scenario)

    def pd_curve(params):
        return [pd_for(tw(k), invert_threshold(tw(k), PFA, central_params), params)
                for k in kappas]

    curve_m = pd_curve(matched)
    diffs = np.diff(curve_m)
    sign_changes = int(np.sum(np.diff(np.sign(diffs)) != 0))
    unimodal = sign_changes == 1 and diffs[0] > 0 and diffs[-1] < 0

    curve_x = pd_curve(mismatched)
    nonincreasing = bool(np.all(np.diff(curve_x) <= 1e-12))

    pd_glrt = pd_for(GLRT, invert_threshold(GLRT, PFA, central_params), matched)
    near = [pd_for(tw(k), invert_threshold(tw(k), PFA, central_params), matched)
            for k in (0.6, 0.7, 0.8, 0.9, 1.0)]
    close = max(abs(v - pd_glrt) for v in near)
    ok = unimodal and nonincreasing and close <= 0.02
    report("criterion-6", ok,
           f"matched curve unimodal: {unimodal} (peak {max(curve_m):.4f}); "
           f"mismatched curve nonincreasing: {nonincreasing}; "
           f"max |pd(kappa) - pd_glrt| = {close:.4f} on kappa in [0.6, 1.0] (tol 0.02)")


def test_criterion_7_internal_consistency(ref_scenario, mismatched_scenario,
                                          central_params, analytic_thresholds):
    """Normalization, energy identities, factorization, interference CFAR."""
    worst_norm = 0.0
    for dims in ((12, 24, 1, 2), (8, 16, 2, 1), (10, 30, 1, 3)):
        params = AnalyticParams(*dims)
        for delta2 in (0.0, 2.0, 7.3, 20.0):
            total, _ = integrate.quad(lambda b: pdf_beta_h1(b, delta2, params),
                                      0.0, 1.0, epsabs=1e-12, epsrel=1e-12)
            worst_norm = max(worst_norm, abs(total - 1.0))

    worst_ident = 0.0
    for scn in (ref_scenario, mismatched_scenario):
        m = mismatch_metrics(scn.r_cov, scn.h_mat, scn.j_mat, scn.s0)
        worst_ident = max(worst_ident,
                          abs(m.rho_eff + m.delta2 - m.rho_snr * m.sin2psi),
                          abs(m.rho_eff - m.rho_snr * m.sin2psi * m.cos2theta))

    worst_dual = 0.0
    for i in range(100):
        batch = sample_batch(ref_scenario, "H1",
                             np.random.SeedSequence(BASE_SEED, spawn_key=(40, i)))
        fast = sufficient_pair(batch, ref_scenario.h_mat, ref_scenario.j_mat)
        slow = sufficient_pair_reference(batch, ref_scenario.h_mat, ref_scenario.j_mat)
        worst_dual = max(worst_dual, abs(fast.t_j - slow.t_j), abs(fast.t_h - slow.t_h))

    pds = []
    for idx, inr in enumerate((0.0, 10.0, 30.0)):
        variant = make_scenario(n=12, l=24, p=1, q=2, eps=0.9, snr_db=17.0,
                                inr_db=inr, sin2psi=0.8, cos2theta=1.0,
                                seed=20190824)
        h1 = simulate_pairs(variant, "H1", TRIALS_PD, BASE_SEED, 50 + idx, workers=4)
        pds.append(float(np.mean(h1.statistics(GLRT) > analytic_thresholds["GLRT-I"])))
    se_pair = math.sqrt(2.0) * binomial_se(float(np.mean(pds)), TRIALS_PD)
    spread_z = (max(pds) - min(pds)) / se_pair

    ok = (worst_norm <= 1e-8 and worst_ident <= 1e-10 and worst_dual <= 1e-10
          and spread_z <= 3.0)
    report("criterion-7", ok,
           f"density normalization {worst_norm:.1e} (tol 1e-8); energy identities "
           f"{worst_ident:.1e} (tol 1e-10); factorization invariance {worst_dual:.1e} "
           f"(tol 1e-10, 100 trials); interference-power spread {spread_z:.2f} SE (tol 3)")


def test_criterion_8_angle_constructions():
    """The two mismatch angles are distinct, directly constructible notions."""
    r_cov = covariance_exponential(12, 0.9)
    chol = coloring_factor(r_cov)
    ok_forward = ok_mixed = ok_orthogonal = True
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        j_mat = generate_interference_subspace(12, 2, rng)
        h_mat = complex_gaussian(rng, (12, 1))
        theta = complex_gaussian(rng, (1,)) + 0.5
        phi = complex_gaussian(rng, (2,))

        forward = mismatch_metrics(r_cov, h_mat, j_mat, h_mat @ theta)
        ok_forward &= (abs(forward.cos2theta - 1.0) < 1e-9
                       and forward.delta2 < 1e-6 * forward.rho_snr
                       and abs(forward.cos2phi - 1.0) < 1e-9)

        mixed = mismatch_metrics(r_cov, h_mat, j_mat, h_mat @ theta + j_mat @ phi)
        ok_mixed &= (abs(mixed.cos2theta - 1.0) < 1e-9
                     and mixed.cos2phi < 1.0 - 1e-6
                     and mixed.sin2psi < 1.0 - 1e-6)

        hbar = np.linalg.solve(chol, h_mat)
        qh, _ = np.linalg.qr(hbar)
        v = complex_gaussian(rng, (12,))
        sbar = v - qh @ (qh.conj().T @ v)
        orthogonal = mismatch_metrics(r_cov, h_mat, j_mat, chol @ sbar)
        ok_orthogonal &= (orthogonal.cos2phi < 1e-12
                          and orthogonal.cos2theta > 1e-6)
    ok = ok_forward and ok_mixed and ok_orthogonal
    report("criterion-8", ok,
           f"10 seeds each: signal in nominal span gives cos2theta=1 "
           f"({ok_forward}); adding interference keeps cos2theta=1 with "
           f"cos2phi<1 ({ok_mixed}); signal orthogonal to the nominal span "
           f"gives cos2phi=0 yet cos2theta>0 ({ok_orthogonal})")
