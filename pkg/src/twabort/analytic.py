"""Closed-form operating characteristics for the detector family.

Conditioned on the loss factor beta, the GLRT-I statistic follows a complex
noncentral F law whose CDF is a finite series of regularized incomplete gamma
terms; beta itself follows a (noncentral) complex beta law with an elementary
finite-series density.  Detection and false-alarm probabilities of the
selective detectors are one-dimensional integrals of those pieces over beta.
The effective-energy pair (rho_eff, delta2) enters via

    noncentrality of the conditional CDF : rho_eff * beta
    noncentrality of the beta density    : delta2

and under the null both are zero, so every false-alarm expression is the
matching detection expression with central parameters.  The 2S-GLRT-I has no
closed form here and is handled by Monte Carlo only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from .detectors import DetectorKind, DetectorSpec
from .errors import (AccuracyError, InvalidParameterError,
                     ThresholdInversionError, UnsupportedDetectorError)
from .scenario import Scenario, mismatch_metrics

# Absolute tolerance for the probability integrals over the loss factor.
QUAD_ABS_TOL = 1e-9
# Relative residual allowed when inverting a false-alarm level to a threshold.
INVERT_REL_TOL = 1e-10
_BRACKET_CAP = 1e12


@dataclass(frozen=True)
class AnalyticParams:
    """Degrees of freedom plus effective-energy split for the closed forms."""
    n: int
    l: int
    p: int
    q: int
    rho_eff: float = 0.0
    delta2: float = 0.0

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.q < 0:
            raise InvalidParameterError("dimensions must satisfy n >= 1, p >= 1, q >= 0")
        if self.l - self.n + self.q + 1 < 1:
            raise InvalidParameterError(f"need l >= n - q for the conditional law, got l={self.l}")
        if self.n - self.p - self.q < 1:
            raise InvalidParameterError(f"need p + q < n, got p={self.p}, q={self.q}, n={self.n}")
        if self.rho_eff < 0.0 or self.delta2 < 0.0:
            raise InvalidParameterError("energy parameters must be nonnegative")

    @property
    def central(self) -> "AnalyticParams":
        """Null-hypothesis version of these parameters."""
        return replace(self, rho_eff=0.0, delta2=0.0)


def esnr_params(scenario: Scenario) -> AnalyticParams:
    """Analytic parameters realized by a scenario's geometry."""
    metrics = mismatch_metrics(scenario.r_cov, scenario.h_mat, scenario.j_mat, scenario.s0)
    return AnalyticParams(n=scenario.n, l=scenario.l, p=scenario.p, q=scenario.q,
                          rho_eff=metrics.rho_eff, delta2=metrics.delta2)


def incomplete_gamma_reg(k_plus_1: int, a: float) -> float:
    """Regularized upper incomplete gamma at integer order:
    exp(-a) * sum_{m=0}^{k} a**m / m!, i.e. a Poisson(a) lower tail."""
    if k_plus_1 < 1:
        raise InvalidParameterError(f"order must be >= 1, got {k_plus_1}")
    if a < 0.0:
        raise InvalidParameterError(f"argument must be nonnegative, got {a}")
    return float(_poisson_tails(k_plus_1 - 1, a)[-1])


def _poisson_tails(k_max: int, a: float) -> np.ndarray:
    """Array of exp(-a) * sum_{m<=k} a**m/m! for k = 0..k_max (log-domain terms)."""
    if a == 0.0:
        return np.ones(k_max + 1)
    m = np.arange(k_max + 1)
    log_terms = m * math.log(a) - a - gammaln(m + 1)
    return np.minimum(np.cumsum(np.exp(log_terms)), 1.0)


def _log_binom(n: int, k: np.ndarray) -> np.ndarray:
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def cdf_glrt_conditional(eta: float, beta: float, params: AnalyticParams) -> float:
    """CDF of the GLRT-I statistic given the loss factor beta.

    Finite sum over k = 0..l-n+q of binomial weights in eta/(1+eta) times
    regularized incomplete gamma factors evaluated at
    rho_eff * beta / (1 + eta).  All terms are positive; they are accumulated
    with exact summation.
    """
    if not 0.0 < beta <= 1.0:
        raise InvalidParameterError(f"loss factor must lie in (0, 1], got {beta}")
    if eta <= 0.0:
        return 0.0
    m_total = params.l - params.n + params.p + params.q
    j = np.arange(params.p, m_total + 1)
    log_w = _log_binom(m_total, j) + j * math.log(eta) - m_total * math.log1p(eta)
    a = params.rho_eff * beta / (1.0 + eta)
    tails = _poisson_tails(m_total - params.p, a)
    value = math.fsum(np.exp(log_w) * tails)
    return min(max(value, 0.0), 1.0)


def cdf_glrt_central(eta: float, params: AnalyticParams) -> float:
    """Null CDF of the GLRT-I statistic: the full binomial sum (no truncation)."""
    return cdf_glrt_conditional(eta, 1.0, params.central)


def _cdf_glrt_central_array(eta: np.ndarray, params: AnalyticParams) -> np.ndarray:
    """Vectorized null CDF, for empirical-distribution comparisons."""
    eta = np.asarray(eta, dtype=np.float64)
    m_total = params.l - params.n + params.p + params.q
    j = np.arange(params.p, m_total + 1)
    out = np.zeros(eta.shape)
    pos = eta > 0.0
    if np.any(pos):
        log_eta = np.log(eta[pos])
        log_w = (_log_binom(m_total, j)[:, None] + j[:, None] * log_eta[None, :]
                 - m_total * np.log1p(eta[pos])[None, :])
        out[pos] = np.exp(log_w).sum(axis=0)
    return np.clip(out, 0.0, 1.0)


def pdf_beta_h0(beta: float, params: AnalyticParams) -> float:
    """Null density of the loss factor: Beta(l-n+p+q+1, n-p-q)."""
    a_dof = params.l - params.n + params.p + params.q + 1
    b_dof = params.n - params.p - params.q
    if beta <= 0.0 or beta > 1.0:
        return 0.0
    log_norm = gammaln(a_dof) + gammaln(b_dof) - gammaln(a_dof + b_dof)
    log_val = (a_dof - 1) * math.log(beta) - log_norm
    if b_dof > 1:
        if beta == 1.0:
            return 0.0
        log_val += (b_dof - 1) * math.log1p(-beta)
    return math.exp(log_val)


def pdf_beta_h1(beta: float, delta2: float, params: AnalyticParams) -> float:
    """Loss-factor density under the alternative, noncentrality delta2.

    The null density times exp(-delta2 * beta) times a finite series in
    delta2 (1 - beta) with beta-function coefficient ratios; delta2 = 0
    reduces exactly to the null density.
    """
    if delta2 < 0.0:
        raise InvalidParameterError(f"noncentrality must be nonnegative, got {delta2}")
    base = pdf_beta_h0(beta, params)
    if delta2 == 0.0 or base == 0.0:
        return base
    a_dof = params.l - params.n + params.p + params.q + 1
    b_dof = params.n - params.p - params.q
    k = np.arange(a_dof + 1)
    log_coef = _log_binom(a_dof, k) + k * math.log(delta2) + gammaln(b_dof) - gammaln(b_dof + k)
    if beta < 1.0:
        log_terms = log_coef + k * math.log1p(-beta)
    else:
        log_terms = np.where(k > 0, -np.inf, log_coef)
    series = math.fsum(np.exp(log_terms))
    return base * math.exp(-delta2 * beta) * series


def _integrate(fn, lo: float, hi: float) -> float:
    """Adaptive Gauss-Kronrod integral with an absolute-accuracy contract."""
    if hi <= lo:
        return 0.0
    value, abserr, *_ = integrate.quad(fn, lo, hi, epsabs=QUAD_ABS_TOL / 10.0,
                                       epsrel=1e-12, limit=200, full_output=1)
    if abserr > QUAD_ABS_TOL:
        raise AccuracyError(
            f"quadrature reached {abserr:.3e} absolute error (tolerance {QUAD_ABS_TOL:.0e}); "
            f"estimate {value!r}", estimate=value)
    return value


def _beta_h1_mass(lo: float, hi: float, delta2: float, params: AnalyticParams) -> float:
    """Probability mass of the loss factor on [lo, hi] under noncentrality delta2."""
    lo, hi = max(lo, 0.0), min(hi, 1.0)
    return _integrate(lambda b: pdf_beta_h1(b, delta2, params), lo, hi)


def _clip01(value: float) -> float:
    return min(max(value, 0.0), 1.0)


def pd_glrt_i(eta: float, params: AnalyticParams) -> float:
    """Detection probability of GLRT-I at threshold eta."""
    if eta <= 0.0:
        return 1.0
    value = _integrate(
        lambda b: (1.0 - cdf_glrt_conditional(eta, b, params)) * pdf_beta_h1(b, params.delta2, params),
        0.0, 1.0)
    return _clip01(value)


def pd_abort_i(eta_a: float, params: AnalyticParams) -> float:
    """Detection probability of ABORT-I at threshold eta_a.

    Conditioned on beta the statistic exceeds eta_a whenever the GLRT-I part
    exceeds eta_a - beta, so for beta above eta_a detection is certain; that
    region contributes its full loss-factor mass on top of the integral.
    """
    if eta_a <= 0.0:
        return 1.0
    upper = min(1.0, eta_a)
    body = _integrate(
        lambda b: (1.0 - cdf_glrt_conditional(eta_a - b, b, params)) * pdf_beta_h1(b, params.delta2, params),
        0.0, upper)
    certain = _beta_h1_mass(upper, 1.0, params.delta2, params)
    return _clip01(body + certain)


def pd_wabort_i(eta_w: float, params: AnalyticParams) -> float:
    """Detection probability of W-ABORT-I at threshold eta_w.

    The conditional exceedance condition is GLRT-I part > eta_w / beta - 1,
    certain for beta above eta_w; same certain-region bookkeeping as ABORT-I.
    """
    if eta_w <= 0.0:
        return 1.0
    upper = min(1.0, eta_w)
    body = _integrate(
        lambda b: (1.0 - cdf_glrt_conditional(eta_w / b - 1.0, b, params)) * pdf_beta_h1(b, params.delta2, params),
        0.0, upper)
    certain = _beta_h1_mass(upper, 1.0, params.delta2, params)
    return _clip01(body + certain)


def pd_twabort_i(eta_t: float, kappa: float, params: AnalyticParams) -> float:
    """Detection probability of T-W-ABORT-I(kappa) at threshold eta_t.

    Conditioned on beta the statistic is beta**(kappa-1) * (1 + GLRT-I part),
    so the exceedance condition reads GLRT-I part > eta_t * beta**(1-kappa) - 1
    and is certain where the right side is negative.  The beta range splits on
    kappa versus 1 and eta_t versus 1; kappa = 1 is handled as its own branch
    (constant condition) to avoid the 1/(1-kappa) blow-up.
    """
    if kappa < 0.0:
        raise InvalidParameterError(f"tuning exponent must be nonnegative, got {kappa}")
    if eta_t <= 0.0:
        return 1.0
    delta2 = params.delta2

    def survivor(b: float) -> float:
        arg = eta_t * b ** (1.0 - kappa) - 1.0
        return (1.0 - cdf_glrt_conditional(arg, b, params)) * pdf_beta_h1(b, delta2, params)

    if kappa == 1.0:
        if eta_t <= 1.0:
            return 1.0
        arg = eta_t - 1.0
        value = _integrate(
            lambda b: (1.0 - cdf_glrt_conditional(arg, b, params)) * pdf_beta_h1(b, delta2, params),
            0.0, 1.0)
        return _clip01(value)
    if kappa < 1.0:
        if eta_t <= 1.0:
            return 1.0
        lower = eta_t ** (-1.0 / (1.0 - kappa))  # underflows to 0 harmlessly
        certain = _beta_h1_mass(0.0, lower, delta2, params)
        body = _integrate(survivor, lower, 1.0)
        return _clip01(certain + body)
    # kappa > 1: the statistic is capped by 1 + GLRT-I part scaled down, and
    # exceedance is certain for beta above eta_t**(1/(kappa-1)).
    try:
        split = eta_t ** (1.0 / (kappa - 1.0))
    except OverflowError:
        split = math.inf
    upper = min(1.0, split)
    body = _integrate(survivor, 0.0, upper)
    certain = _beta_h1_mass(upper, 1.0, delta2, params)
    return _clip01(body + certain)


def pd_aed(eta: float, params: AnalyticParams) -> float:
    """Detection probability of AED; its statistic is T-W-ABORT-I(0) minus one."""
    return pd_twabort_i(1.0 + eta, 0.0, params)


def pfa_glrt_i(eta: float, params: AnalyticParams) -> float:
    """False-alarm probability of GLRT-I: one minus the full-sum null CDF."""
    if eta <= 0.0:
        return 1.0
    return _clip01(1.0 - cdf_glrt_central(eta, params))


def pfa_abort_i(eta_a: float, params: AnalyticParams) -> float:
    return pd_abort_i(eta_a, params.central)


def pfa_wabort_i(eta_w: float, params: AnalyticParams) -> float:
    return pd_wabort_i(eta_w, params.central)


def pfa_twabort_i(eta_t: float, kappa: float, params: AnalyticParams) -> float:
    return pd_twabort_i(eta_t, kappa, params.central)


def pfa_aed(eta: float, params: AnalyticParams) -> float:
    return pd_aed(eta, params.central)


_ANALYTIC_KINDS = (DetectorKind.GLRT_I, DetectorKind.ABORT_I, DetectorKind.W_ABORT_I,
                   DetectorKind.T_W_ABORT_I, DetectorKind.AED)


def has_analytic(spec: DetectorSpec) -> bool:
    """True when closed-form PD/PFA are available for this detector."""
    return spec.kind in _ANALYTIC_KINDS


def pd_for(spec: DetectorSpec, eta: float, params: AnalyticParams) -> float:
    kind = spec.kind
    if kind is DetectorKind.GLRT_I:
        return pd_glrt_i(eta, params)
    if kind is DetectorKind.ABORT_I:
        return pd_abort_i(eta, params)
    if kind is DetectorKind.W_ABORT_I:
        return pd_twabort_i(eta, 2.0, params)
    if kind is DetectorKind.T_W_ABORT_I:
        return pd_twabort_i(eta, spec.kappa, params)
    if kind is DetectorKind.AED:
        return pd_aed(eta, params)
    raise UnsupportedDetectorError(f"{spec.label} has no closed-form operating characteristic")


def pfa_for(spec: DetectorSpec, eta: float, params: AnalyticParams) -> float:
    if spec.kind is DetectorKind.GLRT_I:
        return pfa_glrt_i(eta, params)
    return pd_for(spec, eta, params.central)


def invert_threshold(spec: DetectorSpec, pfa_target: float, params: AnalyticParams) -> float:
    """Threshold achieving a prescribed false-alarm probability.

    The false-alarm level decreases monotonically in the threshold; the root
    is bracketed starting from [1e-8, 1] with geometric growth of the upper
    end (and shrinkage of the lower end for targets near one), then refined by
    Brent's method.  The returned threshold reproduces the target within
    INVERT_REL_TOL relative accuracy when re-evaluated.
    """
    if not 0.0 < pfa_target < 1.0:
        raise InvalidParameterError(f"false-alarm target must lie in (0, 1), got {pfa_target}")
    central = params.central

    def level(eta: float) -> float:
        return pfa_for(spec, eta, central)

    lo, hi = 1e-8, 1.0
    while level(lo) < pfa_target:
        lo /= 4.0
        if lo < 1e-300:
            raise ThresholdInversionError(f"could not bracket below for {spec.label}")
    while level(hi) > pfa_target:
        hi *= 4.0
        if hi > _BRACKET_CAP:
            raise ThresholdInversionError(
                f"no threshold below {_BRACKET_CAP:.0e} reaches false-alarm {pfa_target} for {spec.label}")
    root = optimize.brentq(lambda eta: level(eta) - pfa_target, lo, hi,
                           xtol=1e-14, rtol=8.9e-16, maxiter=500)
    achieved = level(root)
    if abs(achieved - pfa_target) > INVERT_REL_TOL * pfa_target + 1e-15:
        raise AccuracyError(
            f"threshold inversion for {spec.label} reached {achieved!r} "
            f"against target {pfa_target!r}", estimate=root)
    return float(root)
