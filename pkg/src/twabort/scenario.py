"""Problem-instance construction for multichannel detection in subspace interference.

Builds the noise covariance, the interference subspace, and a nominal signal
subspace together with an actual signal vector whose interference-rejection
angle (sin^2 psi) and nominal-mismatch angle (cos^2 theta) hit prescribed
targets, then samples test/training data from the two-hypothesis measurement
model:

    H0: x = j + n,          x_l = n_l,  l = 1..L
    H1: x = s0 + j + n,     x_l = n_l,  l = 1..L

with n, n_l ~ CN(0, R) and j confined to the columns of an N x q matrix.
All angle metrics are defined in the whitened domain (quantities premultiplied
by an inverse factor of R); they do not depend on which factor is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import ConstructionError, InvalidParameterError

# Singular-value ratio below which a matrix counts as rank deficient.
RANK_RTOL = 1e-8
# Bisection stopping tolerance on the geometry metrics.
METRIC_ROOT_TOL = 1e-12
# Residual beyond which a construction is rejected.
METRIC_CHECK_TOL = 1e-10
_MAX_BISECT = 200
_MAX_REDRAW = 100

HYPOTHESES = ("H0", "H1")


def covariance_exponential(n: int, eps: float) -> np.ndarray:
    """Exponentially correlated covariance: R[i, j] = eps**|i - j|."""
    if n < 1:
        raise InvalidParameterError(f"dimension must be positive, got {n}")
    if not 0.0 <= eps < 1.0:
        raise InvalidParameterError(f"one-lag correlation must lie in [0, 1), got {eps}")
    idx = np.arange(n)
    return np.power(eps, np.abs(idx[:, None] - idx[None, :])).astype(np.complex128)


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian entries, unit variance.

    Real and imaginary parts each carry variance 1/2 so that E[z z^H] is the
    identity exactly (no extra factor of 2).
    """
    z = rng.standard_normal((2,) + tuple(np.atleast_1d(shape)))
    return (z[0] + 1j * z[1]) / math.sqrt(2.0)


def sample_complex_gaussian(cov: np.ndarray, rng: np.random.Generator,
                            size: int | None = None) -> np.ndarray:
    """Draw CN(0, cov) vectors; columns are independent draws when size is given."""
    cov = np.asarray(cov, dtype=np.complex128)
    chol = np.linalg.cholesky(cov)  # raises LinAlgError if cov is not positive definite
    n = cov.shape[0]
    shape = (n,) if size is None else (n, size)
    return chol @ complex_gaussian(rng, shape)


def coloring_factor(r_cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor C with C C^H = R. Whitening = solving against C."""
    return np.linalg.cholesky(np.asarray(r_cov, dtype=np.complex128))


def _numerical_rank(mat: np.ndarray) -> int:
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    return int(np.count_nonzero(sv > RANK_RTOL * sv[0]))


def _require_full_rank(mat: np.ndarray, name: str) -> None:
    cols = mat.shape[1]
    if _numerical_rank(mat) < cols:
        raise np.linalg.LinAlgError(f"{name} is rank deficient ({mat.shape})")


def _orth(mat: np.ndarray) -> np.ndarray:
    """Orthonormal basis for the column space (matrix assumed full column rank)."""
    qmat, _ = np.linalg.qr(mat)
    return qmat


class MismatchMetrics(NamedTuple):
    sin2psi: float
    cos2theta: float
    cos2phi: float
    rho_snr: float
    rho_eff: float
    delta2: float


def _metrics_whitened(sbar: np.ndarray, hbar: np.ndarray, jbar: np.ndarray) -> MismatchMetrics:
    rho_snr = float(np.real(np.vdot(sbar, sbar)))
    if rho_snr <= 0.0:
        raise InvalidParameterError("signal vector is zero; mismatch angles undefined")
    if jbar.shape[1] > 0:
        _require_full_rank(jbar, "whitened interference matrix")
        qj = _orth(jbar)
        z = sbar - qj @ (qj.conj().T @ sbar)
        h_perp = hbar - qj @ (qj.conj().T @ hbar)
    else:
        z = sbar
        h_perp = hbar
    _require_full_rank(h_perp, "interference-rejected nominal matrix")
    z_norm2 = float(np.real(np.vdot(z, z)))
    qa = _orth(h_perp)
    rho_eff = float(np.real(np.vdot(qa.conj().T @ sbar, qa.conj().T @ sbar)))
    qh = _orth(hbar)
    cos2phi = float(np.real(np.vdot(qh.conj().T @ sbar, qh.conj().T @ sbar))) / rho_snr
    sin2psi = z_norm2 / rho_snr
    cos2theta = rho_eff / z_norm2 if z_norm2 > 0.0 else float("nan")
    delta2 = max(z_norm2 - rho_eff, 0.0)
    return MismatchMetrics(
        sin2psi=min(sin2psi, 1.0),
        cos2theta=min(cos2theta, 1.0),
        cos2phi=min(cos2phi, 1.0),
        rho_snr=rho_snr,
        rho_eff=rho_eff,
        delta2=delta2,
    )


def mismatch_metrics(r_cov: np.ndarray, h_mat: np.ndarray, j_mat: np.ndarray,
                     s0: np.ndarray) -> MismatchMetrics:
    """Whitened-domain geometry of an actual signal against the nominal model.

    Returns (sin2psi, cos2theta, cos2phi, rho_snr, rho_eff, delta2) where
    sin2psi measures the part of the signal surviving interference rejection,
    cos2theta the alignment of that part with the rejected nominal subspace,
    cos2phi the plain alignment with the nominal subspace, rho_snr the whitened
    signal energy, rho_eff the effective (detectable) energy, and delta2 the
    energy lost to mismatch.  Identity: rho_eff + delta2 = rho_snr * sin2psi.
    """
    chol = coloring_factor(r_cov)
    sbar = np.linalg.solve(chol, np.asarray(s0, dtype=np.complex128))
    hbar = np.linalg.solve(chol, np.asarray(h_mat, dtype=np.complex128))
    j_mat = np.asarray(j_mat, dtype=np.complex128)
    jbar = np.linalg.solve(chol, j_mat) if j_mat.shape[1] > 0 else j_mat
    return _metrics_whitened(sbar, hbar, jbar)


def _sin2psi_of(sbar: np.ndarray, qj: np.ndarray) -> float:
    z = sbar - qj @ (qj.conj().T @ sbar)
    denom = float(np.real(np.vdot(sbar, sbar)))
    return float(np.real(np.vdot(z, z))) / denom


def _cos2theta_of(sbar: np.ndarray, hbar: np.ndarray, qj: np.ndarray | None) -> float:
    if qj is not None:
        z = sbar - qj @ (qj.conj().T @ sbar)
        h_perp = hbar - qj @ (qj.conj().T @ hbar)
    else:
        z = sbar
        h_perp = hbar
    qa = _orth(h_perp)
    num = float(np.real(np.vdot(qa.conj().T @ z, qa.conj().T @ z)))
    den = float(np.real(np.vdot(z, z)))
    return num / den


def _bisect_metric(metric, target: float, name: str) -> float:
    """Solve metric(x) = target for x in [0, 1] by bracketed bisection.

    The metric is continuous with metric(0) and metric(1) on opposite sides of
    the target; bisection keeps a sign change so monotonicity is not required.
    Falls back to a 1e-3 grid scan for a bracketing cell if the endpoints fail.
    """
    glo = metric(0.0) - target
    ghi = metric(1.0) - target
    lo, hi = 0.0, 1.0
    if glo == 0.0:
        return 0.0
    if ghi == 0.0:
        return 1.0
    if glo * ghi > 0.0:
        xs = np.linspace(0.0, 1.0, 1001)
        vals = np.array([metric(float(x)) - target for x in xs])
        cells = np.nonzero(vals[:-1] * vals[1:] <= 0.0)[0]
        if cells.size == 0:
            raise ConstructionError(f"no bracket found for {name} target {target}")
        lo, hi = float(xs[cells[0]]), float(xs[cells[0] + 1])
        glo = vals[cells[0]]
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        gmid = metric(mid) - target
        if abs(gmid) <= METRIC_ROOT_TOL:
            return mid
        if glo * gmid <= 0.0:
            hi = mid
        else:
            lo, glo = mid, gmid
    return 0.5 * (lo + hi)


def generate_interference_subspace(n: int, q: int, rng: np.random.Generator) -> np.ndarray:
    """Random N x q interference matrix with full column rank.

    Entries are i.i.d. standard complex Gaussian; degenerate draws (singular
    value ratio below RANK_RTOL) are redrawn, up to a bounded attempt count.
    """
    if not 1 <= q <= n:
        raise InvalidParameterError(f"need 1 <= q <= n, got q={q}, n={n}")
    for _ in range(_MAX_REDRAW):
        j_mat = complex_gaussian(rng, (n, q))
        if _numerical_rank(j_mat) == q:
            return j_mat
    raise ConstructionError(f"could not draw a rank-{q} interference matrix in {_MAX_REDRAW} attempts")


def build_actual_signal(r_cov: np.ndarray, j_mat: np.ndarray, sin2psi_target: float,
                        snr_db: float) -> np.ndarray:
    """Actual signal with prescribed rejection angle and whitened energy.

    Interpolates between the first whitened interference column (sin2psi = 0)
    and a direction orthogonal to the whitened interference span (sin2psi = 1),
    the latter taken from the full SVD of the whitened interference matrix.
    The interpolation weight is found by bisection, then the vector is scaled
    so its whitened energy equals 10**(snr_db / 10) and mapped back to the
    unwhitened domain.
    """
    if not 0.0 <= sin2psi_target <= 1.0:
        raise InvalidParameterError(f"sin2psi target must lie in [0, 1], got {sin2psi_target}")
    j_mat = np.asarray(j_mat, dtype=np.complex128)
    n, q = j_mat.shape
    if q < 1 or q >= n:
        raise InvalidParameterError(f"need 1 <= q < n for signal construction, got q={q}, n={n}")
    chol = coloring_factor(r_cov)
    jbar = np.linalg.solve(chol, j_mat)
    _require_full_rank(jbar, "whitened interference matrix")
    qj = _orth(jbar)
    j0 = jbar[:, 0]
    u_full = np.linalg.svd(jbar, full_matrices=True)[0]
    j1 = u_full[:, -1]

    def metric(r: float) -> float:
        return _sin2psi_of(r * j0 + (1.0 - r) * j1, qj)

    if abs(metric(0.0) - 1.0) > 1e-9 or metric(1.0) > 1e-9:
        raise ConstructionError("interpolation endpoints do not realize sin2psi of 1 and 0")
    if sin2psi_target == 1.0:
        r = 0.0
    elif sin2psi_target == 0.0:
        r = 1.0
    else:
        r = _bisect_metric(metric, sin2psi_target, "sin2psi")
    sbar = r * j0 + (1.0 - r) * j1
    achieved = _sin2psi_of(sbar, qj)
    if abs(achieved - sin2psi_target) > METRIC_CHECK_TOL:
        raise ConstructionError(
            f"sin2psi target {sin2psi_target} unreachable; achieved {achieved}")
    sbar = sbar * math.sqrt(10.0 ** (snr_db / 10.0)) / np.linalg.norm(sbar)
    return chol @ sbar


def build_nominal_matrix(r_cov: np.ndarray, j_mat: np.ndarray, s0: np.ndarray,
                         cos2theta_target: float, p: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Nominal signal matrix with prescribed mismatch angle against s0.

    Interpolates between a matrix containing the whitened actual signal as a
    column (cos2theta = 1) and columns orthogonal to the interference-rejected
    signal (cos2theta = 0).  The weight is found by bisection; the stacked
    nominal-plus-interference matrix is checked for full rank, redrawing the
    random filler columns when p > 1.
    """
    if not 0.0 <= cos2theta_target <= 1.0:
        raise InvalidParameterError(f"cos2theta target must lie in [0, 1], got {cos2theta_target}")
    j_mat = np.asarray(j_mat, dtype=np.complex128)
    n, q = j_mat.shape
    if p < 1 or p + q > n:
        raise InvalidParameterError(f"need p >= 1 and p + q <= n, got p={p}, q={q}, n={n}")
    chol = coloring_factor(r_cov)
    sbar = np.linalg.solve(chol, np.asarray(s0, dtype=np.complex128))
    if q > 0:
        jbar = np.linalg.solve(chol, j_mat)
        _require_full_rank(jbar, "whitened interference matrix")
        qj = _orth(jbar)
        z = sbar - qj @ (qj.conj().T @ sbar)
    else:
        jbar = j_mat
        qj = None
        z = sbar
    z_norm = np.linalg.norm(z)
    if z_norm <= RANK_RTOL * np.linalg.norm(sbar):
        raise InvalidParameterError("signal lies in the interference span; mismatch angle undefined")
    w_full = np.linalg.svd(z.reshape(n, 1), full_matrices=True)[0]
    h_orth = w_full[:, n - p:]  # orthogonal to the rejected signal

    last_achieved = math.nan
    for _ in range(_MAX_REDRAW):
        filler = complex_gaussian(rng, (n, p - 1)) if p > 1 else np.zeros((n, 0), dtype=np.complex128)
        h_aligned = np.concatenate([sbar[:, None], filler], axis=1)

        def metric(alpha: float) -> float:
            return _cos2theta_of(sbar, alpha * h_aligned + (1.0 - alpha) * h_orth, qj)

        if metric(0.0) > 1e-9 or abs(metric(1.0) - 1.0) > 1e-9:
            raise ConstructionError("interpolation endpoints do not realize cos2theta of 0 and 1")
        if cos2theta_target == 1.0:
            alpha = 1.0
        elif cos2theta_target == 0.0:
            alpha = 0.0
        else:
            alpha = _bisect_metric(metric, cos2theta_target, "cos2theta")
        hbar = alpha * h_aligned + (1.0 - alpha) * h_orth
        last_achieved = _cos2theta_of(sbar, hbar, qj)
        stacked = np.concatenate([hbar, jbar], axis=1)
        if (abs(last_achieved - cos2theta_target) <= METRIC_CHECK_TOL
                and _numerical_rank(stacked) == p + q):
            return chol @ hbar
        if p == 1:
            break  # nothing random to redraw
    raise ConstructionError(
        f"cos2theta target {cos2theta_target} unreachable; achieved {last_achieved}")


def build_interference_vector(r_cov: np.ndarray, j_mat: np.ndarray, inr_db: float,
                              rng: np.random.Generator) -> np.ndarray:
    """Random interference draw scaled so j^H R^{-1} j equals the linear INR.

    The coordinate vector is standard complex Gaussian, redrawn if degenerate.
    inr_db of -inf (or an empty interference matrix) yields the zero vector.
    """
    j_mat = np.asarray(j_mat, dtype=np.complex128)
    n, q = j_mat.shape
    if q == 0 or inr_db == -math.inf:
        return np.zeros(n, dtype=np.complex128)
    chol = coloring_factor(r_cov)
    jbar = np.linalg.solve(chol, j_mat)
    for _ in range(_MAX_REDRAW):
        phi = complex_gaussian(rng, (q,))
        power = float(np.real(np.vdot(jbar @ phi, jbar @ phi)))
        if power > 0.0:
            scale = math.sqrt(10.0 ** (inr_db / 10.0) / power)
            return scale * (j_mat @ phi)
    raise ConstructionError("interference coordinates degenerate after redraws")


@dataclass(frozen=True)
class Scenario:
    """A fully specified detection problem instance.

    n, l, p, q are the channel count, training-set size, nominal subspace
    dimension and interference subspace dimension.  sin2psi and cos2theta are
    the realized (recomputed) geometry of s0 against j_mat and h_mat.
    """
    n: int
    l: int
    p: int
    q: int
    r_cov: np.ndarray
    h_mat: np.ndarray
    j_mat: np.ndarray
    s0: np.ndarray
    snr_db: float
    inr_db: float
    sin2psi: float
    cos2theta: float
    seed: int

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.q < 0:
            raise InvalidParameterError("dimensions must satisfy n >= 1, p >= 1, q >= 0")
        if self.p + self.q > self.n:
            raise InvalidParameterError(f"need p + q <= n, got p={self.p}, q={self.q}, n={self.n}")
        if self.l < self.n:
            raise InvalidParameterError(f"need l >= n for an invertible scatter matrix, got l={self.l}, n={self.n}")

    def with_snr(self, snr_db: float) -> "Scenario":
        """Same geometry with the actual signal rescaled to a new SNR."""
        if self.snr_db == -math.inf:
            raise InvalidParameterError("cannot rescale a zero-signal scenario")
        if snr_db == -math.inf:
            scale = 0.0
        else:
            scale = 10.0 ** ((snr_db - self.snr_db) / 20.0)
        return replace(self, s0=self.s0 * scale, snr_db=snr_db)

    def validate(self) -> None:
        """Check internal consistency; raises on violation."""
        np.linalg.cholesky(self.r_cov)  # positive definite
        if self.h_mat.shape != (self.n, self.p) or self.j_mat.shape != (self.n, self.q):
            raise InvalidParameterError("subspace matrix shapes disagree with (n, p, q)")
        stacked = np.concatenate([self.h_mat, self.j_mat], axis=1)
        if _numerical_rank(stacked) < self.p + self.q:
            raise np.linalg.LinAlgError("stacked nominal/interference matrix is rank deficient")
        if np.linalg.norm(self.s0) == 0.0:
            if self.snr_db != -math.inf:
                raise InvalidParameterError("zero signal with finite snr_db")
            return
        chol = coloring_factor(self.r_cov)
        sbar = np.linalg.solve(chol, self.s0)
        energy = float(np.real(np.vdot(sbar, sbar)))
        if abs(energy - 10.0 ** (self.snr_db / 10.0)) > 1e-8 * max(1.0, energy):
            raise InvalidParameterError("whitened signal energy disagrees with snr_db")
        metrics = mismatch_metrics(self.r_cov, self.h_mat, self.j_mat, self.s0)
        if abs(metrics.sin2psi - self.sin2psi) > 1e-8 or abs(metrics.cos2theta - self.cos2theta) > 1e-8:
            raise InvalidParameterError("stored mismatch angles disagree with recomputation")


def make_scenario(n: int, l: int, p: int, q: int, eps: float, snr_db: float,
                  inr_db: float, sin2psi: float, cos2theta: float, seed: int) -> Scenario:
    """Construct a complete scenario from scalar targets.

    The random draws (interference matrix, filler nominal columns) derive from
    the seed alone, so the geometry is reproducible.  snr_db must be finite at
    construction; use Scenario.with_snr afterwards for the zero-signal limit.
    """
    if snr_db == -math.inf:
        raise InvalidParameterError("construct at a finite snr_db, then rescale with with_snr")
    rng = np.random.default_rng(seed)
    r_cov = covariance_exponential(n, eps)
    if q > 0:
        j_mat = generate_interference_subspace(n, q, rng)
        s0 = build_actual_signal(r_cov, j_mat, sin2psi, snr_db)
    else:
        if sin2psi != 1.0:
            raise InvalidParameterError("without interference the rejection angle is fixed at sin2psi = 1")
        j_mat = np.zeros((n, 0), dtype=np.complex128)
        chol = coloring_factor(r_cov)
        sbar = complex_gaussian(rng, (n,))
        sbar = sbar * math.sqrt(10.0 ** (snr_db / 10.0)) / np.linalg.norm(sbar)
        s0 = chol @ sbar
    h_mat = build_nominal_matrix(r_cov, j_mat, s0, cos2theta, p, rng)
    metrics = mismatch_metrics(r_cov, h_mat, j_mat, s0)
    scenario = Scenario(
        n=n, l=l, p=p, q=q, r_cov=r_cov, h_mat=h_mat, j_mat=j_mat, s0=s0,
        snr_db=snr_db, inr_db=inr_db,
        sin2psi=metrics.sin2psi, cos2theta=metrics.cos2theta, seed=seed,
    )
    scenario.validate()
    return scenario


@dataclass(frozen=True)
class DataBatch:
    """One trial: test vector, training set, generating hypothesis and seed."""
    x: np.ndarray
    training: np.ndarray
    hypothesis: str
    seed: object

    def __post_init__(self):
        if self.hypothesis not in HYPOTHESES:
            raise InvalidParameterError(f"hypothesis must be one of {HYPOTHESES}")
        if self.x.ndim != 1 or self.training.ndim != 2 or self.training.shape[0] != self.x.shape[0]:
            raise InvalidParameterError("test vector and training columns have inconsistent shapes")


class _BatchWorkspace(NamedTuple):
    chol: np.ndarray
    jbar: np.ndarray


def _workspace(scenario: Scenario) -> _BatchWorkspace:
    chol = coloring_factor(scenario.r_cov)
    jbar = (np.linalg.solve(chol, scenario.j_mat)
            if scenario.q > 0 else scenario.j_mat)
    return _BatchWorkspace(chol=chol, jbar=jbar)


def sample_batch(scenario: Scenario, hypothesis: str, seed,
                 fixed_phi: bool = False, _work: _BatchWorkspace | None = None) -> DataBatch:
    """Draw one test vector plus training set.

    seed may be an integer or a numpy SeedSequence; regeneration from the same
    seed and scenario is bit-identical.  The interference coordinate vector is
    redrawn every call unless fixed_phi is set, in which case a deterministic
    all-ones coordinate is used (the INR normalization still applies).
    """
    if hypothesis not in HYPOTHESES:
        raise InvalidParameterError(f"hypothesis must be one of {HYPOTHESES}")
    work = _work if _work is not None else _workspace(scenario)
    n, l, q = scenario.n, scenario.l, scenario.q
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, n, l + 1))
    raw = (z[0] + 1j * z[1]) / math.sqrt(2.0)
    training = work.chol @ raw[:, :l]
    x = work.chol @ raw[:, l]
    if q > 0 and scenario.inr_db != -math.inf:
        if fixed_phi:
            phi = np.ones(q, dtype=np.complex128)
        else:
            phi = complex_gaussian(rng, (q,))
        power = float(np.real(np.vdot(work.jbar @ phi, work.jbar @ phi)))
        if power <= 0.0:
            raise ConstructionError("degenerate interference coordinate draw")
        x = x + math.sqrt(10.0 ** (scenario.inr_db / 10.0) / power) * (scenario.j_mat @ phi)
    if hypothesis == "H1":
        x = x + scenario.s0
    return DataBatch(x=x, training=training, hypothesis=hypothesis, seed=seed)
