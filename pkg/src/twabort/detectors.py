"""Detection statistics built on the quasi-whitened sufficient pair.

Every detector in the family is a function of two scalars computed from one
test vector x, the training scatter matrix S = sum_l x_l x_l^H, and the
nominal/interference matrices H and J:

    T_J = interference-rejected whitened energy of x,
    T_H = part of that energy captured by the rejected nominal subspace,

with 0 <= T_H <= T_J.  Writing D = 1 + T_J - T_H, the statistics are

    GLRT-I      : T_H / D
    2S-GLRT-I   : T_H
    ABORT-I     : (1 + T_H) / D
    W-ABORT-I   : (1 + T_J) / D**2
    T-W-ABORT-I : (1 + T_J) / D**kappa      (kappa >= 0)
    AED         : T_J

and the loss factor is beta = 1 / D in (0, 1].  All quadratic forms are
evaluated through solves against S (never an explicit inverse square root);
the result does not depend on which factorization of S is used.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .scenario import DataBatch


class DetectorKind(enum.Enum):
    GLRT_I = "GLRT-I"
    TWO_STEP_GLRT_I = "2S-GLRT-I"
    ABORT_I = "ABORT-I"
    W_ABORT_I = "W-ABORT-I"
    T_W_ABORT_I = "T-W-ABORT-I"
    AED = "AED"


@dataclass(frozen=True)
class DetectorSpec:
    """A detector choice, with the tuning exponent for the tunable member."""
    kind: DetectorKind
    kappa: float | None = None

    def __post_init__(self):
        if self.kind is DetectorKind.T_W_ABORT_I:
            if self.kappa is None or self.kappa < 0.0:
                raise InvalidParameterError("T-W-ABORT-I needs a tuning exponent kappa >= 0")
        elif self.kappa is not None:
            raise InvalidParameterError(f"{self.kind.value} takes no tuning exponent")

    @property
    def label(self) -> str:
        if self.kind is DetectorKind.T_W_ABORT_I:
            return f"T-W-ABORT-I(kappa={self.kappa:g})"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "DetectorSpec":
        """Parse 'glrt-i', 'abort-i', 'tw-abort-i:0.8', 'aed', ... (case-insensitive)."""
        raw = text.strip().lower()
        m = re.fullmatch(r"(t-?w-abort-i)\s*:\s*([0-9.eE+-]+)", raw)
        if m:
            return cls(DetectorKind.T_W_ABORT_I, kappa=float(m.group(2)))
        table = {
            "glrt-i": DetectorKind.GLRT_I,
            "2s-glrt-i": DetectorKind.TWO_STEP_GLRT_I,
            "abort-i": DetectorKind.ABORT_I,
            "w-abort-i": DetectorKind.W_ABORT_I,
            "aed": DetectorKind.AED,
        }
        if raw in table:
            return cls(table[raw])
        raise InvalidParameterError(f"unknown detector {text!r}")


@dataclass(frozen=True)
class SufficientPair:
    """The two quadratic forms every statistic is built from."""
    t_j: float
    t_h: float

    def __post_init__(self):
        if not (0.0 <= self.t_h <= self.t_j):
            raise InvalidParameterError(f"need 0 <= t_h <= t_j, got t_h={self.t_h}, t_j={self.t_j}")


def sufficient_pairs(x: np.ndarray, training: np.ndarray, h_mat: np.ndarray,
                     j_mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized sufficient pair over a stack of trials.

    x has shape (T, n), training (T, n, l); h_mat and j_mat are shared across
    trials.  Returns (t_j, t_h) arrays of length T.  Each trial forms
    S = training @ training^H, whitens [x, J, H] by solving against the
    Cholesky factor of S, and reduces the resulting Gram matrix:

        T_J = x^H S^-1 x - u^H (J^H S^-1 J)^-1 u,     u = J^H S^-1 x
        T_H = v^H (H^H S^-1 H - cross terms)^-1 v,    v = rejected cross vector

    which are the interference-rejected projections stated in the module
    docstring, written without any explicit inverse square root.
    """
    x = np.asarray(x, dtype=np.complex128)
    training = np.asarray(training, dtype=np.complex128)
    h_mat = np.asarray(h_mat, dtype=np.complex128)
    j_mat = np.asarray(j_mat, dtype=np.complex128)
    trials, n = x.shape
    q = j_mat.shape[1]
    p = h_mat.shape[1]
    scatter = training @ training.conj().swapaxes(-1, -2)
    try:
        chol = np.linalg.cholesky(scatter)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "training scatter matrix is not positive definite; need l >= n "
            "independent training vectors") from exc
    stacked = np.concatenate([
        x[:, :, None],
        np.broadcast_to(j_mat, (trials, n, q)),
        np.broadcast_to(h_mat, (trials, n, p)),
    ], axis=2)
    w = np.linalg.solve(chol, stacked)
    gram = w.conj().swapaxes(-1, -2) @ w  # [x J H]^H S^-1 [x J H]
    g_xx = gram[:, 0, 0].real
    if q > 0:
        g_jj = gram[:, 1:1 + q, 1:1 + q]
        g_jx = gram[:, 1:1 + q, 0:1]
        g_jh = gram[:, 1:1 + q, 1 + q:]
        sol = np.linalg.solve(g_jj, np.concatenate([g_jx, g_jh], axis=2))
        sol_x, sol_h = sol[:, :, 0:1], sol[:, :, 1:]
        t_j = g_xx - (g_jx.conj().swapaxes(-1, -2) @ sol_x)[:, 0, 0].real
        f_hh = gram[:, 1 + q:, 1 + q:] - g_jh.conj().swapaxes(-1, -2) @ sol_h
        v = gram[:, 1 + q:, 0:1] - g_jh.conj().swapaxes(-1, -2) @ sol_x
    else:
        t_j = g_xx
        f_hh = gram[:, 1:, 1:]
        v = gram[:, 1:, 0:1]
    t_h = (v.conj().swapaxes(-1, -2) @ np.linalg.solve(f_hh, v))[:, 0, 0].real
    t_j = np.maximum(t_j, 0.0)
    t_h = np.clip(t_h, 0.0, t_j)
    return t_j, t_h


def sufficient_pair(batch: DataBatch, h_mat: np.ndarray, j_mat: np.ndarray) -> SufficientPair:
    """Sufficient pair for a single trial."""
    t_j, t_h = sufficient_pairs(batch.x[None, :], batch.training[None, :, :], h_mat, j_mat)
    return SufficientPair(t_j=float(t_j[0]), t_h=float(t_h[0]))


def sufficient_pair_reference(batch: DataBatch, h_mat: np.ndarray,
                              j_mat: np.ndarray) -> SufficientPair:
    """Cross-check path: explicit Hermitian inverse square root and projectors.

    Used by the validation suite to confirm the solve-based path is invariant
    to the choice of factorization of the training scatter matrix.
    """
    h_mat = np.asarray(h_mat, dtype=np.complex128)
    j_mat = np.asarray(j_mat, dtype=np.complex128)
    scatter = batch.training @ batch.training.conj().T
    evals, evecs = np.linalg.eigh(scatter)
    if np.min(evals) <= 0.0:
        raise np.linalg.LinAlgError("training scatter matrix is not positive definite")
    isqrt = (evecs * (1.0 / np.sqrt(evals))) @ evecs.conj().T
    xt = isqrt @ batch.x
    ht = isqrt @ h_mat
    n = xt.shape[0]
    if j_mat.shape[1] > 0:
        jt = isqrt @ j_mat
        pj = jt @ np.linalg.solve(jt.conj().T @ jt, jt.conj().T)
        pj_perp = np.eye(n) - pj
    else:
        pj_perp = np.eye(n)
    a = pj_perp @ ht
    pa = a @ np.linalg.solve(a.conj().T @ a, a.conj().T)
    t_j = float(np.real(xt.conj() @ (pj_perp @ xt)))
    t_h = float(np.real(xt.conj() @ (pa @ xt)))
    return SufficientPair(t_j=max(t_j, 0.0), t_h=min(max(t_h, 0.0), max(t_j, 0.0)))


def statistic_values(t_j: np.ndarray, t_h: np.ndarray, spec: DetectorSpec) -> np.ndarray:
    """Detector statistic over arrays of sufficient pairs."""
    t_j = np.asarray(t_j, dtype=np.float64)
    t_h = np.asarray(t_h, dtype=np.float64)
    d = 1.0 + t_j - t_h
    kind = spec.kind
    if kind is DetectorKind.GLRT_I:
        return t_h / d
    if kind is DetectorKind.TWO_STEP_GLRT_I:
        return t_h.copy()
    if kind is DetectorKind.ABORT_I:
        return (1.0 + t_h) / d
    if kind is DetectorKind.W_ABORT_I:
        return _tunable(t_j, d, 2.0)
    if kind is DetectorKind.T_W_ABORT_I:
        return _tunable(t_j, d, spec.kappa)
    if kind is DetectorKind.AED:
        return t_j.copy()
    raise InvalidParameterError(f"unhandled detector kind {kind}")


def _tunable(t_j: np.ndarray, d: np.ndarray, kappa: float) -> np.ndarray:
    # Shared by W-ABORT-I and T-W-ABORT-I so that kappa = 2 is bit-identical.
    return (1.0 + t_j) / d ** kappa


def detector_statistic(pair: SufficientPair, spec: DetectorSpec) -> float:
    """Scalar statistic for one trial."""
    value = statistic_values(np.array([pair.t_j]), np.array([pair.t_h]), spec)
    return float(value[0])


def loss_factor_values(t_j: np.ndarray, t_h: np.ndarray) -> np.ndarray:
    """Loss factor beta = 1 / (1 + T_J - T_H), in (0, 1]."""
    return 1.0 / (1.0 + np.asarray(t_j) - np.asarray(t_h))


def loss_factor(pair: SufficientPair) -> float:
    return float(loss_factor_values(pair.t_j, pair.t_h))
