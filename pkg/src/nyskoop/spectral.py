"""Eigenvalues, eigenfunctions, Koopman modes and forecasting.

Given a fitted estimator ``A = Phi_y U_r V_r.T Phi_x^*`` the spectral data
comes from the r x r matrix ``M = V_r.T @ Kxy @ U_r``:

* right eigenfunctions ``psi_i = Phi_y U_r g_i`` with ``M g_i = lam_i g_i``,
  normalized to unit RKHS norm ``g_i^* U_r.T Kyy U_r g_i = 1``;
* left eigenfunctions ``xi_i = Phi_x V_r h_i / conj(lam_i)`` with
  ``M.T h_i = conj(lam_i) h_i``, scaled so that ``h_i^* g_i = 1`` which makes
  the psi/xi system biorthogonal;
* Koopman modes of an observable ``g`` sampled at the output centers as
  ``g_m``: ``gamma_i = g_i^* U_r.T g_m``.

The mode expansion used for multi-step prediction,
``sum_i conj(lam_i)^t xi_i(x) gamma_i``, reproduces the matrix power
``k_x.T V_r (M.T)^(t-1) U_r.T g_m`` exactly, so at horizon 1 it agrees with
the plain one-step forecast whenever the decomposition is complete.
"""

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import InputError
from .estimators import FittedEstimator
from .kernels import gram
from .linalg import sort_descending_modulus, symmetrize


def _psd_sqrt_factor(k):
    """R with R.T R = K for PSD K; lets quadratic forms x^T K x be evaluated
    as ||R x||^2, a cancellation-free sum of squares."""
    w, v = scipy.linalg.eigh(symmetrize(k))
    return (v * np.sqrt(np.clip(w, 0.0, None))).T

# below this modulus an eigenvalue's left eigenfunction (which divides by
# the eigenvalue) is reported but flagged non-normalizable
TINY_EIGENVALUE = 1e-12

_DEFECT_TOL = 1e-8


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-triplets of a fitted estimator.

    ``eigenvalues`` are sorted by descending modulus with conjugate pairs
    adjacent.  ``right_coefs``/``left_coefs`` are the (m, r) complex
    coefficient arrays over the output/input centers, i.e. column i holds
    ``U_r g_i`` resp. ``V_r h_i / conj(lam_i)``; flagged columns of
    ``left_coefs`` are zero.
    """

    estimator: FittedEstimator
    eigenvalues: np.ndarray
    right_factor: np.ndarray = field(repr=False)
    left_factor: np.ndarray = field(repr=False)
    right_coefs: np.ndarray = field(repr=False)
    left_coefs: np.ndarray = field(repr=False)
    normalizable: np.ndarray = field(repr=False)
    defective: bool = False
    residuals: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def r(self) -> int:
        return self.eigenvalues.shape[0]


def decompose(est: FittedEstimator) -> SpectralDecomposition:
    """Diagonalize the fitted operator through its rank-r factors."""
    mid = est.v_r.T @ est.k_xy @ est.u_r
    lam, vl, vr = scipy.linalg.eig(mid, left=True, right=True)
    order = sort_descending_modulus(lam)
    lam = lam[order]
    g = vr[:, order].astype(np.complex128)
    h = vl[:, order].astype(np.complex128)

    # unit-norm right eigenfunctions: g^* (U^T Kyy U) g = 1, evaluated as
    # ||R U g||^2 through a square root of Kyy to avoid cancellation; pairs
    # whose norm is so small that the rescaling cannot be trusted to better
    # than 1e-9 relative error are flagged alongside the tiny eigenvalues
    root_u = _psd_sqrt_factor(est.k_yy) @ est.u_r
    psi_sq = np.sum(np.abs(root_u @ g) ** 2, axis=0)
    psi_floor = 1e9 * np.finfo(float).eps * np.sum(root_u**2)
    ok_psi = psi_sq > psi_floor
    g[:, ok_psi] = g[:, ok_psi] / np.sqrt(psi_sq[ok_psi])

    # biorthogonality scale: h_i^* g_i = 1
    s = np.einsum("ij,ij->j", h.conj(), g)
    degenerate = np.abs(s) < _DEFECT_TOL
    h[:, ~degenerate] = h[:, ~degenerate] / s[~degenerate].conj()

    normalizable = (np.abs(lam) >= TINY_EIGENVALUE) & ~degenerate & ok_psi
    defective = bool(np.any(degenerate))
    residuals = None
    if defective:
        res = mid @ g - g * lam
        residuals = np.sqrt(np.einsum("ij,ij->j", res.conj(), res).real)
        warnings.warn(
            "near-defective middle matrix: left/right eigenvectors of "
            f"{int(np.sum(degenerate))} eigenpair(s) are almost orthogonal",
            RuntimeWarning,
            stacklevel=2,
        )

    right_coefs = est.u_r @ g
    left_coefs = np.zeros((est.m, lam.shape[0]), dtype=np.complex128)
    keep = normalizable
    left_coefs[:, keep] = (est.v_r @ h[:, keep]) / lam[keep].conj()

    return SpectralDecomposition(
        estimator=est,
        eigenvalues=lam,
        right_factor=g,
        left_factor=h,
        right_coefs=right_coefs,
        left_coefs=left_coefs,
        normalizable=normalizable,
        defective=defective,
        residuals=residuals,
    )


def biorthogonality(dec: SpectralDecomposition) -> np.ndarray:
    """The pairing matrix <psi_i, conj(xi_j)>; identity for a clean system."""
    b = dec.left_factor.conj().T @ dec.right_factor
    lam = dec.eigenvalues
    safe = np.where(np.abs(lam) < TINY_EIGENVALUE, 1.0, lam)
    return b.T * np.outer(lam, 1.0 / safe)


def psi_norms(dec: SpectralDecomposition) -> np.ndarray:
    """RKHS norms <psi_i, psi_i>; unity after normalization."""
    est = dec.estimator
    root = _psd_sqrt_factor(est.k_yy)
    return np.sum(np.abs(root @ dec.right_coefs) ** 2, axis=0)


def eval_eigenfunctions(dec: SpectralDecomposition, X, side: str = "right") -> np.ndarray:
    """Evaluate eigenfunctions at query states; returns (n, r) complex."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if not np.all(np.isfinite(X)):
        raise InputError("query states contain non-finite values")
    est = dec.estimator
    if side == "right":
        k = gram(est.kernel, X, est.y_centers)
        return k @ dec.right_coefs
    if side == "left":
        k = gram(est.kernel, X, est.x_centers)
        return k @ dec.left_coefs
    raise InputError(f"side must be 'right' or 'left', got {side!r}")


def identity_observable(est: FittedEstimator) -> np.ndarray:
    """Observable values g_m for the identity map: the output-center states."""
    return est.y_centers


def forecast(est: FittedEstimator, g_m, X_query) -> np.ndarray:
    """One-step conditional expectation of the observable at each query.

    ``g_m`` holds the observable's values at the m output centers, one row
    per center.  With ``g_m = identity_observable(est)`` this forecasts the
    next state.
    """
    g_m = np.asarray(g_m, dtype=np.float64)
    if g_m.ndim == 1:
        g_m = g_m[:, None]
    if g_m.shape[0] != est.m:
        raise InputError(f"g_m must have m={est.m} rows, got {g_m.shape[0]}")
    X_query = np.asarray(X_query, dtype=np.float64)
    if X_query.ndim == 1:
        X_query = X_query[:, None]
    kq = gram(est.kernel, X_query, est.x_centers)
    return kq @ (est.v_r @ (est.u_r.T @ g_m))


@dataclass(frozen=True)
class ModeSet:
    """Koopman modes gamma_i of an observable, one row per eigenpair."""

    values: np.ndarray
    g_m: np.ndarray = field(repr=False)


def modes(dec: SpectralDecomposition, g_m) -> ModeSet:
    """Projection coefficients of the observable onto the eigenfunctions."""
    g_m = np.asarray(g_m, dtype=np.float64)
    if g_m.ndim == 1:
        g_m = g_m[:, None]
    if g_m.shape[0] != dec.estimator.m:
        raise InputError(f"g_m must have m={dec.estimator.m} rows")
    gamma = dec.right_factor.conj().T @ (dec.estimator.u_r.T @ g_m)
    return ModeSet(values=gamma, g_m=g_m)


def kmd_forecast(
    dec: SpectralDecomposition,
    mode_set: ModeSet,
    X_query,
    horizon: int,
) -> np.ndarray:
    """Mode-expansion forecast ``sum_i conj(lam_i)^t xi_i(x) gamma_i``.

    Returns a complex array; for real systems the imaginary part is
    round-off (callers may check it before taking the real part).
    Non-normalizable eigenpairs are excluded with a warning.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    keep = dec.normalizable
    if not np.all(keep):
        warnings.warn(
            f"excluding {int(np.sum(~keep))} non-normalizable eigenpair(s) "
            "from the mode expansion",
            RuntimeWarning,
            stacklevel=2,
        )
    xi = eval_eigenfunctions(dec, X_query, side="left")[:, keep]
    weights = dec.eigenvalues[keep].conj() ** horizon
    return (xi * weights) @ mode_set.values[keep]


def rollout_forecast(est: FittedEstimator, X_query, horizon: int) -> np.ndarray:
    """Multi-step state forecast by repeated one-step application,
    re-embedding the predicted state each time."""
    horizon = int(horizon)
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    g_m = identity_observable(est)
    state = np.asarray(X_query, dtype=np.float64)
    if state.ndim == 1:
        state = state[:, None]
    for _ in range(horizon):
        state = forecast(est, g_m, state)
    return state


def implied_timescale(eigenvalue: complex, lag_time: float = 1.0) -> Optional[float]:
    """Relaxation time ``-lag_time / log|lam|``; None when undefined."""
    mod = abs(eigenvalue)
    if mod <= 0.0:
        return None
    log_mod = np.log(mod)
    if log_mod == 0.0:
        return None
    return float(-lag_time / log_mod)


def spectrum_records(dec: SpectralDecomposition, lag_time: float = 1.0) -> list:
    """JSON-ready spectrum rows with implied timescales."""
    out = []
    for lam in dec.eigenvalues:
        out.append(
            {
                "re": float(lam.real),
                "im": float(lam.imag),
                "modulus": float(abs(lam)),
                "implied_timescale": implied_timescale(lam, lag_time),
            }
        )
    return out


def save_spectrum_json(path, dec: SpectralDecomposition, lag_time: float = 1.0) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spectrum_records(dec, lag_time), fh, indent=2)
        fh.write("\n")
