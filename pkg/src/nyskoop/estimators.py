"""Sketched (Nystrom) and exact kernel estimators of the Koopman operator.

Every estimator is stored in the common factored form ``A = Phi_y W Phi_x^*``
with ``W = U_r @ V_r.T`` acting on the coefficient space of the m inducing
points.

All three fits are computed in a whitened center basis: with ``N_x``/``N_y``
the whitening factors of the center blocks (``N.T K N = I``, rank-truncated
at the ``max(shape)*eps*s_max`` cutoff), define the orthonormal-feature
coordinates ``Z = Kxn.T @ N_x`` (n, p) and ``T = Kyn.T @ N_y`` (n, q), and
``C = Z.T Z``, ``M = T.T Z``.  Then

* KRR:  ``W = N_y @ M @ inv(C + n lam I) @ N_x.T``
* PCR:  top-r eigenpairs ``C h = nu h``;
  ``U_r = N_y M H_r``, ``V_r = N_x H_r diag(1/nu_r)``
* RRR:  top-r of the definite pencil ``M.T M w = s^2 (C + n lam I) w`` with
  ``w.T M.T M w = 1``; ``U_r = N_y M W_r``, ``V_r = N_x inv(C + n lam I) M.T M W_r``

These are algebraically the textbook center-block pseudo-inverse formulas
(``W = pinv(Kyy) Kyn Kxn.T pinv(Kxn Kxn.T + n lam Kxx)`` for KRR, and the
corresponding m x m eigenproblems for PCR/RRR), but the whitened basis
inverts square roots of the center spectra instead of the spectra
themselves, which is what keeps fits on strongly correlated trajectory data
(nearly singular Gram blocks) accurate.  Exact estimators run the same code
with all n pairs as centers, so sketched and exact fits coincide at m = n.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import LaggedPairs, NystromCenters, all_centers
from .errors import InputError, NumericError, RankDeficiencyError
from .kernels import KernelSpec, gram, gram_diag
import scipy.linalg

from .linalg import (
    numeric_rank,
    rank_tolerance,
    sym_inner,
    whiten_psd,
)

NYS_KRR = "nys-krr"
NYS_PCR = "nys-pcr"
NYS_RRR = "nys-rrr"
EXACT_KRR = "exact-krr"
EXACT_PCR = "exact-pcr"
EXACT_RRR = "exact-rrr"

KINDS = (NYS_KRR, NYS_PCR, NYS_RRR, EXACT_KRR, EXACT_PCR, EXACT_RRR)

DEFAULT_N_MAX_EXACT = 5000


@dataclass(frozen=True)
class FittedEstimator:
    """A fitted operator ``Phi_y (U_r V_r.T) Phi_x^*`` plus its centers.

    ``k_xx``, ``k_yy`` and ``k_xy`` are the center kernel blocks needed by
    risk evaluation and spectral post-processing; they are recomputed from
    the center coordinates when a model is loaded from disk.
    """

    kind: str
    kernel: KernelSpec
    u_r: np.ndarray
    v_r: np.ndarray
    rank: int
    lam: float
    x_centers: np.ndarray
    y_centers: np.ndarray
    k_xx: np.ndarray = field(repr=False)
    k_yy: np.ndarray = field(repr=False)
    k_xy: np.ndarray = field(repr=False)
    n_train: Optional[int] = None
    centers: Optional[NystromCenters] = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.x_centers.shape[0]

    @property
    def dim(self) -> int:
        return self.x_centers.shape[1]

    @property
    def w(self) -> np.ndarray:
        """The full (m, m) middle matrix ``U_r @ V_r.T``."""
        return self.u_r @ self.v_r.T


def _check_fit_inputs(pairs: LaggedPairs, centers: NystromCenters):
    if centers.k_xn.shape[1] != pairs.n:
        raise InputError("centers were not built from these pairs")
    if not np.any(centers.k_yy) or not np.any(centers.k_xn):
        raise NumericError("degenerate model: all-zero kernel block")


def _made(kind, centers, u_r, v_r, rank, lam, n):
    u_r = np.ascontiguousarray(u_r, dtype=np.float64)
    v_r = np.ascontiguousarray(v_r, dtype=np.float64)
    if not (np.all(np.isfinite(u_r)) and np.all(np.isfinite(v_r))):
        raise NumericError("fit produced non-finite factors")
    return FittedEstimator(
        kind=kind,
        kernel=centers.kernel,
        u_r=u_r,
        v_r=v_r,
        rank=rank,
        lam=lam,
        x_centers=centers.x_centers,
        y_centers=centers.y_centers,
        k_xx=centers.k_xx,
        k_yy=centers.k_yy,
        k_xy=centers.k_xy,
        n_train=n,
        centers=centers,
    )


def _whitened(centers: NystromCenters):
    n_x = whiten_psd(centers.k_xx)
    n_y = whiten_psd(centers.k_yy)
    z = centers.k_xn.T @ n_x  # (n, p): data features in the whitened x-basis
    t = centers.k_yn.T @ n_y  # (n, q)
    return n_x, n_y, z, t


def fit_nys_krr(
    pairs: LaggedPairs,
    centers: NystromCenters,
    lam: float,
    kind: str = NYS_KRR,
) -> FittedEstimator:
    """Ridge-regularized sketched estimator; cost O(m^3 + m^2 n)."""
    if not lam > 0:
        raise InputError("lam must be positive")
    _check_fit_inputs(pairs, centers)
    n, m = pairs.n, centers.m
    n_x, n_y, z, t = _whitened(centers)
    c = sym_inner(z) + n * lam * np.eye(z.shape[1])
    solved = scipy.linalg.solve(c, n_x.T, assume_a="pos")
    w = n_y @ ((t.T @ z) @ solved)
    return _made(kind, centers, w, np.eye(m), m, lam, n)


def fit_nys_pcr(
    pairs: LaggedPairs,
    centers: NystromCenters,
    r: int,
    kind: str = NYS_PCR,
) -> FittedEstimator:
    """Spectral-truncation (kernel DMD style) sketched estimator."""
    r = int(r)
    if not 1 <= r <= centers.m:
        raise InputError(f"rank r must be in [1, m={centers.m}]")
    _check_fit_inputs(pairs, centers)
    n = pairs.n
    n_x, n_y, z, t = _whitened(centers)
    c = sym_inner(z)
    p = c.shape[0]
    subset = [p - r, p - 1] if r < p else None
    if r > p:
        raise RankDeficiencyError(r, p)
    vals, vecs = scipy.linalg.eigh(c, subset_by_index=subset)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    tol = rank_tolerance(c.shape, max(float(vals[0]), 0.0))
    achievable = int(np.sum(vals > tol))
    if achievable < r:
        raise RankDeficiencyError(r, achievable)
    h_r, nu_r = vecs[:, :r], vals[:r]
    u_r = n_y @ ((t.T @ z) @ h_r)
    v_r = n_x @ (h_r / nu_r)
    return _made(kind, centers, u_r, v_r, r, 0.0, n)


def fit_nys_rrr(
    pairs: LaggedPairs,
    centers: NystromCenters,
    lam: float,
    r: int,
    kind: str = NYS_RRR,
) -> FittedEstimator:
    """Rank-constrained ridge (reduced rank regression) sketched estimator."""
    if not lam > 0:
        raise InputError("lam must be positive")
    r = int(r)
    if not 1 <= r <= centers.m:
        raise InputError(f"rank r must be in [1, m={centers.m}]")
    _check_fit_inputs(pairs, centers)
    n = pairs.n
    n_x, n_y, z, t = _whitened(centers)
    mm = t.T @ z  # (q, p)
    a = sym_inner(mm)
    b = sym_inner(z) + n * lam * np.eye(z.shape[1])
    p = a.shape[0]
    if r > min(p, mm.shape[0]):
        raise RankDeficiencyError(r, min(p, mm.shape[0]))
    subset = [p - r, p - 1] if r < p else None
    sig2, w_cols = scipy.linalg.eigh(a, b, subset_by_index=subset)
    sig2, w_cols = sig2[::-1], w_cols[:, ::-1]
    tol = rank_tolerance(a.shape, max(float(sig2[0]), 0.0))
    achievable = int(np.sum(sig2 > tol))
    if achievable < r:
        raise RankDeficiencyError(r, achievable)
    # b-orthonormal eigenvectors carry w.T A w = sig2; rescale to w.T A w = 1
    w_r = w_cols[:, :r] / np.sqrt(sig2[:r])
    u_r = n_y @ (mm @ w_r)
    v_r = n_x @ scipy.linalg.solve(b, mm.T @ (mm @ w_r), assume_a="pos")
    return _made(kind, centers, u_r, v_r, r, lam, n)


def _exact_centers(pairs: LaggedPairs, kernel: KernelSpec, n_max: int):
    if pairs.n > n_max:
        raise InputError(
            f"exact fit with n={pairs.n} exceeds n_max={n_max}; "
            "use a Nystrom estimator or raise n_max explicitly"
        )
    return all_centers(pairs, kernel)


def fit_exact_krr(
    pairs: LaggedPairs,
    kernel: KernelSpec,
    lam: float,
    n_max: int = DEFAULT_N_MAX_EXACT,
) -> FittedEstimator:
    """Exact KRR: the sketched fit with every pair as a center."""
    return fit_nys_krr(pairs, _exact_centers(pairs, kernel, n_max), lam, kind=EXACT_KRR)


def fit_exact_pcr(
    pairs: LaggedPairs,
    kernel: KernelSpec,
    r: int,
    n_max: int = DEFAULT_N_MAX_EXACT,
) -> FittedEstimator:
    """Exact PCR (kernel DMD): the sketched fit with all pairs as centers."""
    return fit_nys_pcr(pairs, _exact_centers(pairs, kernel, n_max), r, kind=EXACT_PCR)


def fit_exact_rrr(
    pairs: LaggedPairs,
    kernel: KernelSpec,
    lam: float,
    r: int,
    n_max: int = DEFAULT_N_MAX_EXACT,
) -> FittedEstimator:
    """Exact RRR: the sketched fit with every pair as a center."""
    return fit_nys_rrr(pairs, _exact_centers(pairs, kernel, n_max), lam, r, kind=EXACT_RRR)


def empirical_risk(
    est: FittedEstimator,
    X=None,
    Y=None,
    k_xq: Optional[np.ndarray] = None,
    k_yq: Optional[np.ndarray] = None,
) -> float:
    """Mean squared feature-space one-step error ``||phi(y) - A phi(x)||^2``.

    With no arguments the cached training blocks are reused.  ``k_xq`` and
    ``k_yq`` can pass precomputed (m, n) blocks for the query points.
    """
    if X is None and Y is None:
        if est.centers is None:
            raise InputError("no cached training data; pass X and Y explicitly")
        u = est.centers.k_xn
        v = est.centers.k_yn
        kyy_diag = _training_kyy_diag(est, u.shape[1])
    elif X is None or Y is None:
        raise InputError("pass both X and Y (or neither)")
    else:
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.shape[0] != Y.shape[0]:
            raise InputError("X and Y must have the same number of rows")
        if X.shape[1] != est.dim or Y.shape[1] != est.dim:
            raise InputError("state dimension does not match the fitted model")
        u = k_xq if k_xq is not None else gram(est.kernel, est.x_centers, X)
        v = k_yq if k_yq is not None else gram(est.kernel, est.y_centers, Y)
        kyy_diag = gram_diag(est.kernel, Y)
    wu = est.u_r @ (est.v_r.T @ u)
    cross = np.einsum("ij,ij->j", v, wu)
    quad = np.einsum("ij,ij->j", wu, est.k_yy @ wu)
    return float(np.mean(kyy_diag - 2.0 * cross + quad))


def _training_kyy_diag(est: FittedEstimator, n: int) -> np.ndarray:
    # k(y_i, y_i) over the training outputs: constant for RBF; for the other
    # kernels the coordinates are only retained when the centers span all
    # outputs in order (the exact-fit layout)
    from .kernels import RBF

    if est.kernel.family == RBF:
        return np.ones(n)
    if est.centers.m == n and np.array_equal(est.centers.y_indices, np.arange(n)):
        return np.diag(est.centers.k_yn).copy()
    raise InputError(
        "training risk for non-RBF kernels requires passing X and Y explicitly"
    )


def hs_norm_sq(est: FittedEstimator) -> float:
    """Squared Hilbert-Schmidt norm ``tr(W.T Kyy W Kxx)`` of the operator."""
    s = est.k_yy @ est.w @ est.k_xx
    return float(np.sum(est.w * s))


def effective_rank(est: FittedEstimator, rel_tol: float = 1e-10) -> int:
    """Numeric rank of the middle matrix W."""
    return numeric_rank(est.w, rel_tol=rel_tol)
