"""Dense linear-algebra helpers shared by the estimators.

All pseudo-inverses use the numerical-rank rule: singular/eigen values
below ``max(shape) * eps * s_max`` are discarded.  Symmetric eigenproblems
go through LAPACK via :func:`scipy.linalg.eigh`; generalized (pencil)
problems fall back to adding a small diagonal jitter to the right-hand
matrix when its Cholesky factorization fails.
"""

import numpy as np
import scipy.linalg
from scipy.linalg import blas as _blas

from .errors import NumericError

_EPS = np.finfo(np.float64).eps


def symmetrize(a):
    """Remove round-off asymmetry: (A + A^T) / 2."""
    return (a + a.T) * 0.5


def sym_outer(a):
    """A @ A.T for a real matrix, computed with the symmetric-rank-k kernel."""
    a = np.asarray(a, dtype=np.float64)
    c = _blas.dsyrk(1.0, a, lower=0)
    # dsyrk fills one triangle only
    c = np.triu(c) + np.triu(c, 1).T
    return c


def rank_tolerance(shape, s_max):
    """Cutoff below which spectral components count as numerically zero."""
    return max(shape) * _EPS * s_max


def pinv_psd(a):
    """Pseudo-inverse of a symmetric PSD matrix via its eigendecomposition."""
    a = symmetrize(np.asarray(a, dtype=np.float64))
    w, v = scipy.linalg.eigh(a)
    if not np.all(np.isfinite(w)):
        raise NumericError("eigendecomposition produced non-finite values")
    tol = rank_tolerance(a.shape, max(w[-1], 0.0))
    inv_w = np.where(w > tol, 1.0 / np.where(w > tol, w, 1.0), 0.0)
    return (v * inv_w) @ v.T


def numeric_rank(a, rel_tol=1e-10):
    """Number of singular values above ``rel_tol * s_max``."""
    s = scipy.linalg.svdvals(np.asarray(a))
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def sym_inner(a):
    """A.T @ A via the symmetric-rank-k kernel."""
    a = np.asarray(a, dtype=np.float64)
    c = _blas.dsyrk(1.0, a, trans=1, lower=0)
    c = np.triu(c) + np.triu(c, 1).T
    return c


def _top_eigenvalue_psd(k, iters=30, seed=7):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(k.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        v = k @ v
        nrm = np.linalg.norm(v)
        if nrm == 0.0:
            return 0.0
        v /= nrm
    return float(v @ (k @ v))


def whiten_psd(k, max_dense=2048):
    """Whitening factor N of a symmetric PSD matrix.

    Keeps the eigenpairs above the numerical-rank cutoff and returns
    ``N = V_kept / sqrt(w_kept)`` so that ``N.T @ K @ N = I``.  Features
    recombined through N form an orthonormal basis of the block's range,
    which is what keeps the downstream estimator algebra well conditioned.
    Large matrices use a power-iteration bound plus a subset eigensolve so
    only the retained part of the spectrum is computed.
    """
    k = symmetrize(np.asarray(k, dtype=np.float64))
    m = k.shape[0]
    if m <= max_dense:
        w, v = scipy.linalg.eigh(k)
        s_max = max(float(w[-1]), 0.0)
    else:
        s_est = _top_eigenvalue_psd(k)
        lo = 0.5 * rank_tolerance(k.shape, s_est)
        if lo <= 0.0:
            raise NumericError("kernel block is numerically zero")
        w, v = scipy.linalg.eigh(k, subset_by_value=(lo, np.inf))
        if w.size == 0:
            raise NumericError("kernel block is numerically zero")
        s_max = float(w[-1])
    tol = rank_tolerance(k.shape, s_max)
    keep = w > tol
    if not np.any(keep):
        raise NumericError("kernel block is numerically zero")
    return v[:, keep] / np.sqrt(w[keep])


def _with_jitter(b, attempt):
    m = b.shape[0]
    jitter = 1e-12 * np.trace(b) / m * (100.0 ** attempt)
    return b + jitter * np.eye(m)


def eigh_pencil_descending(a, b, top=None):
    """Solve the symmetric-definite pencil ``a @ d = w * (b @ d)``.

    Returns eigenvalues in descending order with b-orthonormal eigenvectors
    (``D.T @ b @ D = I``).  When the Cholesky factorization of ``b`` fails,
    a jitter of ``1e-12 * trace(b)/m`` is added to its diagonal, escalating
    twice by a factor 100 before giving up.

    ``top`` restricts the solve to the ``top`` largest eigenpairs.
    """
    a = symmetrize(np.asarray(a, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)
    m = a.shape[0]
    subset = None
    if top is not None and top < m:
        subset = [m - top, m - 1]
    last_err = None
    for attempt in range(-1, 3):
        bb = symmetrize(b) if attempt < 0 else symmetrize(_with_jitter(b, attempt))
        try:
            w, v = scipy.linalg.eigh(a, bb, subset_by_index=subset)
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as err:
            last_err = err
            continue
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            last_err = NumericError("pencil eigensolve produced non-finite values")
            continue
        order = np.argsort(w)[::-1]
        return w[order], v[:, order]
    raise NumericError(f"generalized eigensolve failed: {last_err}")


def sort_descending_modulus(values):
    """Order for complex spectra: descending |w|, real eigenvalues first on
    modulus ties, positive imaginary part first within a conjugate pair."""
    return np.lexsort((-values.imag, np.abs(values.imag), -np.abs(values)))
