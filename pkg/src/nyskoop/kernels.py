"""Kernel evaluation and Gram-matrix assembly.

Conventions
-----------
The RBF kernel is parameterized as ``k(x, y) = exp(-||x - y||^2 / (2 sigma^2))``,
so ``k(x, x) = 1`` and ``sigma`` is a length scale (not a precision).  The
polynomial kernel is ``(<x, y> + offset)^degree``.

Every Gram entry is computed independently with the same arithmetic as
:func:`eval_kernel`, so ``gram(spec, A, B)[i, j] == eval_kernel(spec, A[i], B[j])``
bit for bit; assembly may be chunked over rows without changing results.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError

RBF = "rbf"
LINEAR = "linear"
POLYNOMIAL = "poly"

_FAMILIES = (RBF, LINEAR, POLYNOMIAL)

# rows per assembly chunk; bounds the (rows, cols, d) broadcast buffer
_CHUNK = 256


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    Parameters
    ----------
    family : str
        One of ``"rbf"``, ``"linear"``, ``"poly"``.
    bandwidth : float
        RBF length scale sigma, must be positive.  Ignored otherwise.
    degree : int
        Polynomial degree >= 1.  Ignored otherwise.
    offset : float
        Polynomial additive offset.  Ignored otherwise.
    """

    family: str = RBF
    bandwidth: float = 1.0
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}")
        if self.family == RBF and not self.bandwidth > 0:
            raise InputError("RBF bandwidth must be positive")
        if self.family == POLYNOMIAL and int(self.degree) < 1:
            raise InputError("polynomial degree must be >= 1")

    def describe(self) -> str:
        if self.family == RBF:
            return f"rbf(sigma={self.bandwidth:g})"
        if self.family == LINEAR:
            return "linear"
        return f"poly(degree={self.degree}, offset={self.offset:g})"


def _as_points(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise InputError(f"{name} must be a non-empty (n, d) array")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} contains non-finite coordinates")
    return a


def _block(spec, a, b):
    # (rows, cols, d) broadcast keeps per-entry arithmetic identical to the
    # single-pair evaluation
    if spec.family == RBF:
        sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
        return np.exp(-sq / (2.0 * spec.bandwidth**2))
    dots = (a[:, None, :] * b[None, :, :]).sum(axis=-1)
    if spec.family == LINEAR:
        return dots
    return (dots + spec.offset) ** spec.degree


def gram(spec: KernelSpec, a, b) -> np.ndarray:
    """Dense |A| x |B| kernel matrix between two point sets."""
    a = _as_points(a, "A")
    b = _as_points(b, "B")
    if a.shape[1] != b.shape[1]:
        raise InputError(
            f"dimension mismatch: {a.shape[1]} vs {b.shape[1]} coordinates"
        )
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for start in range(0, a.shape[0], _CHUNK):
        stop = min(start + _CHUNK, a.shape[0])
        out[start:stop] = _block(spec, a[start:stop], b)
    return out


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate ``k(x, y)`` for two single states."""
    return float(gram(spec, x, y)[0, 0])


def gram_diag(spec: KernelSpec, a) -> np.ndarray:
    """The vector ``k(a_i, a_i)``, with the same arithmetic as :func:`gram`."""
    a = _as_points(a, "A")
    if spec.family == RBF:
        return np.ones(a.shape[0])
    dots = (a * a).sum(axis=-1)
    if spec.family == LINEAR:
        return dots
    return (dots + spec.offset) ** spec.degree
