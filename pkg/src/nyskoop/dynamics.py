"""Synthetic dynamical systems with known spectral ground truth.

The stationary AR(1) process ``x_{t+1} = a x_t + s eps_t`` has transfer
eigenvalues ``a^k`` with probabilists' Hermite eigenfunctions of the
normalized state, which makes it the main analytic test bed.  Stochastic
systems discard 1000 burn-in steps so the emitted samples approximate the
invariant distribution; the Lorenz '63 ODE is integrated with fixed-step
classical RK4.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .data import TrajectoryDataset, philox_generator
from .errors import InputError, NumericError

BURN_IN = 1000


@dataclass(frozen=True)
class Lorenz63:
    """Classical Lorenz '63 ODE; deterministic, integrated with RK4."""

    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    dt: float = 0.01

    def __post_init__(self):
        if not self.dt > 0:
            raise InputError("dt must be positive")

    dim = 3


@dataclass(frozen=True)
class AR1:
    """Scalar auto-regressive process ``x' = a x + s eps``."""

    a: float = 0.9
    noise_std: float = 1.0

    def __post_init__(self):
        if not abs(self.a) < 1:
            raise InputError("AR(1) coefficient must satisfy |a| < 1")
        if not self.noise_std >= 0:
            raise InputError("noise std must be nonnegative")

    dim = 1


@dataclass(frozen=True)
class LinearGaussian:
    """Vector process ``x' = A x + noise`` with Gaussian noise."""

    transition: np.ndarray = field(default_factory=lambda: 0.9 * np.eye(2))
    noise_cov: Optional[np.ndarray] = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.transition, dtype=np.float64))
        if a.shape[0] != a.shape[1]:
            raise InputError("transition matrix must be square")
        if np.max(np.abs(np.linalg.eigvals(a))) >= 1:
            raise InputError("transition matrix must have spectral radius < 1")
        object.__setattr__(self, "transition", a)
        cov = self.noise_cov
        cov = np.eye(a.shape[0]) if cov is None else np.atleast_2d(np.asarray(cov))
        if cov.shape != a.shape:
            raise InputError("noise covariance shape must match the transition")
        object.__setattr__(self, "noise_cov", cov)

    @property
    def dim(self) -> int:
        return self.transition.shape[0]


def _lorenz_rhs(state, sigma, rho, beta):
    x, y, z = state
    return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])


def _simulate_lorenz(spec: Lorenz63, x0, steps: int) -> np.ndarray:
    out = np.empty((steps, 3))
    out[0] = x0
    state = np.asarray(x0, dtype=np.float64)
    h = spec.dt
    args = (spec.sigma, spec.rho, spec.beta)
    for t in range(1, steps):
        k1 = _lorenz_rhs(state, *args)
        k2 = _lorenz_rhs(state + 0.5 * h * k1, *args)
        k3 = _lorenz_rhs(state + 0.5 * h * k2, *args)
        k4 = _lorenz_rhs(state + h * k3, *args)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise NumericError(f"Lorenz integration blew up at step {t}")
        out[t] = state
    return out


def _simulate_ar1(spec: AR1, x0, steps: int, seed: int) -> np.ndarray:
    rng = philox_generator(seed)
    total = BURN_IN + steps
    noise = spec.noise_std * rng.standard_normal(total)
    x = lfilter([1.0], [1.0, -spec.a], noise, zi=[spec.a * float(x0)])[0]
    return x[BURN_IN:, None].copy()


def _simulate_lingauss(spec: LinearGaussian, x0, steps: int, seed: int) -> np.ndarray:
    rng = philox_generator(seed)
    d = spec.dim
    # PSD square root; tolerates singular noise covariances
    w, v = np.linalg.eigh((spec.noise_cov + spec.noise_cov.T) * 0.5)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    noise = rng.standard_normal((BURN_IN + steps, d)) @ root.T
    state = np.asarray(x0, dtype=np.float64)
    out = np.empty((BURN_IN + steps, d))
    for t in range(BURN_IN + steps):
        state = spec.transition @ state + noise[t]
        out[t] = state
    if not np.all(np.isfinite(out)):
        bad = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
        raise NumericError(f"linear-Gaussian simulation blew up at step {bad}")
    return out[BURN_IN:]


def simulate(system, x0=None, steps: int = 1000, seed: int = 0) -> TrajectoryDataset:
    """Generate a trajectory of ``steps`` states from the given system.

    Stochastic systems drop 1000 burn-in steps before emitting, so the
    returned samples are approximately stationary.  The Lorenz trajectory
    starts at ``x0`` itself.
    """
    steps = int(steps)
    if steps < 2:
        raise InputError("steps must be at least 2")
    if x0 is None:
        x0 = np.zeros(system.dim) if not isinstance(system, Lorenz63) else np.ones(3)
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x0.shape != (system.dim,):
        raise InputError(f"x0 must have dimension {system.dim}")
    if isinstance(system, Lorenz63):
        states = _simulate_lorenz(system, x0, steps)
        dt = system.dt
        tag = "lorenz63"
    elif isinstance(system, AR1):
        states = _simulate_ar1(system, x0, steps, seed)
        dt = 1.0
        tag = "ar1"
    elif isinstance(system, LinearGaussian):
        states = _simulate_lingauss(system, x0, steps, seed)
        dt = 1.0
        tag = "lingauss"
    else:
        raise InputError(f"unknown system {system!r}")
    return TrajectoryDataset(states=states, dt=dt, source=tag)


def ar1_truth(a: float, k: int) -> float:
    """k-th transfer eigenvalue ``a^k`` of the stationary AR(1) process."""
    if not abs(a) < 1:
        raise InputError("AR(1) coefficient must satisfy |a| < 1")
    return float(a) ** int(k)


def ar1_stationary_std(spec: AR1) -> float:
    """Standard deviation of the invariant distribution."""
    return spec.noise_std / np.sqrt(1.0 - spec.a**2)
