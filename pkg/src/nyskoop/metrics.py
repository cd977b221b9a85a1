"""Forecast error, spectrum recovery and timing measurements.

nRMSE normalizes the root-mean-square error by the standard deviation of
the true signal over the evaluation window (per coordinate, then averaged
in the mean square), so a forecast equal to the climatological mean scores
exactly 1.
"""

import json
import time
import warnings
from dataclasses import dataclass, field, asdict
from typing import Callable, Dict, Optional

import numpy as np

from .data import TrajectoryDataset
from .errors import InputError
from .spectral import SpectralDecomposition, eval_eigenfunctions


def nrmse(pred, truth) -> float:
    """Root-mean-square error divided by the truth's standard deviation."""
    pred = np.atleast_1d(np.asarray(pred, dtype=np.float64))
    truth = np.atleast_1d(np.asarray(truth, dtype=np.float64))
    if pred.shape != truth.shape:
        raise InputError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.ndim == 1:
        pred = pred[:, None]
        truth = truth[:, None]
    err = np.mean((pred - truth) ** 2)
    centered = truth - truth.mean(axis=0, keepdims=True)
    denom = np.mean(centered**2)
    scale = np.mean(truth**2)
    if denom <= 1e-28 * max(scale, 1.0):
        raise InputError("truth signal is constant; nRMSE undefined")
    return float(np.sqrt(err / denom))


def eigenvalue_error(estimated, truth) -> float:
    """Greedy spectral matching error.

    Truth eigenvalues are visited in order of descending modulus, each
    matched to the nearest unused estimate; returns the largest matched
    distance.
    """
    estimated = list(np.asarray(estimated, dtype=np.complex128).ravel())
    truth = np.asarray(truth, dtype=np.complex128).ravel()
    if len(estimated) < truth.size:
        raise InputError("need at least as many estimates as truth values")
    worst = 0.0
    for lam in sorted(truth, key=abs, reverse=True):
        dists = [abs(e - lam) for e in estimated]
        best = int(np.argmin(dists))
        worst = max(worst, dists[best])
        estimated.pop(best)
    return worst


def eigenfunction_residual(
    dec: SpectralDecomposition,
    traj: TrajectoryDataset,
    lag: int = 1,
) -> np.ndarray:
    """Trajectory-averaged residual of each estimated eigenpair.

    For eigenpair (lam_i, psi_i) this is
    ``rms_t(psi_i(x_{t+lag}) - lam_i psi_i(x_t)) / rms_t(psi_i(x_t))``, a
    sample proxy for how nearly the pair is a true transfer eigenpair.
    Degenerate eigenfunctions (zero on the trajectory) yield NaN with a
    warning.
    """
    lag = int(lag)
    if lag <= 0:
        raise InputError("lag must be positive")
    n_pairs = len(traj) - lag
    if n_pairs < 100:
        raise InputError(f"need >= 100 usable pairs, trajectory gives {n_pairs}")
    psi_now = eval_eigenfunctions(dec, traj.states[:-lag], side="right")
    psi_next = eval_eigenfunctions(dec, traj.states[lag:], side="right")
    num = np.sqrt(np.mean(np.abs(psi_next - dec.eigenvalues * psi_now) ** 2, axis=0))
    den = np.sqrt(np.mean(np.abs(psi_now) ** 2, axis=0))
    out = np.full(dec.r, np.nan)
    ok = den > 1e-14
    out[ok] = num[ok] / den[ok]
    if not np.all(ok):
        warnings.warn(
            f"{int(np.sum(~ok))} eigenfunction(s) vanish on the trajectory",
            RuntimeWarning,
            stacklevel=2,
        )
    return out


def time_fit(fit: Callable[[], object], repeats: int = 3) -> float:
    """Median wall-clock seconds over ``repeats`` runs after one warm-up."""
    repeats = max(1, int(repeats))
    fit()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fit()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


@dataclass
class BenchmarkRecord:
    """One benchmark cell: configuration echo plus measured quantities."""

    estimator: str
    n: int
    m: int
    r: Optional[int]
    lam: Optional[float]
    kernel: str
    seed: int
    fit_time: float
    predict_time: float
    train_risk: float
    test_metrics: Dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, line: str) -> "BenchmarkRecord":
        return cls(**json.loads(line))


def write_records(path, records) -> None:
    """Write benchmark records as JSON lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")


def read_records(path):
    """Read a JSON-lines benchmark report."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(BenchmarkRecord.from_json(line))
    return out
