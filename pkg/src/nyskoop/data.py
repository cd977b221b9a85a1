"""Trajectory storage, lag-pair construction and Nystrom center sampling.

Reproducibility
---------------
All randomness is drawn from the counter-based Philox (4x64, 10 rounds)
bit generator keyed by the user seed.  Center subsets come from a partial
Fisher-Yates shuffle over ``0..n-1`` driven by that stream; when input and
output centers are sampled independently the output draw uses the stream
jumped ahead by 2**128 blocks (``Philox.jumped(1)``).  Test vectors: seed 0,
n=10, m=3 selects indices (0, 1, 6) in that order; seed 42 selects (3, 8, 4).

File formats
------------
CSV: one row per time step, columns are state coordinates, optional
non-numeric header row.  Binary: magic ``KOOPTRAJ``, u32 version=1, u32 d,
u64 length, then ``length * d`` little-endian f64 values in row-major order.
"""

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError, InputError
from .kernels import KernelSpec, gram

_TRAJ_MAGIC = b"KOOPTRAJ"
_TRAJ_VERSION = 1


def philox_generator(seed: int, jumps: int = 0) -> np.random.Generator:
    """Seeded Philox stream; ``jumps`` selects a decorrelated sub-stream."""
    bitgen = np.random.Philox(key=int(seed) & (2**64 - 1))
    if jumps:
        bitgen = bitgen.jumped(jumps)
    return np.random.Generator(bitgen)


def sample_without_replacement(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """First ``m`` entries of a Fisher-Yates shuffle of ``0..n-1``."""
    idx = np.arange(n)
    for i in range(m):
        j = i + int(rng.integers(n - i))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:m]


@dataclass(frozen=True)
class TrajectoryDataset:
    """Ordered snapshots of a d-dimensional state.

    ``states`` has shape (length, d) with length >= 2; ``dt`` is the
    physical sampling interval when known.
    """

    states: np.ndarray
    dt: Optional[float] = None
    source: str = ""

    def __post_init__(self):
        states = np.ascontiguousarray(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        if states.ndim != 2 or states.shape[1] < 1:
            raise InputError("states must be a (length, d) array with d >= 1")
        if states.shape[0] < 2:
            raise InputError("trajectory needs at least 2 states")
        if not np.all(np.isfinite(states)):
            raise InputError("trajectory contains non-finite entries")
        if self.dt is not None and not self.dt > 0:
            raise InputError("dt must be positive")
        states.flags.writeable = False
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True)
class LaggedPairs:
    """Input/output snapshot pairs ``(x_t, y_t = x_{t+lag})``."""

    X: np.ndarray
    Y: np.ndarray
    lag: int

    def __post_init__(self):
        if self.X.shape != self.Y.shape:
            raise InputError("X and Y must have matching shapes")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def build_pairs(traj: TrajectoryDataset, lag: int = 1) -> LaggedPairs:
    """Extract all ``(x_t, x_{t+lag})`` pairs from a single trajectory."""
    lag = int(lag)
    if lag <= 0:
        raise InputError("lag must be a positive integer")
    if lag >= len(traj):
        raise InputError(f"lag {lag} >= trajectory length {len(traj)}")
    return LaggedPairs(X=traj.states[:-lag], Y=traj.states[lag:], lag=lag)


def build_pairs_multi(trajs, lag: int = 1) -> LaggedPairs:
    """Concatenate pairs from several trajectories, never pairing across
    trajectory boundaries."""
    parts = [build_pairs(t, lag) for t in trajs]
    if not parts:
        raise InputError("no trajectories given")
    return LaggedPairs(
        X=np.concatenate([p.X for p in parts]),
        Y=np.concatenate([p.Y for p in parts]),
        lag=lag,
    )


@dataclass(frozen=True)
class NystromCenters:
    """Inducing points plus their cached kernel blocks.

    ``x_indices`` select rows of ``pairs.X`` as input centers, ``y_indices``
    rows of ``pairs.Y`` as output centers.  Cached blocks follow the
    estimator formulas: ``k_xx`` (m, m) between input centers, ``k_yy``
    (m, m) between output centers, ``k_xn`` (m, n) input centers vs all
    inputs, ``k_yn`` (m, n) output centers vs all outputs and ``k_xy``
    (m, m) input centers vs output centers.
    """

    kernel: KernelSpec
    x_indices: np.ndarray
    y_indices: np.ndarray
    shared: bool
    x_centers: np.ndarray
    y_centers: np.ndarray
    k_xx: np.ndarray = field(repr=False)
    k_yy: np.ndarray = field(repr=False)
    k_xn: np.ndarray = field(repr=False)
    k_yn: np.ndarray = field(repr=False)
    k_xy: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.x_indices.shape[0]


def centers_from_indices(
    pairs: LaggedPairs,
    kernel: KernelSpec,
    x_indices,
    y_indices=None,
) -> NystromCenters:
    """Build centers (and their kernel blocks) from explicit index sets."""
    x_idx = np.asarray(x_indices, dtype=np.intp)
    shared = y_indices is None
    y_idx = x_idx if shared else np.asarray(y_indices, dtype=np.intp)
    for name, idx in (("x_indices", x_idx), ("y_indices", y_idx)):
        if idx.ndim != 1 or idx.size == 0:
            raise InputError(f"{name} must be a non-empty 1-d index array")
        if np.unique(idx).size != idx.size:
            raise InputError(f"{name} contains duplicate indices")
        if idx.min() < 0 or idx.max() >= pairs.n:
            raise InputError(f"{name} out of range for n={pairs.n}")
    if x_idx.size != y_idx.size:
        raise InputError("x_indices and y_indices must have equal length")

    x_centers = pairs.X[x_idx]
    y_centers = pairs.Y[y_idx]
    all_x = x_idx.size == pairs.n and np.array_equal(x_idx, np.arange(pairs.n))
    all_y = y_idx.size == pairs.n and np.array_equal(y_idx, np.arange(pairs.n))
    # with centers == full data some blocks coincide; share the arrays
    k_xn = gram(kernel, x_centers, pairs.X)
    k_yn = gram(kernel, y_centers, pairs.Y)
    k_xx = k_xn[:, x_idx] if all_x else gram(kernel, x_centers, x_centers)
    k_yy = k_yn[:, y_idx] if all_y else gram(kernel, y_centers, y_centers)
    k_xy = gram(kernel, x_centers, y_centers)
    return NystromCenters(
        kernel=kernel,
        x_indices=x_idx,
        y_indices=y_idx,
        shared=shared or np.array_equal(x_idx, y_idx),
        x_centers=x_centers,
        y_centers=y_centers,
        k_xx=k_xx,
        k_yy=k_yy,
        k_xn=k_xn,
        k_yn=k_yn,
        k_xy=k_xy,
    )


def sample_centers(
    pairs: LaggedPairs,
    kernel: KernelSpec,
    m: int,
    seed: int = 0,
    shared: bool = True,
) -> NystromCenters:
    """Uniform without-replacement draw of ``m`` inducing points.

    With ``shared=True`` (the default) the output centers reuse the input
    index set, so the centers are the sampled training pairs; otherwise the
    output indices come from an independent draw on a jumped sub-stream.
    """
    m = int(m)
    if m <= 0:
        raise InputError("m must be a positive integer")
    if m > pairs.n:
        raise InputError(f"m={m} exceeds number of pairs n={pairs.n}")
    x_idx = sample_without_replacement(pairs.n, m, philox_generator(seed))
    if shared:
        return centers_from_indices(pairs, kernel, x_idx)
    y_idx = sample_without_replacement(pairs.n, m, philox_generator(seed, jumps=1))
    return centers_from_indices(pairs, kernel, x_idx, y_idx)


def all_centers(pairs: LaggedPairs, kernel: KernelSpec) -> NystromCenters:
    """Centers covering every pair in order; the exact-estimator setup."""
    return centers_from_indices(pairs, kernel, np.arange(pairs.n))


# ---------------------------------------------------------------------------
# trajectory file formats


def save_trajectory_csv(path, traj: TrajectoryDataset, header: bool = False) -> None:
    cols = ",".join(f"x{i}" for i in range(traj.dim))
    np.savetxt(
        path,
        traj.states,
        fmt="%.17g",
        delimiter=",",
        header=cols if header else "",
        comments="",
    )


def load_trajectory_csv(path, dt: Optional[float] = None) -> TrajectoryDataset:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
            rest = fh.read()
    except OSError as err:
        raise DataError(f"cannot read trajectory file {path}: {err}") from err
    try:
        float(first.split(",")[0])
        text = first + rest
    except ValueError:
        text = rest  # header row
    try:
        states = np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)
    except ValueError as err:
        raise DataError(f"malformed CSV trajectory {path}: {err}") from err
    try:
        return TrajectoryDataset(states=states, dt=dt, source=str(path))
    except InputError as err:
        raise DataError(f"invalid trajectory in {path}: {err}") from err


def save_trajectory_bin(path, traj: TrajectoryDataset) -> None:
    with open(path, "wb") as fh:
        fh.write(_TRAJ_MAGIC)
        fh.write(struct.pack("<IIQ", _TRAJ_VERSION, traj.dim, len(traj)))
        fh.write(np.ascontiguousarray(traj.states, dtype="<f8").tobytes())


def load_trajectory_bin(path, dt: Optional[float] = None) -> TrajectoryDataset:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as err:
        raise DataError(f"cannot read trajectory file {path}: {err}") from err
    if len(blob) < 24 or blob[:8] != _TRAJ_MAGIC:
        raise DataError(f"{path} is not a KOOPTRAJ file")
    version, d, length = struct.unpack("<IIQ", blob[8:24])
    if version != _TRAJ_VERSION:
        raise DataError(f"unsupported KOOPTRAJ version {version}")
    expected = 24 + 8 * d * length
    if len(blob) != expected:
        raise DataError(f"{path}: expected {expected} bytes, got {len(blob)}")
    states = np.frombuffer(blob[24:], dtype="<f8").reshape(length, d)
    try:
        return TrajectoryDataset(states=states, dt=dt, source=str(path))
    except InputError as err:
        raise DataError(f"invalid trajectory in {path}: {err}") from err


def load_trajectory(path, dt: Optional[float] = None) -> TrajectoryDataset:
    """Dispatch on content: KOOPTRAJ magic = binary, anything else = CSV."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            magic = fh.read(8)
    except OSError as err:
        raise DataError(f"cannot read trajectory file {path}: {err}") from err
    if magic == _TRAJ_MAGIC:
        return load_trajectory_bin(path, dt=dt)
    return load_trajectory_csv(path, dt=dt)
