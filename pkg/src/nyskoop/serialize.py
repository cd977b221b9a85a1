"""Binary model format.

Layout (all little-endian): magic ``KOOPMODL``, u32 version=1, u32 kind tag
(index into :data:`nyskoop.estimators.KINDS`), u32 kernel family tag
(rbf=0, linear=1, poly=2), f64 bandwidth, u32 degree, f64 offset,
f64 lambda, u32 r, u32 m, u32 d, then four row-major f64 blocks:
input centers (m, d), output centers (m, d), U_r (m, r), V_r (m, r).
Round-trips are bit-exact; the kernel blocks a loaded model needs are
recomputed from the center coordinates.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .estimators import KINDS, FittedEstimator
from .kernels import LINEAR, POLYNOMIAL, RBF, KernelSpec, gram

_MAGIC = b"KOOPMODL"
_VERSION = 1
_FAMILY_TAGS = {RBF: 0, LINEAR: 1, POLYNOMIAL: 2}
_FAMILY_FROM_TAG = {v: k for k, v in _FAMILY_TAGS.items()}
_HEAD = struct.Struct("<IIIdIddIII")


def save_model(path, est: FittedEstimator) -> None:
    spec = est.kernel
    head = _HEAD.pack(
        _VERSION,
        KINDS.index(est.kind),
        _FAMILY_TAGS[spec.family],
        float(spec.bandwidth),
        int(spec.degree),
        float(spec.offset),
        float(est.lam),
        int(est.rank),
        est.m,
        est.dim,
    )
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(head)
        for block in (est.x_centers, est.y_centers, est.u_r, est.v_r):
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_model(path) -> FittedEstimator:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as err:
        raise DataError(f"cannot read model file {path}: {err}") from err
    if len(blob) < 8 + _HEAD.size or blob[:8] != _MAGIC:
        raise DataError(f"{path} is not a KOOPMODL file")
    (
        version,
        kind_tag,
        family_tag,
        bandwidth,
        degree,
        offset,
        lam,
        rank,
        m,
        d,
    ) = _HEAD.unpack_from(blob, 8)
    if version != _VERSION:
        raise DataError(f"unsupported KOOPMODL version {version}")
    if kind_tag >= len(KINDS) or family_tag not in _FAMILY_FROM_TAG:
        raise DataError(f"{path}: unknown kind or kernel tag")
    spec = KernelSpec(
        family=_FAMILY_FROM_TAG[family_tag],
        bandwidth=bandwidth,
        degree=degree,
        offset=offset,
    )
    sizes = [(m, d), (m, d), (m, rank), (m, rank)]
    need = 8 + _HEAD.size + 8 * sum(a * b for a, b in sizes)
    if len(blob) != need:
        raise DataError(f"{path}: expected {need} bytes, got {len(blob)}")
    pos = 8 + _HEAD.size
    blocks = []
    for rows, cols in sizes:
        nbytes = 8 * rows * cols
        blocks.append(
            np.frombuffer(blob[pos : pos + nbytes], dtype="<f8").reshape(rows, cols)
        )
        pos += nbytes
    x_centers, y_centers, u_r, v_r = blocks
    return FittedEstimator(
        kind=KINDS[kind_tag],
        kernel=spec,
        u_r=u_r.copy(),
        v_r=v_r.copy(),
        rank=rank,
        lam=lam,
        x_centers=x_centers.copy(),
        y_centers=y_centers.copy(),
        k_xx=gram(spec, x_centers, x_centers),
        k_yy=gram(spec, y_centers, y_centers),
        k_xy=gram(spec, x_centers, y_centers),
        n_train=None,
        centers=None,
    )
