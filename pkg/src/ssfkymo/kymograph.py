"""SSF / velocity kymographs and their shared 8-bit cohort quantization.

A kymograph is an ``(x, y, time)`` array holding one value per cell centroid
and zero everywhere else.  A cohort (all kymographs of one channel in one
experiment) is quantized against shared bins: 254 edges spaced linearly on
``(mu - sigma, mu + sigma)`` of the non-zero values give 255 codes 1..255,
and 0 keeps meaning "no cell".
"""
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    ConfigurationError,
    DegenerateSpreadError,
    DegenerateSpreadWarning,
    EmptySignalError,
    SizeError,
)
from .volume import read_array, write_array

N_EDGES = 254
MID_CODE = 128


@dataclass
class Kymograph:
    data: np.ndarray
    channel: str = ""
    name: str = ""
    provenance: list = field(default_factory=list)
    collisions: int = 0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise SizeError("kymograph data must be (x, y, time)")

    @property
    def dims(self):
        return self.data.shape

    def nonzero_values(self):
        return self.data[self.data != 0]


@dataclass
class QuantizedKymograph:
    data: np.ndarray
    bin_edges: np.ndarray
    cohort_stats: tuple
    channel: str = ""
    name: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.uint8)
        if self.data.ndim != 3:
            raise SizeError("quantized kymograph data must be (x, y, time)")

    @property
    def dims(self):
        return self.data.shape


def project_z(values):
    """Collapse ``(x, y, z, t)`` to ``(x, y, t)`` keeping the signed max-|value|."""
    values = np.asarray(values)
    if values.ndim != 4:
        raise SizeError("project_z expects an (x, y, z, t) array")
    pick = np.argmax(np.abs(values), axis=2)
    return np.take_along_axis(values, pick[:, :, None, :], axis=2)[:, :, 0, :]


def build_kymograph(records, dims, channel="", name="", provenance=None):
    """Write centroid values into a zero array.

    Parameters
    ----------
    records : iterable of (VoxelCoord, float)
    dims : (X, Y, T) or (X, Y, Z, T)
        With a z extent the values are placed in 4-D first and then reduced
        with :func:`project_z`; a column holding several cells counts as a
        collision.

    Writing twice to the same voxel keeps the last value and counts one
    collision.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) == 3:
        X, Y, T = dims
        Z = 1
    elif len(dims) == 4:
        X, Y, Z, T = dims
    else:
        raise SizeError("dims must be (X, Y, T) or (X, Y, Z, T)")
    grid = np.zeros((X, Y, Z, T), dtype=np.float64)
    written = np.zeros(grid.shape, dtype=bool)
    collisions = 0
    for coord, value in records:
        idx = (coord.x, coord.y, coord.z, coord.t)
        if not all(0 <= i < n for i, n in zip(idx, grid.shape)):
            raise IndexError(f"record at {coord} outside kymograph dims {dims}")
        collisions += int(written[idx])
        written[idx] = True
        grid[idx] = value
    if Z > 1:
        collisions += int(np.sum(np.count_nonzero(grid, axis=2) > 1))
    data = project_z(grid)
    return Kymograph(data, channel, name, list(provenance or []), collisions)


def downsample_xy(k, min_radius_px):
    """Halve both spatial extents (ceiling) with signed max-|value| over 2x2 blocks.

    Only allowed when the smallest cell radius exceeds 2 pixels, so distinct
    cells cannot share a block.
    """
    if not min_radius_px > 2:
        raise ConfigurationError(f"downsampling needs min cell radius > 2 px, got {min_radius_px}")
    X, Y, T = k.data.shape
    padded = np.zeros((X + X % 2, Y + Y % 2, T), dtype=k.data.dtype)
    padded[:X, :Y] = k.data
    blocks = padded.reshape(padded.shape[0] // 2, 2, padded.shape[1] // 2, 2, T)
    blocks = blocks.transpose(0, 2, 4, 1, 3).reshape(padded.shape[0] // 2, padded.shape[1] // 2, T, 4)
    pick = np.argmax(np.abs(blocks), axis=3)
    out = np.take_along_axis(blocks, pick[..., None], axis=3)[..., 0]
    extra = int(np.sum(np.count_nonzero(blocks, axis=3) > 1))
    return Kymograph(out, k.channel, k.name, list(k.provenance), k.collisions + extra)


def quantize_values(values, edges):
    """Map values to codes 1..255 against 254 ascending edges.

    Values at or below the first edge map to 1, values at or above the last
    edge map to 255, and the midpoint of the edges maps to 128.
    """
    values = np.asarray(values, dtype=np.float64)
    codes = 1 + np.searchsorted(edges, values, side="right")
    codes[values <= edges[0]] = 1
    return codes.astype(np.uint8)


class CohortQuantizer(TransformerMixin, BaseEstimator):
    """Fit shared 8-bit bins on a cohort of kymographs and apply them.

    Parameters
    ----------
    strict : bool
        Raise :class:`DegenerateSpreadError` when all non-zero values are equal
        instead of warning and mapping them to the middle code.

    Attributes
    ----------
    mu_, sigma_ : float
        Mean and (population) standard deviation of the non-zero values.
    bin_edges_ : ndarray of shape (254,)
    """

    def __init__(self, strict=False):
        self.strict = strict

    def fit(self, X, y=None):
        values = np.concatenate([np.asarray(k.nonzero_values(), dtype=np.float64) for k in X]) if len(X) else np.array([])
        if values.size == 0:
            raise EmptySignalError("cohort has no non-zero voxels")
        self.mu_ = float(values.mean())
        self.sigma_ = float(values.std())
        self.degenerate_ = not self.sigma_ > 0
        if self.degenerate_:
            msg = f"cohort values have zero spread (all {self.mu_}); mapping every non-zero voxel to {MID_CODE}"
            if self.strict:
                raise DegenerateSpreadError(msg)
            warnings.warn(msg, DegenerateSpreadWarning, stacklevel=2)
            self.bin_edges_ = np.full(N_EDGES, self.mu_)
        else:
            self.bin_edges_ = np.linspace(self.mu_ - self.sigma_, self.mu_ + self.sigma_, N_EDGES)
        return self

    def transform(self, X):
        check_is_fitted(self, "bin_edges_")
        out = []
        for k in X:
            data = np.zeros(k.data.shape, dtype=np.uint8)
            nz = k.data != 0
            if self.degenerate_:
                data[nz] = MID_CODE
            else:
                data[nz] = quantize_values(k.data[nz], self.bin_edges_)
            out.append(QuantizedKymograph(data, self.bin_edges_.copy(), (self.mu_, self.sigma_), k.channel, k.name))
        return out


def quantize_cohort(kymos, strict=False):
    """Quantize a cohort against bins fitted on that same cohort."""
    return CohortQuantizer(strict=strict).fit_transform(list(kymos))


def save_kymograph(k, path):
    """Store a real-valued kymograph as an f32 ``.vol`` pair."""
    return write_array(
        path,
        k.data[:, :, None, None, :],
        "f32",
        channel_names=[k.channel or "value"],
        extra={"kind": "kymograph", "name": k.name, "provenance": k.provenance, "collisions": k.collisions},
    )


def load_kymograph(path):
    arr, meta = read_array(path)
    return Kymograph(
        np.array(arr[:, :, 0, 0, :]),
        meta["channel_names"][0],
        meta.get("name", Path(path).stem),
        meta.get("provenance", []),
        meta.get("collisions", 0),
    )


def save_quantized(q, path):
    return write_array(
        path,
        q.data[:, :, None, None, :],
        "u8",
        channel_names=[q.channel or "value"],
        extra={
            "kind": "quantized_kymograph",
            "name": q.name,
            "bin_edges": [float(e) for e in q.bin_edges],
            "cohort_stats": [float(s) for s in q.cohort_stats],
        },
    )


def load_quantized(path):
    arr, meta = read_array(path)
    if "bin_edges" not in meta:
        raise ConfigurationError(f"{path} is not a quantized kymograph")
    return QuantizedKymograph(
        np.array(arr[:, :, 0, 0, :]),
        np.asarray(meta["bin_edges"]),
        tuple(meta["cohort_stats"]),
        meta["channel_names"][0],
        meta.get("name", Path(path).stem),
    )


def render_projection(q, axis="y"):
    """Max projection over one spatial axis, laid out as (time, space) rows."""
    data = q.data if isinstance(q, QuantizedKymograph) else np.asarray(q)
    proj = data.max(axis=1 if axis == "y" else 0)
    return np.ascontiguousarray(proj.T)


def write_pgm(path, image):
    """Write a 2-D uint8 array (rows, cols) as a binary PGM."""
    image = np.asarray(image, dtype=np.uint8)
    rows, cols = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(image.tobytes())
