"""Multi-channel volumetric movies and their on-disk ``.vol`` format.

Arrays are held with shape ``(x, y, z, channel, time)``.  On disk the payload
is a headerless little-endian block with x varying fastest (Fortran order),
next to a ``<name>.vol.json`` descriptor::

    {"dims": [X, Y, Z, C, T], "element_type": "u16",
     "spacing_um": [0.5, 0.5, 0.6], "channel_names": ["H2B", "ERK"]}

Extra keys in the descriptor are preserved and returned untouched, which is
how quantized kymographs carry their bin edges.
"""
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DomainError, FormatError, SizeError

ELEMENT_TYPES = {
    "u8": np.dtype("<u1"),
    "u16": np.dtype("<u2"),
    "f32": np.dtype("<f4"),
}

_REQUIRED_KEYS = ("dims", "element_type", "spacing_um", "channel_names")


def normalize_intensity(data):
    """Map raw intensities onto [0, 1].

    Integer arrays are divided by the maximum of their bit depth; floating
    arrays are taken as already normalized and only clipped, so applying the
    function twice changes nothing.
    """
    data = np.asarray(data)
    if np.issubdtype(data.dtype, np.integer):
        return data.astype(np.float64) / np.iinfo(data.dtype).max
    return np.clip(data.astype(np.float64, copy=False), 0.0, 1.0)


@dataclass(frozen=True)
class VoxelCoord:
    x: int
    y: int
    z: int = 0
    t: int = 0

    def __post_init__(self):
        for name in ("x", "y", "z", "t"):
            if getattr(self, name) < 0:
                raise IndexError(f"negative {name} index")

    def check_within(self, dims):
        """Raise IndexError unless this coordinate fits ``dims`` (X, Y, Z, T)."""
        for value, extent, name in zip((self.x, self.y, self.z, self.t), dims, "xyzt"):
            if value >= extent:
                raise IndexError(f"{name}={value} outside extent {extent}")


@dataclass(frozen=True)
class Volume:
    """Normalized 5-D movie.

    Attributes
    ----------
    data : ndarray, shape (X, Y, Z, C, T)
        Intensities in [0, 1].
    spacing : tuple of 3 floats
        Voxel size in micrometres along x, y, z.
    channel_names : tuple of str
    """

    data: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)
    channel_names: tuple = field(default=())

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 5:
            raise SizeError(f"Volume data must be 5-D (x, y, z, channel, time), got {data.ndim}-D")
        if data.size == 0:
            raise SizeError("Volume has an empty extent")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(np.isfinite(s) and s > 0 for s in spacing):
            raise DomainError(f"spacing must be 3 positive finite values, got {self.spacing}")
        names = tuple(self.channel_names) or tuple(f"ch{i}" for i in range(data.shape[3]))
        if len(names) != data.shape[3]:
            raise SizeError(f"{len(names)} channel names for {data.shape[3]} channels")
        if np.issubdtype(data.dtype, np.floating):
            if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
                raise DomainError("Volume intensities must lie in [0, 1]")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "channel_names", names)

    @property
    def dims(self):
        return self.data.shape

    @property
    def is_3d(self):
        return self.data.shape[2] > 1

    def channel_index(self, channel):
        if isinstance(channel, (int, np.integer)):
            return int(channel)
        try:
            return self.channel_names.index(channel)
        except ValueError:
            raise KeyError(f"no channel {channel!r}; have {self.channel_names}") from None

    def frame(self, channel, t):
        """Spatial frame ``(X, Y)`` for 2-D movies or ``(X, Y, Z)`` for 3-D."""
        f = self.data[:, :, :, self.channel_index(channel), t]
        return f[:, :, 0] if not self.is_3d else f

    def normalized(self):
        return Volume(normalize_intensity(self.data), self.spacing, self.channel_names)


def radius_to_pixels(r_um, spacing):
    """Convert a physical radius to per-axis voxel radii.

    >>> radius_to_pixels(5.0, (0.5, 0.5, 2.0))
    array([10. , 10. ,  2.5])
    """
    spacing = np.atleast_1d(np.asarray(spacing, dtype=float))
    if not np.isfinite(r_um) or r_um <= 0:
        raise DomainError(f"radius must be positive, got {r_um}")
    if np.any(~np.isfinite(spacing)) or np.any(spacing <= 0):
        raise DomainError(f"spacing must be positive, got {spacing}")
    out = float(r_um) / spacing
    return out if out.size > 1 else out[0]


def _sidecar(path):
    return Path(str(path) + ".json")


def write_array(path, data, element_type, spacing=(1.0, 1.0, 1.0), channel_names=None, extra=None):
    """Write a raw 5-D array and its descriptor; no intensity scaling applied."""
    data = np.asarray(data)
    if data.ndim != 5:
        raise SizeError("expected a 5-D array")
    if data.size == 0:
        raise SizeError("refusing to write an empty-extent array")
    if element_type not in ELEMENT_TYPES:
        raise FormatError(f"unknown element_type {element_type!r}")
    meta = {
        "dims": [int(d) for d in data.shape],
        "element_type": element_type,
        "spacing_um": [float(s) for s in spacing],
        "channel_names": list(channel_names or [f"ch{i}" for i in range(data.shape[3])]),
    }
    if extra:
        meta.update(extra)
    path = Path(path)
    payload = np.asarray(data, dtype=ELEMENT_TYPES[element_type]).tobytes(order="F")
    try:
        path.write_bytes(payload)
        _sidecar(path).write_text(json.dumps(meta, indent=1, sort_keys=True))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return meta


def read_meta(path, meta=None):
    if meta is None:
        side = _sidecar(path)
        try:
            meta = json.loads(side.read_text())
        except FileNotFoundError:
            raise FormatError(f"missing metadata descriptor {side}") from None
        except json.JSONDecodeError as exc:
            raise FormatError(f"malformed metadata in {side}: {exc}") from None
    if not isinstance(meta, dict) or any(k not in meta for k in _REQUIRED_KEYS):
        raise FormatError(f"metadata must define {', '.join(_REQUIRED_KEYS)}")
    dims = meta["dims"]
    if len(dims) != 5 or any(int(d) != d or d <= 0 for d in dims):
        raise FormatError(f"dims must be 5 positive integers, got {dims}")
    if meta["element_type"] not in ELEMENT_TYPES:
        raise FormatError(f"unknown element_type {meta['element_type']!r}")
    if len(meta["spacing_um"]) != 3:
        raise FormatError("spacing_um must have 3 entries")
    return meta


def read_array(path, meta=None):
    """Read a raw payload as stored (no scaling).  Returns ``(array, meta)``."""
    meta = read_meta(path, meta)
    dtype = ELEMENT_TYPES[meta["element_type"]]
    raw = Path(path).read_bytes()
    expected = int(np.prod(meta["dims"])) * dtype.itemsize
    if len(raw) != expected:
        raise SizeError(f"{path}: payload has {len(raw)} bytes, dims imply {expected}")
    arr = np.frombuffer(raw, dtype=dtype).reshape(meta["dims"], order="F")
    return arr, meta


def load_volume(path, meta=None):
    """Load a ``.vol`` file and normalize intensities to [0, 1]."""
    raw, meta = read_array(path, meta)
    if len(meta["channel_names"]) != meta["dims"][3]:
        raise FormatError("channel_names length disagrees with the channel extent")
    return Volume(normalize_intensity(raw), tuple(meta["spacing_um"]), tuple(meta["channel_names"]))


def save_volume(v, path, element_type="f32"):
    """Store a Volume.  Integer element types rescale by the bit-depth maximum."""
    if v.data.size == 0:
        raise SizeError("cannot save an empty Volume")
    parent = Path(path).parent
    if not os.access(parent if str(parent) else ".", os.W_OK):
        raise OSError(f"directory not writable: {parent}")
    data = v.data
    if element_type in ("u8", "u16"):
        top = np.iinfo(ELEMENT_TYPES[element_type]).max
        data = np.rint(np.asarray(data, dtype=np.float64) * top)
    return write_array(path, data, element_type, v.spacing, v.channel_names)
