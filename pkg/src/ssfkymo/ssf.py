"""Cell signaling structure function: scalar form, LoG evaluation, phantoms.

The scalar SSF of a cell is ``c - n``: mean cytoplasmic minus mean nuclear
intensity, both on [0, 1].  In images it is read off a LoG response at the
cell centroid, optionally divided by the reference response of a
zero-intensity blob so that the value lands on [-1, 1].
"""
import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DomainError
from .log_filter import blob_image, filter_frame, log_reference, make_kernel
from .volume import Volume, VoxelCoord

CN_FLOOR = 1.0 / 65535


@dataclass(frozen=True)
class SSFValue:
    value: float
    channel: str = ""
    coord: Optional[VoxelCoord] = None

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise DomainError("SSF value must be finite")

    @property
    def vector(self):
        """Two-component view: (activation, inverse activation), each >= 0."""
        return (max(self.value, 0.0), max(-self.value, 0.0))


def ssf_scalar(c, n, channel=""):
    """Return the SSF ``c - n`` for mean cytoplasmic and nuclear intensities."""
    for name, v in (("c", c), ("n", n)):
        if not (0.0 <= v <= 1.0):
            raise DomainError(f"{name}={v} outside [0, 1]")
    return SSFValue(float(c) - float(n), channel)


def ssf_at_centroid(resp, coord, ref=None, channel=""):
    """Read the SSF at a centroid voxel of a LoG response.

    Parameters
    ----------
    resp : ResponseVolume
    coord : VoxelCoord
    ref : float, "auto" or None
        Reference divisor.  ``"auto"`` uses :func:`log_reference` for the radius
        that won at this voxel; ``None`` leaves the response unnormalized.
    """
    shape = resp.data.shape
    idx = (coord.x, coord.y) if len(shape) == 2 else (coord.x, coord.y, coord.z)
    if any(i >= n for i, n in zip(idx, shape)) or (len(shape) == 2 and coord.z != 0):
        raise IndexError(f"{coord} outside response of shape {shape}")
    value = float(resp.data[idx])
    if ref == "auto":
        ref = log_reference(resp.radii[resp.radius_index[idx]], len(shape))
    if ref is not None:
        value /= ref
    return SSFValue(value, channel, coord)


@dataclass(frozen=True)
class PhantomSpec:
    """Single-cell KTR phantom on a square frame.

    A cell at activation ``a`` is a dark nucleus on a bright surround where a
    fraction ``(1 - a) / 2`` of nuclear pixels are flipped to white and the
    same fraction of the surround to black, so that the expected ``c - n``
    equals ``a``.  ``noise_fraction`` adds Gaussian read noise with that
    standard deviation (then clipped to [0, 1]).
    """

    activation: float = 1.0
    noise_fraction: float = 0.0
    nucleus_radius_px: float = 12.0
    cytoplasm_radius_px: float = 20.0
    nucleus_inner_radius_px: float = 0.0
    size: int = 64
    seed: Optional[int] = 0

    def __post_init__(self):
        if not 0.0 <= self.activation <= 1.0:
            raise DomainError("activation must be in [0, 1]")
        if not 0.0 <= self.noise_fraction <= 1.0:
            raise DomainError("noise_fraction must be in [0, 1]")
        if not 0.0 <= self.nucleus_inner_radius_px < self.nucleus_radius_px < self.cytoplasm_radius_px:
            raise DomainError("need 0 <= inner < nucleus radius < cytoplasm radius")
        if self.cytoplasm_radius_px >= self.size / 2:
            raise DomainError("cytoplasm annulus does not fit in the frame")

    @property
    def center(self):
        return (self.size // 2, self.size // 2)

    def regions(self):
        """Boolean masks (nucleus, nuclear estimate ring, cytoplasm annulus)."""
        shape = (self.size, self.size)
        r2 = sum((g - c) ** 2 for g, c in zip(np.indices(shape), self.center))
        nucleus = blob_image(shape, self.center, self.nucleus_radius_px, 1.0, 0.0) > 0
        ring = nucleus & (r2 > self.nucleus_inner_radius_px**2)
        annulus = ~nucleus & (r2 <= self.cytoplasm_radius_px**2)
        return nucleus, ring, annulus


def make_phantom(spec, rng=None):
    """Render ``spec`` as a one-channel, one-frame Volume named ``"KTR"``."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    nucleus, _, _ = spec.regions()
    flip = (1.0 - spec.activation) / 2.0
    flipped = rng.random(nucleus.shape) < flip
    img = np.where(nucleus, 0.0, 1.0)
    img = np.where(flipped, 1.0 - img, img)
    if spec.noise_fraction > 0:
        img = np.clip(img + rng.normal(0.0, spec.noise_fraction, img.shape), 0.0, 1.0)
    return Volume(img[:, :, None, None, None], channel_names=("KTR",))


def cytonuclear_ratio(frame, spec):
    """Mean annulus intensity over mean nuclear intensity (denominator floored)."""
    _, ring, annulus = spec.regions()
    c = float(frame[annulus].mean())
    n = float(frame[ring].mean())
    return c / max(n, CN_FLOOR)


@dataclass(frozen=True)
class SweepRow:
    activation: float
    ssf_mean: float
    ssf_stderr: float
    cn_ratio_mean: float
    cn_ratio_stderr: float


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


def activation_sweep(levels, trials, seed=0, template=None):
    """Measure SSF and cytonuclear ratio on fresh phantoms per activation level.

    Every phantom draws from its own RNG stream spawned from ``seed``.

    Returns
    -------
    list of SweepRow
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    template = template or PhantomSpec()
    kernel = make_kernel(template.nucleus_radius_px, 2)
    ref = log_reference(template.nucleus_radius_px, 2)
    cx, cy = template.center
    centroid = VoxelCoord(cx, cy)
    streams = iter(np.random.SeedSequence(seed).spawn(len(levels) * trials))
    rows = []
    for level in levels:
        spec = PhantomSpec(
            activation=float(level),
            noise_fraction=template.noise_fraction,
            nucleus_radius_px=template.nucleus_radius_px,
            cytoplasm_radius_px=template.cytoplasm_radius_px,
            nucleus_inner_radius_px=template.nucleus_inner_radius_px,
            size=template.size,
            seed=None,
        )
        ssf, cn = [], []
        for _ in range(trials):
            frame = make_phantom(spec, np.random.default_rng(next(streams))).frame(0, 0)
            ssf.append(ssf_at_centroid(filter_frame(frame, kernel), centroid, ref).value)
            cn.append(cytonuclear_ratio(frame, spec))
        rows.append(SweepRow(float(level), *_mean_se(ssf), *_mean_se(cn)))
    return rows


SWEEP_COLUMNS = ("activation", "ssf_mean", "ssf_stderr", "cn_ratio_mean", "cn_ratio_stderr")


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([repr(getattr(r, c)) for c in SWEEP_COLUMNS])
