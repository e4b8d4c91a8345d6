"""Synthetic kymograph corpora with known structure.

Tracks move in straight lines at constant speed and reflect off the frame
edges.  The constant-velocity benchmark writes each track's speed on one
channel and an unrelated random code on a second channel at the same
centroids.  The paired-shift corpus gives every item a "pre" and a "post"
kymograph whose speeds differ by a planted amount.
"""
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError, DomainError
from .kymograph import build_kymograph, save_kymograph
from .volume import VoxelCoord

MIN_SPEED = 0.1


@dataclass(frozen=True)
class SyntheticSpec:
    class_means: tuple = (1.0, 3.0, 5.0)
    sigma: float = 0.5
    n_tracks: int = 10
    n_per_class: int = 100
    dims: tuple = (128, 128, 100)
    seed: int = 0

    def __post_init__(self):
        if any(m <= 0 for m in self.class_means):
            raise DomainError("class means must be positive")
        if self.sigma < 0:
            raise DomainError("sigma must be non-negative")
        if self.n_tracks < 1 or self.n_per_class < 1:
            raise DomainError("n_tracks and n_per_class must be >= 1")
        x, y, t = self.dims
        if x < 2 or y < 2 or t < 1:
            raise ConfigurationError(f"dims {self.dims} too small for any track")


def reflect(u, extent):
    """Fold coordinates into [0, extent - 1] by mirror reflection."""
    top = extent - 1
    period = 2 * top
    u = np.mod(u, period)
    return np.where(u > top, period - u, u)


def trajectory(start, direction, speed, n_frames, extent):
    """Integer positions (n_frames, 2) of a reflecting constant-velocity track."""
    t = np.arange(n_frames)[:, None]
    raw = np.asarray(start)[None, :] + speed * np.asarray(direction)[None, :] * t
    folded = np.column_stack([reflect(raw[:, a], extent[a]) for a in range(2)])
    return np.rint(folded).astype(int)


@dataclass
class Track2D:
    start: np.ndarray
    direction: np.ndarray
    speed: float


def sample_tracks(rng, n_tracks, mean, sigma, dims):
    x, y, _ = dims
    tracks = []
    for _ in range(n_tracks):
        start = rng.uniform([0, 0], [x - 1, y - 1])
        angle = rng.uniform(0.0, 2.0 * np.pi)
        speed = max(float(rng.normal(mean, sigma)) if sigma > 0 else float(mean), MIN_SPEED)
        tracks.append(Track2D(start, np.array([np.cos(angle), np.sin(angle)]), speed))
    return tracks


def render(tracks, dims, values, channel, name):
    """Kymograph with ``values[k][t]`` written along track ``k``."""
    x, y, n_frames = dims
    records = []
    for k, tr in enumerate(tracks):
        pos = trajectory(tr.start, tr.direction, tr.speed, n_frames, (x, y))
        records.extend((VoxelCoord(int(px), int(py), 0, t), float(values[k][t])) for t, (px, py) in enumerate(pos))
    return build_kymograph(records, dims, channel=channel, name=name)


def _instance_rng(class_index, instance_seed):
    return np.random.default_rng(np.random.SeedSequence([int(instance_seed), int(class_index)]))


def generate_class_kymograph(spec, class_index, instance_seed, name=None):
    """Velocity and random-code kymographs for one synthetic movie.

    Returns
    -------
    (Kymograph, Kymograph)
        Channel ``"velocity"`` holds each track's speed at its centroids,
        channel ``"random"`` an independent integer in [1, 255] per centroid.
    """
    rng = _instance_rng(class_index, instance_seed)
    tracks = sample_tracks(rng, spec.n_tracks, spec.class_means[class_index], spec.sigma, spec.dims)
    n_frames = spec.dims[2]
    speeds = [[tr.speed] * n_frames for tr in tracks]
    codes = rng.integers(1, 256, size=(len(tracks), n_frames))
    name = name or f"c{class_index}_s{instance_seed}"
    vel = render(tracks, spec.dims, speeds, "velocity", name)
    rnd = render(tracks, spec.dims, codes, "random", name)
    return vel, rnd


@dataclass
class CorpusItem:
    name: str
    label: int
    seed: int
    channels: dict = field(default_factory=dict)


def instance_seeds(seed, n):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def generate_benchmark(spec):
    """``n_per_class`` two-channel items per class, labelled by class index."""
    n_classes = len(spec.class_means)
    seeds = instance_seeds(spec.seed, n_classes * spec.n_per_class)
    items = []
    for c in range(n_classes):
        for i in range(spec.n_per_class):
            s = seeds[c * spec.n_per_class + i]
            name = f"c{c}_{i:03d}"
            vel, rnd = generate_class_kymograph(spec, c, s, name)
            items.append(CorpusItem(name, c, s, {"velocity": vel, "random": rnd}))
    return items


def generate_paired_shift_corpus(
    n_pairs,
    shift_magnitudes,
    seed=0,
    base_mean=2.0,
    sigma=0.25,
    n_tracks=20,
    dims=(64, 64, 50),
    channel_scales=(1.0, 0.4),
    response=1.0,
):
    """Matched pre/post items with a planted, graded change between them.

    ``shift_magnitudes[i]`` in [0, 1] is the fraction of pair ``i``'s tracks
    that respond in "post": a responding track speeds up by ``response``
    px/frame, so the pair's mean speed rises by ``shift * response``.  Other
    tracks are identical in pre and post.  Two channels see the same
    responders, each in proportion to its own scale:

    * ``"velocity"`` records ``scale * speed``;
    * ``"signal"`` records ``baseline + scale * (speed - pre speed)`` with an
      independent per-track baseline, so its bytes are not a rescaled copy of
      the velocity channel (cohort quantization ignores pure rescaling).

    Returns
    -------
    list of CorpusItem
        Ordered pre_0, post_0, pre_1, post_1, ...; ``label`` is 0 for pre and
        1 for post.
    """
    if n_pairs < 3:
        raise DomainError("need at least 3 pairs")
    shifts = np.asarray(shift_magnitudes, dtype=float)
    if shifts.shape != (n_pairs,):
        raise DomainError("one shift magnitude per pair")
    if np.any((shifts < 0) | (shifts > 1)):
        raise DomainError("shift magnitudes are responding fractions in [0, 1]")
    seeds = instance_seeds(seed, n_pairs)
    n_frames = dims[2]
    items = []
    for i, s in enumerate(seeds):
        rng = np.random.default_rng(s)
        tracks = sample_tracks(rng, n_tracks, base_mean, sigma, dims)
        baselines = rng.normal(base_mean, sigma, size=n_tracks)
        responders = rng.permutation(n_tracks)[: int(round(shifts[i] * n_tracks))]
        bump = np.zeros(n_tracks)
        bump[responders] = response
        for phase in ("pre", "post"):
            delta = bump if phase == "post" else np.zeros(n_tracks)
            moved = [Track2D(t.start, t.direction, t.speed + d) for t, d in zip(tracks, delta)]
            name = f"p{i:02d}_{phase}"
            chans = {}
            for channel, scale in zip(("velocity", "signal"), channel_scales):
                if channel == "velocity":
                    level = [scale * m.speed for m in moved]
                else:
                    level = baselines + scale * delta
                chans[channel] = render(moved, dims, [[v] * n_frames for v in level], channel, name)
            items.append(CorpusItem(name, 0 if phase == "pre" else 1, s, chans))
    return items


def write_corpus(items, out_dir, spec=None):
    """Save every channel as an f32 ``.vol`` pair and write ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for it in items:
        files = {}
        for channel, k in sorted(it.channels.items()):
            fname = f"{it.name}.{channel}.vol"
            save_kymograph(k, out / fname)
            files[channel] = fname
        entries.append({"name": it.name, "label": it.label, "seed": it.seed, "files": files})
    manifest = {
        "kind": "kymograph_corpus",
        "spec": asdict(spec) if spec is not None else None,
        "channels": sorted({c for it in items for c in it.channels}),
        "items": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest
