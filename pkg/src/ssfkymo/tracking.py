"""Centroid detection on the nuclear channel and gated nearest-neighbour linking."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .exceptions import UndefinedVelocityError
from .log_filter import log_reference, max_response
from .ssf import SSFValue
from .volume import VoxelCoord, radius_to_pixels

DEFAULT_GATE_PX = 10.0


@dataclass(frozen=True)
class CentroidRecord:
    coord: VoxelCoord
    radius_px: float
    ssf_h2b: SSFValue


@dataclass
class Track:
    id: int
    records: list = field(default_factory=list)
    gate_px_per_frame: float = DEFAULT_GATE_PX

    @property
    def first_t(self):
        return self.records[0].coord.t

    @property
    def frames(self):
        return [r.coord.t for r in self.records]

    def step_lengths(self):
        return [_dist(a.coord, b.coord) for a, b in zip(self.records, self.records[1:])]

    def __len__(self):
        return len(self.records)


def _dist(a, b):
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def _ellipsoid_footprint(radii):
    half = [int(math.floor(r)) for r in radii]
    grids = np.indices([2 * h + 1 for h in half]).astype(float)
    q = sum(((g - h) / r) ** 2 for g, h, r in zip(grids, half, radii))
    return q <= 1.0


def detect_centroids(frame, radii_um, spacing, threshold=0.01, t=0, polarity="bright"):
    """Detect cell centroids in one nuclear-marker frame.

    The frame is filtered at every radius, each voxel is divided by the
    reference response of its winning radius, and local maxima above
    ``threshold`` are kept with greedy non-maximum suppression at the smallest
    radius.

    Parameters
    ----------
    frame : ndarray, (X, Y) or (X, Y, Z)
    radii_um : sequence of float
    spacing : sequence of float
        Micrometres per voxel; the first ``frame.ndim`` entries are used.
    threshold : float
    t : int
        Frame index stamped on the returned coordinates.
    polarity : {"bright", "dark"}
        ``"bright"`` for nuclei brighter than their surround (H2B), which
        appear as negative LoG responses.

    Returns
    -------
    list of CentroidRecord, ordered by (y, x, z)
    """
    if polarity not in ("bright", "dark"):
        raise ValueError("polarity must be 'bright' or 'dark'")
    frame = np.asarray(frame, dtype=np.float64)
    dim = frame.ndim
    spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (3,))[:dim]
    radii_px = [np.atleast_1d(radius_to_pixels(r, spacing)) for r in radii_um]
    resp = max_response(frame, radii_px)
    refs = np.array([log_reference(r, dim) for r in resp.radii])
    score = resp.data / refs[resp.radius_index]
    if polarity == "bright":
        score = -score

    r_min = min(radii_px, key=lambda r: float(np.min(r)))
    footprint = _ellipsoid_footprint(r_min)
    peaks = (score > threshold) & (score == ndimage.maximum_filter(score, footprint=footprint, mode="nearest"))
    cand = np.argwhere(peaks)
    order = sorted(range(len(cand)), key=lambda i: (-score[tuple(cand[i])], *cand[i][::-1]))
    kept = []
    for i in order:
        p = cand[i]
        if all(np.sum(((p - q) / r_min) ** 2) > 1.0 for q in kept):
            kept.append(p)

    lead = np.array([r[0] for r in resp.radii])
    records = []
    for p in kept:
        idx = tuple(p)
        coord = VoxelCoord(int(p[0]), int(p[1]), int(p[2]) if dim == 3 else 0, t)
        records.append(CentroidRecord(coord, float(lead[resp.radius_index[idx]]), SSFValue(float(score[idx]), "H2B", coord)))
    records.sort(key=lambda r: (r.coord.t, r.coord.y, r.coord.x, r.coord.z))
    return records


def detect_movie(volume, channel="H2B", radii_um=(4.0, 4.5, 5.0, 5.5, 6.0), threshold=0.01, polarity="bright"):
    """Run :func:`detect_centroids` on every frame of one channel."""
    return [
        detect_centroids(volume.frame(channel, t), radii_um, volume.spacing, threshold, t, polarity)
        for t in range(volume.dims[4])
    ]


def link_tracks(frames, gate_px=DEFAULT_GATE_PX):
    """Link per-frame detections into tracks.

    Candidate pairs between consecutive frames within ``gate_px`` are accepted
    greedily by increasing distance (ties: lower previous index, then lower
    current index); unmatched detections open new tracks.
    """
    if not gate_px > 0:
        raise ValueError("gate_px must be positive")
    tracks = []
    prev_tracks = []
    for t, current in enumerate(frames):
        cur_tracks = [None] * len(current)
        if t > 0 and prev_tracks:
            prev = [tr.records[-1] for tr in prev_tracks]
            pairs = []
            for i, a in enumerate(prev):
                for j, b in enumerate(current):
                    d = _dist(a.coord, b.coord)
                    if d <= gate_px:
                        pairs.append((d, i, j))
            pairs.sort()
            used_i, used_j = set(), set()
            for d, i, j in pairs:
                if i in used_i or j in used_j:
                    continue
                used_i.add(i)
                used_j.add(j)
                prev_tracks[i].records.append(current[j])
                cur_tracks[j] = prev_tracks[i]
        for j, rec in enumerate(current):
            if cur_tracks[j] is None:
                tr = Track(len(tracks), [rec], float(gate_px))
                tracks.append(tr)
                cur_tracks[j] = tr
        prev_tracks = cur_tracks
    return tracks


def cell_velocity(track, t):
    """Mean displacement into and out of frame ``t``, over the gate, in [0, 1].

    Track endpoints use their single available displacement.
    """
    if len(track) < 2:
        raise UndefinedVelocityError(f"track {track.id} has a single detection")
    k = t - track.first_t
    if not 0 <= k < len(track):
        raise IndexError(f"frame {t} not in track {track.id}")
    steps = track.step_lengths()
    around = [steps[i] for i in (k - 1, k) if 0 <= i < len(steps)]
    v = float(np.mean(around)) / track.gate_px_per_frame
    return min(max(v, 0.0), 1.0)


TRACK_COLUMNS = ("track_id", "t", "x", "y", "z", "radius_px", "ssf_h2b", "velocity_norm")


def track_rows(tracks):
    rows = []
    for tr in tracks:
        for rec in tr.records:
            c = rec.coord
            v = cell_velocity(tr, c.t) if len(tr) > 1 else float("nan")
            rows.append((tr.id, c.t, c.x, c.y, c.z, rec.radius_px, rec.ssf_h2b.value, v))
    rows.sort(key=lambda r: (r[1], r[0]))
    return rows


def write_tracks_csv(tracks, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACK_COLUMNS)
        for row in track_rows(tracks):
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_tracks_csv(path, gate_px=DEFAULT_GATE_PX):
    """Rebuild tracks from a CSV written by :func:`write_tracks_csv`."""
    by_id = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            coord = VoxelCoord(int(row["x"]), int(row["y"]), int(row["z"]), int(row["t"]))
            rec = CentroidRecord(coord, float(row["radius_px"]), SSFValue(float(row["ssf_h2b"]), "H2B", coord))
            by_id.setdefault(int(row["track_id"]), []).append(rec)
    return [Track(i, sorted(recs, key=lambda r: r.coord.t), gate_px) for i, recs in sorted(by_id.items())]
