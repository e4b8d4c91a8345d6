"""Normalized compression distance over quantized kymographs.

    NCD(a, b) = (Z(a || b) - min(Z(a), Z(b))) / max(Z(a), Z(b))

``Z`` is the compressed size in bytes and ``||`` stacks two kymographs along
time.  Kymographs are serialized headerless, x fastest, then y, then t, so
concatenation along time is plain byte concatenation.

The default compressor is raw LZMA2 (8 MiB dictionary, fast mode, HC4 match
finder, nice_len 273, search depth 1000).  Deflate is
available but its 32 KiB window cannot see a repeat of anything larger than
that, which pushes NCD(x, x) towards 1 on full-size kymographs.
"""
import bz2
import csv
import hashlib
import lzma
import os
import shutil
import subprocess
import tempfile
import threading
import warnings
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import CompressorError, MissingProgramError, ShapeError

LZMA_FILTERS = (
    {
        "id": lzma.FILTER_LZMA2,
        "dict_size": 1 << 23,
        "mode": lzma.MODE_FAST,
        "mf": lzma.MF_HC4,
        "nice_len": 273,
        # long hash chains (sparse, repetitive kymographs) must still reach
        # the far copy in x || x
        "depth": 1000,
    },
)


class Compressor:
    """Deterministic map from a byte stream to a compressed size.

    Sizes are memoized by SHA-256 of the input; the cache is shared between
    threads.
    """

    name = "base"

    def __init__(self):
        self._cache = {}
        self._lock = threading.Lock()

    def compress(self, data, shape=None):
        raise NotImplementedError

    def size(self, data, shape=None):
        key = hashlib.sha256(data).digest()
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        z = len(self.compress(data, shape))
        with self._lock:
            self._cache[key] = z
        return z

    def clear_cache(self):
        with self._lock:
            self._cache.clear()

    def __repr__(self):
        return f"{type(self).__name__}()"


class LZMACompressor(Compressor):
    name = "lzma"

    def compress(self, data, shape=None):
        return lzma.compress(data, format=lzma.FORMAT_RAW, filters=[dict(f) for f in LZMA_FILTERS])


class ZlibCompressor(Compressor):
    name = "zlib"

    def __init__(self, level=9):
        super().__init__()
        self.level = level

    def compress(self, data, shape=None):
        return zlib.compress(data, self.level)


class BZ2Compressor(Compressor):
    name = "bz2"

    def __init__(self, level=9):
        super().__init__()
        self.level = level

    def compress(self, data, shape=None):
        return bz2.compress(data, self.level)


def _write_container(path, data, shape, container):
    if container == "raw":
        with open(path, "wb") as fh:
            fh.write(data)
    elif container == "pgm":
        if shape is None:
            raise CompressorError("pgm container needs the (x, y, t) shape")
        x, y, t = shape
        # frames stacked vertically: width x, height y * t
        with open(path, "wb") as fh:
            fh.write(f"P5\n{x} {y * t}\n255\n".encode("ascii"))
            fh.write(data)
    else:
        raise CompressorError(f"unknown container {container!r}")


class ExternalCompressor(Compressor):
    """Run an external program and measure the size of the file it writes.

    Parameters
    ----------
    executable : str
    args : list of str
        Argument template; ``{input}`` and ``{output}`` are replaced by temp
        file paths.
    container : {"raw", "pgm"}
        How the u8 stream is written for the program to read.
    """

    def __init__(self, executable, args=("{input}", "{output}"), container="raw", name=None, timeout=600):
        super().__init__()
        resolved = shutil.which(executable)
        if resolved is None:
            raise MissingProgramError(f"compressor executable not found: {executable}")
        self.executable = resolved
        self.args = list(args)
        self.container = container
        self.name = name or os.path.basename(executable)
        self.timeout = timeout

    def compress(self, data, shape=None):
        with tempfile.TemporaryDirectory(prefix="ssfkymo-") as tmp:
            src = os.path.join(tmp, "in." + ("pgm" if self.container == "pgm" else "bin"))
            dst = os.path.join(tmp, "out.bin")
            _write_container(src, data, shape, self.container)
            argv = [self.executable] + [a.format(input=src, output=dst) for a in self.args]
            proc = subprocess.run(argv, capture_output=True, timeout=self.timeout)
            if proc.returncode != 0:
                raise CompressorError(
                    f"{self.name} exited with {proc.returncode}: {proc.stderr.decode(errors='replace').strip()}"
                )
            if not os.path.exists(dst):
                raise CompressorError(f"{self.name} produced no output file")
            with open(dst, "rb") as fh:
                return fh.read()


BUILTIN = {"lzma": LZMACompressor, "zlib": ZlibCompressor, "bz2": BZ2Compressor}


def external_compressor(descriptor):
    """Build a compressor from a descriptor dict.

    Keys: ``executable``, ``args``, ``container``, optional ``name`` and
    ``fallback`` (a built-in name used with a warning when the program is
    missing).
    """
    try:
        return ExternalCompressor(
            descriptor["executable"],
            descriptor.get("args", ["{input}", "{output}"]),
            descriptor.get("container", "raw"),
            descriptor.get("name"),
        )
    except MissingProgramError:
        fallback = descriptor.get("fallback")
        if not fallback:
            raise
        warnings.warn(f"{descriptor['executable']} unavailable, falling back to {fallback}", RuntimeWarning, stacklevel=2)
        return get_compressor(fallback)


def get_compressor(spec="lzma"):
    """Resolve a name, descriptor dict or Compressor instance."""
    if isinstance(spec, Compressor):
        return spec
    if isinstance(spec, dict):
        if spec.get("type", "external") == "external":
            return external_compressor(spec)
        return get_compressor(spec["type"])
    try:
        return BUILTIN[spec]()
    except KeyError:
        raise ValueError(f"unknown compressor {spec!r}; built-ins are {sorted(BUILTIN)}") from None


def serialize_for_compression(q):
    """Headerless u8 bytes, x fastest, then y, then t."""
    data = q.data if hasattr(q, "data") else np.asarray(q)
    return np.ascontiguousarray(np.asarray(data, dtype=np.uint8)).tobytes(order="F")


def parse_stream(stream, dims):
    """Inverse of :func:`serialize_for_compression` for known ``(x, y, t)``."""
    return np.frombuffer(stream, dtype=np.uint8).reshape(dims, order="F")


def concat(a, b):
    """Byte stream of ``a`` followed by ``b`` along the time axis."""
    if a.data.shape[:2] != b.data.shape[:2]:
        raise ShapeError(f"spatial extents differ: {a.data.shape[:2]} vs {b.data.shape[:2]}")
    return serialize_for_compression(a) + serialize_for_compression(b)


def _ncd_sizes(za, zb, zab):
    return (zab - min(za, zb)) / max(za, zb)


def _label(item, fallback):
    return getattr(item, "name", "") or str(fallback)


def ncd(a, b, compressor=None):
    """Normalized compression distance between two quantized kymographs."""
    c = get_compressor(compressor or "lzma")
    try:
        sa, sb = serialize_for_compression(a), serialize_for_compression(b)
        if not sa or not sb:
            raise ValueError("empty kymograph")
        za = c.size(sa, a.data.shape)
        zb = c.size(sb, b.data.shape)
        x, y = a.data.shape[:2]
        zab = c.size(concat(a, b), (x, y, a.data.shape[2] + b.data.shape[2]))
    except ShapeError:
        raise
    except Exception as exc:
        raise CompressorError(f"NCD({_label(a, 'a')}, {_label(b, 'b')}) failed: {exc}") from exc
    return _ncd_sizes(za, zb, zab)


@dataclass
class DistanceMatrix:
    """Pairwise NCD values with the bookkeeping of how they were produced.

    ``values`` holds self-distances NCD(x, x) on the diagonal.  When both
    concatenation orders were compressed, ``asymmetry[i, j]`` is
    ``|NCD(i, j) - NCD(j, i)|`` and the stored value is their mean.
    """

    values: np.ndarray
    item_ids: list
    compressor: str
    asymmetry: Optional[np.ndarray] = None
    counts: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.item_ids)

    @property
    def self_ncd_bound(self):
        return float(np.max(np.diag(self.values)))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["item_id"] + list(self.item_ids))
            for name, row in zip(self.item_ids, self.values):
                w.writerow([name] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, compressor=""):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        ids = rows[0][1:]
        if [r[0] for r in rows[1:]] != ids:
            raise ShapeError("row and column ids differ")
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(values, ids, compressor)


def _map(fn, jobs, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs))


def pairwise_matrix(kymos, compressor=None, n_jobs=1, symmetrize=False, diagonal=True):
    """Full NCD matrix of a list of quantized kymographs.

    Each singleton is compressed once and each unordered pair once (``a || b``
    with ``a`` earlier in the list); with ``symmetrize`` the reverse order is
    also compressed and the two values averaged.  ``diagonal`` fills the
    diagonal with NCD(x, x), otherwise with zeros.
    """
    kymos = list(kymos)
    n = len(kymos)
    if n < 2:
        raise ValueError("need at least two kymographs")
    c = get_compressor(compressor or "lzma")
    ids = [_label(k, i) for i, k in enumerate(kymos)]
    streams = [serialize_for_compression(k) for k in kymos]

    def z_single(i):
        try:
            return c.size(streams[i], kymos[i].data.shape)
        except Exception as exc:
            raise CompressorError(f"compressing {ids[i]} failed: {exc}") from exc

    z = _map(z_single, range(n), n_jobs)

    def z_pair(ij):
        i, j = ij
        a, b = kymos[i], kymos[j]
        if a.data.shape[:2] != b.data.shape[:2]:
            raise ShapeError(f"{ids[i]} and {ids[j]} have different spatial extents")
        try:
            shape = a.data.shape[:2] + (a.data.shape[2] + b.data.shape[2],)
            return c.size(streams[i] + streams[j], shape)
        except Exception as exc:
            raise CompressorError(f"pair ({ids[i]}, {ids[j]}) failed: {exc}") from exc

    upper = list(combinations(range(n), 2))
    jobs = upper + ([(j, i) for i, j in upper] if symmetrize else [])
    selfs = [(i, i) for i in range(n)] if diagonal else []
    sizes = dict(zip(jobs + selfs, _map(z_pair, jobs + selfs, n_jobs)))

    values = np.zeros((n, n))
    asym = np.zeros((n, n)) if symmetrize else None
    for i, j in upper:
        d = _ncd_sizes(z[i], z[j], sizes[i, j])
        if symmetrize:
            d_rev = _ncd_sizes(z[i], z[j], sizes[j, i])
            asym[i, j] = asym[j, i] = abs(d - d_rev)
            d = 0.5 * (d + d_rev)
        values[i, j] = values[j, i] = d
    for i in range(n) if diagonal else ():
        values[i, i] = _ncd_sizes(z[i], z[i], sizes[i, i])
    counts = {"single": n, "pair": len(jobs), "self": len(selfs)}
    return DistanceMatrix(values, ids, c.name, asym, counts)


class PairwiseNCD(TransformerMixin, BaseEstimator):
    """NCD kernel transformer.

    ``fit`` stores reference kymographs; ``transform`` returns the NCD of each
    query against every reference, shape ``(n_queries, n_references)``.
    ``fit_transform`` on a single list returns the square matrix of
    :func:`pairwise_matrix` and keeps it as ``distance_matrix_``.
    """

    def __init__(self, compressor="lzma", n_jobs=1, symmetrize=False):
        self.compressor = compressor
        self.n_jobs = n_jobs
        self.symmetrize = symmetrize

    def fit(self, X, y=None):
        X = list(X)
        if not X:
            raise ValueError("empty reference set")
        self.compressor_ = get_compressor(self.compressor)
        self.references_ = X
        return self

    def transform(self, X):
        check_is_fitted(self, "references_")
        X = list(X)
        jobs = [(i, j) for i in range(len(X)) for j in range(len(self.references_))]

        def one(ij):
            i, j = ij
            d = ncd(X[i], self.references_[j], self.compressor_)
            if self.symmetrize:
                d = 0.5 * (d + ncd(self.references_[j], X[i], self.compressor_))
            return d

        vals = _map(one, jobs, self.n_jobs)
        return np.asarray(vals, dtype=float).reshape(len(X), len(self.references_))

    def fit_transform(self, X, y=None):
        self.fit(X)
        self.distance_matrix_ = pairwise_matrix(self.references_, self.compressor_, self.n_jobs, self.symmetrize)
        return self.distance_matrix_.values
