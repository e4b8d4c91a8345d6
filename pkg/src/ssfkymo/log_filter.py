"""Separable, scale-invariant Laplacian-of-Gaussian filtering.

The d-dimensional kernel

    LoG(p) = (p^T S^-2 p - d) G(p),   S = diag(sigma_1 .. sigma_d)

factorises into ``sum_i LoG_i(p_i) * prod_{j != i} G_j(p_j)`` where
``LoG_i(u) = (u^2 / sigma_i^2 - 1) G_i(u)``.  A blob radius ``r`` maps to
``sigma = r / sqrt(d)``, the radius at which the centre response of a step
disc (sphere) peaks.

Sign convention: a dark blob on a bright surround gives a *positive* centre
response, so the response tracks ``c - n`` (cytoplasm minus nucleus).
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ResolutionError, SizeError

SUPPORT_SIGMAS = 4.0


@dataclass(frozen=True)
class SeparableLoGKernel:
    """Per-axis 1-D factors of a LoG kernel.

    ``gauss[i]`` sums to one and ``log[i]`` sums to zero, so every term of the
    separable sum, and therefore the assembled kernel, sums to zero.
    """

    radius: tuple
    sigmas: tuple
    support: tuple
    gauss: tuple
    log: tuple

    @property
    def dim(self):
        return len(self.sigmas)

    def dense(self):
        """Assemble the full d-dimensional kernel (for checks and small frames)."""
        total = 0.0
        for i in range(self.dim):
            factors = [self.log[j] if j == i else self.gauss[j] for j in range(self.dim)]
            total = total + _outer(factors)
        return total

    def dense_gaussian(self):
        return _outer(self.gauss)


def _outer(factors):
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


def _per_axis(radius_px, dim):
    r = np.atleast_1d(np.asarray(radius_px, dtype=float))
    if r.size == 1:
        r = np.repeat(r, dim)
    if r.size != dim:
        raise ValueError(f"need 1 or {dim} radii, got {r.size}")
    return r


def make_kernel(radius_px, dim=2):
    """Build the separable LoG kernel for a blob of ``radius_px`` voxels.

    Parameters
    ----------
    radius_px : float or sequence of float
        Blob radius, either isotropic or one value per axis.
    dim : {2, 3}

    Returns
    -------
    SeparableLoGKernel
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    radii = _per_axis(radius_px, dim)
    if np.any(~np.isfinite(radii)) or np.any(radii < 1.0):
        raise ResolutionError(f"blob radius below one voxel is unresolvable: {radii}")
    sigmas = radii / math.sqrt(dim)
    gauss, log, support = [], [], []
    for s in sigmas:
        half = int(math.ceil(SUPPORT_SIGMAS * s))
        u = np.arange(-half, half + 1, dtype=float)
        g = np.exp(-0.5 * (u / s) ** 2)
        g /= g.sum()
        lg = ((u / s) ** 2 - 1.0) * g
        # subtract a Gaussian-shaped share of the residual so the taps sum to 0
        lg -= g * lg.sum()
        gauss.append(g)
        log.append(lg)
        support.append(half)
    return SeparableLoGKernel(
        radius=tuple(float(r) for r in radii),
        sigmas=tuple(float(s) for s in sigmas),
        support=tuple(support),
        gauss=tuple(gauss),
        log=tuple(log),
    )


def _pass1d(arr, taps, axis):
    """Zero-padded correlation of ``arr`` with symmetric ``taps`` along ``axis``."""
    half = len(taps) // 2
    n = arr.shape[axis]
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (half, half)
    padded = np.pad(arr, pad)
    out = np.zeros(arr.shape, dtype=np.float64)
    index = [slice(None)] * arr.ndim
    for k, w in enumerate(taps):
        index[axis] = slice(k, k + n)
        out += w * padded[tuple(index)]
    return out


def _separable_terms(img, kernel):
    """Return (sum of LoG terms, full Gaussian smoothing) of ``img``.

    Passes are applied axis by axis and shared between terms with a common
    prefix of factors.
    """
    d = kernel.dim
    memo = {(): img}

    def run(pattern):
        if pattern in memo:
            return memo[pattern]
        prev = run(pattern[:-1])
        axis = len(pattern) - 1
        taps = kernel.log[axis] if pattern[-1] else kernel.gauss[axis]
        memo[pattern] = _pass1d(prev, taps, axis)
        return memo[pattern]

    total = 0.0
    for i in range(d):
        total = total + run(tuple(j == i for j in range(d)))
    smooth = run((False,) * d)
    return total, smooth


@dataclass
class ResponseVolume:
    """LoG response over one spatial frame.

    ``radius_index`` points into ``radii`` for the kernel whose response was
    kept at each voxel.
    """

    data: np.ndarray
    radius_index: np.ndarray
    radii: tuple

    @property
    def radius_px(self):
        """Winning radius per voxel (first-axis value for anisotropic kernels)."""
        lead = np.array([np.atleast_1d(r)[0] for r in self.radii], dtype=float)
        return lead[self.radius_index]

    @property
    def shape(self):
        return self.data.shape


def filter_frame(frame, kernel):
    """Filter a 2-D or 3-D frame with a separable LoG kernel.

    Near the borders the part of the kernel that protrudes from the frame is
    dropped and the remainder is re-balanced to zero sum by subtracting its
    residual mass in proportion to the truncated Gaussian.  A constant frame
    therefore maps to zero everywhere, corners included.

    Returns
    -------
    ResponseVolume
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != kernel.dim:
        raise SizeError(f"{frame.ndim}-D frame with a {kernel.dim}-D kernel")
    for n, half in zip(frame.shape, kernel.support):
        if n < half:
            raise SizeError(f"frame extent {n} smaller than kernel support {half}")
    raw, smooth = _separable_terms(frame, kernel)
    residual, mass = _separable_terms(np.ones_like(frame), kernel)
    data = raw - residual * smooth / mass
    return ResponseVolume(
        data=data,
        radius_index=np.zeros(frame.shape, dtype=np.intp),
        radii=(kernel.radius,),
    )


def max_response(frame, radii_px):
    """Signed response of largest magnitude over several radii.

    Ties keep the earlier radius in ``radii_px``.
    """
    radii_px = list(radii_px)
    if not radii_px:
        raise ValueError("radii_px must be non-empty")
    frame = np.asarray(frame, dtype=np.float64)
    best = None
    for idx, r in enumerate(radii_px):
        resp = filter_frame(frame, make_kernel(r, frame.ndim)).data
        if best is None:
            best = resp
            index = np.zeros(frame.shape, dtype=np.intp)
            continue
        better = np.abs(resp) > np.abs(best)
        best = np.where(better, resp, best)
        index[better] = idx
    radii = tuple(tuple(_per_axis(r, frame.ndim)) for r in radii_px)
    return ResponseVolume(data=best, radius_index=index, radii=radii)


def blob_image(shape, center, radius, inside=0.0, outside=1.0):
    """Step image: an ellipsoidal blob of per-axis ``radius`` at ``center``."""
    radius = _per_axis(radius, len(shape))
    grids = np.meshgrid(*[np.arange(n, dtype=float) for n in shape], indexing="ij")
    q = sum(((g - c) / r) ** 2 for g, c, r in zip(grids, center, radius))
    return np.where(q <= 1.0, inside, outside).astype(np.float64)


@lru_cache(maxsize=64)
def _reference(radius, dim):
    kernel = make_kernel(radius, dim)
    shape = tuple(2 * h + 3 for h in kernel.support)
    center = tuple(n // 2 for n in shape)
    img = blob_image(shape, center, radius)
    return float(filter_frame(img, kernel).data[center])


def log_reference(radius_px, dim=2):
    """Response of a zero-intensity blob on a unit background at matched radius.

    Dividing a response by this value scales it to [-1, 1] for step blobs.
    For an ideal continuous disc the value is ``2/e`` in 2-D.
    """
    return _reference(tuple(float(r) for r in _per_axis(radius_px, dim)), dim)


class MultiScaleLoG(TransformerMixin, BaseEstimator):
    """Transformer mapping a stack of frames to their max-magnitude LoG response.

    Parameters
    ----------
    radii_px : sequence
        Candidate blob radii in voxels.
    reference_normalize : bool
        Divide each voxel by the reference response of its winning radius.
    """

    def __init__(self, radii_px=(4.0, 4.5, 5.0, 5.5, 6.0), reference_normalize=False):
        self.radii_px = radii_px
        self.reference_normalize = reference_normalize

    def fit(self, X, y=None):
        X = np.asarray(X)
        if X.ndim not in (3, 4):
            raise ValueError("expected a stack of 2-D or 3-D frames")
        self.dim_ = X.ndim - 1
        for r in self.radii_px:
            make_kernel(r, self.dim_)
        return self

    def transform(self, X):
        check_is_fitted(self, "dim_")
        X = np.asarray(X, dtype=np.float64)
        out = np.empty_like(X)
        for k, frame in enumerate(X):
            resp = max_response(frame, self.radii_px)
            out[k] = resp.data
            if self.reference_normalize:
                refs = np.array([log_reference(r, self.dim_) for r in resp.radii])
                out[k] /= refs[resp.radius_index]
        return out
