"""Independent reference computations the package is checked against.

None of these reuse the package's own filtering, ranking or matching code.
"""
import itertools
import math

import numpy as np
from scipy import ndimage


def continuous_log_kernel(radius, dim):
    """Dense LoG kernel evaluated from the closed form on the full grid.

    ``(p' S^-2 p - d) G(p)`` with ``S = diag(sigma)``, ``sigma = r / sqrt(d)``,
    cut at ``ceil(4 sigma)`` and balanced to zero sum with the truncated
    Gaussian.  Returns ``(log_kernel, gaussian_kernel)``.
    """
    radius = np.broadcast_to(np.asarray(radius, dtype=float), (dim,))
    sigma = radius / math.sqrt(dim)
    half = [int(math.ceil(4 * s)) for s in sigma]
    grids = np.meshgrid(*[np.arange(-h, h + 1, dtype=float) for h in half], indexing="ij")
    q = sum((g / s) ** 2 for g, s in zip(grids, sigma))
    gauss = np.exp(-0.5 * q)
    gauss /= gauss.sum()
    log = (q - dim) * gauss
    log -= gauss * log.sum()
    return log, gauss


def dense_filter(frame, log_kernel, gauss_kernel):
    """Brute-force correlation with the same border re-balancing rule.

    Outside voxels count as zero; the truncated kernel's residual is removed
    in proportion to the truncated Gaussian.
    """
    frame = np.asarray(frame, dtype=float)
    ones = np.ones_like(frame)
    corr = lambda img, k: ndimage.correlate(img, k, mode="constant", cval=0.0)  # noqa: E731
    raw = corr(frame, log_kernel)
    residual = corr(ones, log_kernel)
    return raw - residual * corr(frame, gauss_kernel) / corr(ones, gauss_kernel)


def wilcoxon_enumerate(diffs):
    """Two-sided exact p by enumerating all 2^n sign patterns of the ranks."""
    d = np.asarray([v for v in diffs if v != 0], dtype=float)
    absd = np.abs(d)
    # mid-ranks by direct counting
    ranks = np.array([np.sum(absd < a) + (np.sum(absd == a) + 1) / 2.0 for a in absd])
    w_obs = ranks[d > 0].sum()
    ws = [sum(r for r, s in zip(ranks, signs) if s) for signs in itertools.product((0, 1), repeat=len(d))]
    ws = np.array(ws)
    eps = 1e-9
    lower = np.mean(ws <= w_obs + eps)
    upper = np.mean(ws >= w_obs - eps)
    return w_obs, min(1.0, 2 * min(lower, upper))


def t_two_sided_p(t, dof):
    """Closed-form two-sided p of Student's t for 1 and 2 degrees of freedom."""
    t = abs(t)
    if dof == 1:
        return 1.0 - 2.0 / math.pi * math.atan(t)
    if dof == 2:
        return 1.0 - t / math.sqrt(2.0 + t * t)
    raise ValueError("closed form implemented for dof 1 and 2 only")


def best_assignment(prev, cur, gate):
    """Minimum-total-distance matching that maximizes the number of links.

    Exhaustive over permutations; fine for a handful of points.
    """
    best = None
    n, m = len(prev), len(cur)
    for perm in itertools.permutations(range(m), min(n, m)):
        links = [(i, j) for i, j in enumerate(perm) if math.dist(prev[i], cur[j]) <= gate]
        cost = sum(math.dist(prev[i], cur[j]) for i, j in links)
        key = (-len(links), cost)
        if best is None or key < best[0]:
            best = (key, sorted(links))
    return best[1]
