"""Paired-median and correlation tests used to compare channels."""
import math

import numpy as np
from scipy import stats as _st

from .exceptions import UndefinedTestError

EXACT_MAX_N = 25
MIN_NONZERO = 5


def _signed_rank_counts(doubled_ranks):
    """Number of sign patterns reaching each value of 2 * W+.

    ``doubled_ranks`` are integer (twice the mid-ranks, so ties stay exact).
    """
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return counts


def wilcoxon_signed_rank(pairs, exact=None):
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped and tied magnitudes get mid-ranks.  The
    exact null distribution is used for up to 25 non-zero differences, the
    normal approximation with continuity and tie corrections above that.

    Parameters
    ----------
    pairs : sequence of (a, b)
    exact : bool, optional
        Force the exact (True) or approximate (False) p-value.

    Returns
    -------
    statistic : float
        Sum of ranks of the positive differences ``a - b``.
    p : float
    """
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must be a sequence of (a, b)")
    d = pairs[:, 0] - pairs[:, 1]
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise UndefinedTestError("all paired differences are zero")
    if n < MIN_NONZERO:
        raise UndefinedTestError(f"need at least {MIN_NONZERO} non-zero differences, got {n}")
    ranks = _st.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if exact is None:
        exact = n <= EXACT_MAX_N
    if exact:
        doubled = np.rint(2 * ranks).astype(int)
        counts = _signed_rank_counts(doubled)
        k = int(round(2 * w_plus))
        total = counts.sum()
        lower = counts[: k + 1].sum() / total
        upper = counts[k:].sum() / total
        p = min(1.0, 2.0 * min(lower, upper))
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
        dev = max(abs(w_plus - mean) - 0.5, 0.0)
        p = min(1.0, math.erfc(dev / math.sqrt(var) / math.sqrt(2.0)))
    return w_plus, p


def pearson(x, y):
    """Sample correlation and its two-sided p-value from Student's t (n - 2 dof)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and equally long")
    n = x.size
    if n < 3:
        raise UndefinedTestError("need at least 3 observations")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0 or syy == 0:
        raise UndefinedTestError("correlation undefined for constant input")
    r = float(np.clip((xc @ yc) / math.sqrt(sxx * syy), -1.0, 1.0))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, float(2.0 * _st.t.sf(abs(t), n - 2))


def spearman(x, y):
    """Rank correlation: Pearson on mid-ranks."""
    return pearson(_st.rankdata(x), _st.rankdata(y))
