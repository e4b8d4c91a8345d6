"""Classical MDS embedding of distance matrices and cluster structure functions."""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import AlignmentError, BudgetError, PartitionError, ReducedRankWarning
from .ncd import get_compressor, serialize_for_compression
from .validation import check_distance_matrix, check_labels

EIGEN_RTOL = 1e-9


@dataclass
class Embedding:
    """Points in R^K from classical MDS.

    Attributes
    ----------
    points : ndarray (N, K)
    eigenvalues : ndarray (K,)
        Retained eigenvalues of the double-centred Gram matrix, descending.
    discarded_negative_mass : float
        Sum of |negative eigenvalues|: how far the input is from Euclidean.
    item_ids : list
    """

    points: np.ndarray
    eigenvalues: np.ndarray
    discarded_negative_mass: float
    item_ids: list = field(default_factory=list)

    @property
    def n_components(self):
        return self.points.shape[1]

    def subset(self, ids, new_ids=None):
        """Rows for ``ids`` (in that order), optionally relabelled."""
        index = {k: i for i, k in enumerate(self.item_ids)}
        try:
            rows = [index[k] for k in ids]
        except KeyError as exc:
            raise AlignmentError(f"unknown item id {exc.args[0]!r}") from None
        return Embedding(self.points[rows], self.eigenvalues, self.discarded_negative_mass, list(new_ids or ids))


def _double_center(D):
    n = D.shape[0]
    J = np.eye(n) - np.full((n, n), 1.0 / n)
    return -0.5 * J @ (D**2) @ J


def _fix_signs(vecs):
    # first significant component of each eigenvector is made positive
    mag = np.abs(vecs)
    lead = np.argmax(mag > 1e-6 * mag.max(axis=0), axis=0)
    signs = np.sign(vecs[lead, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def embed(d, n_components, item_ids=None):
    """Classical (Torgerson) MDS of a distance matrix.

    The diagonal is treated as zero: NCD self-distances are a compressor
    artefact rather than distances.

    Parameters
    ----------
    d : DistanceMatrix or array-like (N, N)
    n_components : int
        K, with 1 <= K <= N - 1.  Lowered with a warning when fewer
        eigenvalues are positive.

    Returns
    -------
    Embedding
    """
    values = getattr(d, "values", d)
    item_ids = list(item_ids if item_ids is not None else getattr(d, "item_ids", range(len(values))))
    D = check_distance_matrix(values)
    n = D.shape[0]
    if not 1 <= n_components <= n - 1:
        raise ValueError(f"n_components must be in [1, {n - 1}], got {n_components}")
    B = _double_center(D)
    B = 0.5 * (B + B.T)
    evals, evecs = np.linalg.eigh(B)
    order = np.argsort(evals, kind="stable")[::-1]
    evals, evecs = evals[order], evecs[:, order]
    top = max(evals[0], 0.0)
    positive = evals > EIGEN_RTOL * top if top > 0 else np.zeros_like(evals, dtype=bool)
    negative_mass = float(-evals[evals < -EIGEN_RTOL * top].sum()) if top > 0 else 0.0
    k = n_components
    if positive.sum() < k:
        k = int(positive.sum())
        warnings.warn(
            f"only {k} positive eigenvalues; embedding dimension lowered from {n_components}",
            ReducedRankWarning,
            stacklevel=2,
        )
    vecs = _fix_signs(evecs[:, :k])
    points = vecs * np.sqrt(evals[:k])
    points -= points.mean(axis=0)
    return Embedding(points, evals[:k].copy(), negative_mass, item_ids)


class ClassicalMDS(TransformerMixin, BaseEstimator):
    """Scikit-learn style wrapper around :func:`embed` for precomputed distances.

    Attributes
    ----------
    embedding_ : ndarray (N, K)
    eigenvalues_ : ndarray (K,)
    discarded_negative_mass_ : float
    """

    def __init__(self, n_components=3):
        self.n_components = n_components

    def fit(self, X, y=None):
        e = embed(X, self.n_components)
        self.embedding_ = e.points
        self.eigenvalues_ = e.eigenvalues
        self.discarded_negative_mass_ = e.discarded_negative_mass
        self.result_ = e
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_

    def transform(self, X):
        """Return the fitted coordinates; out-of-sample extension is not offered."""
        check_is_fitted(self, "embedding_")
        if np.asarray(X).shape[0] != self.embedding_.shape[0]:
            raise ValueError("ClassicalMDS only transforms the matrix it was fitted on")
        return self.embedding_


@dataclass
class CSFReport:
    per_item_deficiency: np.ndarray
    per_cluster_mean: dict
    overall: tuple
    overall_items: tuple
    formulation: str
    labels: list = field(default_factory=list)
    item_ids: list = field(default_factory=list)

    def to_dict(self):
        return {
            "formulation": self.formulation,
            "overall": {"mean": self.overall[0], "std": self.overall[1]},
            "overall_items": {"mean": self.overall_items[0], "std": self.overall_items[1]},
            "per_cluster_mean": {str(k): float(v) for k, v in self.per_cluster_mean.items()},
            "per_item": [
                {"item_id": str(i), "label": str(l), "deficiency": float(v)}
                for i, l, v in zip(self.item_ids, self.labels, self.per_item_deficiency)
            ],
        }


def _summarize(deficiency, labels, formulation, item_ids):
    clusters = sorted(set(labels), key=str)
    per_cluster = {c: float(np.mean([d for d, l in zip(deficiency, labels) if l == c])) for c in clusters}
    means = np.array(list(per_cluster.values()))
    return CSFReport(
        per_item_deficiency=np.asarray(deficiency, dtype=float),
        per_cluster_mean=per_cluster,
        overall=(float(means.mean()), float(means.std())),
        overall_items=(float(np.mean(deficiency)), float(np.std(deficiency))),
        formulation=formulation,
        labels=list(labels),
        item_ids=list(item_ids),
    )


def csf_rkhs(e, labels):
    """Cluster structure function in the embedding.

    Each item's optimality deficiency is its Euclidean distance to the centroid
    of its own cluster.  ``overall`` averages the per-cluster means (mean, std
    across clusters); ``overall_items`` averages over items.
    """
    points = e.points if isinstance(e, Embedding) else np.asarray(e, dtype=float)
    ids = e.item_ids if isinstance(e, Embedding) else list(range(len(points)))
    labels = check_labels(labels, len(points))
    deficiency = np.empty(len(points))
    for c in set(labels):
        members = [i for i, l in enumerate(labels) if l == c]
        centroid = points[members].mean(axis=0)
        deficiency[members] = np.linalg.norm(points[members] - centroid, axis=1)
    return _summarize(deficiency, labels, "rkhs", ids)


DEFAULT_BYTE_BUDGET = 64 << 20


def csf_compression(clusters, compressor=None, byte_budget=DEFAULT_BYTE_BUDGET):
    """Cluster structure function from compressed cluster sizes.

    For item ``y`` in cluster ``Y``: ``Z(Y) + log2|Y| - Z(y)``, where ``Z(Y)``
    compresses the time-wise concatenation of all members.

    Parameters
    ----------
    clusters : list of lists of QuantizedKymograph
    compressor : name, descriptor or Compressor
    byte_budget : int
        Refuse to concatenate more than this many bytes in one cluster.
    """
    c = get_compressor(compressor or "lzma")
    deficiency, labels, ids = [], [], []
    for k, members in enumerate(clusters):
        if not members:
            raise PartitionError(f"cluster {k} is empty")
        streams = [serialize_for_compression(m) for m in members]
        if sum(map(len, streams)) > byte_budget:
            raise BudgetError(
                f"cluster {k} needs {sum(map(len, streams))} bytes (budget {byte_budget}); use csf_rkhs instead"
            )
        shapes = [m.data.shape for m in members]
        if len({s[:2] for s in shapes}) != 1:
            raise PartitionError(f"cluster {k} mixes spatial extents")
        x, y = shapes[0][:2]
        z_cluster = c.size(b"".join(streams), (x, y, sum(s[2] for s in shapes)))
        penalty = math.log2(len(members))
        for m, s in zip(members, streams):
            deficiency.append(z_cluster + penalty - c.size(s, m.data.shape))
            labels.append(k)
            ids.append(getattr(m, "name", "") or f"{k}:{len(ids)}")
    return _summarize(deficiency, labels, "compression", ids)


def paired_shift_distances(e_pre, e_post):
    """Euclidean length of each item's move between two aligned embeddings.

    Both embeddings must carry the same id set (typically obtained with
    :meth:`Embedding.subset` from one joint embedding); the result follows
    ``e_pre.item_ids`` order.
    """
    if set(e_pre.item_ids) != set(e_post.item_ids) or len(e_pre.item_ids) != len(e_post.item_ids):
        raise AlignmentError("pre and post embeddings cover different ids")
    if e_pre.points.shape[1] != e_post.points.shape[1]:
        raise AlignmentError("pre and post embeddings have different dimension")
    post = e_post.subset(e_pre.item_ids)
    return np.linalg.norm(e_pre.points - post.points, axis=1)


def _set_partitions(items):
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[head]] + part
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1 :]


def partitions(items, k=None):
    """Every set partition of ``items``, optionally only those with ``k`` blocks."""
    for p in _set_partitions(list(items)):
        if k is None or len(p) == k:
            yield p
