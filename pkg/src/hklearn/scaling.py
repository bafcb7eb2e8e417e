"""Divide-and-conquer path for large pair systems.

Points are clustered with k-means; each cluster's within-cluster pairs form an
independent subproblem whose solutions are concatenated.  Pairs spanning two
clusters join a residual group with coefficient zero.  An optional landmark
restriction keeps only pairs touching one of u sampled points, cutting the
pair count from m^2 to 2mu - u^2.  The cost of the cut is quantified by the
cross-cluster mass q_pi and the bound C^2 q_pi / (2 sigma_min).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh

from .errors import HklearnError, InvalidInput
from .hyper import HyperGram, HyperKernelParams, assemble_hyper_gram, full_pair_list
from .krr import CoefficientField, KrrConfig, fit_krr
from .learned import LearnedKernel
from .svr import SvrConfig, fit_svr

RESIDUAL_GROUP = 0  # pair_partition id for cross-cluster pairs


@dataclass(frozen=True)
class ScalingConfig:
    v: int
    u: int
    seed: int
    kmeans_max_iter: int = 100

    def __post_init__(self):
        if self.v < 1:
            raise InvalidInput(f"cluster count must be >= 1, got {self.v}")
        if self.u < 1:
            raise InvalidInput(f"landmark count must be >= 1, got {self.u}")
        if self.kmeans_max_iter < 1:
            raise InvalidInput("kmeans_max_iter must be positive")


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    """Cluster ids (1-based) per point, plus the final centroids."""

    assignment: np.ndarray
    centroids: np.ndarray

    def __post_init__(self):
        assign = np.asarray(self.assignment, dtype=np.intp)
        cents = np.asarray(self.centroids, dtype=float)
        v = cents.shape[0]
        counts = np.bincount(assign, minlength=v + 1)
        if assign.size and (assign.min() < 1 or assign.max() > v):
            raise InvalidInput("cluster ids must lie in [1, v]")
        if np.any(counts[1 : v + 1] == 0):
            raise InvalidInput("empty cluster in partition plan")
        object.__setattr__(self, "assignment", assign)
        object.__setattr__(self, "centroids", cents)

    @property
    def v(self) -> int:
        return self.centroids.shape[0]


@dataclass(frozen=True)
class DecompositionDiagnostics:
    """Cross-cluster mass, spectrum floor, and the resulting gap bound.

    ``bound`` is None for ridge subproblems (no box constant to square) and
    infinite when sigma_min <= 0.  ``sigma_min_raw`` is reported alongside
    whenever the gram carried jitter.  ``observed_gap`` is filled only when
    the full solve was affordable.
    """

    q_pi: float
    sigma_min: float
    bound: float | None
    observed_gap: float | None = None
    sigma_min_raw: float | None = None


def kmeans_partition(X, v: int, seed: int, max_iter: int = 100) -> PartitionPlan:
    """Lloyd's algorithm with distance-weighted seeding; deterministic per seed.

    Empty clusters are repaired by peeling the farthest point off the largest
    cluster, so the plan never has fewer than v occupied clusters.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X.shape[0]
    if not 1 <= v <= m:
        raise InvalidInput(f"cluster count must lie in [1, {m}], got {v}")
    rng = np.random.default_rng(seed)

    centers = np.empty((v, X.shape[1]))
    centers[0] = X[rng.integers(m)]
    min_d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, v):
        total = min_d2.sum()
        if total > 0:
            idx = int(rng.choice(m, p=min_d2 / total))
        else:
            idx = int(rng.integers(m))
        centers[c] = X[idx]
        np.minimum(min_d2, np.sum((X - centers[c]) ** 2, axis=1), out=min_d2)

    assign = None
    for _ in range(max_iter):
        d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = _repair_empty(np.argmin(d2, axis=1), X, v)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(v):
            centers[c] = X[assign == c].mean(axis=0)

    centroids = np.vstack([X[assign == c].mean(axis=0) for c in range(v)])
    return PartitionPlan(assign + 1, centroids)


def _repair_empty(assign: np.ndarray, X: np.ndarray, v: int) -> np.ndarray:
    assign = assign.copy()
    counts = np.bincount(assign, minlength=v)
    while np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        donor = int(np.argmax(counts))
        members = np.flatnonzero(assign == donor)
        center = X[members].mean(axis=0)
        far = members[np.argmax(np.sum((X[members] - center) ** 2, axis=1))]
        assign[far] = empty
        counts[donor] -= 1
        counts[empty] += 1
    return assign


def pair_partition(plan: PartitionPlan, pairs) -> np.ndarray:
    """Cluster id per pair; RESIDUAL_GROUP (0) when the endpoints disagree."""
    pairs = np.asarray(pairs, dtype=np.intp)
    m = plan.assignment.size
    if pairs.size and (pairs.min() < 0 or pairs.max() >= m):
        raise InvalidInput("pair references a point outside the partition plan")
    a = plan.assignment[pairs[:, 0]]
    b = plan.assignment[pairs[:, 1]]
    return np.where(a == b, a, RESIDUAL_GROUP)


def nystrom_restrict(m: int, u: int, seed: int):
    """Sample u landmarks; keep the pairs passing through them.

    Returns (landmarks, pair list).  The list preserves row-major enumeration
    order, so u = m reproduces the full pair list exactly; its length is
    2mu - u^2.
    """
    if not 1 <= u <= m:
        raise InvalidInput(f"landmark count must lie in [1, {m}], got {u}")
    rng = np.random.default_rng(seed)
    landmarks = np.sort(rng.choice(m, size=u, replace=False)).astype(np.intp)
    is_mark = np.zeros(m, dtype=bool)
    is_mark[landmarks] = True
    pairs = full_pair_list(m)
    keep = is_mark[pairs[:, 0]] | is_mark[pairs[:, 1]]
    return landmarks, pairs[keep]


def decomposition_bound(
    gram: HyperGram, pair_clusters, C: float, observed_gap: float | None = None
) -> DecompositionDiagnostics:
    """Deviation diagnostics: q_pi, sigma_min, and the bound C^2 q_pi / (2 sigma_min)."""
    clusters = np.asarray(pair_clusters, dtype=np.intp)
    if clusters.size != gram.n:
        raise InvalidInput(
            f"pair_clusters length {clusters.size} != gram dimension {gram.n}"
        )
    if not C > 0:
        raise InvalidInput("C must be positive")
    cross = clusters[:, None] != clusters[None, :]
    q_pi = float(np.abs(gram.entries[cross]).sum())
    sigma_min = float(eigvalsh(gram.entries)[0])
    bound = C * C * q_pi / (2.0 * sigma_min) if sigma_min > 0 else float("inf")
    raw = sigma_min - gram.jitter_applied if gram.jitter_applied > 0 else None
    return DecompositionDiagnostics(q_pi, sigma_min, bound, observed_gap, raw)


def _solve_subproblem(gram, responses, base):
    if isinstance(base, KrrConfig):
        return fit_krr(gram, responses, base).values, 0.0
    model = fit_svr(gram, responses, base)
    return model.beta.values, model.bias


def fit_decomposed(
    X,
    responses,
    base,
    scaling: ScalingConfig,
    params: HyperKernelParams,
    full_solve_limit: int = 2048,
):
    """Cluster, solve per-cluster subproblems, concatenate, and diagnose.

    Returns (LearnedKernel, DecompositionDiagnostics).  The coefficient field
    covers the landmark-restricted pair list with zeros on the residual group,
    so v=1, u=m reproduces the direct solver bit for bit.  The SVR bias is the
    pair-count-weighted mean of the per-cluster biases.  Diagnostics need the
    full restricted gram; the observed gap additionally needs a full solve and
    is skipped above ``full_solve_limit`` pairs.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X.shape[0]
    Y = np.asarray(responses, dtype=float)
    if Y.shape != (m, m):
        raise InvalidInput(f"responses must be {m}x{m}, got {Y.shape}")
    scale = max(np.abs(Y).max(), 1.0)
    if np.abs(Y - Y.T).max() > 1e-8 * scale:
        raise InvalidInput("responses must be symmetric")
    if scaling.u > m:
        raise InvalidInput(f"landmark count {scaling.u} exceeds m={m}")

    plan = kmeans_partition(X, scaling.v, scaling.seed, scaling.kmeans_max_iter)
    landmarks, pairs = nystrom_restrict(m, scaling.u, scaling.seed)
    clusters = pair_partition(plan, pairs)

    values = np.zeros(pairs.shape[0])
    bias_num = bias_den = 0.0
    for c in range(1, scaling.v + 1):
        sel = np.flatnonzero(clusters == c)
        if sel.size == 0:
            continue
        sub_pairs = pairs[sel]
        sub_gram = assemble_hyper_gram(params, X, sub_pairs)
        sub_y = Y[sub_pairs[:, 0], sub_pairs[:, 1]]
        try:
            vals, bias_c = _solve_subproblem(sub_gram, sub_y, base)
        except HklearnError as exc:
            exc.args = (f"cluster {c}: {exc}",) + exc.args[1:]
            raise
        values[sel] = vals
        bias_num += sel.size * bias_c
        bias_den += sel.size

    bias = bias_num / bias_den if bias_den else 0.0
    coeffs = CoefficientField(values, pairs, m)
    lk = LearnedKernel(X, coeffs, bias, params)

    full_gram = assemble_hyper_gram(params, X, pairs)
    gap = None
    if pairs.shape[0] <= full_solve_limit:
        full_vals, _ = _solve_subproblem(
            full_gram, Y[pairs[:, 0], pairs[:, 1]], base
        )
        gap = float(np.linalg.norm(full_vals - values))
    if isinstance(base, SvrConfig):
        diag = decomposition_bound(full_gram, clusters, base.C, gap)
    else:
        sigma_min = float(eigvalsh(full_gram.entries)[0])
        cross = clusters[:, None] != clusters[None, :]
        q_pi = float(np.abs(full_gram.entries[cross]).sum())
        diag = DecompositionDiagnostics(q_pi, sigma_min, None, gap)
    return lk, diag
