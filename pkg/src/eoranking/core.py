"""Candidate pools, the per-prefix fairness slack and the cost-of-opportunity model.

Two evaluation modes exist.  In ``"probs"`` mode expected relevance is the
sum of calibrated probabilities; in ``"labels"`` mode it is the sum of the
observed binary labels.  The mode is always passed explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateRelevance,
    EmptyGroup,
    InvalidPool,
    InvalidPrior,
    MissingLabels,
    WrongGroupCount,
)

REL_EPS = 1e-9
MODES = ("probs", "labels")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CandidatePool:
    """An immutable set of candidates with group labels and relevance probabilities.

    Parameters
    ----------
    ids : sequence of str
        Opaque, unique candidate identifiers.
    groups : array of int
        Dense group index in ``0..G-1`` for every candidate.
    probs : array of float
        Calibrated relevance probabilities in [0, 1].
    group_names : sequence of str
        Display name for each group index.
    labels : array of {0, 1}, optional
        Observed relevance, used only in ``"labels"`` mode.
    """

    ids: tuple
    groups: np.ndarray
    probs: np.ndarray
    group_names: tuple
    labels: np.ndarray | None = None

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        groups = np.asarray(self.groups, dtype=np.intp)
        probs = np.asarray(self.probs, dtype=np.float64)
        names = tuple(str(g) for g in self.group_names)
        n = len(ids)
        if groups.shape != (n,) or probs.shape != (n,):
            raise InvalidPool("ids, groups and probs must have the same length")
        if len(set(ids)) != n:
            raise InvalidPool("candidate ids must be unique")
        if len(set(names)) != len(names):
            raise InvalidPool("group names must be unique")
        if n and (groups.min() < 0 or groups.max() >= len(names)):
            raise InvalidPool("group index out of range")
        if not np.all(np.isfinite(probs)) or np.any((probs < 0) | (probs > 1)):
            raise InvalidPool("probabilities must lie in [0, 1]")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels)
            if labels.shape != (n,) or not np.all((labels == 0) | (labels == 1)):
                raise InvalidPool("labels must be binary and one per candidate")
            labels = _frozen(labels.astype(np.int8))
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "groups", _frozen(groups))
        object.__setattr__(self, "probs", _frozen(probs))
        object.__setattr__(self, "group_names", names)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_groups(cls, groups: Mapping[str, Sequence[float]], labels=None):
        """Build a pool from ``{group_name: [probs...]}``; ids are ``<group>-<j>``."""
        ids, gidx, probs, labs = [], [], [], []
        for g, (name, ps) in enumerate(groups.items()):
            for j, p in enumerate(ps):
                ids.append(f"{name}-{j}")
                gidx.append(g)
                probs.append(p)
            if labels is not None:
                labs.extend(labels[name])
        return cls(ids, gidx, probs, tuple(groups), labs if labels is not None else None)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def n_groups(self) -> int:
        return len(self.group_names)

    def members(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.groups == g)

    def weights(self, mode: str = "probs") -> np.ndarray:
        """Per-candidate expected relevance used by the fairness formulas."""
        if mode == "probs":
            return self.probs
        if mode == "labels":
            if self.labels is None:
                raise MissingLabels("label mode requested but the pool has no labels")
            return self.labels.astype(np.float64)
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")

    def relabel(self, perm: Sequence[int]) -> "CandidatePool":
        """Pool with group ``g`` renamed to ``perm[g]``; candidates unchanged."""
        perm = np.asarray(perm, dtype=np.intp)
        names = [None] * self.n_groups
        for g, h in enumerate(perm):
            names[h] = self.group_names[g]
        return CandidatePool(self.ids, perm[self.groups], self.probs, tuple(names), self.labels)


@dataclass(frozen=True)
class GroupStats:
    size: int
    n_rel: float


def group_stats(pool: CandidatePool, mode: str = "probs") -> list[GroupStats]:
    w = pool.weights(mode)
    out = []
    for g in range(pool.n_groups):
        idx = pool.members(g)
        if idx.size == 0:
            raise EmptyGroup(f"group {pool.group_names[g]!r} has no candidates")
        n_rel = math.fsum(w[idx])
        if n_rel <= REL_EPS:
            raise DegenerateRelevance(
                f"group {pool.group_names[g]!r} has expected relevance {n_rel:g} <= {REL_EPS:g}"
            )
        out.append(GroupStats(int(idx.size), n_rel))
    return out


def n_rel(pool: CandidatePool, mode: str = "probs") -> np.ndarray:
    return np.array([s.n_rel for s in group_stats(pool, mode)])


def _fairness_ready(pool: CandidatePool, mode: str) -> np.ndarray:
    if pool.n_groups < 2:
        raise WrongGroupCount("fairness quantities need at least two groups")
    return n_rel(pool, mode)


def relevance_shares(pool: CandidatePool, mode: str = "probs") -> np.ndarray:
    """q_i = w_i / nRel(group(i)): each candidate's share of its group's relevance."""
    nr = _fairness_ready(pool, mode)
    return pool.weights(mode) / nr[pool.groups]


def compensated_cumsum(x: np.ndarray) -> np.ndarray:
    """Prefix sums with the rounding error of every step added back.

    ``np.cumsum`` accumulates sequentially, so the error of each addition is
    recovered exactly with the TwoSum identity and re-accumulated.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    s = np.cumsum(x)
    prev = np.concatenate(([0.0], s[:-1]))
    bb = s - prev
    err = (prev - (s - bb)) + (x - bb)
    return s + np.cumsum(err)


def as_ranking(pool: CandidatePool, order, full: bool = False) -> np.ndarray:
    """Validate a (prefix of a) ranking and return it as an index array."""
    order = np.asarray(order, dtype=np.intp).reshape(-1)
    if order.size and (order.min() < 0 or order.max() >= pool.n):
        raise InvalidPool("ranking contains an invalid candidate index")
    if np.unique(order).size != order.size:
        raise InvalidPool("ranking contains duplicate candidates")
    if full and order.size != pool.n:
        raise InvalidPool(f"expected a full ranking of {pool.n} candidates, got {order.size}")
    return order


def group_fractions(pool: CandidatePool, ranking, k: int, mode: str = "probs") -> np.ndarray:
    """nRel(g | sigma_k) / nRel(g) for every group."""
    order = as_ranking(pool, ranking)
    if not 0 <= k <= order.size:
        raise ValueError(f"prefix length {k} outside [0, {order.size}]")
    nr = _fairness_ready(pool, mode)
    w = pool.weights(mode)
    top = order[:k]
    g_top = pool.groups[top]
    return np.array([math.fsum(w[top[g_top == g]]) / nr[g] for g in range(pool.n_groups)])


def delta_signed(pool: CandidatePool, ranking, k: int, mode: str = "probs") -> float:
    """Fraction of group 0's expected relevance in the top k minus group 1's."""
    if pool.n_groups != 2:
        raise WrongGroupCount(f"signed slack needs exactly 2 groups, pool has {pool.n_groups}")
    f = group_fractions(pool, ranking, k, mode)
    return float(f[0] - f[1])


def delta_multi(pool: CandidatePool, ranking, k: int, mode: str = "probs") -> float:
    f = group_fractions(pool, ranking, k, mode)
    return float(f.max() - f.min())


@dataclass(frozen=True)
class DeltaTrace:
    """Per-prefix fairness slack and costs; row ``k-1`` describes prefix ``k``."""

    delta: np.ndarray
    fractions: np.ndarray
    group_cost: np.ndarray
    total_cost: np.ndarray
    signed: bool

    @property
    def k(self) -> np.ndarray:
        return np.arange(1, self.delta.size + 1)

    @property
    def abs_delta(self) -> np.ndarray:
        return np.abs(self.delta)


def _trace_from_fractions(fractions: np.ndarray, relevant: np.ndarray, nr: np.ndarray) -> DeltaTrace:
    fractions = np.minimum(fractions, 1.0)
    signed = fractions.shape[1] == 2
    if signed:
        delta = fractions[:, 0] - fractions[:, 1]
    else:
        delta = fractions.max(axis=1) - fractions.min(axis=1)
    # total relevance can be re-derived from fractions, but summing the
    # selected weights directly keeps total_cost(n) == 0 exact
    total = np.maximum(1.0 - relevant / math.fsum(nr), 0.0)
    return DeltaTrace(delta, fractions, 1.0 - fractions, total, signed)


def delta_trace(pool: CandidatePool, ranking, mode: str = "probs") -> DeltaTrace:
    """Slack, group fractions and costs at every prefix of a full ranking.

    The slack is signed (group 0 minus group 1) for two groups and the
    max-minus-min spread otherwise.
    """
    order = as_ranking(pool, ranking, full=True)
    nr = _fairness_ready(pool, mode)
    w = pool.weights(mode)[order]
    g = pool.groups[order]
    fractions = np.empty((order.size, pool.n_groups))
    for h in range(pool.n_groups):
        fractions[:, h] = compensated_cumsum(np.where(g == h, w, 0.0)) / nr[h]
    # the last prefix holds everything; pin it against accumulated rounding
    if order.size:
        fractions[-1] = 1.0
    relevant = compensated_cumsum(w)
    if order.size:
        relevant[-1] = math.fsum(nr)
    return _trace_from_fractions(fractions, relevant, nr)


@dataclass(frozen=True)
class InclusionEstimate:
    """``incl[k-1, i]`` estimates P(candidate i is in the top k)."""

    incl: np.ndarray
    sample_count: int

    @classmethod
    def from_rankings(cls, rankings: Sequence[np.ndarray], n: int) -> "InclusionEstimate":
        counts = np.zeros((n, n), dtype=np.int64)  # counts[pos, i]
        positions = np.arange(n)
        for order in rankings:
            counts[positions[: len(order)], order] += 1
        cum = np.cumsum(counts, axis=0)
        return cls(cum / len(rankings), len(rankings))

    @classmethod
    def exact_uniform(cls, n: int) -> "InclusionEstimate":
        k = np.arange(1, n + 1, dtype=np.float64)
        return cls(np.repeat((k / n)[:, None], n, axis=1), 0)

    def at(self, k: int) -> np.ndarray:
        n = self.incl.shape[1]
        if k == 0:
            return np.zeros(n)
        return self.incl[k - 1]


def expected_trace(pool: CandidatePool, inclusion: InclusionEstimate, mode: str = "probs") -> DeltaTrace:
    """Trace of the expected group fractions under a stochastic policy."""
    nr = _fairness_ready(pool, mode)
    w = pool.weights(mode)
    incl = inclusion.incl
    fractions = np.empty((incl.shape[0], pool.n_groups))
    for h in range(pool.n_groups):
        fractions[:, h] = incl @ np.where(pool.groups == h, w, 0.0) / nr[h]
    relevant = incl @ w
    return _trace_from_fractions(fractions, relevant, nr)


def _inclusion_vector(pool, ranking, k, inclusion) -> np.ndarray:
    if inclusion is not None:
        if isinstance(inclusion, InclusionEstimate):
            if k is None:
                raise ValueError("k is required with an InclusionEstimate")
            return inclusion.at(k)
        v = np.asarray(inclusion, dtype=np.float64)
        if v.shape != (pool.n,):
            raise ValueError("inclusion vector must have one entry per candidate")
        return v
    if ranking is None or k is None:
        raise ValueError("pass either ranking and k, or an inclusion estimate")
    order = as_ranking(pool, ranking)
    if not 0 <= k <= order.size:
        raise ValueError(f"prefix length {k} outside [0, {order.size}]")
    v = np.zeros(pool.n)
    v[order[:k]] = 1.0
    return v


def group_cost(pool, g: int, ranking=None, k=None, inclusion=None, mode: str = "probs") -> float:
    """Expected fraction of group ``g``'s relevant candidates left out of the top k."""
    nr = _fairness_ready(pool, mode)
    if not 0 <= g < pool.n_groups:
        raise ValueError(f"group index {g} out of range")
    incl = _inclusion_vector(pool, ranking, k, inclusion)
    idx = pool.members(g)
    w = pool.weights(mode)
    return math.fsum((1.0 - incl[idx]) * w[idx]) / nr[g]


def total_cost(pool, ranking=None, k=None, inclusion=None, mode: str = "probs") -> float:
    """Expected fraction of all relevant candidates left out of the top k."""
    nr = _fairness_ready(pool, mode)
    incl = _inclusion_vector(pool, ranking, k, inclusion)
    return math.fsum((1.0 - incl) * pool.weights(mode)) / math.fsum(nr)


def candidate_cost(incl_prob: float, r: int) -> float:
    if not 0.0 <= incl_prob <= 1.0:
        raise ValueError("inclusion probability must lie in [0, 1]")
    return r * (1.0 - incl_prob)


def posterior_predictive_mean(successes: int, trials: int, prior_a: float = 1.0, prior_b: float = 1.0) -> float:
    """P(r = 1 | data) under a Beta(prior_a, prior_b) prior on a Bernoulli rate."""
    if prior_a <= 0 or prior_b <= 0:
        raise InvalidPrior("Beta prior parameters must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials")
    return (prior_a + successes) / (prior_a + prior_b + trials)
