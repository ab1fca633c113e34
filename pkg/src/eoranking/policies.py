"""Ranking policies.

EOR and the group-size parity baseline (DP) share one greedy merge of the
per-group PRP queues; they differ only in the per-candidate share being
balanced (expected-relevance share vs. head-count share).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import binom

from . import rng as _rng
from .core import CandidatePool, as_ranking, delta_trace, group_stats, InclusionEstimate
from .errors import BadParams, NotStochastic, WrongGroupCount

# slack values closer than this count as tied
TIE_TOL = 1e-12

KINDS = ("eor", "prp", "dp", "prr", "uniform", "ts", "fairstar", "exp", "ra")
STOCHASTIC = ("uniform", "ts")


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    protected: int | None = None
    alpha: float = 0.1
    seed: int | None = None
    threshold: float = 0.95

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise BadParams(f"unknown policy {self.kind!r}; expected one of {', '.join(KINDS)}")
        object.__setattr__(self, "kind", kind)
        if kind == "fairstar" and not 0.0 < self.alpha < 1.0:
            raise BadParams("alpha must lie in (0, 1)")
        if kind in STOCHASTIC and self.seed is None:
            raise BadParams(f"policy {kind!r} needs a seed")
        if kind == "ra" and not 0.0 <= self.threshold <= 1.0:
            raise BadParams("exposure threshold must lie in [0, 1]")

    @property
    def stochastic(self) -> bool:
        return self.kind in STOCHASTIC


class GroupQueues:
    """Each group's candidates in PRP order, with a head cursor per group."""

    def __init__(self, pool: CandidatePool):
        self.pool = pool
        self.queues = []
        for g in range(pool.n_groups):
            idx = pool.members(g)
            self.queues.append(idx[np.argsort(-pool.probs[idx], kind="stable")])
        self.heads = [0] * pool.n_groups

    def __len__(self):
        return len(self.queues)

    def available(self, g: int) -> bool:
        return self.heads[g] < len(self.queues[g])

    def head(self, g: int) -> int:
        return int(self.queues[g][self.heads[g]])

    def pop(self, g: int) -> int:
        i = self.head(g)
        self.heads[g] += 1
        return i


def prp_ranking(pool: CandidatePool) -> np.ndarray:
    """Sort by probability, highest first; equal probabilities keep input order."""
    return np.argsort(-pool.probs, kind="stable")


def _merge_two(sa: np.ndarray, sb: np.ndarray) -> np.ndarray:
    """Greedy two-queue merge minimising |frac_a - frac_b| after every pick.

    ``sa`` and ``sb`` hold the per-candidate shares in queue order.  Returns
    a boolean array, True where the pick came from queue a.  Ties go to the
    queue whose accumulated fraction is smaller, then to queue a.
    """
    sa = sa.tolist()
    sb = sb.tolist()
    na, nb = len(sa), len(sb)
    picks = bytearray(na + nb)
    ia = ib = 0
    fa = ca = fb = cb = 0.0  # Neumaier sums and their compensations
    for k in range(na + nb):
        if ia < na and ib < nb:
            va = fa + ca
            vb = fb + cb
            da = abs(va + sa[ia] - vb)
            db = abs(va - (vb + sb[ib]))
            take_a = da < db - TIE_TOL or (abs(da - db) <= TIE_TOL and va <= vb)
        else:
            take_a = ia < na
        if take_a:
            x = sa[ia]
            t = fa + x
            if abs(fa) >= abs(x):
                ca += (fa - t) + x
            else:
                ca += (x - t) + fa
            fa = t
            ia += 1
            picks[k] = 1
        else:
            x = sb[ib]
            t = fb + x
            if abs(fb) >= abs(x):
                cb += (fb - t) + x
            else:
                cb += (x - t) + fb
            fb = t
            ib += 1
    return np.frombuffer(bytes(picks), dtype=np.uint8).astype(bool)


def _merge_many(shares: Sequence[np.ndarray]) -> np.ndarray:
    """Greedy G-queue merge minimising max-minus-min of accumulated fractions.

    Returns the queue index of every pick.  Ties go to the queue with the
    smaller accumulated fraction, then to the smaller queue index.
    """
    G = len(shares)
    shares = [s.tolist() for s in shares]
    sizes = [len(s) for s in shares]
    heads = [0] * G
    acc = [0.0] * G
    comp = [0.0] * G
    n = sum(sizes)
    out = np.empty(n, dtype=np.intp)
    for k in range(n):
        frac = [acc[g] + comp[g] for g in range(G)]
        # top-2 max and bottom-2 min so "all groups except g" is O(1)
        order = sorted(range(G), key=frac.__getitem__)
        lo1, lo2, hi1, hi2 = order[0], order[1], order[-1], order[-2]
        best = None
        for g in range(G):
            if heads[g] >= sizes[g]:
                continue
            new = frac[g] + shares[g][heads[g]]
            hi = frac[hi2] if g == hi1 else frac[hi1]
            lo = frac[lo2] if g == lo1 else frac[lo1]
            spread = max(hi, new) - min(lo, new)
            if best is None or spread < best[0] - TIE_TOL or (
                spread <= best[0] + TIE_TOL and (frac[g], g) < (best[1], best[2])
            ):
                best = (spread, frac[g], g)
        g = best[2]
        x = shares[g][heads[g]]
        t = acc[g] + x
        if abs(acc[g]) >= abs(x):
            comp[g] += (acc[g] - t) + x
        else:
            comp[g] += (x - t) + acc[g]
        acc[g] = t
        heads[g] += 1
        out[k] = g
    return out


def _greedy_merge(pool: CandidatePool, share: np.ndarray) -> np.ndarray:
    gq = GroupQueues(pool)
    if pool.n_groups == 2:
        qa, qb = gq.queues
        take_a = _merge_two(share[qa], share[qb])
        order = np.empty(pool.n, dtype=np.intp)
        order[take_a] = qa
        order[~take_a] = qb
        return order
    picks = _merge_many([share[q] for q in gq.queues])
    order = np.empty(pool.n, dtype=np.intp)
    for g, q in enumerate(gq.queues):
        order[picks == g] = q
    return order


def eor_ranking(pool: CandidatePool, mode: str = "probs") -> np.ndarray:
    """Equal-opportunity ranking: merge group PRP queues keeping relevance fractions level.

    At each position the head of every group queue is tried and the one
    giving the smallest slack is taken.  With ``mode="labels"`` the
    fractions are balanced on observed labels instead of probabilities;
    queues are always ordered by probability.
    """
    if pool.n_groups < 2:
        raise WrongGroupCount("EOR needs at least two groups")
    stats = group_stats(pool, mode)
    nr = np.array([s.n_rel for s in stats])
    share = pool.weights(mode) / nr[pool.groups]
    return _greedy_merge(pool, share)


def dp_ranking(pool: CandidatePool) -> np.ndarray:
    """Demographic-parity merge: keep the selected fraction of each group's head-count level."""
    if pool.n_groups < 2:
        raise WrongGroupCount("DP needs at least two groups")
    sizes = np.bincount(pool.groups, minlength=pool.n_groups).astype(np.float64)
    if np.any(sizes == 0):
        group_stats(pool)  # raises EmptyGroup with the group name
    return _greedy_merge(pool, 1.0 / sizes[pool.groups])


def _quota_merge(pool: CandidatePool, protected: int, required) -> tuple[np.ndarray, bool]:
    """PRP order, except the protected head is forced whenever the quota would fail.

    ``required(k, count)`` says whether position ``k`` (1-based) must go to
    the protected group given ``count`` protected candidates already placed.
    """
    gq = GroupQueues(pool)
    prp_pos = np.empty(pool.n, dtype=np.intp)
    prp_pos[prp_ranking(pool)] = np.arange(pool.n)
    other = 1 - protected
    order = np.empty(pool.n, dtype=np.intp)
    count = 0
    violated = False
    for k in range(1, pool.n + 1):
        if not gq.available(protected):
            g = other
            if required(k, count):
                violated = True
        elif not gq.available(other):
            g = protected
        elif required(k, count):
            g = protected
        else:
            g = protected if prp_pos[gq.head(protected)] < prp_pos[gq.head(other)] else other
        order[k - 1] = gq.pop(g)
        count += g == protected
    return order, violated


def _check_two_groups(pool: CandidatePool, protected: int):
    if pool.n_groups != 2:
        raise WrongGroupCount(f"policy needs exactly 2 groups, pool has {pool.n_groups}")
    if protected not in (0, 1):
        raise BadParams(f"protected group index {protected} out of range")


def prr_ranking(pool: CandidatePool, protected: int = 1, with_flag: bool = False):
    """Proportional Rooney-rule ranking.

    Every prefix keeps the protected group's share of positions at or above
    its share of the pool.  If the protected queue runs out while the quota
    still binds, the rest is filled from the other group and the returned
    flag (with ``with_flag=True``) is set.
    """
    _check_two_groups(pool, protected)
    size_p = int(np.sum(pool.groups == protected))
    n = pool.n
    # picking a non-protected candidate at k leaves count/k; exact integer test
    order, violated = _quota_merge(pool, protected, lambda k, c: c * n < size_p * k)
    return (order, violated) if with_flag else order


def fairstar_minima(k_max: int, p: float, alpha: float = 0.1) -> np.ndarray:
    """Minimum protected count required at each prefix ``k = 1..k_max``.

    ``m[k-1]`` is the smallest m with BinomialCDF(m; k, p) > alpha (no
    multiple-testing adjustment).
    """
    if not 0.0 < p < 1.0 or not 0.0 < alpha < 1.0:
        raise BadParams("p and alpha must lie in (0, 1)")
    k = np.arange(1, k_max + 1)
    m = binom.ppf(alpha, k, p).astype(np.int64)
    m = np.maximum(m, 0)
    # ppf gives cdf >= alpha; the test needs a strict inequality
    at_alpha = binom.cdf(m, k, p) <= alpha
    m[at_alpha] += 1
    return np.minimum(np.maximum.accumulate(m), k)


def fairstar_ranking(pool: CandidatePool, protected: int = 1, alpha: float = 0.1) -> np.ndarray:
    _check_two_groups(pool, protected)
    p = float(np.mean(pool.groups == protected))
    if not 0.0 < p < 1.0:
        raise BadParams("both groups must be non-empty")
    minima = fairstar_minima(pool.n, p, alpha)
    order, _ = _quota_merge(pool, protected, lambda k, c: c < minima[k - 1])
    return order


def uniform_sample(pool: CandidatePool, seed: int) -> np.ndarray:
    return _rng.generator(seed).permutation(pool.n)


def uniform_inclusion_exact(n: int, k: int) -> float:
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    return k / n if n else 0.0


def ts_sample(pool: CandidatePool, seed: int) -> np.ndarray:
    """Draw r_i ~ Bernoulli(p_i); rank all r=1 before r=0, shuffled within each block."""
    gen = _rng.generator(seed)
    r = gen.random(pool.n) < pool.probs
    perm = gen.permutation(pool.n)
    return perm[np.argsort(~r[perm], kind="stable")]


def sample_ranking(policy: PolicySpec, pool: CandidatePool, seed: int | None = None) -> np.ndarray:
    seed = policy.seed if seed is None else seed
    if policy.kind == "uniform":
        return uniform_sample(pool, seed)
    if policy.kind == "ts":
        return ts_sample(pool, seed)
    raise NotStochastic(f"policy {policy.kind!r} is deterministic")


def inclusion_estimate(policy: PolicySpec, pool: CandidatePool, d: int = 1000, base_seed: int | None = None) -> InclusionEstimate:
    """Monte-Carlo estimate of P(i in top k) from ``d`` sampled rankings."""
    if not policy.stochastic:
        raise NotStochastic(
            f"policy {policy.kind!r} is deterministic; its inclusion is the 0/1 indicator of its ranking"
        )
    if d < 1:
        raise BadParams("need at least one sample")
    base = policy.seed if base_seed is None else base_seed
    samples = [sample_ranking(policy, pool, _rng.mix(base, s)) for s in range(d)]
    return InclusionEstimate.from_rankings(samples, pool.n)


def median_delta_sample(policy: PolicySpec, pool: CandidatePool, m: int = 100, seed: int | None = None, mode: str = "probs") -> np.ndarray:
    """Among ``m`` sampled rankings, the one with the lower-median sum of |slack|."""
    if not policy.stochastic:
        raise NotStochastic(f"policy {policy.kind!r} is deterministic")
    if m < 1:
        raise BadParams("need at least one sample")
    base = policy.seed if seed is None else seed
    samples = [sample_ranking(policy, pool, _rng.mix(base, s)) for s in range(m)]
    scores = [float(np.sum(delta_trace(pool, s, mode).abs_delta)) for s in samples]
    pick = np.argsort(scores, kind="stable")[(m - 1) // 2]
    return samples[pick]


def rank(pool: CandidatePool, policy: PolicySpec | str, mode: str = "probs") -> np.ndarray:
    """Dispatch to a policy; stochastic policies return one seeded sample."""
    if isinstance(policy, str):
        policy = PolicySpec(policy)
    kind = policy.kind
    protected = 1 if policy.protected is None else policy.protected
    if kind == "eor":
        return eor_ranking(pool, mode)
    if kind == "prp":
        return prp_ranking(pool)
    if kind == "dp":
        return dp_ranking(pool)
    if kind == "prr":
        return prr_ranking(pool, protected)
    if kind == "fairstar":
        return fairstar_ranking(pool, protected, policy.alpha)
    if kind in STOCHASTIC:
        return sample_ranking(policy, pool)
    from .optim import exposure  # optim depends on policies; import lazily

    if kind == "ra":
        return exposure.rank_aggregation_exposure(pool, policy.threshold).ranking
    sigma = exposure.exposure_lp(pool)
    return exposure.sample_from_doubly_stochastic(sigma.matrix, 0 if policy.seed is None else policy.seed)


__all__ = [
    "KINDS",
    "PolicySpec",
    "GroupQueues",
    "prp_ranking",
    "eor_ranking",
    "dp_ranking",
    "prr_ranking",
    "fairstar_minima",
    "fairstar_ranking",
    "uniform_sample",
    "uniform_inclusion_exact",
    "ts_sample",
    "sample_ranking",
    "inclusion_estimate",
    "median_delta_sample",
    "rank",
    "as_ranking",
]
