"""Brute-force top-k selection under a fairness-slack cap.

The default search enumerates every size-k subset (bitmasks, in chunks).
Restricting the search to per-group PRP prefixes is much cheaper but not
exact: a lower-probability member of a group can be the only way to stay
under the cap, so the prefix search is kept as an opt-in only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..core import CandidatePool, relevance_shares
from ..errors import BadParams, Infeasible, TooLarge
from ..policies import GroupQueues

MAX_N = 24
CAP_TOL = 1e-12
_CHUNK = 1 << 16


@dataclass(frozen=True)
class IlpResult:
    subset: np.ndarray  # sorted candidate indices
    relevance: float  # sum of weights over the subset
    objective: float  # relevance / total expected relevance

    @property
    def k(self) -> int:
        return int(self.subset.size)


def _spread(fractions: np.ndarray) -> np.ndarray:
    return fractions.max(axis=-1) - fractions.min(axis=-1)


def _share_matrix(pool: CandidatePool, mode: str) -> np.ndarray:
    q = relevance_shares(pool, mode)
    Q = np.zeros((pool.n, pool.n_groups))
    Q[np.arange(pool.n), pool.groups] = q
    return Q


def ilp_curve(pool: CandidatePool, caps, mode: str = "probs"):
    """Best subset for every k = 0..n in one exhaustive pass.

    ``caps[k]`` is the slack cap for prefix size k (use ``np.inf`` to leave k
    unconstrained).  Returns a list with an :class:`IlpResult` per k, or
    ``None`` where no subset meets the cap.  Ties keep the lowest bitmask.
    """
    n = pool.n
    if n > MAX_N:
        raise TooLarge(f"exhaustive search is limited to n <= {MAX_N}, got {n}")
    caps = np.asarray(caps, dtype=np.float64)
    if caps.shape != (n + 1,):
        raise ValueError("need one cap per k = 0..n")
    w = pool.weights(mode)
    Q = _share_matrix(pool, mode)
    total = math.fsum(w)
    best_val = np.full(n + 1, -np.inf)
    best_mask = np.full(n + 1, -1, dtype=np.int64)
    shifts = np.arange(n, dtype=np.int64)
    for start in range(0, 1 << n, _CHUNK):
        masks = np.arange(start, min(start + _CHUNK, 1 << n), dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(np.float64)
        size = bits.sum(axis=1).astype(np.intp)
        live = caps[size] >= 0
        if not np.any(live):
            continue
        masks, bits, size = masks[live], bits[live], size[live]
        val = bits @ w
        ok = _spread(bits @ Q) <= caps[size] + CAP_TOL
        if not np.any(ok):
            continue
        masks, size, val = masks[ok], size[ok], val[ok]
        # strict improvement only, so the earliest (lowest) mask wins ties
        order = np.lexsort((masks, -val, size))
        first = np.ones(order.size, dtype=bool)
        first[1:] = size[order][1:] != size[order][:-1]
        for i in order[first]:
            s = size[i]
            if val[i] > best_val[s]:
                best_val[s] = val[i]
                best_mask[s] = masks[i]
    out = []
    for k in range(n + 1):
        if best_mask[k] < 0:
            out.append(None)
            continue
        subset = np.flatnonzero((int(best_mask[k]) >> shifts) & 1)
        rel = math.fsum(w[subset])
        out.append(IlpResult(subset, rel, rel / total))
    return out


def _prefix_search(pool: CandidatePool, k: int, delta_cap: float, mode: str):
    w = pool.weights(mode)
    Q = _share_matrix(pool, mode)
    queues = GroupQueues(pool).queues
    sizes = [q.size for q in queues]
    best = None
    for counts in itertools.product(*(range(min(s, k) + 1) for s in sizes[:-1])):
        last = k - sum(counts)
        if not 0 <= last <= sizes[-1]:
            continue
        subset = np.concatenate([q[:c] for q, c in zip(queues, (*counts, last))])
        frac = Q[subset].sum(axis=0)
        if frac.max() - frac.min() > delta_cap + CAP_TOL:
            continue
        val = math.fsum(w[subset])
        if best is None or val > best[0]:
            best = (val, np.sort(subset))
    return best


def ilp_top_k(pool: CandidatePool, k: int, delta_cap: float, mode: str = "probs", exhaustive: bool = True) -> IlpResult:
    """Size-k subset maximising total relevance subject to a slack cap.

    The slack is the max-minus-min of the per-group relevance fractions
    (equal to the absolute signed slack for two groups).  ``exhaustive=False``
    searches only per-group PRP prefixes; that search can miss the optimum
    or report infeasibility when a feasible subset exists.
    """
    if not 0 <= k <= pool.n:
        raise BadParams(f"k={k} outside [0, {pool.n}]")
    if delta_cap < 0:
        raise BadParams("delta_cap must be nonnegative")
    if exhaustive:
        caps = np.full(pool.n + 1, -1.0)
        caps[k] = delta_cap
        res = ilp_curve(pool, caps, mode)[k]
        if res is None:
            raise Infeasible(f"no subset of size {k} has slack <= {delta_cap:g}")
        return res
    best = _prefix_search(pool, k, delta_cap, mode)
    if best is None:
        raise Infeasible(f"no prefix combination of size {k} has slack <= {delta_cap:g}")
    rel = best[0]
    return IlpResult(best[1], rel, rel / math.fsum(pool.weights(mode)))
