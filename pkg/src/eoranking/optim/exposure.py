"""Exposure-based baselines.

``exposure_lp`` finds a doubly stochastic ranking matrix (candidate i at
position j with probability S[i, j]) maximising expected discounted relevance
while every group receives exposure in proportion to its expected relevance.
``rank_aggregation_exposure`` instead edits the PRP ranking with adjacent
swaps until group exposures (per head) are close enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .. import rng as _rng
from ..core import CandidatePool, InclusionEstimate, n_rel
from ..errors import BadParams, Infeasible, NotStochastic, TooLarge, WrongGroupCount
from ..policies import prp_ranking
from .simplex import LinearProgram, simplex_solve

MAX_N = 100
STOCHASTIC_TOL = 1e-7


def position_weights(n: int) -> np.ndarray:
    """v_j = 1 / log2(j + 1) for positions j = 1..n."""
    return 1.0 / np.log2(np.arange(2, n + 2, dtype=np.float64))


@dataclass(frozen=True)
class DoublyStochasticRanking:
    matrix: np.ndarray  # [candidate, position]
    v: np.ndarray
    objective: float = float("nan")
    iterations: int = 0
    slack: float = 0.0  # max pairwise proportionality violation allowed

    @property
    def exact(self) -> bool:
        return self.slack == 0.0

    def inclusion(self) -> InclusionEstimate:
        """incl[k-1, i] = P(i in top k) = sum of the first k columns of row i."""
        return InclusionEstimate(np.cumsum(self.matrix, axis=1).T.copy(), 0)

    def expected_exposure(self) -> np.ndarray:
        return self.matrix @ self.v


def exposure_residuals(pool: CandidatePool, matrix: np.ndarray, mode: str = "probs") -> np.ndarray:
    """Exposure(g)/nRel(g) - Exposure(h)/nRel(h) for every group pair g < h (exposure summed, not averaged)."""
    nr = n_rel(pool, mode)
    e = matrix @ position_weights(pool.n)
    per = np.array([math.fsum(e[pool.members(g)]) / nr[g] for g in range(pool.n_groups)])
    return np.array([per[g] - per[h] for g in range(pool.n_groups) for h in range(g + 1, pool.n_groups)])


def check_doubly_stochastic(matrix: np.ndarray, tol: float = STOCHASTIC_TOL) -> float:
    """Largest row/column-sum deviation; raises NotStochastic above ``tol``."""
    dev = max(np.abs(matrix.sum(axis=0) - 1).max(initial=0), np.abs(matrix.sum(axis=1) - 1).max(initial=0))
    if dev > tol or matrix.min(initial=0) < -1e-9 or matrix.max(initial=0) > 1 + 1e-9:
        raise NotStochastic(f"matrix is not doubly stochastic (max deviation {dev:.3g})")
    return float(dev)


def _exposure_rows(pool: CandidatePool, mode: str):
    n, G = pool.n, pool.n_groups
    nr = n_rel(pool, mode)
    v = position_weights(n)
    stoch = []
    for i in range(n):
        r = np.zeros((n, n))
        r[i, :] = 1.0
        stoch.append(r.ravel())
    for j in range(n):
        r = np.zeros((n, n))
        r[:, j] = 1.0
        stoch.append(r.ravel())
    pair = []
    for g in range(G):
        for h in range(g + 1, G):
            coef = np.where(pool.groups == g, 1.0 / nr[g], 0.0) - np.where(pool.groups == h, 1.0 / nr[h], 0.0)
            pair.append(np.outer(coef, v).ravel())
    return np.array(stoch), np.array(pair), v


def exposure_lp(pool: CandidatePool, mode: str = "probs", rule: str = "dantzig", relax: bool = True) -> DoublyStochasticRanking:
    """Solve the exposure-proportional ranking LP over n^2 placement probabilities.

    Exact proportionality can be impossible (a small group may not be able
    to collect its share of exposure even from the top positions).  With
    ``relax=True`` the largest pairwise violation is first minimised and
    the utility is then maximised with the violation held at that minimum;
    ``slack`` on the result records it.  With ``relax=False`` the
    impossibility raises Infeasible.
    """
    n, G = pool.n, pool.n_groups
    if G < 2:
        raise WrongGroupCount("need at least two groups")
    if n > MAX_N:
        raise TooLarge(f"exposure LP is limited to n <= {MAX_N}, got {n}")
    w = pool.weights(mode)
    stoch, pair, v = _exposure_rows(pool, mode)
    c = np.outer(w, v).ravel()
    ones = np.ones(stoch.shape[0])
    A = np.vstack([stoch, pair])
    sol = simplex_solve(LinearProgram(c, A, ["="] * A.shape[0], np.concatenate([ones, np.zeros(len(pair))])), rule=rule)
    slack = 0.0
    if sol.status == "infeasible":
        if not relax:
            raise Infeasible("no doubly stochastic matrix gives exactly proportional exposure")
        # stage 1: smallest achievable max |pair residual|, variable t is last
        m = len(pair)
        A1 = np.vstack([
            np.hstack([stoch, np.zeros((stoch.shape[0], 1))]),
            np.hstack([pair, -np.ones((m, 1))]),
            np.hstack([-pair, -np.ones((m, 1))]),
        ])
        rel1 = ["="] * stoch.shape[0] + ["<="] * (2 * m)
        c1 = np.zeros(n * n + 1)
        c1[-1] = -1.0
        s1 = simplex_solve(LinearProgram(c1, A1, rel1, np.concatenate([ones, np.zeros(2 * m)])), rule=rule)
        if not s1.optimal:
            raise Infeasible(f"relaxed exposure LP is {s1.status}")
        slack = float(s1.x[-1])
        cap = slack + 1e-9
        A2 = np.vstack([stoch, pair, pair])
        rel2 = ["="] * stoch.shape[0] + ["<="] * m + [">="] * m
        b2 = np.concatenate([ones, np.full(m, cap), np.full(m, -cap)])
        sol = simplex_solve(LinearProgram(c, A2, rel2, b2), rule=rule)
    if not sol.optimal:
        raise Infeasible(f"exposure LP is {sol.status}")
    S = sol.x.reshape(n, n)
    check_doubly_stochastic(S)
    S = np.clip(S, 0.0, 1.0)
    return DoublyStochasticRanking(S, v, sol.objective_value, sol.iterations, slack)


def birkhoff_decomposition(matrix: np.ndarray, tol: float = 1e-9):
    """Write a doubly stochastic matrix as a convex combination of permutations.

    Returns ``(weights, perms)`` where ``perms[t][j]`` is the candidate at
    position j.  Each step finds a permutation inside the current support with
    an assignment solve and peels off its smallest entry.
    """
    R = np.array(matrix, dtype=np.float64)
    n = R.shape[0]
    weights, perms = [], []
    remaining = 1.0
    while remaining > tol:
        cost = np.where(R > tol, 0.0, 1.0)
        rows, cols = linear_sum_assignment(cost)
        if cost[rows, cols].sum() > 0:
            break  # leftover is rounding noise outside any perfect matching
        wgt = float(R[rows, cols].min())
        perm = np.empty(n, dtype=np.intp)
        perm[cols] = rows
        weights.append(wgt)
        perms.append(perm)
        R[rows, cols] -= wgt
        remaining -= wgt
    weights = np.array(weights)
    return weights / weights.sum(), perms


def sample_from_doubly_stochastic(matrix: np.ndarray, seed: int) -> np.ndarray:
    """Draw one ranking whose position marginals are ``matrix``."""
    weights, perms = birkhoff_decomposition(matrix)
    t = _rng.generator(seed).choice(len(perms), p=weights)
    return perms[t].copy()


def group_exposure(pool: CandidatePool, ranking) -> np.ndarray:
    """Average position weight per group member."""
    v = position_weights(pool.n)
    pos = np.empty(pool.n, dtype=np.intp)
    pos[np.asarray(ranking)] = np.arange(pool.n)
    sizes = np.bincount(pool.groups, minlength=pool.n_groups)
    return np.bincount(pool.groups, weights=v[pos], minlength=pool.n_groups) / sizes


def _ratio(e: np.ndarray) -> float:
    return float(e.min() / e.max())


@dataclass(frozen=True)
class RAResult:
    ranking: np.ndarray
    ratio: float
    satisfied: bool
    swaps: int

    @property
    def best_effort(self) -> bool:
        return not self.satisfied


def rank_aggregation_exposure(pool: CandidatePool, threshold: float = 0.95) -> RAResult:
    """Adjacent swaps on PRP until min/max group exposure reaches ``threshold``.

    Each step swaps the highest adjacent pair with a member of the most
    exposed group directly above a member of the least exposed one, provided
    the swap raises the ratio.  Stops when the ratio reaches the threshold or
    no such swap helps; the result then carries ``satisfied=False``.
    """
    if pool.n_groups < 2:
        raise WrongGroupCount("need at least two groups")
    if not 0.0 <= threshold <= 1.0:
        raise BadParams("threshold must lie in [0, 1]")
    order = prp_ranking(pool).copy()
    sizes = np.bincount(pool.groups, minlength=pool.n_groups).astype(np.float64)
    if np.any(sizes == 0):
        raise BadParams("every group needs at least one candidate")
    v = position_weights(pool.n)
    e = group_exposure(pool, order)
    swaps = 0
    while _ratio(e) < threshold:
        hi, lo = int(np.argmax(e)), int(np.argmin(e))
        g = pool.groups[order]
        cand = np.flatnonzero((g[:-1] == hi) & (g[1:] == lo))
        done = True
        for p in cand:
            dv = v[p] - v[p + 1]
            trial = e.copy()
            trial[hi] -= dv / sizes[hi]
            trial[lo] += dv / sizes[lo]
            if _ratio(trial) > _ratio(e):
                order[p], order[p + 1] = order[p + 1], order[p]
                e = trial
                swaps += 1
                done = False
                break
        if done:
            break
    e = group_exposure(pool, order)  # recompute from scratch, no drift
    r = _ratio(e)
    return RAResult(order, r, r >= threshold, swaps)
