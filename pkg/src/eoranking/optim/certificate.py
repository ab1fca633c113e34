"""Primal LP of the top-k selection problem and the EOR dual certificate.

For a prefix size k and slack cap delta the relaxed selection problem is

    maximize   w @ x / N
    subject to sum(x) <= k,  0 <= x <= 1,
               Q_gh @ x <= delta   for every ordered group pair (g, h),

with N the total expected relevance and ``Q_gh[i] = q_i`` for i in g,
``-q_i`` for i in h, 0 elsewhere.  A dual point is built from the last
selected member of each group in the EOR prefix; its objective minus the
EOR prefix value bounds how far EOR is from the LP (and ILP) optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import CandidatePool, as_ranking, group_fractions, n_rel
from ..errors import BadParams, WrongGroupCount
from ..policies import GroupQueues
from .simplex import LinearProgram, LPSolution, simplex_solve

RESIDUAL_TOL = 1e-9


def _pairs(G: int):
    return [(g, h) for g in range(G) for h in range(G) if g != h]


def eor_primal_lp(pool: CandidatePool, k: int, delta_cap: float, mode: str = "probs") -> LPSolution:
    """Solve the relaxed top-k problem; ``objective_value`` is normalised by N."""
    if pool.n_groups < 2:
        raise WrongGroupCount("need at least two groups")
    if not 0 <= k <= pool.n:
        raise BadParams(f"k={k} outside [0, {pool.n}]")
    if delta_cap < 0:
        raise BadParams("delta_cap must be nonnegative")
    nr = n_rel(pool, mode)
    w = pool.weights(mode)
    q = w / nr[pool.groups]
    rows = [np.ones(pool.n)]
    for g, h in _pairs(pool.n_groups):
        rows.append(np.where(pool.groups == g, q, 0.0) - np.where(pool.groups == h, q, 0.0))
    b = [k] + [delta_cap] * (len(rows) - 1)
    lp = LinearProgram(w / math.fsum(nr), np.array(rows), ["<="] * len(rows), b, np.zeros(pool.n), np.ones(pool.n))
    return simplex_solve(lp)


@dataclass
class DualCertificate:
    """Dual point for one prefix of an EOR ranking.

    ``gap`` is the dual objective minus the value of the EOR prefix itself,
    which bounds both the LP duality gap and EOR's distance to the optimum.
    """

    k: int
    delta: float
    lambda_pair: dict
    lambda_k: float
    lambda_prime: np.ndarray
    dual_objective: float
    eor_value: float
    gap: float
    phi: float
    bound: float
    k_last: np.ndarray
    selected: np.ndarray
    lambda_k_by_group: np.ndarray = field(default=None)


def _reference_members(pool: CandidatePool, top: np.ndarray) -> np.ndarray:
    """Per group: last selected member in PRP order, else the first available one."""
    chosen = np.zeros(pool.n, dtype=bool)
    chosen[top] = True
    ref = np.empty(pool.n_groups, dtype=np.intp)
    for g, queue in enumerate(GroupQueues(pool).queues):
        taken = np.flatnonzero(chosen[queue])
        ref[g] = queue[taken[-1]] if taken.size else queue[0]
    return ref


def dual_certificate(pool: CandidatePool, ranking, k: int) -> DualCertificate:
    """Construct the dual point for prefix ``k`` of an EOR ranking (probability mode).

    Pair multipliers use the reference members' probabilities p_g and shares
    q_g: ``lambda_gh = [(p_g - p_h) / (q_g + q_h)]_+ / ((G-1) N)``.  With more
    than two groups the per-group value of ``lambda_k`` need not agree; the
    largest is used, which keeps every dual constraint satisfied.
    """
    G = pool.n_groups
    if G < 2:
        raise WrongGroupCount("need at least two groups")
    order = as_ranking(pool, ranking)
    if not 1 <= k <= order.size:
        raise BadParams(f"k={k} outside [1, {order.size}]")
    nr = n_rel(pool)
    N = math.fsum(nr)
    w = pool.probs
    q = w / nr[pool.groups]
    top = order[:k]
    frac = group_fractions(pool, order, k)
    delta = float(frac.max() - frac.min())

    ref = _reference_members(pool, top)
    p_ref = w[ref]
    q_ref = q[ref]
    lam = {}
    phi_sum = 0.0
    for g in range(G):
        for h in range(g + 1, G):
            den = q_ref[g] + q_ref[h]
            r = (p_ref[g] - p_ref[h]) / den if den > 0 else 0.0
            lam[(g, h)] = max(r, 0.0) / ((G - 1) * N)
            lam[(h, g)] = max(-r, 0.0) / ((G - 1) * N)
            phi_sum += abs(r)
    s = np.array([math.fsum(lam[(g, h)] - lam[(h, g)] for h in range(G) if h != g) for g in range(G)])
    lk_by_group = p_ref / N - q_ref * s
    lambda_k = max(float(lk_by_group.max()), 0.0)
    lam_prime = np.maximum(w / N - lambda_k - q * s[pool.groups], 0.0)

    dual = delta * math.fsum(lam.values()) + k * lambda_k + math.fsum(lam_prime)
    eor_value = math.fsum(w[top]) / N
    phi = 2.0 * phi_sum / ((G - 1) * N)
    selected = np.zeros(pool.n, dtype=bool)
    selected[top] = True
    return DualCertificate(
        k=k,
        delta=delta,
        lambda_pair=lam,
        lambda_k=lambda_k,
        lambda_prime=lam_prime,
        dual_objective=dual,
        eor_value=eor_value,
        gap=dual - eor_value,
        phi=phi,
        bound=phi * delta,
        k_last=ref,
        selected=selected,
        lambda_k_by_group=lk_by_group,
    )


@dataclass
class CertificateReport:
    residuals: np.ndarray
    dual_objective: float
    gap: float
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def residual_max(self) -> float:
        """Largest dual-constraint violation (0 when feasible)."""
        return float(max(0.0, -self.residuals.min(initial=0.0)))


def verify_certificate(cert: DualCertificate, pool: CandidatePool, k: int, lp_value: float | None = None,
                       tol: float = RESIDUAL_TOL) -> CertificateReport:
    """Re-check a certificate against the pool from scratch.

    Checks nonnegativity, dual feasibility of every candidate's constraint,
    that lambda' vanishes off the selected set, that at most one multiplier
    per group pair is nonzero, 0 <= gap <= phi*delta and the pairwise gap
    bound.  Weak duality against ``lp_value`` is checked when it is given.
    """
    failures = []
    G = pool.n_groups
    nr = n_rel(pool)
    N = math.fsum(nr)
    w = pool.probs
    q = w / nr[pool.groups]
    lam = cert.lambda_pair

    if cert.k != k:
        failures.append(f"certificate is for k={cert.k}, asked to verify k={k}")
    if any(v < 0 for v in lam.values()) or cert.lambda_k < 0 or np.any(cert.lambda_prime < 0):
        failures.append("negative dual variable")
    for g in range(G):
        for h in range(g + 1, G):
            if lam[(g, h)] > 0 and lam[(h, g)] > 0:
                failures.append(f"both multipliers of pair ({g},{h}) are nonzero")
    s = np.array([math.fsum(lam[(g, h)] - lam[(h, g)] for h in range(G) if h != g) for g in range(G)])
    residuals = q * s[pool.groups] + cert.lambda_k + cert.lambda_prime - w / N
    if residuals.min(initial=0.0) < -tol:
        failures.append(f"dual constraint violated by {-residuals.min():.3g}")
    off = cert.lambda_prime[~cert.selected]
    if off.size and off.max() > tol:
        failures.append(f"lambda' nonzero off the selected set ({off.max():.3g})")

    dual = cert.delta * math.fsum(lam.values()) + k * cert.lambda_k + math.fsum(cert.lambda_prime)
    gap = dual - cert.eor_value
    if gap < -tol:
        failures.append(f"negative gap {gap:.3g}")
    if gap > cert.bound + tol:
        failures.append(f"gap {gap:.6g} exceeds phi*delta = {cert.bound:.6g}")
    pair_bound = 2.0 * cert.delta * math.fsum(max(lam[(g, h)], lam[(h, g)]) for g in range(G) for h in range(g + 1, G))
    if gap > pair_bound + tol:
        failures.append(f"gap {gap:.6g} exceeds the pairwise bound {pair_bound:.6g}")
    if lp_value is not None and dual < lp_value - tol:
        failures.append(f"weak duality fails: dual {dual:.12g} < LP {lp_value:.12g}")
    return CertificateReport(residuals, dual, gap, failures)


def delta_max_bound(pool: CandidatePool, mode: str = "probs") -> float:
    """A-priori cap on EOR's per-prefix slack from each group's top candidate."""
    if pool.n_groups < 2:
        raise WrongGroupCount("need at least two groups")
    nr = n_rel(pool, mode)
    w = pool.weights(mode)
    tops = np.array([w[pool.members(g)].max() / nr[g] for g in range(pool.n_groups)])
    if pool.n_groups == 2:
        return float(0.5 * tops.sum())
    return float(tops.max())


def certify_prefix(pool: CandidatePool, ranking, k: int, with_ilp: bool = True) -> dict:
    """Everything the ``verify`` command reports for one prefix."""
    from .ilp import MAX_N, ilp_top_k

    cert = dual_certificate(pool, ranking, k)
    lp = eor_primal_lp(pool, k, cert.delta)
    lp_value = lp.objective_value if lp.optimal else None
    ilp_value = None
    if with_ilp and pool.n <= MAX_N:
        ilp_value = ilp_top_k(pool, k, cert.delta).objective
    rep = verify_certificate(cert, pool, k, lp_value)
    failures = list(rep.failures)
    if lp_value is not None and lp_value < cert.eor_value - RESIDUAL_TOL:
        failures.append("LP value below the EOR prefix value")
    if ilp_value is not None and not (cert.eor_value - RESIDUAL_TOL <= ilp_value <= lp_value + RESIDUAL_TOL):
        failures.append("LP >= ILP >= EOR sandwich fails")
    return {
        "k": k,
        "delta": cert.delta,
        "phi": cert.phi,
        "bound": cert.bound,
        "gap": rep.gap,
        "lp_value": lp_value,
        "ilp_value": ilp_value,
        "eor_value": cert.eor_value,
        "feasible": not failures,
        "residual_max": rep.residual_max,
        "failures": failures,
    }
