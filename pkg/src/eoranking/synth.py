"""Synthetic disparate-uncertainty scenarios.

Group A holds 30 sharp probabilities (Beta(1/20, 1/20)) drawn once per seed
and shared by every run and level.  Group B is redrawn every run from a
level-specific Beta until its expected relevance is within 1 of A's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .core import CandidatePool, InclusionEstimate, delta_trace, expected_trace
from .errors import BadParams, MatchFailure
from .metrics import effectiveness, unfairness_auc
from .policies import PolicySpec, inclusion_estimate, rank, sample_ranking

CLAMP = 1e-12
MAX_RETRIES = 10**6
LEVELS = {"high": (5.0, 5.0), "medium": (0.5, 0.5), "low": (0.05, 0.05)}
GROUP_A_SIZE = 30
GROUP_A_SHAPE = (0.05, 0.05)
TABLE_POLICIES = ("eor", "prp", "uniform", "dp", "ts", "exp", "ra", "fairstar")


def _beta_from(gen: np.random.Generator, a: float, b: float, n: int) -> np.ndarray:
    # Gamma ratio in log space: for shape < 1, Gamma(s) = Gamma(s+1) * U^(1/s)
    def log_gamma(s):
        if s >= 1:
            return np.log(gen.standard_gamma(s, n))
        return np.log(gen.standard_gamma(s + 1.0, n)) + np.log(gen.random(n)) / s

    lx, ly = log_gamma(a), log_gamma(b)
    x = 1.0 / (1.0 + np.exp(ly - lx))
    return np.clip(x, CLAMP, 1.0 - CLAMP)


def sample_beta(alpha: float, beta: float, n: int, seed: int) -> np.ndarray:
    if not (alpha > 0 and beta > 0):
        raise BadParams("Beta parameters must be positive")
    if n < 0:
        raise BadParams("n must be nonnegative")
    return _beta_from(_rng.generator(seed), float(alpha), float(beta), int(n))


def sample_powerlaw(eta: float, n: int, seed: int) -> np.ndarray:
    """Draws with density proportional to p^(eta-1) on [0, 1] via p = u^(1/eta)."""
    if not eta > 0:
        raise BadParams("eta must be positive")
    u = _rng.generator(seed).random(int(n))
    return np.clip(u ** (1.0 / eta), CLAMP, 1.0 - CLAMP)


@dataclass(frozen=True)
class Dist:
    """A relevance-probability distribution: ``beta(a, b)``, ``powerlaw(eta)`` or ``point(value)``."""

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in ("beta", "powerlaw", "point"):
            raise BadParams(f"unknown distribution {self.kind!r}")
        if self.kind == "point":
            if not 0.0 <= self.params[0] <= 1.0:
                raise BadParams("point mass must lie in [0, 1]")
        elif any(not p > 0 for p in self.params):
            raise BadParams("distribution parameters must be positive")

    def draw(self, gen: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "beta":
            return _beta_from(gen, *self.params, n)
        if self.kind == "powerlaw":
            return np.clip(gen.random(n) ** (1.0 / self.params[0]), CLAMP, 1.0 - CLAMP)
        return np.full(n, float(self.params[0]))


def matched_pool(fixed_a, dist_b: Dist, seed: int, names=("A", "B")) -> CandidatePool:
    """Pool of ``fixed_a`` plus B draws accumulated until nRel(B) is within 1 of nRel(A).

    A draw that would push nRel(B) above nRel(A) + 1 is rejected and redrawn.
    """
    a = np.asarray(fixed_a, dtype=np.float64)
    target = math.fsum(a)
    if target <= 1.0:
        raise BadParams("group A needs expected relevance above 1")
    gen = _rng.generator(seed)
    b = []
    total = 0.0
    retries = 0
    while not abs(total - target) <= 1.0:
        x = float(dist_b.draw(gen, 1)[0])
        if total + x > target + 1.0:
            retries += 1
            if retries >= MAX_RETRIES:
                raise MatchFailure(f"could not match nRel(A)={target:g} within {MAX_RETRIES} redraws")
            continue
        b.append(x)
        total = math.fsum(b)
    return CandidatePool.from_groups({names[0]: a, names[1]: b})


@dataclass(frozen=True)
class Scenario:
    level: str
    group_a: Dist = Dist("beta", GROUP_A_SHAPE)
    size_a: int = GROUP_A_SIZE
    group_b: Dist | None = None
    seed: int = 0

    def __post_init__(self):
        if self.size_a < 1:
            raise BadParams("group A needs at least one candidate")
        if self.group_b is None:
            if self.level not in LEVELS:
                raise BadParams(f"unknown level {self.level!r}; expected one of {', '.join(LEVELS)} or a custom group_b")
            object.__setattr__(self, "group_b", Dist("beta", LEVELS[self.level]))

    def fixed_a(self) -> np.ndarray:
        # stream 0 is group A; it does not depend on the level
        return self.group_a.draw(_rng.generator(self.seed, 0), self.size_a)

    def pool(self, run: int) -> CandidatePool:
        level_id = list(LEVELS).index(self.level) + 1 if self.level in LEVELS else 99
        return matched_pool(self.fixed_a(), self.group_b, _rng.mix(self.seed, level_id, run))


@dataclass
class PolicyScore:
    unfairness: list = field(default_factory=list)
    effectiveness: list = field(default_factory=list)

    @staticmethod
    def _mean_se(x):
        x = np.asarray(x, dtype=np.float64)
        mean = math.fsum(x) / x.size
        se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        return mean, se

    def summary(self) -> dict:
        um, us = self._mean_se(self.unfairness)
        em, es = self._mean_se(self.effectiveness)
        return {"unfairness_mean": um, "unfairness_se": us, "effectiveness_mean": em, "effectiveness_se": es}


def score_policy(pool: CandidatePool, kind: str, seed: int, samples: int = 100, d: int = 1000, mode: str = "probs"):
    """(unfairness, effectiveness) of one policy on one pool.

    Deterministic policies use their single ranking.  For stochastic ones the
    unfairness is the mean of sum_k |delta| over ``samples`` drawn rankings and
    the effectiveness comes from the inclusion probabilities (exact for the
    uniform lottery and the exposure LP, ``d`` Monte-Carlo draws for TS).
    """
    if kind in ("uniform", "ts"):
        spec = PolicySpec(kind, seed=seed)
        unf = [unfairness_auc(delta_trace(pool, sample_ranking(spec, pool, _rng.mix(seed, 1, s)), mode)) for s in range(samples)]
        if kind == "uniform":
            incl = InclusionEstimate.exact_uniform(pool.n)
        else:
            incl = inclusion_estimate(spec, pool, d, _rng.mix(seed, 2))
        return math.fsum(unf) / samples, effectiveness(expected_trace(pool, incl, mode))
    if kind == "exp":
        from .optim.exposure import exposure_lp, sample_from_doubly_stochastic

        ds = exposure_lp(pool, mode)
        unf = [unfairness_auc(delta_trace(pool, sample_from_doubly_stochastic(ds.matrix, _rng.mix(seed, 1, s)), mode))
               for s in range(samples)]
        return math.fsum(unf) / samples, effectiveness(expected_trace(pool, ds.inclusion(), mode))
    trace = delta_trace(pool, rank(pool, PolicySpec(kind), mode), mode)
    return unfairness_auc(trace), effectiveness(trace)


def scenario_run(level: str, runs: int = 100, seed: int = 0, policies=TABLE_POLICIES, samples: int = 100,
                 d: int = 1000, scenario: Scenario | None = None, per_run=None) -> dict:
    """Mean and standard error of unfairness and effectiveness per policy.

    ``per_run``, when given, is called as ``per_run(run, policy, unfairness, effectiveness, pool)``.
    """
    if runs < 1:
        raise BadParams("need at least one run")
    sc = scenario or Scenario(level, seed=seed)
    scores = {p: PolicyScore() for p in policies}
    for r in range(runs):
        pool = sc.pool(r)
        for p in policies:
            u, e = score_policy(pool, p, _rng.mix(seed, 7, r), samples, d)
            scores[p].unfairness.append(u)
            scores[p].effectiveness.append(e)
            if per_run is not None:
                per_run(r, p, u, e, pool)
    return {p: s.summary() for p, s in scores.items()}
