"""Evaluation metrics, calibration diagnostics and Platt scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CandidatePool, DeltaTrace, InclusionEstimate, as_ranking, delta_trace, expected_trace
from .errors import BadParams, MissingLabels, SingleClass


@dataclass(frozen=True)
class EvalReport:
    unfairness: float
    effectiveness: float
    ndcg: np.ndarray | None
    group_cost: np.ndarray  # [k-1, g]
    total_cost: np.ndarray


def unfairness_auc(trace: DeltaTrace) -> float:
    """Sum of |delta| over every prefix k = 1..n."""
    return math.fsum(np.abs(trace.delta))


def uniform_cost_curve(n: int) -> np.ndarray:
    """Expected total cost of the uniform lottery at k = 1..n, i.e. 1 - k/n."""
    return 1.0 - np.arange(1, n + 1) / n


def effectiveness(trace: DeltaTrace) -> float:
    """Total-cost improvement over the uniform lottery, summed over prefixes."""
    n = trace.total_cost.size
    return math.fsum(uniform_cost_curve(n) - trace.total_cost)


def evaluate(pool: CandidatePool, ranking=None, inclusion: InclusionEstimate | None = None,
             mode: str = "probs", with_ndcg: bool = False) -> EvalReport:
    """Unfairness and effectiveness of one ranking or of a policy's inclusion estimate.

    With an inclusion estimate the slack is that of the expected fractions;
    averaging per-sample unfairness is done by the caller.
    """
    if (ranking is None) == (inclusion is None):
        raise ValueError("pass exactly one of ranking and inclusion")
    trace = delta_trace(pool, ranking, mode) if ranking is not None else expected_trace(pool, inclusion, mode)
    nd = ndcg(pool, ranking, "probs" if mode == "probs" else "labels") if with_ndcg and ranking is not None else None
    return EvalReport(unfairness_auc(trace), effectiveness(trace), nd, trace.group_cost, trace.total_cost)


def ndcg(pool: CandidatePool, ranking, gains: str = "probs") -> np.ndarray:
    """nDCG at every k with discount 1/log2(i+1); defined as 1 where the ideal DCG is 0."""
    order = as_ranking(pool, ranking)
    if gains == "labels":
        if pool.labels is None:
            raise MissingLabels("label gains requested but the pool has no labels")
        g = pool.labels.astype(np.float64)
    elif gains == "probs":
        g = pool.probs
    else:
        raise BadParams(f"unknown gains {gains!r}")
    k = order.size
    disc = 1.0 / np.log2(np.arange(2, k + 2))
    dcg = np.cumsum(g[order] * disc)
    ideal = np.cumsum(np.sort(g)[::-1][:k] * disc)
    out = np.ones(k)
    nz = ideal > 0
    out[nz] = dcg[nz] / ideal[nz]
    return out


@dataclass(frozen=True)
class CalibrationCurve:
    mean_pred: np.ndarray
    frac_pos: np.ndarray
    counts: np.ndarray

    @property
    def max_deviation(self) -> float:
        keep = self.counts > 0
        return float(np.max(np.abs(self.mean_pred[keep] - self.frac_pos[keep]), initial=0.0))


def calibration_curve(probs, labels, nbins: int = 20, strategy: str = "quantile") -> CalibrationCurve:
    """Reliability curve; ``quantile`` bins hold equal counts, ``uniform`` bins equal widths.

    Empty bins (possible with ``uniform``) are dropped.
    """
    if labels is None:
        raise MissingLabels("calibration needs labels")
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 1:
        raise BadParams("probs and labels must be 1-d and the same length")
    if nbins < 1:
        raise BadParams("need at least one bin")
    order = np.argsort(p, kind="stable")
    p, y = p[order], y[order]
    if strategy == "quantile":
        bins = np.array_split(np.arange(p.size), nbins)
    elif strategy == "uniform":
        idx = np.minimum((p * nbins).astype(np.intp), nbins - 1)
        bins = [np.flatnonzero(idx == b) for b in range(nbins)]
    else:
        raise BadParams(f"unknown strategy {strategy!r}")
    bins = [b for b in bins if b.size]
    return CalibrationCurve(
        np.array([p[b].mean() for b in bins]),
        np.array([y[b].mean() for b in bins]),
        np.array([b.size for b in bins]),
    )


@dataclass(frozen=True)
class PlattParams:
    a: float
    b: float
    iterations: int = 0
    converged: bool = True


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def platt_fit(scores, labels, max_iter: int = 100, tol: float = 1e-8) -> PlattParams:
    """Fit sigma(a*s + b) by Newton's method on smoothed targets.

    Positives get target (N+ + 1)/(N+ + 2) and negatives 1/(N- + 2).  A small
    ridge on the Hessian keeps steps finite on separable data.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise BadParams("scores and labels must be 1-d and the same length")
    pos = int(np.sum(y == 1))
    neg = int(np.sum(y == 0))
    if pos + neg != y.size:
        raise BadParams("labels must be binary")
    if pos == 0 or neg == 0:
        raise SingleClass("Platt scaling needs both classes")
    if np.ptp(s) == 0:
        raise SingleClass("constant scores carry no ranking information; slope is undefined")
    t = np.where(y == 1, (pos + 1.0) / (pos + 2.0), 1.0 / (neg + 2.0))
    X = np.column_stack([s, np.ones_like(s)])
    theta = np.array([0.0, math.log((pos + 1.0) / (neg + 1.0))])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = _sigmoid(X @ theta)
        grad = X.T @ (p - t)
        if np.linalg.norm(grad) < tol:
            converged = True
            break
        wts = p * (1.0 - p)
        H = (X * wts[:, None]).T @ X + 1e-12 * np.eye(2)
        step = np.linalg.solve(H, grad)
        # backtrack so the negative log-likelihood never increases
        nll = _nll(X, theta, t)
        lr = 1.0
        while lr > 1e-10 and _nll(X, theta - lr * step, t) > nll + 1e-15:
            lr *= 0.5
        theta = theta - lr * step
    return PlattParams(float(theta[0]), float(theta[1]), it, converged)


def _nll(X, theta, t) -> float:
    z = X @ theta
    # log(1 + e^z) - t z, computed stably
    return float(np.sum(np.logaddexp(0.0, z) - t * z))


def platt_apply(params: PlattParams, scores) -> np.ndarray:
    return _sigmoid(params.a * np.asarray(scores, dtype=np.float64) + params.b)
