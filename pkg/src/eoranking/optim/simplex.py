"""Dense two-phase tableau simplex.

Problems are stated as ``maximize c @ x`` subject to rows ``a @ x (<=|=|>=) b``
and per-variable bounds.  Bounds are removed by shifting/splitting variables,
rows are brought to equality form with slack and surplus columns, and phase 1
minimises the sum of artificials.

Pivoting uses Bland's rule by default.  ``rule="dantzig"`` picks the most
negative reduced cost instead and drops back to Bland after a run of
degenerate pivots, which keeps termination guaranteed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalFailure

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-8
OPT_TOL = 1e-9

RELATIONS = ("<=", "=", ">=")


@dataclass
class LinearProgram:
    """``maximize objective @ x`` s.t. ``A[r] @ x rel[r] b[r]`` and ``lo <= x <= hi``."""

    objective: np.ndarray
    A: np.ndarray
    relations: list
    b: np.ndarray
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64).reshape(-1)
        n = self.objective.size
        self.A = np.asarray(self.A, dtype=np.float64).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        self.relations = list(self.relations)
        m = self.A.shape[0]
        if self.b.size != m or len(self.relations) != m:
            raise ValueError("A, relations and b disagree on the number of rows")
        bad = set(self.relations) - set(RELATIONS)
        if bad:
            raise ValueError(f"unknown relation(s) {bad}")
        self.lo = np.zeros(n) if self.lo is None else np.asarray(self.lo, dtype=np.float64).reshape(n)
        self.hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=np.float64).reshape(n)
        if np.any(self.lo > self.hi):
            raise ValueError("lower bound exceeds upper bound")
        if not (np.all(np.isfinite(self.objective)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValueError("LP data must be finite")

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation at ``x`` (0 when feasible)."""
        worst = 0.0
        if self.A.shape[0]:
            ax = self.A @ x
            for rel, lhs, rhs in zip(self.relations, ax, self.b):
                if rel == "<=":
                    worst = max(worst, lhs - rhs)
                elif rel == ">=":
                    worst = max(worst, rhs - lhs)
                else:
                    worst = max(worst, abs(lhs - rhs))
        worst = max(worst, float(np.max(self.lo - x, initial=0.0)), float(np.max(x - self.hi, initial=0.0)))
        return worst


@dataclass
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective_value: float
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Row 0 holds reduced costs of a minimisation; column -1 holds the rhs."""

    def __init__(self, T: np.ndarray, basis: np.ndarray, rule: str, max_iter: int):
        self.T = T
        self.basis = basis
        self.rule = rule
        self.max_iter = max_iter
        self.iterations = 0

    def pivot(self, r: int, c: int):
        T = self.T
        piv = T[r, c]
        if abs(piv) < PIVOT_TOL:
            raise NumericalFailure(f"pivot magnitude {abs(piv):.3g} below {PIVOT_TOL:g}")
        T[r] /= piv
        col = T[:, c].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, c] = 0.0
        T[r, c] = 1.0
        self.basis[r - 1] = c
        self.iterations += 1

    def entering(self, allowed: np.ndarray, use_bland: bool) -> int | None:
        rc = self.T[0, :-1]
        cand = np.flatnonzero(allowed & (rc < -OPT_TOL))
        if cand.size == 0:
            return None
        if use_bland:
            return int(cand[0])
        return int(cand[np.argmin(rc[cand])])

    def leaving(self, c: int) -> int | None:
        col = self.T[1:, c]
        rhs = self.T[1:, -1]
        ok = col > PIVOT_TOL
        if not np.any(ok):
            return None
        ratios = np.full(col.shape, np.inf)
        ratios[ok] = rhs[ok] / col[ok]
        best = ratios.min()
        # Bland tie-break: among minimal ratios, smallest basic variable index
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        r = ties[np.argmin(self.basis[ties])]
        return int(r) + 1

    def run(self, allowed: np.ndarray) -> str:
        degenerate_run = 0
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(f"simplex did not converge in {self.max_iter} pivots")
            use_bland = self.rule == "bland" or degenerate_run >= 50
            c = self.entering(allowed, use_bland)
            if c is None:
                return "optimal"
            r = self.leaving(c)
            if r is None:
                return "unbounded"
            degenerate_run = degenerate_run + 1 if self.T[r, -1] <= FEAS_TOL else 0
            self.pivot(r, c)


def _standard_form(lp: LinearProgram):
    """Rewrite as ``min cs @ y`` s.t. ``As @ y = bs``, ``y >= 0``; return a map back to x."""
    n = lp.n_vars
    cols = []  # (original var, sign) for each structural column
    shift = np.zeros(n)
    extra_rows, extra_b = [], []
    for j in range(n):
        lo, hi = lp.lo[j], lp.hi[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, 1.0))
                extra_b.append(hi - lo)
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ns = len(cols)
    M = np.zeros((n, ns))
    for c, (j, s) in enumerate(cols):
        M[j, c] = s
    A = lp.A @ M
    b = lp.b - lp.A @ shift
    rels = list(lp.relations)
    if extra_rows:
        E = np.zeros((len(extra_rows), ns))
        for r, (c, s) in enumerate(extra_rows):
            E[r, c] = s
        A = np.vstack([A, E])
        b = np.concatenate([b, extra_b])
        rels += ["<="] * len(extra_rows)
    m = A.shape[0]
    n_slack = sum(r != "=" for r in rels)
    As = np.zeros((m, ns + n_slack))
    As[:, :ns] = A
    slack_of_row = np.full(m, -1)
    s = ns
    for r, rel in enumerate(rels):
        if rel == "<=":
            As[r, s] = 1.0
        elif rel == ">=":
            As[r, s] = -1.0
        if rel != "=":
            slack_of_row[r] = s
            s += 1
    bs = b.copy()
    neg = bs < 0
    As[neg] *= -1
    bs[neg] *= -1
    cs = np.zeros(As.shape[1])
    cs[:ns] = -(lp.objective @ M)
    const = float(lp.objective @ shift)
    return As, bs, cs, M, shift, const, slack_of_row


def simplex_solve(lp: LinearProgram, rule: str = "bland", max_iter: int = 200_000) -> LPSolution:
    """Solve a :class:`LinearProgram` to optimality, or report infeasible/unbounded."""
    if rule not in ("bland", "dantzig"):
        raise ValueError("rule must be 'bland' or 'dantzig'")
    As, bs, cs, M, shift, const, slack_of_row = _standard_form(lp)
    m, N = As.shape

    # initial basis: a +1 slack where available, an artificial otherwise
    basis = np.empty(m, dtype=np.intp)
    art_rows = []
    for r in range(m):
        s = slack_of_row[r]
        if s >= 0 and As[r, s] == 1.0:
            basis[r] = s
        else:
            art_rows.append(r)
    n_art = len(art_rows)
    T = np.zeros((m + 1, N + n_art + 1))
    T[1:, :N] = As
    T[1:, -1] = bs
    for a, r in enumerate(art_rows):
        T[r + 1, N + a] = 1.0
        basis[r] = N + a

    tab = _Tableau(T, basis, rule, max_iter)
    scale = max(1.0, float(np.abs(bs).max(initial=0.0)))
    if n_art:
        # phase 1: minimise the sum of artificials
        T[0, N : N + n_art] = 1.0
        for r in art_rows:
            T[0] -= T[r + 1]
        allowed = np.ones(N + n_art, dtype=bool)
        tab.run(allowed)
        if -T[0, -1] > FEAS_TOL * scale:
            return LPSolution("infeasible", None, float("nan"), tab.iterations)
        # drive artificials out of the basis; rows where that is impossible are redundant
        keep = np.ones(m + 1, dtype=bool)
        for r in range(1, m + 1):
            if tab.basis[r - 1] >= N:
                row = T[r, :N]
                nz = np.flatnonzero(np.abs(row) > 1e-9)
                if nz.size:
                    tab.pivot(r, int(nz[0]))
                else:
                    keep[r] = False
        T = T[keep][:, list(range(N)) + [T.shape[1] - 1]]
        tab.T = T
        tab.basis = tab.basis[keep[1:]]

    # phase 2
    T = tab.T
    T[0, :] = 0.0
    T[0, :N] = cs
    for r, j in enumerate(tab.basis):
        if T[0, j] != 0.0:
            T[0] -= T[0, j] * T[r + 1]
    status = tab.run(np.ones(N, dtype=bool))
    if status == "unbounded":
        return LPSolution("unbounded", None, float("inf"), tab.iterations)
    y = np.zeros(N)
    y[tab.basis] = T[1:, -1]
    y = np.maximum(y, 0.0)
    x = shift + M @ y[: M.shape[1]]
    value = float(lp.objective @ x)
    sol = LPSolution("optimal", x, value, tab.iterations)
    sol.info["violation"] = lp.violation(x)
    return sol
