"""Slow, independent reference implementations used by tests and acceptance runs.

Everything here trades speed for transparency: a textbook dense two-phase
simplex with Bland's rule for desk-scale ground truth, a Dykstra projector
that works directly off the explicit inequalities, a multiplier-reconstruction
KKT verifier, and a dense least-squares solve of the marginal-projection
optimality system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import OrderedVariates, Problem
from .errors import Infeasible, MaxIterations, ShapeMismatch, TooLarge, Unbounded

_PIVOT_TOL = 1e-9
_LP_SIZE_GUARD = 8


def _simplex_phase(T: np.ndarray, cost: np.ndarray, basis: list[int], ncols: int) -> None:
    """Run Bland-rule pivots in place until the reduced costs are non-negative.

    ``T`` is (rows, ncols+1) with the rhs in the last column; ``cost`` is the
    reduced-cost row of length ncols+1 (last entry carries -objective).
    Bland's rule: enter the lowest-index improving column, leave at the
    lowest-index basic variable among the minimum-ratio rows, so cycling is
    impossible and the pivot sequence is deterministic.
    """
    rows = T.shape[0]
    while True:
        enter = -1
        for j in range(ncols):
            if cost[j] < -_PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            return
        col = T[:, enter]
        best_ratio = np.inf
        leave = -1
        for i in range(rows):
            if col[i] > _PIVOT_TOL:
                ratio = T[i, -1] / col[i]
                if ratio < best_ratio - _PIVOT_TOL or (
                    abs(ratio - best_ratio) <= _PIVOT_TOL
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            raise Unbounded("LP objective is unbounded below")
        piv = T[leave, enter]
        T[leave] /= piv
        for i in range(rows):
            if i != leave and T[i, enter] != 0.0:
                T[i] -= T[i, enter] * T[leave]
        cost -= cost[enter] * T[leave]
        basis[leave] = enter


def simplex_solve(c: np.ndarray, A: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Solve min c.x s.t. A x = b, x >= 0 by the dense two-phase simplex.

    Returns (optimum, x). Raises Infeasible when phase 1 cannot drive the
    artificial variables to zero. Redundant equality rows (the transport
    system has rank m+n-1) are dropped after phase 1.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.asarray(c, dtype=float)
    rows, ncols = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # Phase 1 tableau: [A | I | b], basis on the artificials.
    T = np.hstack([A, np.eye(rows), b[:, None]])
    basis = list(range(ncols, ncols + rows))
    cost = np.zeros(ncols + rows + 1)
    cost[ncols : ncols + rows] = 1.0
    cost -= T.sum(axis=0)
    _simplex_phase(T, cost, basis, ncols + rows)
    if -cost[-1] > 1e-7:
        raise Infeasible(f"phase-1 optimum {-cost[-1]!r} > 0")

    # Pivot artificials out of the basis; rows that cannot be pivoted are
    # redundant in the original system and get dropped.
    keep = []
    for i in range(rows):
        if basis[i] < ncols:
            keep.append(i)
            continue
        piv = -1
        for j in range(ncols):
            if abs(T[i, j]) > _PIVOT_TOL:
                piv = j
                break
        if piv < 0:
            continue
        T[i] /= T[i, piv]
        for r in range(rows):
            if r != i and T[r, piv] != 0.0:
                T[r] -= T[r, piv] * T[i]
        basis[i] = piv
        keep.append(i)
    T = np.hstack([T[keep][:, :ncols], T[keep][:, -1:]])
    basis = [basis[i] for i in keep]

    cost = np.zeros(ncols + 1)
    cost[:ncols] = c
    for i, bi in enumerate(basis):
        cost -= c[bi] * T[i]
    _simplex_phase(T, cost, basis, ncols)

    x = np.zeros(ncols)
    for i, bi in enumerate(basis):
        x[bi] = T[i, -1]
    return float(c @ x), x


@dataclass(frozen=True)
class ExplicitLP:
    """The order-constrained transport LP in equality standard form.

    Plan variables come first (row-major), followed by one slack per order
    inequality; non-negativity is implicit in the standard form. The m+n
    marginal equalities have rank m+n-1, which the two-phase solver handles.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    num_plan_vars: int

    @classmethod
    def build(cls, problem: Problem, oc: OrderedVariates) -> "ExplicitLP":
        m, n = problem.shape
        mn = m * n
        flat = lambda i, j: i * n + j
        ineqs: list[tuple[int, int]] = []  # (lo, hi) meaning x[lo] - x[hi] <= 0
        if oc.k:
            top_flat = flat(*oc.pairs[0])
            mask = oc.tail_mask(m, n)
            for p in range(m):
                for q in range(n):
                    if mask[p, q]:
                        ineqs.append((flat(p, q), top_flat))
            for ell in range(oc.k - 1):
                ineqs.append((flat(*oc.pairs[ell]), flat(*oc.pairs[ell + 1])))
        nslack = len(ineqs)
        A = np.zeros((m + n + nslack, mn + nslack))
        b = np.zeros(m + n + nslack)
        for i in range(m):
            A[i, i * n : (i + 1) * n] = 1.0
            b[i] = problem.a[i]
        for j in range(n):
            A[m + j, j:mn:n] = 1.0
            b[m + j] = problem.b[j]
        for r, (lo, hi) in enumerate(ineqs):
            A[m + n + r, lo] = 1.0
            A[m + n + r, hi] -= 1.0
            A[m + n + r, mn + r] = 1.0
        c = np.zeros(mn + nslack)
        c[:mn] = problem.D.ravel()
        return cls(c=c, A=A, b=b, num_plan_vars=mn)


def lp_solve_oc(problem: Problem, oc: OrderedVariates) -> tuple[float, np.ndarray]:
    """Exact vertex optimum of the order-constrained transport LP.

    Desk-scale only (m, n <= 8). Raises Infeasible when the constrained
    polytope is empty, which is a finding, not a failure.
    """
    m, n = problem.shape
    if m > _LP_SIZE_GUARD or n > _LP_SIZE_GUARD:
        raise TooLarge(f"LP oracle is guarded at {_LP_SIZE_GUARD}; got {m}x{n}")
    oc.check_bounds(m, n)
    lp = ExplicitLP.build(problem, oc)
    opt, x = simplex_solve(lp.c, lp.A, lp.b)
    return opt, x[: lp.num_plan_vars].reshape(m, n)


def pgd_project(
    X: np.ndarray,
    oc: OrderedVariates,
    tol: float = 1e-10,
    max_cycles: int = 200_000,
) -> np.ndarray:
    """Project onto the order cone by Dykstra's cyclic corrections.

    Works over the explicit halfspaces (every tail cell below the chain
    bottom, the chain links, and the non-negative orthant), so it shares no
    machinery with the closed-form projection it is used to validate.
    """
    if tol < 1e-12:
        tol = 1e-12
    X = np.asarray(X, dtype=float)
    m, n = X.shape
    oc.check_bounds(m, n)
    if oc.k == 0:
        return np.maximum(X, 0.0)

    flat = lambda i, j: i * n + j
    top = flat(*oc.pairs[0])
    pairs_flat = [flat(i, j) for i, j in oc.pairs]
    halfspaces = [(flat(p, q), top) for p, q in zip(*np.where(oc.tail_mask(m, n)))]
    halfspaces += [(pairs_flat[ell], pairs_flat[ell + 1]) for ell in range(oc.k - 1)]

    y = X.ravel().copy()
    mem = [np.zeros_like(y) for _ in range(len(halfspaces) + 1)]
    for _ in range(max_cycles):
        y_prev = y.copy()
        for s, (lo, hi) in enumerate(halfspaces):
            w_lo = y[lo] + mem[s][lo]
            w_hi = y[hi] + mem[s][hi]
            gap = w_lo - w_hi
            if gap > 0.0:
                y[lo] = w_lo - gap / 2.0
                y[hi] = w_hi + gap / 2.0
            else:
                y[lo] = w_lo
                y[hi] = w_hi
            mem[s][lo] = w_lo - y[lo]
            mem[s][hi] = w_hi - y[hi]
        w = y + mem[-1]
        y = np.maximum(w, 0.0)
        mem[-1] = w - y
        change = float(np.max(np.abs(y - y_prev)))
        viol = max(
            (float(y[lo] - y[hi]) for lo, hi in halfspaces),
            default=0.0,
        )
        if change <= tol * 0.1 and viol <= tol and y.min() >= -tol:
            return y.reshape(m, n)
    raise MaxIterations(f"Dykstra did not stabilize within {max_cycles} cycles")


@dataclass(frozen=True)
class KKTReport:
    """Max violation per optimality-condition family for an order-cone projection."""

    feasibility: float
    sign: float
    complementarity: float
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.feasibility, self.sign, self.complementarity)

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tol


def kkt_verify(
    X: np.ndarray, X_hat: np.ndarray, oc: OrderedVariates, tol: float = 1e-8
) -> KKTReport:
    """Check the optimality system of the order-cone projection at X_hat.

    The tail multipliers are recovered from the stationarity rows via
    positive/negative parts of X - X_hat; the chain multipliers follow by
    back-substitution with the top link pinned at zero. Stationarity then
    holds identically and all defect shows up in the feasibility, sign, and
    complementary-slackness families reported here.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(X_hat, dtype=float)
    if X.shape != Y.shape:
        raise ShapeMismatch(f"shapes {X.shape} and {Y.shape} differ")
    m, n = X.shape
    oc.check_bounds(m, n)
    k = oc.k

    mask = oc.tail_mask(m, n) if k else np.ones((m, n), dtype=bool)
    tail_X = X[mask]
    tail_Y = Y[mask]
    lam = np.maximum(tail_X - tail_Y, 0.0)
    delta = np.maximum(tail_Y - tail_X, 0.0)

    feas = max(0.0, float(-Y.min()))
    sign = 0.0
    comp = float(np.max(np.abs(delta * tail_Y))) if tail_Y.size else 0.0
    if k == 0 and tail_Y.size:
        # Orthant-only projection leaves no home for a positive lam; any mass
        # there is a stationarity defect, reported with the slackness family.
        comp = max(comp, float(lam.max()))

    if k:
        chain_Y = np.array([Y[i, j] for i, j in oc.pairs])
        chain_X = np.array([X[i, j] for i, j in oc.pairs])
        y_top = chain_Y[0]
        feas = max(feas, float(np.max(tail_Y - y_top)) if tail_Y.size else 0.0)
        if k > 1:
            feas = max(feas, float(np.max(chain_Y[:-1] - chain_Y[1:])))
        comp = max(comp, float(np.max(np.abs(lam * (tail_Y - y_top)))) if tail_Y.size else 0.0)

        # eta[ell] multiplies the link chain[ell] <= chain[ell+1]; the
        # stationarity rows give eta by back-substitution from the top.
        eta = np.zeros(k)  # eta[k-1] stays 0 by convention; unused for k = 1
        for ell in range(k - 1, 0, -1):
            eta[ell - 1] = chain_Y[ell] - chain_X[ell] + eta[ell]
        delta_top = y_top - chain_X[0] + eta[0] - float(lam.sum())
        sign = max(sign, float(np.max(-eta[: k - 1])) if k > 1 else 0.0)
        sign = max(sign, -delta_top)
        comp = max(comp, abs(delta_top * y_top))
        if k > 1:
            comp = max(comp, float(np.max(np.abs(eta[: k - 1] * (chain_Y[1:] - chain_Y[:-1])))))
    return KKTReport(
        feasibility=max(0.0, feas),
        sign=max(0.0, sign),
        complementarity=comp,
        tol=tol,
    )


def c1_project_dense(X: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Marginal projection via a dense least-squares solve of the KKT system.

    Builds the full (mn + m + n) optimality system with the rank-deficient
    constraint matrix and solves it with a pseudo-inverse; only sensible at
    desk scale, as ground truth for the closed-form projector.
    """
    X = np.asarray(X, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = X.shape
    mn = m * n
    A = np.zeros((m + n, mn))
    for i in range(m):
        A[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        A[m + j, j::n] = 1.0
    K = np.zeros((mn + m + n, mn + m + n))
    K[:mn, :mn] = np.eye(mn)
    K[:mn, mn:] = A.T
    K[mn:, :mn] = A
    rhs = np.concatenate([X.ravel(), a, b])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    return sol[:mn].reshape(m, n)
