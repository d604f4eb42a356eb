"""Exact Euclidean projections onto the two constraint sets of the splitting.

C1 is the affine set of matrices with prescribed row/column sums (no sign
constraint); its projector is a closed form costing one pass of matrix-vector
work. C2 is the order cone: non-negative matrices whose constrained cells sit
at fixed descending-rank positions above everything else; its projector is an
extended pool-adjacent-violators sweep over the constrained chain with a
threshold function that pools the top tail cells into the bottom of the chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import OrderedVariates, Problem, descending_order
from .errors import EmptyConstraints, NoZero, ShapeMismatch, UnequalMass


def project_c1(problem: Problem, X: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {Y : Y 1 = a, Y^T 1 = b}.

    Closed form: correct each row by its sum defect spread over the columns,
    each column likewise, and remove the double-counted total-mass defect.
    O(mn), exact marginals on output, idempotent.
    """
    X = np.asarray(X, dtype=float)
    if X.shape != problem.shape:
        raise ShapeMismatch(f"matrix has shape {X.shape}, expected {problem.shape}")
    a, b = problem.a, problem.b
    mass_a, mass_b = float(a.sum()), float(b.sum())
    if abs(mass_a - mass_b) > 1e-8:
        raise UnequalMass(f"sum(a) = {mass_a!r} != sum(b) = {mass_b!r}")
    m, n = problem.shape
    row_defect = a - X.sum(axis=1)
    col_defect = b - X.sum(axis=0)
    total_defect = mass_a - float(X.sum())
    return X + row_defect[:, None] / n + col_defect[None, :] / m - total_defect / (m * n)


@dataclass(frozen=True)
class ThresholdEvaluator:
    """O(1) evaluation of the top-block threshold after a one-time tail sort.

    ``sorted_tail`` holds the unconstrained cell values descending (ties in
    row-major position order), ``x_top`` the bottom-of-chain cell value.
    ``breakpoints[s-1]`` is the dual value at which the pooled prefix grows
    from s-1 to s cells; it is non-decreasing, so lookup is a bisection.
    """

    sorted_tail: np.ndarray
    x_top: float
    prefix_sums: np.ndarray
    breakpoints: np.ndarray
    tail_positions: np.ndarray  # flat indices of sorted_tail in the source matrix

    @classmethod
    def from_values(cls, x_top: float, tail, positions=None) -> "ThresholdEvaluator":
        tail = np.asarray(tail, dtype=float).ravel()
        order = descending_order(tail)
        srt = tail[order]
        prefix = np.concatenate([[0.0], np.cumsum(srt)])
        s = np.arange(1, srt.size + 1)
        brk = x_top + prefix[1:] - (s + 1) * srt
        brk = np.maximum.accumulate(brk)  # monotone in exact arithmetic
        if positions is None:
            positions = np.arange(tail.size)
        else:
            positions = np.asarray(positions)
        return cls(
            sorted_tail=srt,
            x_top=float(x_top),
            prefix_sums=prefix,
            breakpoints=brk,
            tail_positions=positions[order],
        )

    @classmethod
    def from_matrix(cls, X: np.ndarray, oc: OrderedVariates) -> "ThresholdEvaluator":
        X = np.asarray(X, dtype=float)
        mask = oc.tail_mask(*X.shape)
        flat = np.flatnonzero(mask.ravel())
        i_top, j_top = oc.pairs[0]
        return cls.from_values(X[i_top, j_top], X.ravel()[flat], positions=flat)


def threshold_T(ev: ThresholdEvaluator, eta: float) -> tuple[float, int]:
    """The clamped pooled average T(eta) and the pooled tail count t(eta).

    t counts the tail cells merged with the (dual-shifted) bottom chain cell;
    it is the number of breakpoints at or below eta, which also covers the
    empty-candidate convention (pool every tail cell above the shifted top).
    """
    t = int(np.searchsorted(ev.breakpoints, eta, side="right"))
    tau = (ev.x_top - eta + ev.prefix_sums[t]) / (t + 1)
    return max(tau, 0.0), t


def solve_eta(ev: ThresholdEvaluator, q: int, delta_2q: float) -> float:
    """Root of T(eta) = delta_2q + eta / (q - 1) for eta >= 0.

    T is piecewise linear, non-increasing and convex while the right side
    increases, so the root is unique when T(0) >= delta_2q. The walk visits
    the linear pieces in order and intersects exactly; a bisection fallback
    covers any float-boundary miss.
    """
    if q < 2:
        raise NoZero(f"q = {q} < 2")
    slope = 1.0 / (q - 1)
    scale = max(1.0, abs(ev.x_top), abs(delta_2q))
    if ev.sorted_tail.size:
        scale = max(scale, float(np.abs(ev.sorted_tail).max()))
    tol_resid = 1e-12 * scale

    def resid(eta: float) -> float:
        return threshold_T(ev, eta)[0] - delta_2q - eta * slope

    r0 = resid(0.0)
    if r0 < 0.0:
        if r0 > -1e-9 * scale:
            return 0.0
        raise NoZero(f"T(0) already below the line by {-r0!r}")

    nbrk = ev.breakpoints.size
    t = int(np.searchsorted(ev.breakpoints, 0.0, side="right"))
    lo = 0.0
    while True:
        hi = ev.breakpoints[t] if t < nbrk else np.inf
        c_t = ev.x_top + ev.prefix_sums[t]  # tau hits zero at eta = c_t
        # Linear sub-piece: tau >= 0, T = (c_t - eta)/(t+1).
        if c_t > lo:
            root = (q - 1) * (c_t - (t + 1) * delta_2q) / ((t + 1) + (q - 1))
            if lo - tol_resid <= root <= min(hi, c_t) + tol_resid:
                root = min(max(root, lo), min(hi, c_t))
                if abs(resid(root)) <= tol_resid:
                    return max(root, 0.0) + 0.0
        # Clamped sub-piece: T = 0.
        if c_t < hi:
            root = -delta_2q * (q - 1)
            if max(lo, c_t) - tol_resid <= root <= hi + tol_resid:
                root = min(max(root, max(lo, c_t)), hi)
                if abs(resid(root)) <= tol_resid:
                    return max(root, 0.0) + 0.0
        if t >= nbrk:
            break
        lo = hi
        t += 1

    # Fallback: bracket and bisect down to the residual target. The crossing
    # exists (T(0) is above the line, the line grows without bound), so a
    # machine-tight bracket is always an acceptable answer.
    hi = max(1.0, scale)
    while resid(hi) > 0.0:
        hi *= 2.0
        if hi > 1e18 * scale:
            raise NoZero("failed to bracket the threshold equation")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if resid(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi) and abs(resid(mid)) <= tol_resid:
            return mid
    return 0.5 * (lo + hi)


@dataclass
class BlockPartition:
    """Pool-adjacent-violators working state over the constrained chain.

    Boundaries are 0-based chain slots; ``val`` is strictly increasing across
    blocks on exit (equal neighbours coalesce). ``eta_tilde`` is the last dual
    value solved for the bottom block (0.0 when never solved).
    """

    le: list[int]
    ri: list[int]
    val: list[float]
    eta_tilde: float

    @property
    def B(self) -> int:
        return len(self.val)


def epava_blocks(chain: np.ndarray, ev: ThresholdEvaluator) -> BlockPartition:
    """Run the extended PAVA sweep over the chain values.

    ``chain[0]`` is the bottom slot whose block value is the tail-aware
    threshold; higher slots start as singleton blocks and coalesce downward
    whenever monotonicity fails. Merging into the bottom block re-solves the
    threshold equation with the running mean of the other merged slots.
    """
    chain = np.asarray(chain, dtype=float)
    k = chain.size
    eta_tilde = 0.0
    le = [0]
    ri = [0]
    val = [threshold_T(ev, 0.0)[0]]
    for ell in range(1, k):
        le.append(ell)
        ri.append(ell)
        val.append(float(chain[ell]))
        while len(val) >= 2 and val[-1] <= val[-2]:
            q = ri[-1]
            if len(val) == 2:
                delta = float(chain[1 : q + 1].mean())  # slots 1..q join the bottom block
                eta_tilde = solve_eta(ev, q + 1, delta)
                val[0] = threshold_T(ev, eta_tilde)[0]
                ri[0] = q
            else:
                val[-2] = float(chain[le[-2] : q + 1].mean())
                ri[-2] = q
            le.pop()
            ri.pop()
            val.pop()
    return BlockPartition(le=le, ri=ri, val=val, eta_tilde=eta_tilde)


class OrderConeProjector:
    """Reusable projector onto the order cone of a fixed constraint list.

    Precomputes the constrained flat indices and owns scratch buffers, so the
    per-call cost is the tail sort plus the linear chain sweep with no
    allocator churn; the solver re-projects every round. One projector
    instance serves one solver at a time (the scratch is not shareable),
    which matches the one-solver-per-instance concurrency model.
    """

    def __init__(self, oc: OrderedVariates, m: int, n: int):
        if oc.k == 0:
            raise EmptyConstraints("order cone with k = 0 is the orthant; clamp instead")
        oc.check_bounds(m, n)
        self.oc = oc
        self.shape = (m, n)
        self.chain_flat = np.array([i * n + j for i, j in oc.pairs])
        self.tail_flat = np.flatnonzero(oc.tail_mask(m, n).ravel())
        size = self.tail_flat.size
        self._tail = np.empty(size)
        self._sorted = np.empty(size)
        self._prefix = np.empty(size + 1)
        self._brk = np.empty(size)
        self._pos = np.empty(size, dtype=self.tail_flat.dtype)
        self._counts = np.arange(2.0, size + 2.0)  # s + 1 for s = 1..size

    def _evaluator(self, x: np.ndarray) -> ThresholdEvaluator:
        np.take(x, self.tail_flat, out=self._tail)
        order = np.argsort(-self._tail, kind="stable")
        np.take(self._tail, order, out=self._sorted)
        self._prefix[0] = 0.0
        np.cumsum(self._sorted, out=self._prefix[1:])
        x_top = float(x[self.chain_flat[0]])
        # breakpoints: x_top + prefix[s] - (s + 1) * sorted[s - 1], monotone
        np.multiply(self._counts, self._sorted, out=self._brk)
        np.subtract(self._prefix[1:], self._brk, out=self._brk)
        self._brk += x_top
        np.maximum.accumulate(self._brk, out=self._brk)
        np.take(self.tail_flat, order, out=self._pos)
        return ThresholdEvaluator(
            sorted_tail=self._sorted,
            x_top=x_top,
            prefix_sums=self._prefix,
            breakpoints=self._brk,
            tail_positions=self._pos,
        )

    def __call__(self, X: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape != self.shape:
            raise ShapeMismatch(f"matrix has shape {X.shape}, expected {self.shape}")
        x = X.ravel()
        ev = self._evaluator(x)
        blocks = epava_blocks(x[self.chain_flat], ev)
        T_val, t = threshold_T(ev, blocks.eta_tilde)

        if out is None:
            out = np.empty(self.shape)
        if not out.flags["C_CONTIGUOUS"]:
            raise ValueError("out buffer must be C-contiguous")
        flat = out.reshape(-1)
        np.maximum(x, 0.0, out=flat)
        flat[ev.tail_positions[:t]] = T_val
        for lo, hi, v in zip(blocks.le, blocks.ri, blocks.val):
            flat[self.chain_flat[lo : hi + 1]] = v
        return out


def project_c2_epava(X: np.ndarray, oc: OrderedVariates) -> np.ndarray:
    """Euclidean projection onto the order cone (k >= 1).

    Tail cells pooled into the bottom of the chain take the threshold value,
    the remaining tail cells are clamped at zero, and the chain takes its
    block values. Output satisfies the full ordering and non-negativity
    exactly.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got {X.ndim}-d input")
    return OrderConeProjector(oc, *X.shape)(X)
