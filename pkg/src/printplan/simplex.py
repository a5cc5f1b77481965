"""Bounded-variable primal simplex.

Solves   min c.x  subject to  A x {<=,=,>=} b,  lower <= x <= upper
with a dense revised simplex that keeps an explicit basis inverse.

Key mechanics:

* every row gets a slack column, bounded so the slack encodes the row
  sense ([0, inf) for <=, [0, 0] for =, (-inf, 0] for >=), which lets a
  single bounded-variable pivot loop serve both phases;
* infeasibility is removed by a composite phase-1 objective that prices
  only out-of-bound basic variables, so the method can start from an
  arbitrary basis (used for warm starts between branch-and-bound nodes);
* rows are scaled by their max-abs coefficient before solving;
* Dantzig pricing with a switch to Bland's rule after a run of
  degenerate steps, and periodic refactorization of the basis inverse
  with a feasibility audit at termination.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

AT_LO, AT_UP, BASIC, FREE = 0, 1, 2, 3

_REFACTOR_EVERY = 100
_DEGENERATE_RUN = 300


class SimplexError(RuntimeError):
    """Numerical breakdown that survived refactorization retries."""


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LpResult:
    status: LpStatus
    objective: float | None
    x: np.ndarray
    iterations: int
    basis: tuple[int, ...]
    statuses: bytes
    binv: np.ndarray | None = None

    @property
    def start(self) -> tuple[tuple[int, ...], bytes]:
        """Opaque warm-start token for a subsequent solve."""
        return (self.basis, self.statuses)

    @property
    def start_with_binv(self):
        """Warm-start token that also hands over the basis inverse.

        Valid only for a follow-up solve of the same rows (bounds may
        differ); the receiver copies it, so sharing is safe.
        """
        return (self.basis, self.statuses, self.binv)


def solve_lp(
    c,
    a,
    senses,
    b,
    lower,
    upper,
    *,
    start: tuple[tuple[int, ...], bytes] | None = None,
    max_iterations: int | None = None,
    feas_tol: float = 1e-7,
    bound_tol: float = 1e-9,
) -> LpResult:
    """Solve one LP. `senses` is a sequence of '<', '=' or '>' per row."""
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = c.shape[0]
    m = a.shape[0] if a.size else len(b)
    if m == 0:
        return _bound_only_solve(c, np.asarray(lower, float), np.asarray(upper, float))

    # scale rows by max-abs coefficient
    a = a.reshape(m, n).copy()
    b = b.astype(float).copy()
    scale = np.maximum(np.abs(a).max(axis=1), 1e-12)
    scale = np.where(scale < 1e-12, 1.0, scale)
    a /= scale[:, None]
    b /= scale

    # slack columns: one per row, sense encoded in the slack bounds
    total = n + m
    cols = np.zeros(total)
    cols[:n] = c
    lo = np.full(total, -np.inf)
    up = np.full(total, np.inf)
    lo[:n] = lower
    up[:n] = upper
    for r, sense in enumerate(senses):
        if sense == "<":
            lo[n + r], up[n + r] = 0.0, np.inf
        elif sense == ">":
            lo[n + r], up[n + r] = -np.inf, 0.0
        elif sense == "=":
            lo[n + r], up[n + r] = 0.0, 0.0
        else:
            raise ValueError(f"unknown row sense {sense!r}")
    a_full = np.hstack([a, np.eye(m)])

    if max_iterations is None:
        max_iterations = 20_000 + 200 * (m + n)

    def cold_state():
        basis = np.arange(n, n + m)
        status = _default_nonbasic_status(lo, up)
        status[basis] = BASIC
        values = _nonbasic_values(status, lo, up)
        binv = np.eye(m)
        values[basis] = _basic_values(a_full, b, basis, values, binv)
        return basis, status, values, binv

    if start is None:
        basis, status, values, binv = cold_state()
    else:
        basis = np.array(start[0], dtype=int)
        status = np.frombuffer(start[1], dtype=np.int8).copy()
        if basis.shape[0] != m or status.shape[0] != total:
            raise ValueError("warm start does not match problem shape")
        # bounds may have changed since the start basis was recorded:
        # re-anchor nonbasic variables onto currently finite bounds
        for j in range(total):
            if status[j] == BASIC:
                continue
            status[j] = _reanchor(status[j], lo[j], up[j])
        if len(start) > 2 and start[2] is not None and start[2].shape == (m, m):
            binv = np.array(start[2])
            values = _nonbasic_values(status, lo, up)
            values[basis] = _basic_values(a_full, b, basis, values, binv)
        else:
            try:
                binv = _refactor(a_full, basis)
            except SimplexError:
                basis, status, values, binv = cold_state()
            else:
                values = _nonbasic_values(status, lo, up)
                values[basis] = _basic_values(a_full, b, basis, values, binv)

    dual_tol = 1e-9 * max(1.0, float(np.abs(c).max()) if c.size else 1.0)
    bland = False
    degenerate_run = 0
    restarts = 0
    it = 0

    while True:
        if it >= max_iterations:
            raise SimplexError(f"iteration limit {max_iterations} exceeded")
        if it and it % _REFACTOR_EVERY == 0:
            # rank-1 updates can walk the basis into exact singularity;
            # recover by restarting this solve from the slack basis
            try:
                binv = _refactor(a_full, basis)
            except SimplexError:
                restarts += 1
                if restarts > 5:
                    raise
                basis, status, values, binv = cold_state()
            else:
                values[basis] = _basic_values(a_full, b, basis, values, binv)

        xb = values[basis]
        lob, upb = lo[basis], up[basis]
        below = xb < lob - _btol(lob, bound_tol)
        above = xb > upb + _btol(upb, bound_tol)
        in_phase1 = bool(below.any() or above.any())

        if in_phase1:
            c_eff = np.zeros(total)
            c_eff[basis[below]] = -1.0
            c_eff[basis[above]] = 1.0
            price_tol = 1e-9
        else:
            c_eff = cols
            price_tol = dual_tol

        y = c_eff[basis] @ binv
        d = c_eff - y @ a_full

        can_up = (status == AT_LO) & (d < -price_tol)
        can_dn = (status == AT_UP) & (d > price_tol)
        free_mask = status == FREE
        can_up |= free_mask & (d < -price_tol)
        can_dn |= free_mask & (d > price_tol)
        eligible = can_up | can_dn

        if not eligible.any():
            if in_phase1:
                return _finish(
                    LpStatus.INFEASIBLE, None, values, n, it, basis, status
                )
            # claimed optimal: audit the basis before trusting it
            try:
                binv = _refactor(a_full, basis)
            except SimplexError:
                restarts += 1
                if restarts > 5:
                    raise
                basis, status, values, binv = cold_state()
                it += 1
                continue
            fresh = _basic_values(a_full, b, basis, values, binv)
            drift = float(np.abs(fresh - values[basis]).max()) if m else 0.0
            values[basis] = fresh
            if drift > feas_tol:
                restarts += 1
                if restarts > 5:
                    raise SimplexError("feasibility drift persisted across refactorizations")
                it += 1
                continue
            resid = float(np.abs(a_full @ values - b).max()) if m else 0.0
            if resid > 10 * feas_tol:
                raise SimplexError(f"row residual {resid:.3e} above tolerance at optimum")
            obj = float(cols @ values)
            return _finish(LpStatus.OPTIMAL, obj, values, n, it, basis, status, binv)

        if bland:
            q = int(np.flatnonzero(eligible)[0])
        else:
            score = np.where(eligible, np.abs(d), -1.0)
            q = int(np.argmax(score))
        direction = 1.0 if can_up[q] else -1.0

        w = binv @ a_full[:, q]

        theta, leave_pos, leave_to = _ratio_test(
            xb, lob, upb, below, above, w, direction, lo[q], up[q], bound_tol, bland, basis
        )

        if theta is None:
            if in_phase1:
                raise SimplexError("phase-1 direction unbounded; numerical breakdown")
            return _finish(LpStatus.UNBOUNDED, None, values, n, it, basis, status)

        if theta <= 1e-10:
            degenerate_run += 1
            if degenerate_run >= _DEGENERATE_RUN:
                bland = True
        else:
            degenerate_run = 0
            bland = False

        values[basis] = xb - theta * direction * w
        if leave_pos == -1:
            # entering variable runs to its opposite bound: bound flip only
            status[q] = AT_UP if direction > 0 else AT_LO
            values[q] = up[q] if direction > 0 else lo[q]
        else:
            leaving = basis[leave_pos]
            values[q] += theta * direction
            status[q] = BASIC
            status[leaving] = leave_to
            values[leaving] = lo[leaving] if leave_to == AT_LO else up[leaving]
            basis[leave_pos] = q
            # rank-1 basis inverse update; the ratio test guarantees a
            # pivot magnitude above 1e-9
            piv = w[leave_pos]
            row = binv[leave_pos] / piv
            binv -= w[:, None] * row[None, :]
            binv[leave_pos] = row
        it += 1


def _btol(bound, tol):
    return tol * np.maximum(1.0, np.abs(np.where(np.isfinite(bound), bound, 0.0)))


def _default_nonbasic_status(lo, up):
    status = np.full(lo.shape[0], FREE, dtype=np.int8)
    status[np.isfinite(lo)] = AT_LO
    only_up = ~np.isfinite(lo) & np.isfinite(up)
    status[only_up] = AT_UP
    return status


def _reanchor(stat, lo_j, up_j):
    if stat == AT_LO and not np.isfinite(lo_j):
        return AT_UP if np.isfinite(up_j) else FREE
    if stat == AT_UP and not np.isfinite(up_j):
        return AT_LO if np.isfinite(lo_j) else FREE
    if stat == FREE and np.isfinite(lo_j):
        return AT_LO
    if stat == FREE and np.isfinite(up_j):
        return AT_UP
    return stat


def _nonbasic_values(status, lo, up):
    values = np.zeros(status.shape[0])
    values[status == AT_LO] = lo[status == AT_LO]
    values[status == AT_UP] = up[status == AT_UP]
    return values


def _refactor(a_full, basis):
    try:
        return np.linalg.inv(a_full[:, basis])
    except np.linalg.LinAlgError as exc:
        raise SimplexError("singular basis during refactorization") from exc


def _basic_values(a_full, b, basis, values, binv):
    v = values.copy()
    v[basis] = 0.0
    return binv @ (b - a_full @ v)


def _ratio_test(xb, lob, upb, below, above, w, direction, lo_q, up_q, bound_tol, bland, basis):
    """Largest step the entering variable can take.

    Feasible basics block at their own bounds.  Basics currently outside
    a bound block when they reach that bound (where the phase-1 cost
    slope changes).  Returns (theta, blocking basis position or -1 for a
    bound flip, status the leaving variable takes).
    """
    dv = -direction * w
    m = xb.shape[0]

    best = np.inf
    if np.isfinite(lo_q) and np.isfinite(up_q):
        best = up_q - lo_q

    cand_theta = np.full(m, np.inf)
    cand_to = np.full(m, AT_LO, dtype=np.int8)

    moving = np.abs(w) > 1e-9
    dec = moving & (dv < 0)
    inc = moving & (dv > 0)

    feas = ~(below | above)

    sel = feas & dec & np.isfinite(lob)
    cand_theta[sel] = (xb[sel] - lob[sel]) / (-dv[sel])
    cand_to[sel] = AT_LO

    sel = feas & inc & np.isfinite(upb)
    cand_theta[sel] = (upb[sel] - xb[sel]) / dv[sel]
    cand_to[sel] = AT_UP

    sel = below & inc
    cand_theta[sel] = (lob[sel] - xb[sel]) / dv[sel]
    cand_to[sel] = AT_LO

    sel = above & dec
    cand_theta[sel] = (xb[sel] - upb[sel]) / (-dv[sel])
    cand_to[sel] = AT_UP

    cand_theta = np.maximum(cand_theta, 0.0)
    row_min = float(cand_theta.min()) if m else np.inf
    theta = min(best, row_min)
    if not np.isfinite(theta):
        return None, -1, AT_LO

    if row_min > theta + 1e-9:
        return theta, -1, AT_LO  # entering variable flips to its other bound

    near = np.flatnonzero(cand_theta <= theta + 1e-9)
    if bland:
        pos = int(near[np.argmin(basis[near])])
    else:
        pos = int(near[np.argmax(np.abs(w[near]))])
    return float(cand_theta[pos]), pos, int(cand_to[pos])


def _finish(status, objective, values, n, iterations, basis, statuses, binv=None):
    return LpResult(
        status=status,
        objective=objective,
        x=values[:n].copy(),
        iterations=iterations,
        basis=tuple(int(j) for j in basis),
        statuses=statuses.tobytes(),
        binv=binv,
    )


def _bound_only_solve(c, lower, upper):
    """Row-free LP: each variable sits at whichever bound its cost prefers."""
    x = np.zeros(c.shape[0])
    for j, cj in enumerate(c):
        if cj > 0:
            if not np.isfinite(lower[j]):
                return LpResult(LpStatus.UNBOUNDED, None, x, 0, (), b"")
            x[j] = lower[j]
        elif cj < 0:
            if not np.isfinite(upper[j]):
                return LpResult(LpStatus.UNBOUNDED, None, x, 0, (), b"")
            x[j] = upper[j]
        else:
            x[j] = lower[j] if np.isfinite(lower[j]) else (upper[j] if np.isfinite(upper[j]) else 0.0)
    return LpResult(LpStatus.OPTIMAL, float(c @ x), x, 0, (), b"")
