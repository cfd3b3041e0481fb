"""Weak P-greedy point selection with incremental Newton-basis updates.

The squared power function ``P_n(t)**2`` is the posterior variance of the
process at ``t`` after observing it at the ``n`` selected points. Each step
appends one Newton basis column

    N_n(t) = (k(t, t_n) - sum_{j<n} N_j(t) N_j(t_n)) / P_n(t_n)

and downdates ``P**2`` by ``N_n(t)**2``, so a step costs one kernel column
plus ``O(len(grid) * n)`` work.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .exceptions import DomainError
from .kernelcore import Grid, Kernel

NUM_TOL = 1e-10
STOP_RTOL = 1e-12


@dataclass(frozen=True)
class SelectionRule:
    """``gamma = 1`` is the strong (argmax) rule; ``gamma < 1`` draws uniformly
    among candidates with ``P(t) >= gamma * sup P``, seeded per step."""

    gamma: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise DomainError(f"gamma must lie in (0, 1], got {self.gamma}")

    @classmethod
    def strong(cls):
        return cls(1.0, None)

    @classmethod
    def weak_random(cls, gamma, seed=0):
        return cls(float(gamma), int(seed))

    @property
    def mode(self):
        return "strong" if self.gamma == 1.0 else "weak_random"


class HistoryEntry(NamedTuple):
    step: int
    index: int
    point: float
    sup_power_sq: float  # before the selection


@dataclass(frozen=True, eq=False)
class GreedyState:
    kernel: Kernel
    candidate_grid: Grid
    rule: SelectionRule
    selected: tuple = ()
    newton: np.ndarray = field(default=None, repr=False)
    power_sq: np.ndarray = field(default=None, repr=False)
    history: tuple = ()
    initial_sup: float = 0.0
    model_label: str = ""

    @property
    def gamma(self):
        return self.rule.gamma

    @property
    def n(self):
        return len(self.selected)

    @property
    def sup_power_sq(self):
        return float(np.max(self.power_sq))

    @property
    def selected_points(self):
        return self.candidate_grid.points[list(self.selected)]

    def sup_trace(self):
        """``sup P_n**2`` for ``n = 0, ..., self.n``."""
        return np.array([h.sup_power_sq for h in self.history] + [self.sup_power_sq])

    def default_stop_tol(self):
        return STOP_RTOL * self.initial_sup


def init(kernel: Kernel, candidates: Grid, rule: SelectionRule | None = None,
         check_bound=False, label="") -> GreedyState:
    """Start a greedy run with ``P_0(t)**2 = k(t, t)``.

    With ``check_bound`` the kernel diagonal must not exceed ``1 + NUM_TOL``,
    the normalization under which the greedy rate bounds are stated.
    """
    if candidates is None or len(candidates) == 0:
        raise DomainError("candidate grid is empty")
    rule = SelectionRule.strong() if rule is None else rule
    diag = np.asarray(kernel.diagonal(candidates), dtype=float).copy()
    if check_bound and np.max(diag) > 1 + NUM_TOL:
        raise DomainError(f"kernel diagonal exceeds 1 (max {np.max(diag):.6g}); "
                          "rate bounds need sup k(t, t) <= 1")
    diag[diag < NUM_TOL] = 0.0
    diag.setflags(write=False)
    newton = np.zeros((len(candidates), 0))
    newton.setflags(write=False)
    return GreedyState(kernel, candidates, rule, (), newton, diag, (),
                       float(np.max(diag)), label)


def _choose(state):
    p2 = state.power_sq
    sup = float(np.max(p2))
    if state.rule.gamma == 1.0:
        return int(np.argmax(p2)), sup
    admissible = np.flatnonzero(p2 >= state.rule.gamma ** 2 * sup)
    admissible = admissible[~np.isin(admissible, state.selected)]
    rng = np.random.default_rng([int(state.rule.seed or 0), state.n])
    return int(admissible[rng.integers(len(admissible))]), sup


def select_next(state: GreedyState, stop_tol=None):
    """One weak P-greedy step.

    Returns ``(new_state, index)``; ``index`` is ``None`` when every
    residual is at most ``stop_tol`` (saturation), in which case the state
    is returned unchanged.
    """
    stop_tol = state.default_stop_tol() if stop_tol is None else stop_tol
    if float(np.max(state.power_sq)) <= stop_tol:
        return state, None
    idx, sup = _choose(state)
    g = state.candidate_grid
    t_n = g.points[idx]
    col = np.asarray(state.kernel(g.points, t_n), dtype=float)
    p_n = np.sqrt(state.power_sq[idx])
    new_col = (col - state.newton @ state.newton[idx]) / p_n
    power_sq = state.power_sq - new_col ** 2
    power_sq[power_sq < NUM_TOL] = 0.0
    power_sq[idx] = 0.0
    newton = np.column_stack([state.newton, new_col])
    for a in (power_sq, newton):
        a.setflags(write=False)
    entry = HistoryEntry(state.n, idx, float(t_n), sup)
    return replace(state, selected=state.selected + (idx,), newton=newton,
                   power_sq=power_sq, history=state.history + (entry,)), idx


def run(state: GreedyState, n_max: int, stop_tol=None) -> GreedyState:
    """Iterate :func:`select_next` until ``n_max`` selections or saturation."""
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    while state.n < n_max:
        state, idx = select_next(state, stop_tol)
        if idx is None:
            break
    return state


def dense_power_sq(kernel, grid, selected):
    """Posterior variance on ``grid`` from a pseudo-inverse of the selected Gram.

    Independent of the Newton recursion; used as its oracle.
    """
    diag = kernel.diagonal(grid)
    sel = list(selected)
    if not sel:
        return diag
    K = kernel.matrix(grid)
    Kn = K[np.ix_(sel, sel)]
    kn = K[:, sel]
    u, s, vt = np.linalg.svd(Kn)
    keep = s > 1e-12 * s[0]
    pinv = (vt[keep].T / s[keep]) @ u[:, keep].T
    return diag - np.einsum("ij,jk,ik->i", kn, pinv, kn)


def width_surrogate(state):
    """Upper bounds ``U_m = sqrt(sup P_m**2) / gamma`` on the Kolmogorov widths,
    for ``m = 0, ..., state.n``."""
    return np.sqrt(state.sup_trace()) / state.gamma


def check_width_bound(state, n_max=None, atol=1e-12):
    """Check ``sup P_n <= sqrt(2)/gamma * min_{1<=m<n} U_m**((n-m)/n)``.

    Returns a dict with ``per_n`` rows and an overall ``pass`` flag.
    """
    sigma = np.sqrt(state.sup_trace())
    U = width_surrogate(state)
    n_max = state.n if n_max is None else min(n_max, state.n)
    rows = []
    for n in range(2, n_max + 1):
        m = np.arange(1, n)
        rhs = float(np.sqrt(2.0) / state.gamma * np.min(U[m] ** ((n - m) / n)))
        rows.append({"n": n, "lhs": float(sigma[n]), "rhs": rhs,
                     "pass": bool(sigma[n] <= rhs + atol)})
    return {"per_n": rows, "pass": all(r["pass"] for r in rows),
            "constants": {"gamma": state.gamma}}


def history_rows(state):
    """``(step, point, sup_power_sq)`` rows for CSV export."""
    return [(h.step, h.point, h.sup_power_sq) for h in state.history]
