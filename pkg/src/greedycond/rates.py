"""Decay curves of residual covariance norms and checks of the rate bounds.

All norms are grid sups of residual-kernel diagonals. For a greedy run of
length ``N`` a curve has entries ``n = 0, ..., N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .conditioning import (
    full_observation_residual, newton_cross_basis, posterior_kernel,
)
from .exceptions import DomainError
from .greedy import GreedyState, NUM_TOL
from .transferop import operator_norm

BOUND_ATOL = 1e-8
TARGETS = ("Y_residual", "X_given_Yn_residual")


@dataclass(frozen=True)
class DecayCurve:
    ns: tuple
    values: tuple
    label: str = ""

    def __post_init__(self):
        if len(self.ns) != len(self.values):
            raise DomainError("ns and values differ in length")
        if np.any(np.diff(self.ns) <= 0):
            raise DomainError("n must be strictly increasing")
        if np.any(np.asarray(self.values) < 0):
            raise DomainError("decay values must be nonnegative")

    def value_at(self, n):
        return self.values[self.ns.index(n)]

    def rows(self):
        return list(zip(self.ns, self.values))


class RateFit(NamedTuple):
    alpha_hat: float
    c_hat: float
    window: tuple
    residual: float


def _x_lhs(model, state):
    """``sup diag(cov(X|Y_n) - cov(X|Y))`` for ``n = 0, ..., state.n``."""
    B = newton_cross_basis(model, state)
    full = np.diag(full_observation_residual(model))
    base = np.diag(model.K_xx) - full
    csum = np.cumsum(B ** 2, axis=1)
    out = [float(np.max(base))]
    out += [float(np.max(base - csum[:, j])) for j in range(state.n)]
    return np.clip(out, 0.0, None)


def decay_curve(model, state: GreedyState, target="Y_residual") -> DecayCurve:
    """Residual norms along a greedy run on ``model.k_yy``.

    ``Y_residual`` is ``||cov(Y) - cov(Y_n)||``, i.e. the greedy sup power;
    ``X_given_Yn_residual`` is ``||cov(X|Y) - cov(X|Y_n)||``.
    """
    if target not in TARGETS:
        raise DomainError(f"target must be one of {TARGETS}")
    if target == "Y_residual":
        values = state.sup_trace()
    else:
        values = _x_lhs(model, state)
    ns = tuple(range(state.n + 1))
    return DecayCurve(ns, tuple(float(v) for v in values), target)


def fit_power_law(curve: DecayCurve, window) -> RateFit:
    """Least-squares fit of ``log value = log C - alpha log n`` over ``window``."""
    lo, hi = int(window[0]), int(window[1])
    if lo < 1 or hi < lo:
        raise DomainError(f"invalid fit window {window}")
    if lo < curve.ns[0] or hi > curve.ns[-1]:
        raise DomainError(f"fit window {window} outside curve support "
                          f"[{curve.ns[0]}, {curve.ns[-1]}]")
    ns = np.array([n for n in curve.ns if lo <= n <= hi], dtype=float)
    vals = np.array([v for n, v in curve.rows() if lo <= n <= hi])
    bad = [int(n) for n, v in zip(ns, vals) if v <= 0]
    if bad:
        raise DomainError(f"nonpositive curve value at n = {bad[0]} inside fit window")
    if len(ns) < 2:
        raise DomainError("fit window needs at least two points")
    A = np.column_stack([np.ones_like(ns), -np.log(ns)])
    coef, *_ = np.linalg.lstsq(A, np.log(vals), rcond=None)
    resid = float(np.max(np.abs(A @ coef - np.log(vals))))
    return RateFit(float(coef[1]), float(np.exp(coef[0])), (lo, hi), resid)


def check_transfer_bound(model, M, state: GreedyState, norm=None, atol=BOUND_ATOL):
    """Pointwise-in-``n`` check of
    ``||cov(X|Y) - cov(X|Y_n)|| <= ||M||**2 ||cov(Y) - cov(Y_n)||``.

    ``tight`` marks rows where both sides agree to ``atol``.
    """
    norm = operator_norm(M) if norm is None else norm
    lhs = decay_curve(model, state, "X_given_Yn_residual").values
    y = decay_curve(model, state, "Y_residual").values
    rows = []
    for n, (l, r) in enumerate(zip(lhs, y)):
        rhs = norm ** 2 * r
        rows.append({"n": n, "lhs": l, "rhs": rhs, "pass": bool(l <= rhs + atol),
                     "tight": bool(abs(l - rhs) <= atol)})
    return {"per_n": rows, "pass": all(r["pass"] for r in rows),
            "constants": {"norm_M": norm, "atol": atol}}


def uniform_selection(grid, n):
    """``n`` grid indices closest to ``a + (b - a) j / n``, ``j = 1..n``."""
    if n > len(grid):
        raise DomainError(f"cannot select {n} of {len(grid)} points")
    pts = grid.points
    targets = grid.lower + (grid.upper - grid.lower) * np.arange(1, n + 1) / n
    idx = [int(np.argmin(np.abs(pts - t))) for t in targets]
    if len(set(idx)) != n:
        raise DomainError(f"grid too coarse for {n} uniform points")
    return idx


def baseline_curve(model, ns) -> DecayCurve:
    """``||cov(Y) - cov(Y_n*)||`` for uniformly placed measurement sets."""
    ymodel = model.y_only()
    vals = []
    for n in ns:
        pk = posterior_kernel(ymodel, uniform_selection(model.grid_y, n))
        vals.append(max(float(np.max(np.diag(pk.residual_matrix()))), 0.0))
    return DecayCurve(tuple(int(n) for n in ns), tuple(vals), "uniform_baseline")


def check_rate_bound(model, M, state: GreedyState, window=(10, 50), baseline=None,
                       norm=None):
    """Empirical check of the polynomial-rate bound for weak P-greedy:

        ||cov(X|Y) - cov(X|Y_n)|| <= ||M||**2 2**(5 alpha + 1) gamma**-2 C n**-alpha

    for ``n`` in ``window``, with ``(C, alpha)`` fitted to ``baseline`` (by
    default, uniformly placed measurements) over the same window. The fit is
    not a certified bound, so the check is empirical.
    """
    lo, hi = window
    if baseline is None:
        baseline = baseline_curve(model, range(lo, hi + 1))
    fit = fit_power_law(baseline, window)
    norm = operator_norm(M) if norm is None else norm
    lhs = decay_curve(model, state, "X_given_Yn_residual")
    g = state.gamma
    factor = norm ** 2 * 2.0 ** (5 * fit.alpha_hat + 1) * g ** -2 * fit.c_hat
    rows = []
    for n in range(lo, min(hi, lhs.ns[-1]) + 1):
        rhs = factor * n ** -fit.alpha_hat
        l = lhs.value_at(n)
        rows.append({"n": n, "lhs": l, "rhs": rhs, "pass": bool(l <= rhs + NUM_TOL)})
    if not rows:
        raise DomainError(f"greedy run of length {state.n} does not reach window {window}")
    return {"per_n": rows, "pass": all(r["pass"] for r in rows), "empirical": True,
            "constants": {"alpha_hat": fit.alpha_hat, "c_hat": fit.c_hat,
                          "fit_residual": fit.residual, "gamma": g, "norm_M": norm,
                          "window": list(fit.window)}}


# name used by the published interface
check_corollary_39 = check_rate_bound
