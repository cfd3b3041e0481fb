"""Transfer operators ``M`` with ``M Y = E[X | Y]``, realized on grids.

``M`` maps functions sampled on ``grid_y`` to functions on ``grid_x``.
Operator norms are sup-norm to sup-norm; for a grid matrix this is the
largest absolute row sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .exceptions import DomainError, NumericalError
from .jointmodel import RESTRICTION_KNOT, JointGaussianModel, cosine_basis
from .kernelcore import Grid, factorize_psd

NUM_TOL = 1e-10
N_PROBES = 1000


class TransferOperator:
    """Base class. Subclasses set ``grid_y``, ``grid_x`` and implement
    :meth:`apply`; :attr:`matrix` defaults to applying to the unit vectors."""

    variant = "base"
    grid_y: Grid
    grid_x: Grid

    def apply(self, v):
        raise NotImplementedError

    @cached_property
    def matrix(self):
        return np.column_stack([self.apply(e) for e in np.eye(len(self.grid_y))])

    def row_sum_norm(self):
        return float(np.max(np.sum(np.abs(self.matrix), axis=1)))

    @property
    def norm_bound(self):
        """Exact sup-norm operator norm of the grid realization."""
        return self.row_sum_norm()

    def _check_input(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != len(self.grid_y):
            raise DomainError(f"expected {len(self.grid_y)} values on grid_y, got {v.shape[0]}")
        return v


def _interp_weights(grid, s):
    """Matrix ``W`` with ``(W v)_k`` = piecewise-linear interpolant of ``v`` at ``s_k``."""
    pts = grid.points
    j = np.clip(np.searchsorted(pts, s, side="right") - 1, 0, len(pts) - 2)
    w = (s - pts[j]) / (pts[j + 1] - pts[j])
    W = np.zeros((len(s), len(pts)))
    W[np.arange(len(s)), j] = 1.0 - w
    W[np.arange(len(s)), j + 1] += w
    return W


@dataclass(frozen=True, eq=False)
class NoisyRestrictionBM(TransferOperator):
    """Conditional-mean operator for Brownian motion on ``[0, 1]`` observed on
    ``[1/2, 1]`` with an additive constant-covariance offset of variance
    ``noise_variance``:

        (M v)(s) = v(1/2) s / (1/2 + sigma2)                    for s <= 1/2
        (M v)(s) = v(s) - sigma2 v(1/2) / (1/2 + sigma2)        for s > 1/2

    ``noise_variance = 0`` gives :class:`RestrictionBM`.
    """

    grid_y: Grid
    grid_x: Grid
    noise_variance: float = 0.0
    _knot: int = field(init=False, repr=False)
    _right: np.ndarray = field(init=False, repr=False)

    variant = "noisy_restriction_bm"

    def __post_init__(self):
        if self.noise_variance < 0:
            raise DomainError("noise variance must be >= 0")
        if not self.grid_y.contains(RESTRICTION_KNOT):
            raise DomainError("grid_y must contain the point 1/2 exactly")
        object.__setattr__(self, "_knot", self.grid_y.index_of(RESTRICTION_KNOT))
        right = self.grid_x.points > RESTRICTION_KNOT
        object.__setattr__(self, "_right", right)

    def apply(self, v):
        v = self._check_input(v)
        s = self.grid_x.points
        vk = v[self._knot]
        denom = RESTRICTION_KNOT + self.noise_variance
        out = np.empty((len(s),) + v.shape[1:])
        left = ~self._right
        out[left] = np.multiply.outer(s[left], vk) / denom
        W = _interp_weights(self.grid_y, s[self._right])
        out[self._right] = W @ v - self.noise_variance * vk / denom
        return out

    @cached_property
    def matrix(self):
        s = self.grid_x.points
        denom = RESTRICTION_KNOT + self.noise_variance
        A = np.zeros((len(s), len(self.grid_y)))
        A[~self._right, self._knot] = s[~self._right] / denom
        A[self._right] = _interp_weights(self.grid_y, s[self._right])
        A[self._right, self._knot] -= self.noise_variance / denom
        return A

    @property
    def analytic_norm(self):
        return 1.0 + self.noise_variance / (RESTRICTION_KNOT + self.noise_variance)

    @property
    def norm_bound(self):
        return self.analytic_norm


def RestrictionBM(grid_y, grid_x):
    """Noise-free restriction: ``(M v)(s) = 2 v(1/2) s`` for ``s <= 1/2``, ``v(s)`` beyond."""
    op = NoisyRestrictionBM(grid_y, grid_x, 0.0)
    object.__setattr__(op, "variant", "restriction_bm")
    return op


@dataclass(frozen=True, eq=False)
class InverseMap(TransferOperator):
    """``M = L^{-1}`` for ``Y = L X`` with invertible ``L``."""

    L: np.ndarray
    grid: Grid

    variant = "inverse_map"

    @property
    def grid_x(self):
        return self.grid

    @property
    def grid_y(self):
        return self.grid

    @cached_property
    def _lu(self):
        return sla.lu_factor(np.asarray(self.L, dtype=float))

    def apply(self, v):
        return sla.lu_solve(self._lu, self._check_input(v))


@dataclass(frozen=True, eq=False)
class MoorePenroseGrid(TransferOperator):
    """Minimum-norm inverse of ``L`` in the geometry of ``K_xx``.

    ``M v`` solves ``min w^T K_xx^{-1} w`` subject to ``L w = v`` (least
    squares when infeasible). With ``K_xx = C C^T``: ``M = C (L C)^+``.
    """

    L: np.ndarray
    K_xx: np.ndarray
    grid_x: Grid
    grid_y: Grid

    variant = "moore_penrose_grid"

    @cached_property
    def chol(self):
        return factorize_psd(self.K_xx).chol

    @cached_property
    def matrix(self):
        LC = np.asarray(self.L, dtype=float) @ self.chol
        return self.chol @ np.linalg.pinv(LC, rtol=1e-12)

    def apply(self, v):
        v = self._check_input(v)
        w = self.matrix @ v
        resid = np.max(np.abs(np.asarray(self.L) @ w - v), initial=0.0)
        if resid > 1e-8 * max(1.0, np.max(np.abs(v), initial=0.0)):
            raise NumericalError(f"L w = v infeasible (residual {resid:.3e})")
        return w


@dataclass(frozen=True, eq=False)
class EigenTruncation(TransferOperator):
    """``M w = sum_{j in kept} w_j phi_j`` for the cosine eigenbasis."""

    grid_x: Grid
    kept: tuple
    n_basis: int

    variant = "eigen_truncation"

    @property
    def grid_y(self):
        return Grid.index_set(self.kept)

    @cached_property
    def matrix(self):
        return cosine_basis(self.grid_x, self.n_basis)[:, list(self.kept)]

    def apply(self, v):
        return self.matrix @ self._check_input(v)


def transfer_for_model(model: JointGaussianModel, variant=None):
    """The exact transfer operator of a constructor-built model."""
    label = model.label
    if label.startswith("brownian_restriction"):
        sigma2 = model.params["noise_variance"]
        if sigma2 == 0 and variant in (None, "restriction_bm"):
            return RestrictionBM(model.grid_y, model.grid_x)
        return NoisyRestrictionBM(model.grid_y, model.grid_x, sigma2)
    if label == "eigen_truncation":
        return EigenTruncation(model.grid_x, tuple(model.params["kept"]),
                               len(model.params["eigenvalues"]))
    if label == "invertible_map" and variant != "moore_penrose_grid":
        return InverseMap(model.params["map"], model.grid_x)
    if "map" in model.params:
        return MoorePenroseGrid(model.params["map"], model.K_xx, model.grid_x, model.grid_y)
    raise DomainError(f"no transfer operator known for model {label!r}")


def apply(M: TransferOperator, v):
    return M.apply(v)


def operator_norm(M: TransferOperator) -> float:
    """Sup-norm operator norm: analytic for the restriction variants,
    the exact row-sum norm of the grid matrix otherwise."""
    return float(M.norm_bound)


def probe_norm(M: TransferOperator, n_probes=N_PROBES, seed=0) -> float:
    """Lower estimate ``max ||M v||_inf / ||v||_inf`` over random sign vectors
    and the unit vectors."""
    rng = np.random.default_rng(seed)
    n = len(M.grid_y)
    probes = np.hstack([np.eye(n), rng.choice([-1.0, 1.0], size=(n, n_probes))])
    out = M.apply(probes) if not isinstance(M, MoorePenroseGrid) else M.matrix @ probes
    return float(np.max(np.max(np.abs(out), axis=0) / np.max(np.abs(probes), axis=0)))


class PenroseReport(NamedTuple):
    lml: float      # max |L M L - L|
    mlm: float      # max |M L M - M|
    ml_sym: float   # M L self-adjoint in the K_xx^{-1} geometry
    lm_sym: float   # L M symmetric

    @property
    def worst(self):
        return max(self)


def penrose_check(M: MoorePenroseGrid) -> PenroseReport:
    """Residuals of the four Penrose identities for the weighted pseudo-inverse."""
    if not isinstance(M, MoorePenroseGrid):
        raise DomainError("penrose_check needs a MoorePenroseGrid operator")
    L = np.asarray(M.L, dtype=float)
    A = M.matrix
    C = M.chol
    ML = A @ L
    LM = L @ A
    # C^{-1} (M L) C is symmetric iff M L is self-adjoint w.r.t. <a, b> = a^T K^{-1} b
    S = sla.solve_triangular(C, ML @ C, lower=True)
    return PenroseReport(
        float(np.max(np.abs(L @ A @ L - L))),
        float(np.max(np.abs(A @ L @ A - A))),
        float(np.max(np.abs(S - S.T))),
        float(np.max(np.abs(LM - LM.T))),
    )


def transfer_from_spec(spec, model: JointGaussianModel):
    """Build ``M`` from ``{"variant": ..., "params": {...}}`` for ``model``."""
    variant = spec.get("variant")
    params = spec.get("params", {})
    if variant == "restriction_bm":
        return RestrictionBM(model.grid_y, model.grid_x)
    if variant == "noisy_restriction_bm":
        sigma2 = params.get("noise_variance", (model.params or {}).get("noise_variance", 0.0))
        return NoisyRestrictionBM(model.grid_y, model.grid_x, float(sigma2))
    if variant == "inverse_map":
        return InverseMap(model.params["map"], model.grid_x)
    if variant == "moore_penrose_grid":
        return MoorePenroseGrid(model.params["map"], model.K_xx, model.grid_x, model.grid_y)
    if variant == "eigen_truncation":
        return transfer_for_model(model)
    raise DomainError(f"unknown transfer variant {variant!r}")
