"""Jointly Gaussian, zero-mean pairs ``(X, Y)`` realized on finite grids.

Each constructor returns a :class:`JointGaussianModel` holding the three
covariance blocks as kernels: ``k_xx`` on ``grid_x``, ``k_yy`` on
``grid_y`` and the cross covariance ``k_xy(s, t) = E[X(s) Y(t)]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import DomainError, NumericalError
from .kernelcore import (
    Grid, Kernel, brownian_min, is_psd, shifted_min, tabulated,
)

#: Largest accepted condition number for an invertible observation map.
COND_MAX = 1e12

#: The knot of the restriction examples; ``Y`` lives on ``[RESTRICTION_KNOT, 1]``.
RESTRICTION_KNOT = 0.5


@dataclass(frozen=True, eq=False)
class JointGaussianModel:
    grid_x: Grid
    grid_y: Grid
    k_xx: Kernel
    k_yy: Kernel
    k_xy: Kernel
    label: str
    params: dict | None = None

    @cached_property
    def K_xx(self):
        return self.k_xx.matrix(self.grid_x)

    @cached_property
    def K_yy(self):
        return self.k_yy.matrix(self.grid_y)

    @cached_property
    def K_xy(self):
        return self.k_xy.matrix(self.grid_x, self.grid_y)

    def stacked_covariance(self):
        """Covariance of the stacked vector ``(X(grid_x), Y(grid_y))``."""
        return np.block([[self.K_xx, self.K_xy], [self.K_xy.T, self.K_yy]])

    def is_psd(self):
        return is_psd(self.stacked_covariance())

    def y_only(self):
        """The model ``(Y, Y)``: conditioning ``Y`` on its own measurements."""
        return JointGaussianModel(self.grid_y, self.grid_y, self.k_yy, self.k_yy,
                                  self.k_yy, f"{self.label}:Y|Y")


def brownian_restriction_model(noise_variance=0.0, grid_x=None, grid_y=None):
    """Brownian motion on ``[0, 1]`` observed on ``[1/2, 1]``, plus an
    optional fully correlated offset ``N`` with ``cov(N(s), N(t)) = noise_variance``.

    The offset is independent of ``X`` and therefore leaves the cross block
    at ``min(s, t)``.
    """
    if noise_variance < 0:
        raise DomainError(f"noise variance must be >= 0, got {noise_variance}")
    grid_x = Grid.uniform(0.0, 1.0) if grid_x is None else grid_x
    grid_y = Grid.uniform(RESTRICTION_KNOT, 1.0) if grid_y is None else grid_y
    if not (np.isclose(grid_x.lower, 0.0) and np.isclose(grid_x.upper, 1.0)):
        raise DomainError("grid_x must span [0, 1]")
    if not (np.isclose(grid_y.lower, RESTRICTION_KNOT) and np.isclose(grid_y.upper, 1.0)):
        raise DomainError("grid_y must span [1/2, 1]")
    k_xx = brownian_min(0.0, 1.0)
    if noise_variance == 0:
        k_yy = brownian_min(RESTRICTION_KNOT, 1.0)
    else:
        k_yy = shifted_min(np.sqrt(noise_variance), RESTRICTION_KNOT, 1.0)
    label = "brownian_restriction" if noise_variance == 0 else \
        f"brownian_restriction(noise={noise_variance:g})"
    return JointGaussianModel(grid_x, grid_y, k_xx, k_yy, brownian_min(0.0, 1.0), label,
                              {"noise_variance": float(noise_variance)})


def cosine_basis(grid, count):
    """``phi_0 = 1``, ``phi_j(t) = sqrt(2) cos(j pi t)``: L2-orthonormal on [0, 1]."""
    j = np.arange(count)
    phi = np.sqrt(2.0) * np.cos(np.pi * grid.points[:, None] * j[None, :])
    phi[:, 0] = 1.0
    return phi


def eigen_truncation_model(eigenvalues, kept_indices, grid=None):
    """``X = sum_i sqrt(lambda_i) xi_i phi_i`` observed through the
    coefficients ``<X, phi_j>`` for ``j`` in ``kept_indices``.

    ``grid_y`` is the index set of the kept coefficients.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    kept = sorted(int(j) for j in kept_indices)
    if len(kept) == 0:
        raise DomainError("kept index set must be nonempty")
    if np.any(lam <= 0):
        raise DomainError("eigenvalues must be positive")
    if np.any(np.diff(lam) > 0):
        raise DomainError("eigenvalues must be sorted in descending order")
    if len(set(kept)) != len(kept) or kept[0] < 0 or kept[-1] >= len(lam):
        raise DomainError(f"kept indices {kept} invalid for {len(lam)} eigenvalues")
    grid = Grid.uniform(0.0, 1.0) if grid is None else grid
    phi = cosine_basis(grid, len(lam))
    grid_y = Grid.index_set(kept)
    k_xx = tabulated((phi * lam) @ phi.T, grid, name="eigen")
    k_yy = tabulated(np.diag(lam[kept]), grid_y, name="eigen_coeff")
    k_xy = tabulated(phi[:, kept] * lam[kept], grid, grid_y, name="eigen_cross")
    return JointGaussianModel(grid, grid_y, k_xx, k_yy, k_xy, "eigen_truncation",
                              {"eigenvalues": lam.tolist(), "kept": kept})


def linear_observation_model(base, grid, matrix, label="linear_observation"):
    """``Y = L X`` for a grid operator ``L``; ``grid_y`` indexes the rows of ``L``.

    Rows of ``L`` are taken as functions on ``grid`` when ``L`` is square
    (``grid_y = grid``); otherwise ``grid_y`` is the row index set.
    """
    L = np.asarray(matrix, dtype=float)
    if L.ndim != 2 or L.shape[1] != len(grid):
        raise DomainError(f"map must have {len(grid)} columns, got shape {L.shape}")
    grid_y = grid if L.shape[0] == len(grid) else Grid.index_set(range(L.shape[0]))
    K = base.matrix(grid)
    k_xx = tabulated(K, grid, name=base.name)
    k_yy = tabulated(L @ K @ L.T, grid_y, name=f"L {base.name} L^T")
    k_xy = tabulated(K @ L.T, grid, grid_y, name=f"{base.name} L^T")
    return JointGaussianModel(grid, grid_y, k_xx, k_yy, k_xy, label, {"map": L})


def invertible_map_model(base, grid, map):
    """``Y = L X`` for an invertible grid operator ``L``.

    Raises :class:`NumericalError` when ``cond(L)`` exceeds :data:`COND_MAX`.
    """
    L = np.asarray(map, dtype=float)
    if L.shape != (len(grid), len(grid)):
        raise DomainError(f"map must be {len(grid)}x{len(grid)}, got {L.shape}")
    cond = np.linalg.cond(L)
    if not np.isfinite(cond) or cond > COND_MAX:
        raise NumericalError(f"map is numerically singular (cond = {cond:.3e})")
    return linear_observation_model(base, grid, L, "invertible_map")


def cumulative_sum_map(n):
    """Lower-triangular all-ones matrix: ``(L x)_i = sum_{j <= i} x_j``."""
    return np.tril(np.ones((n, n)))
