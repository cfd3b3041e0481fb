"""Posterior covariance kernels after conditioning on point evaluations of ``Y``.

Conditioning ``X`` on ``Y(t_1), ..., Y(t_n)`` subtracts the projected kernel

    k_Z(s, t) = k_xy(s, T) K_yy(T, T)^{-1} k_xy(t, T)^T

from ``k_xx``. Three independent realizations are provided: a Cholesky
route (:func:`posterior_kernel`), the Newton cross basis driven by a greedy
run (:func:`newton_residual`), and an SVD pseudo-inverse Schur complement
(:func:`schur_oracle`). :func:`monte_carlo_oracle` estimates the same
quantity by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .exceptions import DomainError, NumericalError
from .greedy import GreedyState
from .jointmodel import JointGaussianModel
from .kernelcore import GramMatrix, factorize_psd

PINV_RTOL = 1e-12
MC_MIN_SAMPLES = 1000
MC_BATCH = 10_000


def _check_selection(model, selected):
    sel = [int(i) for i in selected]
    if len(set(sel)) != len(sel):
        raise DomainError(f"duplicate indices in selection {sel}")
    if sel and (min(sel) < 0 or max(sel) >= len(model.grid_y)):
        raise DomainError("selection index outside grid_y")
    return sel


@dataclass(frozen=True, eq=False)
class PosteriorKernel:
    model: JointGaussianModel
    selected: tuple
    gram: GramMatrix = field(repr=False)

    @property
    def selected_points(self):
        return self.model.grid_y.points[list(self.selected)]

    @property
    def jitter(self):
        return self.gram.jitter

    def _whitened(self, s):
        """``L^{-1} k_xy(T, s)`` for the Cholesky factor ``L`` of ``K_yy(T, T)``."""
        cross = np.atleast_2d(self.model.k_xy(np.atleast_1d(s)[:, None],
                                              self.selected_points[None, :]))
        return sla.solve_triangular(self.gram.chol, cross.T, lower=True)

    def projected(self, s, t):
        """``k_Z(s, t)``; scalar or array arguments."""
        if not self.selected:
            return np.zeros(np.broadcast(np.asarray(s), np.asarray(t)).shape)[()]
        a = self._whitened(np.atleast_1d(s))
        b = self._whitened(np.atleast_1d(t))
        out = a.T @ b
        return out[0, 0] if np.ndim(s) == 0 and np.ndim(t) == 0 else out

    def residual(self, s, t):
        """``k_{X|Y_n}(s, t) = k_xx(s, t) - k_Z(s, t)``."""
        if np.ndim(s) == 0 and np.ndim(t) == 0:
            return float(self.model.k_xx(s, t) - self.projected(s, t))
        s1, t1 = np.atleast_1d(s), np.atleast_1d(t)
        return self.model.k_xx(s1[:, None], t1[None, :]) - self.projected(s1, t1)

    def projected_matrix(self):
        if not self.selected:
            return np.zeros_like(self.model.K_xx)
        W = sla.solve_triangular(self.gram.chol, self.model.K_xy[:, list(self.selected)].T,
                                 lower=True)
        return W.T @ W

    def residual_matrix(self):
        return self.model.K_xx - self.projected_matrix()


def posterior_kernel(model: JointGaussianModel, selected) -> PosteriorKernel:
    """Condition ``X`` on ``Y`` at the grid_y indices ``selected``."""
    sel = _check_selection(model, selected)
    gram = factorize_psd(model.K_yy[np.ix_(sel, sel)])
    return PosteriorKernel(model, tuple(sel), gram)


class OperatorNormReport(NamedTuple):
    value: float
    argmax: float
    grid_size: int

    def to_dict(self):
        return {"opnorm": self.value, "argmax": self.argmax, "grid_size": self.grid_size}


def opnorm_of(matrix, grid) -> OperatorNormReport:
    """Grid sup of the diagonal of a PSD kernel matrix.

    For a PSD kernel ``|k(s, t)| <= sqrt(k(s, s) k(t, t))``, so the diagonal
    sup equals the sup over pairs of point evaluations.
    """
    d = np.diag(matrix)
    i = int(np.argmax(d))
    return OperatorNormReport(max(float(d[i]), 0.0), float(grid.points[i]), len(grid))


def residual_opnorm(pk: PosteriorKernel) -> OperatorNormReport:
    return opnorm_of(pk.residual_matrix(), pk.model.grid_x)


def conditional_cov_via_M(model: JointGaussianModel, M) -> np.ndarray:
    """``K_xx - M K_yy M^T`` on ``grid_x`` for a transfer operator ``M``."""
    if not (M.grid_y.same_as(model.grid_y) and M.grid_x.same_as(model.grid_x)):
        raise DomainError("transfer operator grids do not match the model")
    A = M.matrix
    return model.K_xx - A @ model.K_yy @ A.T


def _svd_pinv(a, rtol=PINV_RTOL):
    if a.size == 0:
        return np.zeros(a.shape[::-1])
    u, s, vt = np.linalg.svd(a)
    keep = s > rtol * s[0]
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def schur_oracle(model: JointGaussianModel, selected) -> np.ndarray:
    """``K_xx - K_xT K_TT^+ K_xT^T`` with an SVD pseudo-inverse (relative cutoff 1e-12)."""
    sel = _check_selection(model, selected)
    if not sel:
        return np.array(model.K_xx)
    kxt = model.K_xy[:, sel]
    return model.K_xx - kxt @ _svd_pinv(model.K_yy[np.ix_(sel, sel)]) @ kxt.T


def full_observation_residual(model: JointGaussianModel) -> np.ndarray:
    """``cov(X | Y)`` on the grid: the Schur oracle on every grid_y point."""
    return schur_oracle(model, range(len(model.grid_y)))


def newton_cross_basis(model: JointGaussianModel, state: GreedyState) -> np.ndarray:
    """Newton basis of ``k_xy`` along a greedy run on ``k_yy``.

    Column ``j`` is ``k_Z``'s ``j``-th rank-one increment evaluated on
    ``grid_x``, built with the same recursion as the greedy state.
    """
    if not state.candidate_grid.same_as(model.grid_y):
        raise DomainError("greedy run is not over the model's grid_y")
    B = np.zeros((len(model.grid_x), state.n))
    for j, idx in enumerate(state.selected):
        col = model.K_xy[:, idx]
        B[:, j] = (col - B[:, :j] @ state.newton[idx, :j]) / state.newton[idx, j]
    return B


def newton_residual(model: JointGaussianModel, state: GreedyState, n=None) -> np.ndarray:
    """Residual kernel matrix after the first ``n`` greedy selections."""
    B = newton_cross_basis(model, state)
    n = state.n if n is None else n
    return model.K_xx - B[:, :n] @ B[:, :n].T


class MonteCarloResult(NamedTuple):
    residual: np.ndarray
    stderr: np.ndarray
    samples: int
    seed: int

    def agreement(self, reference, n_se=3.0, atol=1e-10):
        """Fraction of entries with ``|estimate - reference| <= n_se * SE + atol``."""
        ok = np.abs(self.residual - reference) <= n_se * self.stderr + atol
        return float(np.mean(ok))


def _sampling_factor(cov):
    # eigh instead of Cholesky: stacked covariances are often exactly singular
    lam, V = np.linalg.eigh(0.5 * (cov + cov.T))
    if lam[0] < -1e-9 * max(lam[-1], 0.0):
        raise NumericalError(f"stacked covariance not PSD (min eigenvalue {lam[0]:.3e})")
    return V * np.sqrt(np.clip(lam, 0.0, None))


def monte_carlo_oracle(model: JointGaussianModel, selected, samples, seed=0) -> MonteCarloResult:
    """Sample ``(X, Y)`` jointly, regress ``X`` on ``Y(selected)``, and return
    the empirical residual covariance with per-entry standard errors.

    Two passes over identically seeded batches: one for the regression
    coefficients, one for residual moments. Output is bitwise reproducible
    for a fixed ``seed``.
    """
    if samples < MC_MIN_SAMPLES:
        raise DomainError(f"need at least {MC_MIN_SAMPLES} samples, got {samples}")
    sel = _check_selection(model, selected)
    nx = len(model.grid_x)
    F = _sampling_factor(model.stacked_covariance())
    sizes = [MC_BATCH] * (samples // MC_BATCH)
    if samples % MC_BATCH:
        sizes.append(samples % MC_BATCH)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def batches():
        for size, ss in zip(sizes, seeds):
            z = np.random.default_rng(ss).standard_normal((size, F.shape[1]))
            xy = z @ F.T
            yield xy[:, :nx], xy[:, nx:][:, sel]

    p = len(sel)
    if p:
        yty = np.zeros((p, p))
        ytx = np.zeros((p, nx))
        for x, y in batches():
            yty += y.T @ y
            ytx += y.T @ x
        coef = _svd_pinv(yty) @ ytx
    s1 = np.zeros((nx, nx))
    s2 = np.zeros((nx, nx))
    for x, y in batches():
        r = x - y @ coef if p else x
        s1 += r.T @ r
        r2 = r * r
        s2 += r2.T @ r2
    dof = samples - p
    cov = s1 / dof
    second = s2 / samples
    var = np.clip(second - (s1 / samples) ** 2, 0.0, None)
    return MonteCarloResult(cov, np.sqrt(var / samples), samples, seed)
