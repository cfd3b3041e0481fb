"""Kernels on 1-D intervals, evaluation grids and Gram-matrix assembly.

A covariance function ``k(s, t)`` is realized on a finite :class:`Grid`;
all operator norms in the package are taken over point evaluations at
grid points.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg as sla

from .exceptions import DomainError, NumericalError

#: Relative jitter ladder tried in order when a Cholesky factorization fails.
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
#: PSD tolerance relative to the largest diagonal entry.
PSD_RTOL = 1e-9
#: Default number of grid points per unit interval length (plus one).
POINTS_PER_UNIT = 200

_DOMAIN_ATOL = 1e-12


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing evaluation points inside ``[lower, upper]``.

    ``discrete`` grids index a finite set (e.g. basis coefficients) and may
    hold a single point; interval grids need at least two.
    """

    points: np.ndarray
    lower: float
    upper: float
    discrete: bool = False

    def __post_init__(self):
        pts = _readonly(self.points)
        if pts.ndim != 1:
            raise DomainError("grid points must be one-dimensional")
        if len(pts) < (1 if self.discrete else 2):
            raise DomainError(f"grid needs at least two points, got {len(pts)}")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("grid points must be strictly increasing")
        if float(self.lower) > float(self.upper):
            raise DomainError("grid lower bound exceeds upper bound")
        if pts[0] < self.lower - _DOMAIN_ATOL or pts[-1] > self.upper + _DOMAIN_ATOL:
            raise DomainError("grid points outside [lower, upper]")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))

    @classmethod
    def uniform(cls, lower, upper, n=None):
        """Uniform grid including both endpoints.

        The default resolution is 201 points per unit interval length.
        """
        if n is None:
            n = int(round(POINTS_PER_UNIT * (upper - lower))) + 1
        return cls(np.linspace(lower, upper, int(n)), lower, upper)

    @classmethod
    def index_set(cls, indices):
        """Grid over integer labels, used for coefficient-valued observations."""
        idx = np.asarray(indices, dtype=float)
        if idx.size == 0:
            raise DomainError("index set must be nonempty")
        return cls(idx, idx[0], idx[-1], discrete=True)

    def __len__(self):
        return len(self.points)

    def index_of(self, t, atol=1e-12):
        """Index of the grid point equal to ``t`` (within ``atol``)."""
        i = int(np.argmin(np.abs(self.points - t)))
        if abs(self.points[i] - t) > atol:
            raise DomainError(f"{t!r} is not a grid point")
        return i

    def contains(self, t, atol=1e-12):
        return bool(np.min(np.abs(self.points - t)) <= atol)

    def same_as(self, other):
        return (len(self) == len(other)
                and np.array_equal(self.points, other.points))

    def to_spec(self):
        return {"lower": self.lower, "upper": self.upper, "points": len(self)}


class KernelFamily(str, enum.Enum):
    BROWNIAN_MIN = "brownian_min"
    SHIFTED_MIN = "shifted_min"
    GAUSSIAN_RBF = "gaussian_rbf"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class Kernel:
    """A covariance function on ``[lower, upper]²`` (or a tabulated block).

    Use the module-level constructors (:func:`brownian_min`,
    :func:`shifted_min`, :func:`gaussian_rbf`, :func:`tabulated`) rather
    than instantiating directly. Calling a kernel broadcasts over ``s`` and
    ``t``.
    """

    family: KernelFamily
    params: Mapping[str, float]
    lower: float
    upper: float
    name: str = ""
    # tabulated only: row grid, column grid, values
    rows: Grid | None = None
    cols: Grid | None = None
    table: np.ndarray | None = field(default=None, repr=False)

    def __call__(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.family is KernelFamily.TABULATED:
            return self.table[_lookup(self.rows, s), _lookup(self.cols, t)]
        _check_domain(self, s)
        _check_domain(self, t)
        if self.family is KernelFamily.BROWNIAN_MIN:
            return np.minimum(s, t)
        if self.family is KernelFamily.SHIFTED_MIN:
            return self.params["c"] ** 2 + np.minimum(s, t)
        if self.family is KernelFamily.GAUSSIAN_RBF:
            ell = self.params["lengthscale"]
            return np.exp(-0.5 * ((s - t) / ell) ** 2)
        raise AssertionError(self.family)

    @property
    def closed_form(self):
        return self.family is not KernelFamily.TABULATED

    def matrix(self, grid_s, grid_t=None):
        """Kernel values on the tensor grid ``grid_s x grid_t``."""
        grid_t = grid_s if grid_t is None else grid_t
        if self.family is KernelFamily.TABULATED:
            ri = _lookup(self.rows, grid_s.points)
            ci = _lookup(self.cols, grid_t.points)
            return np.array(self.table[np.ix_(ri, ci)])
        return np.asarray(self(grid_s.points[:, None], grid_t.points[None, :]))

    def diagonal(self, grid):
        return np.asarray(self(grid.points, grid.points), dtype=float)

    def to_spec(self):
        if self.family is KernelFamily.TABULATED:
            raise DomainError("tabulated kernels have no JSON representation")
        return {"family": self.family.value, "params": dict(self.params),
                "domain": [self.lower, self.upper]}


def _check_domain(k, x):
    if x.size and (np.min(x) < k.lower - _DOMAIN_ATOL or np.max(x) > k.upper + _DOMAIN_ATOL):
        raise DomainError(
            f"argument outside kernel domain [{k.lower}, {k.upper}]: "
            f"range [{np.min(x)}, {np.max(x)}]")


def _lookup(grid, x):
    pts = grid.points
    x = np.asarray(x, dtype=float)
    j = np.clip(np.searchsorted(pts, x), 1, len(pts) - 1) if len(pts) > 1 else np.zeros(x.shape, int)
    if len(pts) > 1:
        j = np.where(np.abs(pts[j - 1] - x) <= np.abs(pts[j] - x), j - 1, j)
    if np.any(np.abs(pts[j] - x) > 1e-12 * max(1.0, abs(pts[-1]))):
        raise DomainError("tabulated kernel evaluated off its grid")
    return j


def brownian_min(lower=0.0, upper=1.0):
    """``k(s, t) = min(s, t)``, the Brownian-motion covariance (``lower >= 0``)."""
    if lower < 0:
        raise DomainError("Brownian min kernel needs lower >= 0")
    return Kernel(KernelFamily.BROWNIAN_MIN, {}, float(lower), float(upper), "min")


def shifted_min(c, lower, upper):
    """``k(s, t) = c**2 + min(s, t)`` on ``[lower, upper]``; needs ``c**2 + lower > 0``."""
    if c ** 2 + lower <= 0:
        raise DomainError(f"shifted min kernel needs c^2 + lower > 0, got {c ** 2 + lower}")
    return Kernel(KernelFamily.SHIFTED_MIN, {"c": float(c)}, float(lower), float(upper),
                  f"{c ** 2:g}+min")


def gaussian_rbf(lengthscale, lower=0.0, upper=1.0):
    if lengthscale <= 0:
        raise DomainError("lengthscale must be positive")
    return Kernel(KernelFamily.GAUSSIAN_RBF, {"lengthscale": float(lengthscale)},
                  float(lower), float(upper), f"rbf({lengthscale:g})")


def tabulated(matrix, rows, cols=None, name="tabulated"):
    """Kernel given by its values on ``rows x cols`` (``cols`` defaults to ``rows``)."""
    cols = rows if cols is None else cols
    m = _readonly(matrix)
    if m.shape != (len(rows), len(cols)):
        raise DomainError(f"table shape {m.shape} does not match grids "
                          f"({len(rows)}, {len(cols)})")
    lo = min(rows.lower, cols.lower)
    hi = max(rows.upper, cols.upper)
    return Kernel(KernelFamily.TABULATED, {}, lo, hi, name, rows, cols, m)


def kernel_from_spec(spec):
    """Build a kernel from ``{"family", "params", "domain"}``."""
    try:
        family = KernelFamily(spec["family"])
        params = dict(spec.get("params", {}))
        lower, upper = (float(v) for v in spec["domain"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"invalid kernel spec {spec!r}: {exc}") from exc
    if family is KernelFamily.BROWNIAN_MIN:
        return brownian_min(lower, upper)
    if family is KernelFamily.SHIFTED_MIN:
        return shifted_min(float(params["c"]), lower, upper)
    if family is KernelFamily.GAUSSIAN_RBF:
        return gaussian_rbf(float(params["lengthscale"]), lower, upper)
    raise DomainError("tabulated kernels cannot be built from a spec")


def eval_kernel(k: Kernel, s: float, t: float) -> float:
    """Evaluate ``k(s, t)`` at a single pair of points."""
    return float(k(s, t))


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Symmetric kernel matrix with the diagonal jitter that made it factorizable.

    ``chol`` is the lower Cholesky factor of ``values + jitter * I``.
    """

    values: np.ndarray
    jitter: float
    chol: np.ndarray = field(repr=False)

    def solve(self, b):
        return sla.cho_solve((self.chol, True), b)


def factorize_psd(matrix, ladder=JITTER_LADDER) -> GramMatrix:
    """Cholesky-factorize a symmetric PSD matrix, escalating jitter on failure.

    Jitter values in ``ladder`` are relative to the largest diagonal entry.
    Raises :class:`NumericalError` with the smallest eigenvalue when every
    rung fails.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("Gram matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-14 * max(1.0, np.max(np.abs(a), initial=0))):
        raise NumericalError("Gram matrix is not symmetric")
    if a.shape[0] == 0:
        return GramMatrix(_readonly(a), 0.0, np.zeros((0, 0)))
    scale = float(np.max(np.diag(a)))
    scale = scale if scale > 0 else 1.0
    for rel in ladder:
        jitter = rel * scale
        try:
            chol = np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
        except np.linalg.LinAlgError:
            continue
        return GramMatrix(_readonly(a), jitter, chol)
    lam_min = float(np.linalg.eigvalsh(a)[0])
    raise NumericalError(
        f"Cholesky failed after maximum jitter {ladder[-1] * scale:.3e}; "
        f"smallest eigenvalue {lam_min:.3e}")


def assemble_gram(k: Kernel, g: Grid, ladder=JITTER_LADDER) -> GramMatrix:
    """Gram matrix ``G[i, j] = k(g_i, g_j)`` with jitter per ``ladder``."""
    return factorize_psd(k.matrix(g), ladder)


def min_eigenvalue(matrix):
    return float(np.linalg.eigvalsh(np.asarray(matrix, dtype=float))[0])


def is_psd(matrix, rtol=PSD_RTOL):
    """Smallest eigenvalue is at least ``-rtol`` times the largest diagonal entry."""
    m = np.asarray(matrix, dtype=float)
    if m.size == 0:
        return True
    tol = rtol * max(float(np.max(np.diag(m))), 0.0)
    return min_eigenvalue(0.5 * (m + m.T)) >= -tol


def derivative(values, grid):
    """Central differences in the interior, one-sided at both endpoints."""
    return np.gradient(np.asarray(values, dtype=float), grid.points, edge_order=1)


def h1_inner_product(k: Kernel, f_values, f_derivative, g_values, g_derivative,
                     quadrature: Grid) -> float:
    r"""Inner product of the RKHS of ``c**2 + min(s, t)`` on ``[a, b]``.

    .. math::

        \langle f, g \rangle = \frac{f(a) g(a)}{c^2 + a} + \int_a^b f'(t) g'(t)\,dt

    The integral uses the trapezoidal rule on ``quadrature``, whose first
    point must be ``a``. Derivatives passed as ``None`` are computed with
    :func:`derivative`.

    Parameters
    ----------
    k : Kernel
        A shifted-min (or Brownian-min, i.e. ``c = 0``) kernel.
    f_values, g_values : array_like
        Function values on the quadrature grid.
    f_derivative, g_derivative : array_like or None
        Derivative values on the quadrature grid.
    quadrature : Grid
        Trapezoidal nodes covering ``[a, b]``.
    """
    if k.family is KernelFamily.SHIFTED_MIN:
        c2 = k.params["c"] ** 2
    elif k.family is KernelFamily.BROWNIAN_MIN:
        c2 = 0.0
    else:
        raise DomainError("H1 inner product is defined for min-type kernels only")
    a = quadrature.points[0]
    if c2 + a <= 0:
        raise DomainError(f"c^2 + a must be positive, got {c2 + a}")
    f = np.asarray(f_values, dtype=float)
    g = np.asarray(g_values, dtype=float)
    df = derivative(f, quadrature) if f_derivative is None else np.asarray(f_derivative, float)
    dg = derivative(g, quadrature) if g_derivative is None else np.asarray(g_derivative, float)
    return float(f[0] * g[0] / (c2 + a) + np.trapezoid(df * dg, quadrature.points))


__all__ = [
    "Grid", "Kernel", "KernelFamily", "GramMatrix", "JITTER_LADDER", "PSD_RTOL",
    "brownian_min", "shifted_min", "gaussian_rbf", "tabulated", "kernel_from_spec",
    "eval_kernel", "assemble_gram", "factorize_psd", "is_psd", "min_eigenvalue",
    "derivative", "h1_inner_product",
]
