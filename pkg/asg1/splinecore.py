"""
Univariate and tensor-product B-spline spaces with uniform inner knots.

A space S^{p,r}_k lives on [0, 1] with an open knot vector and k inner
knots i/(k+1), each of multiplicity p - r.  Coefficient arrays of tensor
patches are stored as (n, n, dim) with the second parameter fastest, i.e.
flat index j1 * n + j2.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.interpolate import BSpline

from .errors import DomainError, InvalidArgumentError
from .numerics import QuadratureRule, composite_gauss

logger = logging.getLogger(__name__)

_DOMAIN_SLACK = 1e-14


@dataclass(frozen=True)
class SplineSpace1D:
    """Spline space S^{p,r}_k on [0, 1]."""

    p: int
    r: int
    k: int

    def __post_init__(self):
        if self.p < 1:
            raise InvalidArgumentError(f"degree must be at least 1, got p={self.p}")
        if not 0 <= self.r <= self.p - 1:
            raise InvalidArgumentError(f"regularity must satisfy 0 <= r <= p-1, got r={self.r}, p={self.p}")
        if self.k < 0:
            raise InvalidArgumentError(f"number of inner knots must be nonnegative, got k={self.k}")

    @property
    def n(self) -> int:
        return self.p + 1 + self.k * (self.p - self.r)

    @cached_property
    def breaks(self) -> np.ndarray:
        """Distinct knot values 0, 1/(k+1), ..., 1."""
        return np.arange(self.k + 2) / (self.k + 1)

    @cached_property
    def knots(self) -> np.ndarray:
        inner = np.repeat(self.breaks[1:-1], self.p - self.r)
        return np.concatenate([np.zeros(self.p + 1), inner, np.ones(self.p + 1)])

    @cached_property
    def _spline(self) -> BSpline:
        return BSpline(self.knots, np.eye(self.n), self.p, extrapolate=True)

    @property
    def mesh_size(self) -> float:
        return 1.0 / (self.k + 1)

    def __str__(self) -> str:
        return f"S^{{{self.p},{self.r}}}_{self.k}"


@dataclass(frozen=True)
class TensorSplineSpace:
    """Tensor product of a univariate space with itself."""

    factor: SplineSpace1D

    @property
    def dim(self) -> int:
        return self.factor.n ** 2


@dataclass
class SplinePatch:
    """Tensor-product spline map with coefficient array of shape (n, n, d)."""

    space: SplineSpace1D
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.space.n
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 2 and c.shape[0] == n * n:
            c = c.reshape(n, n, c.shape[1])
        elif c.ndim == 1 and c.size == n * n:
            c = c.reshape(n, n, 1)
        if c.shape[:2] != (n, n):
            raise InvalidArgumentError(f"patch needs {n}x{n} coefficients, got shape {c.shape}")
        self.coeffs = c

    @property
    def flat(self) -> np.ndarray:
        """Coefficients as (n*n, d) with j1 * n + j2 ordering."""
        return self.coeffs.reshape(-1, self.coeffs.shape[2])


def dim(space: SplineSpace1D) -> int:
    return space.n


def companion_spaces(space: SplineSpace1D) -> Tuple[SplineSpace1D, SplineSpace1D]:
    """
    Trace space S^{p,r+1}_k and transversal space S^{p-1,r}_k.

    Raises:
        InvalidArgumentError: when r + 1 reaches the degree
    """
    if space.r + 1 > space.p - 1:
        raise InvalidArgumentError(
            f"companion spaces need r+1 <= p-1, got p={space.p}, r={space.r}")
    return SplineSpace1D(space.p, space.r + 1, space.k), SplineSpace1D(space.p - 1, space.r, space.k)


def _check_domain(xi: np.ndarray) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size and (xi.min() < -_DOMAIN_SLACK or xi.max() > 1.0 + _DOMAIN_SLACK):
        raise DomainError(f"parameter outside [0, 1]: range [{xi.min()}, {xi.max()}]")
    return np.clip(xi, 0.0, 1.0)


def eval_basis(space: SplineSpace1D, xi, max_deriv: int = 0) -> np.ndarray:
    """
    Dense basis table.

    Args:
        space: univariate space
        xi: parameter values in [0, 1]; xi = 1 uses the left limit
        max_deriv: highest derivative order

    Returns:
        Array of shape (max_deriv + 1, len(xi), n)
    """
    xi = _check_domain(xi)
    table = np.zeros((max_deriv + 1, xi.size, space.n))
    for d in range(min(max_deriv, space.p) + 1):
        table[d] = space._spline(xi, nu=d)
    return table


def greville(space: SplineSpace1D) -> np.ndarray:
    """Knot averages of p consecutive knots, one per basis function."""
    t, p = space.knots, space.p
    g = np.array([t[j + 1:j + p + 1].sum() / p for j in range(space.n)])
    g[0], g[-1] = 0.0, 1.0
    return g


def eval_function(space: SplineSpace1D, coeffs: np.ndarray, xi, deriv: int = 0) -> np.ndarray:
    """Evaluate a univariate spline (scalar or point-valued coefficients)."""
    return eval_basis(space, xi, deriv)[deriv] @ np.asarray(coeffs, dtype=float)


def eval_patch(patch: SplinePatch, xi1, xi2, derivs: Iterable[Tuple[int, int]] = ((0, 0),)) -> np.ndarray:
    """
    Pointwise evaluation of partial derivatives of a tensor patch.

    Args:
        patch: tensor spline patch
        xi1, xi2: arrays of equal length with the two parameters
        derivs: multi-orders (l1, l2)

    Returns:
        Array of shape (len(derivs), m, d)
    """
    derivs = list(derivs)
    top = max(max(l1, l2) for l1, l2 in derivs)
    b1 = eval_basis(patch.space, xi1, top)
    b2 = eval_basis(patch.space, xi2, top)
    if b1.shape[1] != b2.shape[1]:
        raise InvalidArgumentError("parameter arrays must have equal length")
    return np.stack([np.einsum('ai,aj,ijd->ad', b1[l1], b2[l2], patch.coeffs) for l1, l2 in derivs])


def eval_patch_grid(patch: SplinePatch, u, v, l1: int = 0, l2: int = 0) -> np.ndarray:
    """Evaluate one partial derivative on the tensor grid u x v, shape (len(u), len(v), d)."""
    b1 = eval_basis(patch.space, u, l1)[l1]
    b2 = eval_basis(patch.space, v, l2)[l2]
    return np.einsum('ai,bj,ijd->abd', b1, b2, patch.coeffs)


def quadrature(space: SplineSpace1D, order: Optional[int] = None) -> QuadratureRule:
    """Composite Gauss rule with ``order`` points per knot span (default p + 1)."""
    return composite_gauss(space.breaks, order or space.p + 1)


def gram_1d(space: SplineSpace1D, da: int = 0, db: int = 0, order: Optional[int] = None) -> np.ndarray:
    """Matrix of integrals of products of basis derivatives of orders da and db."""
    rule = quadrature(space, order)
    table = eval_basis(space, rule.nodes, max(da, db))
    return np.einsum('q,qi,qj->ij', rule.weights, table[da], table[db])


def l2_project(space: SplineSpace1D, target: Callable[[np.ndarray], np.ndarray],
               order: Optional[int] = None) -> np.ndarray:
    """
    L2 projection of a function on [0, 1] onto the space.

    Args:
        space: univariate space
        target: callable returning samples (m,) or (m, d) at an array of parameters
        order: Gauss points per knot span (default p + 1)

    Returns:
        Coefficients (n,) or (n, d)
    """
    rule = quadrature(space, order)
    basis = eval_basis(space, rule.nodes)[0]
    mass = np.einsum('q,qi,qj->ij', rule.weights, basis, basis)
    values = np.asarray(target(rule.nodes), dtype=float)
    load = np.tensordot(basis * rule.weights[:, None], values, axes=(0, 0))
    return scipy.linalg.solve(mass, load, assume_a='pos')


def l2_project_patch(space: SplineSpace1D, target: Callable[[np.ndarray, np.ndarray], np.ndarray],
                     order: Optional[int] = None) -> np.ndarray:
    """
    L2 projection of a function on [0, 1]^2 onto the tensor space.

    ``target(u, v)`` receives the two quadrature axes and returns samples of
    shape (len(u), len(v)) or (len(u), len(v), d).

    Returns:
        Coefficients of shape (n, n, d)
    """
    rule = quadrature(space, order)
    basis = eval_basis(space, rule.nodes)[0]
    mass = np.einsum('q,qi,qj->ij', rule.weights, basis, basis)
    values = np.asarray(target(rule.nodes, rule.nodes), dtype=float)
    if values.ndim == 2:
        values = values[:, :, None]
    wb = basis * rule.weights[:, None]
    load = np.einsum('ai,bj,abd->ijd', wb, wb, values)
    factor = scipy.linalg.cho_factor(mass)
    half = scipy.linalg.cho_solve(factor, load.reshape(space.n, -1)).reshape(load.shape)
    full = scipy.linalg.cho_solve(factor, half.transpose(1, 0, 2).reshape(space.n, -1))
    return full.reshape(space.n, space.n, -1).transpose(1, 0, 2)


def refine_dyadic(space: SplineSpace1D, level: int) -> SplineSpace1D:
    """Space with k' = 2^L (k+1) - 1 inner knots; the original knots are a subset."""
    if level < 0:
        raise InvalidArgumentError(f"refinement level must be nonnegative, got {level}")
    if level == 0:
        return space
    return SplineSpace1D(space.p, space.r, 2 ** level * (space.k + 1) - 1)


def is_nested(coarse: SplineSpace1D, fine: SplineSpace1D) -> bool:
    if (coarse.p, coarse.r) != (fine.p, fine.r):
        return False
    ratio, rest = divmod(fine.k + 1, coarse.k + 1)
    return rest == 0 and ratio & (ratio - 1) == 0


def prolongation(coarse: SplineSpace1D, fine: SplineSpace1D) -> np.ndarray:
    """
    Matrix mapping coarse coefficients to fine coefficients of the same spline,
    obtained by interpolation at the fine Greville abscissae.
    """
    if not is_nested(coarse, fine):
        raise InvalidArgumentError(f"{coarse} is not dyadically nested in {fine}")
    g = greville(fine)
    c_coarse = eval_basis(coarse, g)[0]
    c_fine = eval_basis(fine, g)[0]
    P = scipy.linalg.solve(c_fine, c_coarse)
    P[np.abs(P) < 1e-15] = 0.0
    return P


def refine_patch(patch: SplinePatch, level: int) -> SplinePatch:
    """Exact representation of a patch in the dyadically refined space."""
    fine = refine_dyadic(patch.space, level)
    if fine == patch.space:
        return SplinePatch(patch.space, patch.coeffs.copy())
    P = prolongation(patch.space, fine)
    return SplinePatch(fine, np.einsum('ai,bj,ijd->abd', P, P, patch.coeffs))


def interpolate_patch(space: SplineSpace1D, target: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Tensor interpolation at the Greville grid; returns coefficients (n, n, d)."""
    g = greville(space)
    values = np.asarray(target(g, g), dtype=float)
    if values.ndim == 2:
        values = values[:, :, None]
    C = eval_basis(space, g)[0]
    half = np.linalg.solve(C, values.reshape(space.n, -1)).reshape(values.shape)
    full = np.linalg.solve(C, half.transpose(1, 0, 2).reshape(space.n, -1))
    return full.reshape(space.n, space.n, -1).transpose(1, 0, 2)
