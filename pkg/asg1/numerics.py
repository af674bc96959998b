"""
Dense linear-algebra and quadrature kernel shared by the construction, the
C1 space and the Galerkin solver.

All routines are pure functions of their arguments and may be called from
any number of worker threads.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from utils.shared import FEASIBILITY_TOL, SADDLE_RANK_TOL
from .errors import DegenerateSystemError, InfeasibleConstraintsError, InvalidArgumentError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights of a quadrature rule on an interval."""

    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Apply the rule to samples taken at ``nodes`` (first axis)."""
        return np.tensordot(self.weights, np.asarray(values, dtype=float), axes=(0, 0))


def gauss_legendre(q: int, interval: Tuple[float, float] = (0.0, 1.0)) -> QuadratureRule:
    """
    Gauss-Legendre rule with ``q`` points mapped to ``interval``.

    Args:
        q: number of points, exact for polynomials up to degree 2q-1
        interval: (a, b) with a < b

    Returns:
        QuadratureRule on [a, b]
    """
    if int(q) < 1:
        raise InvalidArgumentError(f"quadrature needs at least one point, got q={q}")
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise InvalidArgumentError(f"empty quadrature interval [{a}, {b}]")
    t, w = np.polynomial.legendre.leggauss(int(q))
    half = 0.5 * (b - a)
    return QuadratureRule(nodes=half * t + 0.5 * (a + b), weights=half * w)


def composite_gauss(breaks: Sequence[float], q: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``q`` points on every span between consecutive breakpoints."""
    breaks = np.asarray(breaks, dtype=float)
    rules = [gauss_legendre(q, (lo, hi)) for lo, hi in zip(breaks[:-1], breaks[1:]) if hi > lo]
    return QuadratureRule(nodes=np.concatenate([r.nodes for r in rules]),
                          weights=np.concatenate([r.weights for r in rules]))


@dataclass
class QuadraticProgram:
    """
    Equality-constrained quadratic minimization

        min 1/2 x^T H x + c^T x   subject to   A x = b.

    ``c`` and ``b`` may carry several right-hand-side columns (one per
    coordinate of a point-valued unknown); they share ``H`` and ``A``.
    """

    H: np.ndarray
    c: np.ndarray
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = self.H.shape[0]
        if self.H.shape != (n, n):
            raise InvalidArgumentError(f"Hessian must be square, got {self.H.shape}")
        scale = max(1.0, float(np.abs(self.H).max(initial=0.0)))
        if np.abs(self.H - self.H.T).max(initial=0.0) > 1e-12 * scale:
            raise InvalidArgumentError("Hessian is not symmetric")
        self.c = np.asarray(self.c, dtype=float)
        if self.c.shape[0] != n:
            raise InvalidArgumentError(f"linear term has {self.c.shape[0]} rows, expected {n}")
        if self.A is None:
            self.A = np.zeros((0, n))
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        if self.b is None:
            self.b = np.zeros((self.A.shape[0],) + self.c.shape[1:])
        self.b = np.asarray(self.b, dtype=float)
        if self.b.shape[0] != self.A.shape[0]:
            raise InvalidArgumentError("constraint matrix and right-hand side disagree in length")

    @property
    def size(self) -> int:
        return self.H.shape[0]


def _svd_rank(s: np.ndarray, rtol: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def null_space(A: np.ndarray, rtol: float = SADDLE_RANK_TOL) -> Tuple[np.ndarray, int]:
    """
    Orthonormal basis of the numerical nullspace of ``A``.

    Args:
        A: matrix with n columns
        rtol: singular values below rtol * largest are treated as zero

    Returns:
        (Z, rank) with Z of shape (n, n - rank)
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(n), 0
    _, s, vt = scipy.linalg.svd(A, full_matrices=True, lapack_driver='gesvd')
    rank = _svd_rank(s, rtol)
    return vt[rank:].T.copy(), rank


def lsq_min_norm(A: np.ndarray, b: np.ndarray, rtol: Optional[float] = None) -> np.ndarray:
    """
    Minimal-norm least-squares solution of ``A x = b``.

    Args:
        A: (m, n) matrix, any rank
        b: right-hand side with m rows (one or several columns)
        rtol: relative singular value cutoff (LAPACK default when None)

    Returns:
        x with n rows
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0 or A.size == 0:
        return np.zeros((A.shape[1],) + b.shape[1:])
    x, _, _, _ = scipy.linalg.lstsq(A, b, cond=rtol, lapack_driver='gelsd')
    return x


def solve_saddle(qp: QuadraticProgram, rtol: float = SADDLE_RANK_TOL,
                 feasibility_tol: float = FEASIBILITY_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve the KKT system of an equality-constrained quadratic program.

    The constraint block is factored by SVD; redundant rows are dropped at
    ``rtol`` and the reduced Hessian on the constraint nullspace is solved
    in the pseudoinverse sense, so rank-deficient systems give the
    minimal-norm nullspace component.

    Args:
        qp: the quadratic program
        rtol: relative rank tolerance
        feasibility_tol: bound on ||A x - b|| relative to 1 + ||b||

    Returns:
        (x, multipliers) with H x + c + A^T multipliers = 0 and A x = b
    """
    H, c, A, b = qp.H, qp.c, qp.A, qp.b
    n, m = qp.size, A.shape[0]
    b_norm = float(np.linalg.norm(b))

    if m:
        u, s, vt = scipy.linalg.svd(A, full_matrices=True, lapack_driver='gesvd')
        rank = _svd_rank(s, rtol)
        ur, sr, vr = u[:, :rank], s[:rank], vt[:rank]
        coeff = (ur.T @ b) / (sr[:, None] if b.ndim > 1 else sr)
        x_part = vr.T @ coeff
        residual = float(np.linalg.norm(A @ x_part - b))
        if residual > feasibility_tol * (1.0 + b_norm):
            raise InfeasibleConstraintsError(
                f"constraints of {qp.label or 'problem'} are inconsistent (residual {residual:.3e})",
                residual=residual, entity=qp.label)
        Z = vt[rank:].T
    else:
        rank = 0
        x_part = np.zeros_like(c)
        Z = np.eye(n)

    x = x_part
    if Z.shape[1]:
        Hz = Z.T @ H @ Z
        g = Z.T @ (H @ x_part + c)
        w, Q = scipy.linalg.eigh(0.5 * (Hz + Hz.T))
        w_max = float(np.abs(w).max(initial=0.0))
        if w_max == 0.0:
            keep = np.zeros(w.shape, dtype=bool)
        else:
            if w.min() < -1e-8 * w_max:
                raise DegenerateSystemError(
                    f"reduced Hessian of {qp.label or 'problem'} is indefinite", stage=qp.label)
            keep = w > rtol * w_max
        proj = Q.T @ g
        dropped = proj[~keep]
        if dropped.size and np.linalg.norm(dropped) > 1e-8 * max(1.0, float(np.linalg.norm(g))):
            raise DegenerateSystemError(
                f"objective of {qp.label or 'problem'} is unbounded on the constraint nullspace",
                stage=qp.label)
        scale = w[keep][:, None] if proj.ndim > 1 else w[keep]
        y = Q[:, keep] @ (-proj[keep] / scale)
        x = x_part + Z @ y

    gradient = H @ x + c
    if m:
        mult = ur @ ((vr @ (-gradient)) / (sr[:, None] if gradient.ndim > 1 else sr))
        stationarity = gradient + A.T @ mult
    else:
        mult = np.zeros((0,) + c.shape[1:])
        stationarity = gradient
    scale = 1.0 + b_norm + float(np.linalg.norm(c)) + float(np.linalg.norm(H)) * float(np.linalg.norm(x))
    stat_norm = float(np.linalg.norm(stationarity))
    if stat_norm > 1e-8 * scale:
        raise DegenerateSystemError(
            f"KKT stationarity of {qp.label or 'problem'} not reached ({stat_norm:.3e})", stage=qp.label)
    logger.debug("saddle %s: n=%d m=%d rank=%d", qp.label, n, m, rank)
    return x, mult
