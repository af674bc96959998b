"""
C1-smooth isogeometric space over an AS-G1 multi-patch spline.

Unknowns are the patch-local scalar coefficients plus, per interface and
per boundary curve, the coefficients of the trace g0 in S^{p,r+1} and of the
transversal derivative g1 in S^{p-1,r}.  The space is the kernel of

* trace matching  phi_1(0, xi) = g0 = phi_2(xi, 0),
* cleared transversal matching  d_s phi_1 - beta_1 d_t phi_1 = alpha_1 g1,
  -(d_t phi_2 - beta_2 d_s phi_2) = alpha_2 g1,
* boundary curves with alpha = 1, beta = 0,
* C2 at every vertex in tangent-plane coordinates,

all collocated at the Greville points of S^{p,r}.  Only coefficients in the
first two rows along a side are touched by these rows, so the nullspace is
extracted on that block and all other coefficients stay free.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from utils.shared import ASG1_TOL, NULLSPACE_TOL
from .construction import check_asg1
from .errors import InvalidArgumentError, NotAnalysisSuitableError
from .gluing import GluingData, GluingEntry, gluing_for
from .mpatch import MultiPatchSpline, SquareFrame
from .numerics import lsq_min_norm, null_space
from .splinecore import SplinePatch, companion_spaces, eval_basis, eval_patch, greville

logger = logging.getLogger(__name__)

_ORDERS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


@dataclass
class C1Space:
    """
    Basis of the C1 space as columns over the concatenated patch coefficients.

    Columns are ordered interior first; the last ``num_boundary`` columns span
    a complement of the functions with vanishing boundary data.
    """

    geometry: MultiPatchSpline
    gluing: GluingData
    basis: sp.csc_matrix = field(repr=False)
    aux: np.ndarray = field(repr=False)
    aux_index: Dict[Tuple[str, int], Tuple[np.ndarray, np.ndarray]] = field(repr=False)
    constraints: np.ndarray = field(repr=False)
    touched: np.ndarray = field(repr=False)
    num_boundary: int = 0
    restrict_boundary: bool = True

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def num_interior(self) -> int:
        return self.dim - self.num_boundary

    @property
    def space(self):
        return self.geometry.space

    def patch_slice(self, patch: int) -> slice:
        n2 = self.space.n ** 2
        return slice(patch * n2, (patch + 1) * n2)

    def patch_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        """Patchwise coefficients (num_patches, n, n) of a coefficient vector."""
        n = self.space.n
        return np.asarray(self.basis @ np.asarray(coeffs, dtype=float)).reshape(-1, n, n)

    def boundary_rows(self) -> np.ndarray:
        return np.concatenate([np.concatenate(v) for k, v in sorted(self.aux_index.items()) if k[0] == 'boundary']
                              or [np.zeros(0, dtype=int)]).astype(int)


@dataclass
class DiscreteField:
    space: C1Space
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.dim,):
            raise InvalidArgumentError(f"field needs {self.space.dim} coefficients, got {self.coeffs.shape}")

    def patch_coeffs(self) -> np.ndarray:
        return self.space.patch_coeffs(self.coeffs)


class _RowBuilder:
    """Sparse constraint rows over the patch coefficients followed by the auxiliary unknowns."""

    def __init__(self, geometry: MultiPatchSpline):
        self.geometry = geometry
        self.n = geometry.space.n
        self.nphi = geometry.num_patches * self.n ** 2
        self.rows, self.cols, self.vals = [], [], []
        self.count = 0
        self.naux = 0

    def allocate(self, size: int) -> np.ndarray:
        start = self.nphi + self.naux
        self.naux += size
        return np.arange(start, start + size)

    def frame_values(self, patch: int, frame: SquareFrame, s, t, order: Tuple[int, int]):
        """Local derivative values (m, n*n) and their global columns."""
        n = self.n
        space = self.geometry.space
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s, t = np.broadcast_arrays(s, t)
        bs = eval_basis(space, s, order[0])[order[0]]
        bt = eval_basis(space, t, order[1])[order[1]]
        a, b = np.meshgrid(np.arange(n), np.arange(n), indexing='ij')
        cols = patch * n * n + frame.flat_index(a, b, n).ravel()
        return np.einsum('qa,qb->qab', bs, bt).reshape(s.size, -1), cols

    def add(self, blocks: Sequence[Tuple[np.ndarray, np.ndarray]]) -> None:
        """Append rows given as a sum of (values (m, c), columns (c,)) blocks."""
        m = blocks[0][0].shape[0]
        for values, cols in blocks:
            r, c = np.nonzero(values)
            self.rows.append(r + self.count)
            self.cols.append(cols[c])
            self.vals.append(values[r, c])
        self.count += m

    def matrix(self) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((0, self.nphi + self.naux))
        A = sp.coo_matrix((np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
                          shape=(self.count, self.nphi + self.naux)).tocsr()
        A.sum_duplicates()
        return A


def _side_blocks(rb: _RowBuilder, patch: int, frame: SquareFrame, zeta: np.ndarray, on_u0: bool):
    zero = np.zeros_like(zeta)
    s, t = (zero, zeta) if on_u0 else (zeta, zero)
    return {o: rb.frame_values(patch, frame, s, t, o) for o in ((0, 0), (1, 0), (0, 1))}


def _scaled(block, factor):
    values, cols = block
    return np.asarray(factor).reshape(-1, 1) * values, cols


def _vertex_rows(rb: _RowBuilder, vx, src) -> None:
    """Pairwise equality of value, tangent gradient and tangent Hessian at the vertex."""
    frame0, patch0 = vx.frames[0], vx.patches[0]
    fs, ft = src.local(patch0, frame0, 0.0, 0.0, ((1, 0), (0, 1)))[:, 0]
    t1 = fs / np.linalg.norm(fs)
    normal = np.cross(fs, ft)
    normal /= np.linalg.norm(normal)
    P = np.vstack([t1, np.cross(normal, t1)])
    functionals = []
    for patch, frame in zip(vx.patches, vx.frames):
        d = src.local(patch, frame, 0.0, 0.0, _ORDERS[1:])[:, 0]
        J = P @ d[:2].T
        Jinv = np.linalg.inv(J)
        Y = np.array([[P @ d[2], P @ d[3]], [P @ d[3], P @ d[4]]])  # (a, b, k)
        vals = {o: rb.frame_values(patch, frame, 0.0, 0.0, o) for o in _ORDERS}
        cols = vals[(0, 0)][1]
        phi = {o: v[0][0] for o, v in vals.items()}
        grad_st = np.vstack([phi[(1, 0)], phi[(0, 1)]])
        grad_y = Jinv.T @ grad_st
        hess = np.array([[phi[(2, 0)], phi[(1, 1)]], [phi[(1, 1)], phi[(0, 2)]]])
        corrected = hess - np.einsum('abk,kc->abc', Y, grad_y)
        hess_y = np.einsum('ak,abc,bl->klc', Jinv, corrected, Jinv)
        rows = np.vstack([phi[(0, 0)], grad_y, hess_y[0, 0], hess_y[0, 1], hess_y[1, 1]])
        functionals.append((rows, cols))
    for (ra, ca), (rb_, cb) in zip(functionals[:-1], functionals[1:]):
        rb.add([(ra, ca), (-rb_, cb)])


def _interface_rows(rb: _RowBuilder, geometry: MultiPatchSpline, entry: GluingEntry, view, zeta, g0, g1, spaces):
    trace, transversal = spaces
    n0 = eval_basis(trace, zeta)[0]
    n1 = eval_basis(transversal, zeta)[0]
    one = _side_blocks(rb, view.patch1, view.frame1, zeta, True)
    two = _side_blocks(rb, view.patch2, view.frame2, zeta, False)
    a1, a2 = entry.side1.alpha(zeta), entry.side2.alpha(zeta)
    b1, b2 = entry.side1.beta(zeta), entry.side2.beta(zeta)
    rb.add([one[(0, 0)], (-n0, g0)])
    rb.add([two[(0, 0)], (-n0, g0)])
    rb.add([one[(1, 0)], _scaled(one[(0, 1)], -b1), _scaled((n1, g1), -a1)])
    rb.add([_scaled(two[(0, 1)], -1.0), _scaled(two[(1, 0)], b2), _scaled((n1, g1), -a2)])


def _boundary_rows(rb: _RowBuilder, patch: int, frame: SquareFrame, zeta, g0, g1, spaces):
    trace, transversal = spaces
    one = _side_blocks(rb, patch, frame, zeta, True)
    rb.add([one[(0, 0)], (-eval_basis(trace, zeta)[0], g0)])
    rb.add([one[(1, 0)], (-eval_basis(transversal, zeta)[0], g1)])


def assemble_constraints(geometry: MultiPatchSpline, gluing: GluingData, restrict_boundary: bool = True):
    """
    Sparse constraint matrix of the C1 space and the auxiliary layout.

    Returns:
        (matrix over patch coefficients + auxiliary unknowns, aux_index, number of patch coefficients)
    """
    topo = geometry.topology
    spaces = companion_spaces(geometry.space)
    zeta = greville(geometry.space)
    rb = _RowBuilder(geometry)
    aux_index: Dict[Tuple[str, int], Tuple[np.ndarray, np.ndarray]] = {}
    for rec in topo.interfaces:
        g0, g1 = rb.allocate(spaces[0].n), rb.allocate(spaces[1].n)
        aux_index[('interface', rec.id)] = (g0 - rb.nphi, g1 - rb.nphi)
        _interface_rows(rb, geometry, gluing[rec.id], topo.interface_view(rec.id), zeta, g0, g1, spaces)
    if restrict_boundary:
        for bc in topo.boundary:
            g0, g1 = rb.allocate(spaces[0].n), rb.allocate(spaces[1].n)
            aux_index[('boundary', bc.id)] = (g0 - rb.nphi, g1 - rb.nphi)
            _boundary_rows(rb, bc.patch, bc.frame, zeta, g0, g1, spaces)
    src = geometry.source()
    for vx in topo.vertices:
        if vx.valency >= 2:
            _vertex_rows(rb, vx, src)
    return rb.matrix(), aux_index, rb.nphi


def _normalize_rows(A: sp.csr_matrix) -> sp.csr_matrix:
    norms = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    norms[norms == 0.0] = 1.0
    return sp.diags(1.0 / norms) @ A


def build_c1_space(F: MultiPatchSpline, gluing: Optional[GluingData] = None, restrict_boundary: bool = True,
                   require_asg1: bool = True, tol: float = NULLSPACE_TOL) -> C1Space:
    """
    Basis of the C1 space over an AS-G1 geometry as a numerical nullspace.

    Args:
        F: AS-G1 multi-patch spline
        gluing: its gluing data (estimated from F when None)
        restrict_boundary: restrict trace and normal derivative on boundary curves
        require_asg1: refuse geometries failing the AS-G1 check
        tol: relative singular value threshold of the nullspace

    Raises:
        NotAnalysisSuitableError: the AS-G1 residual of F exceeds the tolerance
    """
    gluing = gluing_for(F, gluing)
    if require_asg1 and F.topology.interfaces:
        report = check_asg1(F, gluing, samples=33)
        if not report.passed(ASG1_TOL):
            raise NotAnalysisSuitableError(
                f"geometry is not AS-G1: residual {report.max_residual:.3e} at interface {report.worst_interface}",
                interface=report.worst_interface, residual=report.max_residual)
    A, aux_index, nphi = assemble_constraints(F, gluing, restrict_boundary)
    A = _normalize_rows(A).tocsc()
    naux = A.shape[1] - nphi
    touched = np.unique(A[:, :nphi].nonzero()[1])
    untouched = np.setdiff1d(np.arange(nphi), touched)
    block_cols = np.concatenate([touched, nphi + np.arange(naux)])
    dense = A[:, block_cols].toarray()
    Z, rank = null_space(dense, tol)
    nt = touched.size
    num_boundary = 0
    if Z.shape[1]:
        Q, R = scipy.linalg.qr(Z[:nt], mode='economic')
        Zg = scipy.linalg.solve_triangular(R, Z[nt:].T, trans='T').T
        Z = np.vstack([Q, Zg])
        bnd = np.concatenate([np.concatenate(v) for k, v in sorted(aux_index.items()) if k[0] == 'boundary']
                             or [np.zeros(0, dtype=int)]).astype(int)
        if bnd.size:
            _, s, vt = scipy.linalg.svd(Z[nt + bnd], full_matrices=True, lapack_driver='gesvd')
            num_boundary = int(np.count_nonzero(s > tol * s[0])) if s.size and s[0] > 0 else 0
            V = vt.T
            Z = Z @ np.hstack([V[:, num_boundary:], V[:, :num_boundary]])
    Zphi = Z[:nt]
    Zphi[np.abs(Zphi) < 1e-15] = 0.0
    ident = sp.csc_matrix((np.ones(untouched.size), (untouched, np.arange(untouched.size))),
                          shape=(nphi, untouched.size))
    block = sp.csc_matrix(Zphi)
    block = sp.csc_matrix((block.data, touched[block.indices], block.indptr), shape=(nphi, Z.shape[1]))
    basis = sp.hstack([ident, block], format='csc')
    aux = np.hstack([np.zeros((naux, untouched.size)), Z[nt:]])
    space = C1Space(F, gluing, basis, aux, aux_index, dense, touched, num_boundary, restrict_boundary)
    logger.info("C1 space: dim %d (%d free coefficients, %d touched, rank %d, %d boundary columns)",
                space.dim, untouched.size, nt, rank, num_boundary)
    return space


def eval_c1(space: C1Space, field: DiscreteField, patch: int, xi1, xi2,
            derivs: Sequence[Tuple[int, int]] = ((0, 0),)) -> np.ndarray:
    """Pullback values and partials of a discrete field on one patch, shape (len(derivs), m)."""
    if not 0 <= patch < space.geometry.num_patches:
        raise InvalidArgumentError(f"patch {patch} out of range")
    if any(a + b > 2 for a, b in derivs):
        raise InvalidArgumentError("derivatives up to total order 2 are supported")
    coeffs = field.patch_coeffs()[patch]
    return eval_patch(SplinePatch(space.space, coeffs[:, :, None]), xi1, xi2, derivs)[:, :, 0]


def _stored_rows(space: C1Space, patch: int, xi1, xi2, order) -> np.ndarray:
    n = space.space.n
    b1 = eval_basis(space.space, xi1, order[0])[order[0]]
    b2 = eval_basis(space.space, xi2, order[1])[order[1]]
    return np.einsum('qa,qb->qab', b1, b2).reshape(len(b1), n * n)


def surface_gradient(geometry: MultiPatchSpline, patch: int, xi1, xi2, d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """Tangential gradient J g^{-1} (d1, d2) for parametric partials of shape (m, c); returns (m, c, 3)."""
    fs, ft = geometry.evaluate(patch, xi1, xi2, ((1, 0), (0, 1)))
    g11 = np.einsum('md,md->m', fs, fs)
    g12 = np.einsum('md,md->m', fs, ft)
    g22 = np.einsum('md,md->m', ft, ft)
    det = g11 * g22 - g12 ** 2
    c1 = (g22[:, None] * d1 - g12[:, None] * d2) / det[:, None]
    c2 = (-g12[:, None] * d1 + g11[:, None] * d2) / det[:, None]
    return c1[:, :, None] * fs[:, None, :] + c2[:, :, None] * ft[:, None, :]


def verify_c1(space: C1Space, samples: int = 33, coeffs: Optional[np.ndarray] = None) -> Dict[str, float]:
    """
    Value and tangential-gradient jumps across all interfaces.

    Args:
        space: the C1 space
        samples: equispaced points per interface
        coeffs: (dim, c) coefficient columns to test (all basis members when None)

    Returns:
        max absolute value jump, max absolute gradient jump and the gradient jump
        relative to the largest gradient seen on the interface (floored at 1)
    """
    geometry = space.geometry
    members = space.basis if coeffs is None else space.basis @ sp.csc_matrix(coeffs)
    xi = np.linspace(0.0, 1.0, samples)
    zero = np.zeros_like(xi)
    worst = {'value_jump': 0.0, 'gradient_jump': 0.0, 'relative_gradient_jump': 0.0}
    for rec in geometry.topology.interfaces:
        view = geometry.topology.interface_view(rec.id)
        sides = []
        for patch, frame, s, t in ((view.patch1, view.frame1, zero, xi), (view.patch2, view.frame2, xi, zero)):
            u, v = frame.to_stored(s, t)
            block = members[space.patch_slice(patch)]
            val, d1, d2 = (np.asarray((sp.csr_matrix(_stored_rows(space, patch, u, v, o)) @ block).todense())
                           for o in ((0, 0), (1, 0), (0, 1)))
            sides.append((val, surface_gradient(geometry, patch, u, v, d1, d2)))
        (v1, g1), (v2, g2) = sides
        value_jump = float(np.abs(v1 - v2).max(initial=0.0))
        grad_jump = float(np.linalg.norm(g1 - g2, axis=2).max(initial=0.0))
        scale = max(1.0, float(np.linalg.norm(g1, axis=2).max(initial=0.0)))
        worst['value_jump'] = max(worst['value_jump'], value_jump)
        worst['gradient_jump'] = max(worst['gradient_jump'], grad_jump)
        worst['relative_gradient_jump'] = max(worst['relative_gradient_jump'], grad_jump / scale)
    logger.info("C1 verification: value jump %.2e, gradient jump %.2e (relative %.2e)",
                worst['value_jump'], worst['gradient_jump'], worst['relative_gradient_jump'])
    return worst


def constraint_residual(space: C1Space, patch_coeffs: np.ndarray) -> float:
    """
    Relative residual of the C1 constraints for patchwise coefficients, with the
    auxiliary edge coefficients chosen optimally.
    """
    phi = np.asarray(patch_coeffs, dtype=float).reshape(-1)
    nt = space.touched.size
    A_phi, A_aux = space.constraints[:, :nt], space.constraints[:, nt:]
    r = A_phi @ phi[space.touched]
    g = lsq_min_norm(A_aux, -r)
    scale = max(float(np.linalg.norm(phi[space.touched])), np.finfo(float).tiny)
    return float(np.linalg.norm(r + A_aux @ g)) / scale
