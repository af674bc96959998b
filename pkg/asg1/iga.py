"""
Galerkin discretization of fourth-order problems over the C1 space:

    dirichlet:  Delta^2 u = f in Omega,  u = g1, du/dn = g2 on the boundary;
    reaction:   Delta^2 u + lambda_r u = f on a closed surface.

Delta is the Laplace-Beltrami operator of the geometry, applied to pullbacks:

    Delta phi = g^{ab} d_ab phi - g^{ab} g^{cd} (d_ab F . d_d F) d_c phi.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from utils.shared import DEFAULT_REACTION
from .c1space import C1Space, DiscreteField, build_c1_space
from .errors import DegenerateSystemError, InvalidArgumentError, ProblemMismatchError, RegularityError
from .gluing import GluingData
from .mpatch import MultiPatchSpline
from .numerics import lsq_min_norm
from .splinecore import (SplinePatch, companion_spaces, eval_basis, eval_patch, greville, is_nested,
                         l2_project, prolongation, quadrature)

logger = logging.getLogger(__name__)

DIRICHLET = 'dirichlet'
REACTION = 'reaction'


@dataclass(frozen=True)
class ManufacturedSolution:
    """Ambient solution u(x) with gradient and Hessian, plus the source it induces."""

    name: str
    source: Callable[[np.ndarray], np.ndarray]
    value: Optional[Callable[[np.ndarray], np.ndarray]] = None
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    description: str = ""

    @property
    def has_exact(self) -> bool:
        return self.value is not None


def _cos4sin4(x):
    return np.cos(4 * x[:, 0]) * np.sin(4 * x[:, 1])


def _cos4sin4_grad(x):
    c, s = np.cos(4 * x[:, 0]), np.sin(4 * x[:, 0])
    cy, sy = np.cos(4 * x[:, 1]), np.sin(4 * x[:, 1])
    return np.stack([-4 * s * sy, 4 * c * cy, np.zeros(len(x))], axis=1)


def _cos4sin4_hess(x):
    u = _cos4sin4(x)
    mixed = -16 * np.sin(4 * x[:, 0]) * np.cos(4 * x[:, 1])
    h = np.zeros((len(x), 3, 3))
    h[:, 0, 0] = h[:, 1, 1] = -16 * u
    h[:, 0, 1] = h[:, 1, 0] = mixed
    return h


MANUFACTURED: Dict[str, ManufacturedSolution] = {
    'cos4sin4': ManufacturedSolution(
        'cos4sin4', source=lambda x: 1024.0 * _cos4sin4(x), value=_cos4sin4, gradient=_cos4sin4_grad,
        hessian=_cos4sin4_hess, description="u = cos(4 x1) sin(4 x2) on planar domains"),
    'cos-half-product': ManufacturedSolution(
        'cos-half-product', source=lambda x: np.prod(np.cos(0.5 * x), axis=1),
        description="f = cos(x1/2) cos(x2/2) cos(x3/2), no closed-form solution"),
}


@dataclass
class ProblemSpec:
    kind: str
    source: Callable[[np.ndarray], np.ndarray]
    g1: Optional[Callable[[np.ndarray], np.ndarray]] = None
    g2: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    g1_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    reaction: float = DEFAULT_REACTION
    exact: Optional[ManufacturedSolution] = None

    def __post_init__(self):
        if self.kind not in (DIRICHLET, REACTION):
            raise InvalidArgumentError(f"unknown problem kind {self.kind!r}")
        if self.kind == REACTION and not self.reaction > 0:
            raise InvalidArgumentError(f"reaction coefficient must be positive, got {self.reaction}")
        if self.kind == DIRICHLET and (self.g1 is None or self.g2 is None):
            raise InvalidArgumentError("dirichlet problems need boundary value and normal derivative")

    @classmethod
    def dirichlet(cls, solution: ManufacturedSolution) -> 'ProblemSpec':
        if not solution.has_exact:
            raise InvalidArgumentError(f"{solution.name} has no exact solution for boundary data")
        grad = solution.gradient
        return cls(DIRICHLET, solution.source, g1=solution.value,
                   g2=lambda x, normal: np.einsum('md,md->m', grad(x), normal),
                   g1_gradient=grad, exact=solution)

    @classmethod
    def reaction_problem(cls, solution: ManufacturedSolution, reaction: float = DEFAULT_REACTION) -> 'ProblemSpec':
        return cls(REACTION, solution.source, reaction=reaction, exact=solution if solution.has_exact else None)

    def validate(self, geometry: MultiPatchSpline) -> None:
        closed = not geometry.topology.boundary
        if self.kind == REACTION and not closed:
            raise ProblemMismatchError("the reaction problem needs a closed surface")
        if self.kind == DIRICHLET and closed:
            raise ProblemMismatchError("the dirichlet problem needs a surface with boundary")


@dataclass
class SurfaceMetrics:
    metric: np.ndarray
    inverse: np.ndarray
    area: np.ndarray
    normal: np.ndarray


def _metrics(d1: np.ndarray, d2: np.ndarray) -> SurfaceMetrics:
    g = np.stack([np.stack([np.sum(d1 * d1, -1), np.sum(d1 * d2, -1)], -1),
                  np.stack([np.sum(d2 * d1, -1), np.sum(d2 * d2, -1)], -1)], -2)
    cross = np.cross(d1, d2)
    area = np.linalg.norm(cross, axis=-1)
    if np.any(area <= 0.0):
        raise RegularityError("degenerate surface Jacobian at a quadrature point")
    det = area ** 2
    inv = np.stack([np.stack([g[..., 1, 1], -g[..., 0, 1]], -1),
                    np.stack([-g[..., 1, 0], g[..., 0, 0]], -1)], -2) / det[..., None, None]
    return SurfaceMetrics(g, inv, area, cross / area[..., None])


def surface_metrics(F: MultiPatchSpline, patch: int, xi1, xi2) -> SurfaceMetrics:
    """First fundamental form, its inverse, area element and unit normal at points of one patch."""
    d1, d2 = F.evaluate(patch, xi1, xi2, ((1, 0), (0, 1)))
    return _metrics(d1, d2)


@dataclass
class _PatchGrid:
    """Geometry and Laplace-Beltrami coefficients on the tensor quadrature grid of one patch."""

    points: np.ndarray
    weights: np.ndarray
    lb: Dict[Tuple[int, int], np.ndarray]
    first: Tuple[np.ndarray, np.ndarray]
    metrics: SurfaceMetrics
    tables: np.ndarray
    spans: List[Tuple[np.ndarray, np.ndarray]]


_SECOND = ((2, 0), (1, 1), (0, 2))


def _grid(F: MultiPatchSpline, patch: int, order: int) -> _PatchGrid:
    space = F.space
    rule = quadrature(space, order)
    tables = eval_basis(space, rule.nodes, 2)
    C = F.patches[patch].coeffs
    D = {(a, b): np.einsum('ai,bj,ijd->abd', tables[a], tables[b], C)
         for a, b in ((0, 0), (1, 0), (0, 1)) + _SECOND}
    met = _metrics(D[1, 0], D[0, 1])
    gi = met.inverse
    firsts = (D[1, 0], D[0, 1])
    christ = np.zeros(gi.shape[:2] + (2,))
    for (a, b), key in (((0, 0), (2, 0)), ((0, 1), (1, 1)), ((1, 0), (1, 1)), ((1, 1), (0, 2))):
        for c in range(2):
            for d in range(2):
                christ[..., c] -= gi[..., a, b] * gi[..., c, d] * np.sum(D[key] * firsts[d], -1)
    lb = {(2, 0): gi[..., 0, 0], (1, 1): 2.0 * gi[..., 0, 1], (0, 2): gi[..., 1, 1],
          (1, 0): christ[..., 0], (0, 1): christ[..., 1]}
    q = order
    spans = []
    for e in range(space.k + 1):
        rows = np.arange(e * q, (e + 1) * q)
        cols = np.flatnonzero(np.any(tables[0][rows] != 0.0, axis=0))
        spans.append((rows, cols))
    return _PatchGrid(D[0, 0], np.outer(rule.weights, rule.weights) * met.area, lb, firsts, met, tables, spans)


def _laplace_table(grid: _PatchGrid, rows1, rows2, cols1, cols2) -> np.ndarray:
    """Laplace-Beltrami of local basis products, shape (q*q, nloc*nloc)."""
    t = grid.tables
    out = 0.0
    for (a, b), coef in grid.lb.items():
        prod = np.einsum('ai,bj->abij', t[a][np.ix_(rows1, cols1)], t[b][np.ix_(rows2, cols2)])
        out = out + coef[np.ix_(rows1, rows2)][:, :, None, None] * prod
    return out.reshape(len(rows1) * len(rows2), -1)


def _assemble_patch(F: MultiPatchSpline, problem: ProblemSpec, patch: int, order: int):
    n = F.space.n
    grid = _grid(F, patch, order)
    f = problem.source(grid.points.reshape(-1, 3)).reshape(grid.weights.shape)
    t0 = grid.tables[0]
    K_rows, K_cols, K_vals, M_vals = [], [], [], []
    load = np.zeros((n, n))
    for rows1, cols1 in grid.spans:
        for rows2, cols2 in grid.spans:
            w = grid.weights[np.ix_(rows1, rows2)].ravel()
            L = _laplace_table(grid, rows1, rows2, cols1, cols2)
            V = np.einsum('ai,bj->abij', t0[np.ix_(rows1, cols1)], t0[np.ix_(rows2, cols2)]).reshape(len(w), -1)
            idx = (cols1[:, None] * n + cols2[None, :]).ravel() + patch * n * n
            K_rows.append(np.repeat(idx, idx.size))
            K_cols.append(np.tile(idx, idx.size))
            K_vals.append((L.T @ (w[:, None] * L)).ravel())
            M_vals.append((V.T @ (w[:, None] * V)).ravel())
            fl = V.T @ (w * f[np.ix_(rows1, rows2)].ravel())
            load[np.ix_(cols1, cols2)] += fl.reshape(len(cols1), len(cols2))
    return (np.concatenate(K_rows), np.concatenate(K_cols), np.concatenate(K_vals),
            np.concatenate(M_vals), load.ravel())


@dataclass
class GalerkinSystem:
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    load: np.ndarray
    matrix: sp.csr_matrix
    rhs: np.ndarray


def assemble(problem: ProblemSpec, space: C1Space, threads: int = 1, order: Optional[int] = None) -> GalerkinSystem:
    """
    Patch matrices of int Delta phi_i Delta phi_j (+ lambda_r int phi_i phi_j) and the load,
    reduced to the C1 basis.
    """
    F = space.geometry
    problem.validate(F)
    order = order or F.space.p + 2
    size = F.num_patches * F.space.n ** 2
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda i: _assemble_patch(F, problem, i, order), range(F.num_patches)))
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    K = sp.coo_matrix((np.concatenate([p[2] for p in parts]), (rows, cols)), shape=(size, size)).tocsr()
    M = sp.coo_matrix((np.concatenate([p[3] for p in parts]), (rows, cols)), shape=(size, size)).tocsr()
    load = np.concatenate([p[4] for p in parts])
    system = K + problem.reaction * M if problem.kind == REACTION else K
    B = space.basis
    matrix = (B.T @ (system @ B)).tocsr()
    matrix = 0.5 * (matrix + matrix.T)
    logger.info("assembled %s system: dim %d, nnz %d", problem.kind, matrix.shape[0], matrix.nnz)
    return GalerkinSystem(K, M, load, matrix.tocsr(), B.T @ load)


def _tangential_derivative(problem: ProblemSpec, x: np.ndarray, dt: np.ndarray, curve, t: np.ndarray) -> np.ndarray:
    if problem.g1_gradient is not None:
        return np.einsum('md,md->m', problem.g1_gradient(x), dt)
    h = 1e-4
    out = np.empty(t.size)
    for j, tj in enumerate(t):
        if tj < 2 * h:
            pts, w = tj + h * np.arange(5), np.array([-25.0, 48.0, -36.0, 16.0, -3.0])
        elif tj > 1 - 2 * h:
            pts, w = tj - h * np.arange(5), -np.array([-25.0, 48.0, -36.0, 16.0, -3.0])
        else:
            pts, w = tj + h * np.arange(-2, 3), np.array([1.0, -8.0, 0.0, 8.0, -1.0])
        out[j] = np.dot(w, problem.g1(curve(pts))) / (12 * h)
    return out


def impose_dirichlet(space: C1Space, problem: ProblemSpec) -> Tuple[np.ndarray, float]:
    """
    Coefficients of the boundary columns matching the L2 projections of the
    boundary value onto S^{p,r+1} and of the induced transversal derivative onto
    S^{p-1,r} along every boundary curve.

    Returns:
        (boundary column coefficients, least-squares residual of the boundary data)
    """
    F = space.geometry
    if not space.restrict_boundary or not F.topology.boundary:
        raise ProblemMismatchError("dirichlet data needs a space with boundary functionals")
    trace, transversal = companion_spaces(F.space)
    order = F.space.p + 2
    src = F.source()
    target = np.zeros(space.aux.shape[0])
    for bc in F.topology.boundary:
        frame, patch = bc.frame, bc.patch

        def curve(t):
            t = np.clip(np.atleast_1d(t), 0.0, 1.0)
            return src.local(patch, frame, np.zeros_like(t), t, ((0, 0),))[0]

        def transversal_target(t):
            x, ds, dt = src.local(patch, frame, np.zeros_like(t), t, ((0, 0), (1, 0), (0, 1)))
            tang = np.einsum('md,md->m', ds, dt) / np.einsum('md,md->m', dt, dt)
            inward = ds - tang[:, None] * dt
            b = np.linalg.norm(inward, axis=1)
            outward = -inward / b[:, None]
            return tang * _tangential_derivative(problem, x, dt, curve, t) - b * problem.g2(x, outward)

        g0_rows, g1_rows = space.aux_index[('boundary', bc.id)]
        target[g0_rows] = l2_project(trace, lambda t: problem.g1(curve(t)), order)
        target[g1_rows] = l2_project(transversal, transversal_target, order)
    rows = space.boundary_rows()
    Gb = space.aux[np.ix_(rows, np.arange(space.num_interior, space.dim))]
    coeffs = lsq_min_norm(Gb, target[rows])
    residual = float(np.linalg.norm(Gb @ coeffs - target[rows])) / max(1.0, float(np.linalg.norm(target[rows])))
    logger.debug("dirichlet data: %d boundary columns, residual %.2e", coeffs.size, residual)
    return coeffs, residual


def _factor_solve(matrix: sp.spmatrix, rhs: np.ndarray, label: str) -> np.ndarray:
    if matrix.shape[0] == 0:
        return np.zeros(0)
    try:
        lu = spla.splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        raise DegenerateSystemError(f"{label} system is singular ({exc}); the C1 space may be deficient",
                                    stage=label) from exc
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise DegenerateSystemError(f"{label} solve produced non-finite values", stage=label)
    res = float(np.linalg.norm(matrix @ x - rhs)) / max(float(np.linalg.norm(rhs)), np.finfo(float).tiny)
    if res > 1e-10:
        logger.warning("%s solve: relative residual %.2e", label, res)
    return x


def solve(problem: ProblemSpec, space: C1Space, threads: int = 1) -> DiscreteField:
    """Galerkin solution over the C1 space (boundary columns fixed for dirichlet problems)."""
    start = time.perf_counter()
    system = assemble(problem, space, threads)
    c = np.zeros(space.dim)
    if problem.kind == DIRICHLET:
        ni = space.num_interior
        c_b, _ = impose_dirichlet(space, problem)
        c[ni:] = c_b
        A = system.matrix.tocsc()
        rhs = system.rhs[:ni] - A[:ni, ni:] @ c_b
        c[:ni] = _factor_solve(A[:ni, :ni], rhs, DIRICHLET)
    else:
        c = _factor_solve(system.matrix, system.rhs, REACTION)
    logger.info("%s solve: dim %d in %.2f s", problem.kind, space.dim, time.perf_counter() - start)
    return DiscreteField(space, c)


def _field_on_grid(grid: _PatchGrid, coeffs: np.ndarray) -> Dict[Tuple[int, int], np.ndarray]:
    t = grid.tables
    return {(a, b): t[a] @ coeffs @ t[b].T for a, b in ((0, 0), (1, 0), (0, 1)) + _SECOND}


def _exact_on_grid(grid: _PatchGrid, F: MultiPatchSpline, patch: int, exact: ManufacturedSolution):
    """Pullback derivatives of an ambient function by the chain rule."""
    shape = grid.weights.shape
    x = grid.points.reshape(-1, 3)
    u = exact.value(x)
    g = exact.gradient(x)
    H = exact.hessian(x)
    space = F.space
    t = grid.tables
    C = F.patches[patch].coeffs
    D = {(a, b): np.einsum('ai,bj,ijd->abd', t[a], t[b], C).reshape(-1, 3) for a, b in ((1, 0), (0, 1)) + _SECOND}
    out = {(0, 0): u, (1, 0): np.sum(g * D[1, 0], 1), (0, 1): np.sum(g * D[0, 1], 1)}
    firsts = {0: D[1, 0], 1: D[0, 1]}
    for (a, b) in _SECOND:
        i, j = (0, 0) if (a, b) == (2, 0) else ((0, 1) if (a, b) == (1, 1) else (1, 1))
        out[a, b] = np.einsum('md,mde,me->m', firsts[i], H, firsts[j]) + np.sum(g * D[a, b], 1)
    return {k: v.reshape(shape) for k, v in out.items()}


def _norms_of(grid: _PatchGrid, e: Dict[Tuple[int, int], np.ndarray]) -> Tuple[float, float, float]:
    gi = grid.metrics.inverse
    w = grid.weights
    l2 = float(np.sum(w * e[0, 0] ** 2))
    grad = (gi[..., 0, 0] * e[1, 0] ** 2 + 2 * gi[..., 0, 1] * e[1, 0] * e[0, 1] + gi[..., 1, 1] * e[0, 1] ** 2)
    h1 = float(np.sum(w * grad))
    lap = sum(coef * e[key] for key, coef in grid.lb.items())
    h2 = float(np.sum(w * lap ** 2))
    return l2, h1, h2


def _sum_norms(F: MultiPatchSpline, per_patch, threads: int, order: Optional[int]) -> Tuple[float, float, float]:
    order = order or F.space.p + 2
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda i: per_patch(i, _grid(F, i, order)), range(F.num_patches)))
    total = np.sum(np.array(parts), axis=0)
    return tuple(float(np.sqrt(max(v, 0.0))) for v in total)


def error_norms(u_h: DiscreteField, exact: ManufacturedSolution, threads: int = 1,
                order: Optional[int] = None) -> Tuple[float, float, float]:
    """L2 error, H1-seminorm error and L2 error of the Laplace-Beltrami images."""
    if not exact.has_exact:
        raise InvalidArgumentError(f"{exact.name} has no exact solution")
    F = u_h.space.geometry
    coeffs = u_h.patch_coeffs()

    def per_patch(i, grid):
        h = _field_on_grid(grid, coeffs[i])
        ex = _exact_on_grid(grid, F, i, exact)
        return _norms_of(grid, {k: ex[k] - h[k] for k in h})

    return _sum_norms(F, per_patch, threads, order)


def estimators_h_h2(coarse: DiscreteField, fine: DiscreteField, threads: int = 1) -> Tuple[float, float, float]:
    """Norms of u_{h/2} - u_h with the coarse solution prolonged into the fine space."""
    cs, fs = coarse.space.space, fine.space.space
    if not is_nested(cs, fs) or coarse.space.geometry.num_patches != fine.space.geometry.num_patches:
        raise InvalidArgumentError(f"{cs} is not nested in {fs}")
    P = prolongation(cs, fs)
    cc = np.einsum('ai,pij,bj->pab', P, coarse.patch_coeffs(), P)
    diff = fine.patch_coeffs() - cc
    return _sum_norms(fine.space.geometry, lambda i, grid: _norms_of(grid, _field_on_grid(grid, diff[i])),
                      threads, None)


@dataclass
class ConvergenceLedger:
    """Per-level errors (or h-h/2 estimators) and observed orders log2(e_L / e_{L+1})."""

    frame: pd.DataFrame
    measure: str = 'error'
    notes: List[str] = field(default_factory=list)

    COLUMNS = ('level', 'h', 'dim', 'eL2', 'eH1', 'eH2', 'oL2', 'oH1', 'oH2')

    @classmethod
    def from_rows(cls, rows: List[Dict[str, float]], measure: str, notes=None) -> 'ConvergenceLedger':
        frame = pd.DataFrame(rows)
        for key in ('L2', 'H1', 'H2'):
            e = frame[f'e{key}'].to_numpy(dtype=float)
            orders = np.full(e.shape, np.nan)
            with np.errstate(divide='ignore', invalid='ignore'):
                orders[1:] = np.log2(e[:-1] / e[1:])
            frame[f'o{key}'] = orders
        return cls(frame, measure, list(notes or []))

    def final_orders(self) -> Tuple[float, float, float]:
        valid = self.frame.dropna(subset=['oL2', 'oH1', 'oH2'])
        if valid.empty:
            return (np.nan, np.nan, np.nan)
        last = valid.iloc[-1]
        return float(last['oL2']), float(last['oH1']), float(last['oH2'])

    def to_records(self) -> List[Dict[str, float]]:
        return self.frame.to_dict(orient='records')


def convergence_study(problem: ProblemSpec, F: MultiPatchSpline, levels: int, gluing: Optional[GluingData] = None,
                      threads: int = 1) -> ConvergenceLedger:
    """
    Solve on F refined dyadically ``levels`` times (level 0 = F itself).

    With an exact solution the ledger holds true errors (estimators as sL2/sH1/sH2);
    otherwise the h-h/2 estimator of level L compares levels L and L+1.
    """
    if levels < 1:
        raise InvalidArgumentError(f"need at least one level, got {levels}")
    problem.validate(F)
    fields: List[DiscreteField] = []
    rows: List[Dict[str, float]] = []
    for level in range(levels):
        G = F.refined(level)
        t = time.perf_counter()
        space = build_c1_space(G, gluing, restrict_boundary=True)
        u = solve(problem, space, threads)
        row = {'level': level, 'k': G.space.k, 'h': 1.0 / (G.space.k + 1), 'dim': space.dim}
        if problem.exact is not None:
            row['eL2'], row['eH1'], row['eH2'] = error_norms(u, problem.exact, threads)
        row['seconds'] = time.perf_counter() - t
        if fields:
            est = estimators_h_h2(fields[-1], u, threads)
            rows[-1]['sL2'], rows[-1]['sH1'], rows[-1]['sH2'] = est
        fields.append(u)
        rows.append(row)
        logger.info("level %d: k=%d dim=%d (%.1f s)", level, G.space.k, space.dim, row['seconds'])
    for row in rows:
        for key in ('sL2', 'sH1', 'sH2'):
            row.setdefault(key, np.nan)
    measure = 'error'
    notes = []
    if problem.exact is None:
        measure = 'estimator'
        for row in rows:
            row['eL2'], row['eH1'], row['eH2'] = row['sL2'], row['sH1'], row['sH2']
        rows = rows[:-1] if len(rows) > 1 else rows
    if problem.kind == REACTION:
        notes.append(f"reaction coefficient {problem.reaction} (default {DEFAULT_REACTION})")
    return ConvergenceLedger.from_rows(rows, measure, notes)
