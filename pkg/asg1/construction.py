"""
Construction of analysis-suitable G1 multi-patch splines.

The local method fixes the control points in three stages, each a set of
independent equality-constrained least-squares problems:

1. vertex stage: corner entries (a + b <= 2) of every patch around a vertex
   of valency >= 2, from derivative fidelity at the vertex;
2. interface stage: the first two control rows along every interface plus
   the edge functions f0, f1, from edge fidelity and Greville collocation;
3. patch stage: all remaining control points, from weighted-H1 fidelity.

Shared control points along interfaces are represented once, so the trace
continuity holds structurally.  The global variant poses all constraints at
once with the patch fidelity as objective.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from utils.shared import ASG1_TOL, DEFAULT_SAMPLES, FEASIBILITY_TOL, SADDLE_RANK_TOL
from .errors import AdmissibilityError, DegenerateSystemError
from .gluing import GluingData, GluingEntry, beta_composite, estimate_gluing, g1_residual
from .mpatch import (MultiPatchSpline, SquareFrame, SurfaceSource, Topology, check_regular,
                     shared_dof_map)
from .numerics import QuadraticProgram, solve_saddle
from .splinecore import (SplinePatch, SplineSpace1D, companion_spaces, eval_basis, gram_1d,
                         greville, l2_project, quadrature)

logger = logging.getLogger(__name__)

VERTEX, INTERFACE, PATCH = 'vertex', 'interface', 'patch'
_VERTEX_ORDERS = ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
_EDGE_ORDERS = ((0, 0), (1, 0), (0, 1))


@dataclass(frozen=True)
class ConstructionParams:
    """Target space S^{p,r}_k and solver settings; sigma = 1/(p(k+1))."""

    p: int
    r: int
    k: int
    quad_order: Optional[int] = None
    rank_tol: float = SADDLE_RANK_TOL
    feasibility_tol: float = FEASIBILITY_TOL
    asg1_tol: float = ASG1_TOL

    @property
    def sigma(self) -> float:
        return 1.0 / (self.p * (self.k + 1))

    @property
    def order(self) -> int:
        return self.quad_order or self.p + 1

    @property
    def space(self) -> SplineSpace1D:
        return SplineSpace1D(self.p, self.r, self.k)

    def check_admissible(self, source_space: Optional[SplineSpace1D] = None) -> None:
        """
        Raises:
            AdmissibilityError: naming the violated bound
        """
        p, r, k = self.p, self.r, self.k
        if p < 3:
            raise AdmissibilityError(f"degree p={p} is too low, p >= 3 is required", bound="p >= 3")
        if not 1 <= r <= p - 2:
            raise AdmissibilityError(f"regularity r={r} outside 1 <= r <= p-2 for p={p}",
                                     bound="1 <= r <= p-2")
        if k * (p - r - 1) < 5 - p:
            raise AdmissibilityError(
                f"k={k} too small for (p, r)=({p}, {r}): k >= (5-p)/(p-r-1) = {(5 - p) / (p - r - 1):.3g}",
                bound="k >= (5-p)/(p-r-1)")
        if source_space is None:
            return
        ps, rs, ks = source_space.p, source_space.r, source_space.k
        if p < ps:
            raise AdmissibilityError(f"target degree {p} below input degree {ps}", bound="p >= p_input")
        if r > rs:
            raise AdmissibilityError(f"target regularity {r} above input regularity {rs}",
                                     bound="r <= r_input")
        ratio, rest = divmod(k + 1, ks + 1)
        if rest or ratio & (ratio - 1):
            raise AdmissibilityError(f"k={k} is not of the form 2^l (k_input+1) - 1 with k_input={ks}",
                                     bound="k = 2^l (k_input+1) - 1")


@dataclass
class EdgeFunctions:
    """Coefficients of f0 in S^{p,r+1} and f1 in S^{p-1,r} for one interface."""

    interface: int
    f0: np.ndarray
    f1: np.ndarray


@dataclass
class StageSolution:
    stage: str
    entity: int
    columns: np.ndarray
    values: np.ndarray = field(repr=False)
    objective: float = 0.0
    residual: float = 0.0
    multipliers: np.ndarray = field(default=None, repr=False)
    seconds: float = 0.0

    def summary(self) -> Dict[str, object]:
        return {'stage': self.stage, 'entity': self.entity, 'unknowns': int(self.columns.size),
                'constraints': 0 if self.multipliers is None else int(self.multipliers.shape[0]),
                'objective': self.objective, 'residual': self.residual}


@dataclass
class ConstructionResult:
    geometry: MultiPatchSpline
    gluing: GluingData
    edges: Dict[int, EdgeFunctions]
    stages: List[StageSolution]
    mode: str
    timings: Dict[str, float] = field(default_factory=dict)
    input_g1_residual: float = 0.0


def tau(vertex) -> int:
    """0 for an inner vertex, 1 for a boundary vertex."""
    return 0 if vertex.is_inner else 1


def stage_ownership(topology: Topology, maps: Sequence[np.ndarray], ndof: int) -> List[Tuple[str, int]]:
    """
    Assign every control point to the stage that determines it.

    Corner entries a + b <= 2 at vertices of valency >= 2 go to the vertex,
    the remaining entries of the first two rows along an interface to the
    interface, everything else to its patch.
    """
    n = maps[0].shape[0]
    owner: List[Optional[Tuple[str, int]]] = [None] * ndof
    a, b = np.meshgrid(np.arange(3), np.arange(3), indexing='ij')
    tri = a + b <= 2
    for vx in topology.vertices:
        if vx.valency < 2:
            continue
        for patch, frame in zip(vx.patches, vx.frames):
            j1, j2 = frame.index(a[tri], b[tri], n)
            for dof in maps[patch][j1, j2]:
                owner[dof] = owner[dof] or (VERTEX, vx.id)
    rows = np.repeat(np.arange(2), n)
    along = np.tile(np.arange(n), 2)
    for rec in topology.interfaces:
        fa, fb = rec.frames
        for patch, (j1, j2) in ((rec.patch_a, fa.index(rows, along, n)), (rec.patch_b, fb.index(along, rows, n))):
            for dof in maps[patch][j1, j2]:
                owner[dof] = owner[dof] or (INTERFACE, rec.id)
    for i, m in enumerate(maps):
        for dof in m.ravel():
            owner[dof] = owner[dof] or (PATCH, i)
    return owner


class ConstructionContext:
    """Column layout, ownership and the running control-point state of one construction."""

    def __init__(self, S: SurfaceSource, topology: Topology, params: ConstructionParams, gluing: GluingData):
        self.S, self.topology, self.params, self.gluing = S, topology, params, gluing
        self.space = params.space
        self.trace, self.transversal = companion_spaces(self.space)
        n = self.space.n
        self.maps, self.ndof = shared_dof_map(topology, n)
        width = self.trace.n + self.transversal.n
        self.edge_offset = {rec.id: self.ndof + pos * width for pos, rec in enumerate(topology.interfaces)}
        self.size = self.ndof + width * len(topology.interfaces)
        self.owner = stage_ownership(topology, self.maps, self.ndof)
        self.values = np.zeros((self.size, 3))
        self.assigned = np.zeros(self.size, dtype=bool)

    def f0_columns(self, interface: int) -> np.ndarray:
        start = self.edge_offset[interface]
        return np.arange(start, start + self.trace.n)

    def f1_columns(self, interface: int) -> np.ndarray:
        start = self.edge_offset[interface] + self.trace.n
        return np.arange(start, start + self.transversal.n)

    def owned(self, stage: str, entity: int) -> np.ndarray:
        return np.array([d for d in range(self.ndof) if self.owner[d] == (stage, entity)], dtype=int)

    def patch_rows(self, patch: int, frame: SquareFrame, s, t, orders) -> np.ndarray:
        """Rows of d_s^a d_t^b F_patch(s, t) in the local frame, shape (len(orders), m, size)."""
        n = self.space.n
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s, t = np.broadcast_arrays(s, t)
        m = s.size
        top = max(max(o) for o in orders)
        bs, bt = eval_basis(self.space, s, top), eval_basis(self.space, t, top)
        a, b = np.meshgrid(np.arange(n), np.arange(n), indexing='ij')
        j1, j2 = frame.index(a, b, n)
        dofs = self.maps[patch][j1, j2].ravel()
        out = np.zeros((len(orders), m, self.size))
        for o, (da, db) in enumerate(orders):
            vals = np.einsum('qa,qb->qab', bs[da], bt[db]).reshape(m, -1)
            np.add.at(out[o], (np.arange(m)[:, None], dofs[None, :]), vals)
        return out

    def edge_rows(self, columns: np.ndarray, space: SplineSpace1D, xi) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.zeros((xi.size, self.size))
        out[:, columns] = eval_basis(space, xi)[0]
        return out

    def commit(self, sol: StageSolution) -> None:
        if np.any(self.assigned[sol.columns]):
            raise DegenerateSystemError(f"{sol.stage} {sol.entity} reassigns fixed control points",
                                        stage=f"{sol.stage} {sol.entity}")
        self.values[sol.columns] = sol.values
        self.assigned[sol.columns] = True

    def geometry(self, name: str) -> MultiPatchSpline:
        coeffs = [self.values[m] for m in self.maps]
        return MultiPatchSpline(self.space, [SplinePatch(self.space, c) for c in coeffs], self.topology, name)

    def edges(self) -> Dict[int, EdgeFunctions]:
        return {i: EdgeFunctions(i, self.values[self.f0_columns(i)].copy(), self.values[self.f1_columns(i)].copy())
                for i in self.edge_offset}


def _vertex_constraints(ctx: ConstructionContext, vertex: int) -> np.ndarray:
    """Denominator-cleared f1 agreement and its first derivative at the vertex, per interface view."""
    sigma = ctx.params.sigma
    rows = []
    for view in ctx.topology.vertex_views(vertex):
        e = ctx.gluing.view(view)
        d1 = dict(zip(((1, 0), (0, 1), (1, 1), (0, 2)),
                      ctx.patch_rows(view.patch1, view.frame1, 0.0, 0.0, ((1, 0), (0, 1), (1, 1), (0, 2)))[:, 0]))
        d2 = dict(zip(((1, 0), (0, 1), (1, 1), (2, 0)),
                      ctx.patch_rows(view.patch2, view.frame2, 0.0, 0.0, ((1, 0), (0, 1), (1, 1), (2, 0)))[:, 0]))
        al1, al2 = float(e.side1.alpha(0.0)), float(e.side2.alpha(0.0))
        dal1, dal2 = float(e.side1.alpha(0.0, 1)), float(e.side2.alpha(0.0, 1))
        be1, be2 = float(e.side1.beta(0.0)), float(e.side2.beta(0.0))
        dbe1, dbe2 = float(e.side1.beta(0.0, 1)), float(e.side2.beta(0.0, 1))
        side1 = d1[1, 0] - be1 * d1[0, 1]
        side2 = d2[0, 1] - be2 * d2[1, 0]
        rows.append(sigma * (al2 * side1 + al1 * side2))
        rows.append(sigma ** 2 * (dal2 * side1 + al2 * (d1[1, 1] - dbe1 * d1[0, 1] - be1 * d1[0, 2])
                                  + dal1 * side2 + al1 * (d2[1, 1] - dbe2 * d2[1, 0] - be2 * d2[2, 0])))
    return np.array(rows).reshape(-1, ctx.size)


def _interface_constraints(ctx: ConstructionContext, interface: int) -> np.ndarray:
    """Greville collocation of the f0 and denominator-cleared f1 identities on both sides."""
    view = ctx.topology.interface_view(interface)
    e = ctx.gluing[interface]
    n, sigma = ctx.space.n, ctx.params.sigma
    zeta = greville(ctx.space)
    zero = np.zeros(n)
    v1, ds1, dt1 = ctx.patch_rows(view.patch1, view.frame1, zero, zeta, _EDGE_ORDERS)
    v2, ds2, dt2 = ctx.patch_rows(view.patch2, view.frame2, zeta, zero, _EDGE_ORDERS)
    n0 = ctx.edge_rows(ctx.f0_columns(interface), ctx.trace, zeta)
    n1 = ctx.edge_rows(ctx.f1_columns(interface), ctx.transversal, zeta)
    a1, a2 = e.side1.alpha(zeta)[:, None], e.side2.alpha(zeta)[:, None]
    b1, b2 = e.side1.beta(zeta)[:, None], e.side2.beta(zeta)[:, None]
    trace1 = v1 - n0
    trace2 = (v2 - n0)[3:n - 3]
    cross1 = sigma * (ds1 - b1 * dt1 - a1 * n1)
    cross2 = (sigma * (-(dt2 - b2 * ds2) - a2 * n1))[2:n - 2]
    return np.vstack([trace1, trace2, cross1, cross2])


def _solve_local(ctx: ConstructionContext, stage: str, entity: int, unknown: np.ndarray,
                 objective: Tuple[np.ndarray, np.ndarray, np.ndarray], constraints: np.ndarray,
                 pinned: Optional[Dict[int, np.ndarray]] = None) -> StageSolution:
    """Least-squares fidelity over ``unknown`` columns subject to ``constraints``, others fixed."""
    start = time.perf_counter()
    label = f"{stage} {entity}"
    rows, targets, weights = objective
    known = np.zeros(ctx.size, dtype=bool)
    known[ctx.assigned] = True
    fixed = ctx.values.copy()
    for col, value in (pinned or {}).items():
        known[col] = True
        fixed[col] = value
    involved = np.flatnonzero(np.any(rows != 0.0, axis=0) | np.any(constraints != 0.0, axis=0))
    missing = np.setdiff1d(involved[~known[involved]], unknown)
    if missing.size:
        raise DegenerateSystemError(f"{label} depends on undetermined columns {missing[:5].tolist()}",
                                    stage=label)
    kcols = involved[known[involved]]
    ru, rk = rows[:, unknown], rows[:, kcols]
    rhs = targets - rk @ fixed[kcols]
    wru = ru * weights[:, None]
    H = ru.T @ wru
    H = 0.5 * (H + H.T)
    qp = QuadraticProgram(H, -wru.T @ rhs, constraints[:, unknown], -constraints[:, kcols] @ fixed[kcols],
                          label=label)
    x, mult = solve_saddle(qp, rtol=ctx.params.rank_tol, feasibility_tol=ctx.params.feasibility_tol)
    misfit = ru @ x - rhs
    objective_value = float(np.sum(weights[:, None] * misfit ** 2))
    residual = float(np.abs(qp.A @ x - qp.b).max(initial=0.0))
    extra = [c for c in (pinned or {}) if c not in set(unknown.tolist())]
    cols = np.concatenate([unknown, np.array(extra, dtype=int)]).astype(int)
    values = np.vstack([x] + [fixed[c][None, :] for c in extra])
    seconds = time.perf_counter() - start
    logger.debug("%s: %d unknowns, %d constraints, objective %.3e, residual %.2e",
                 label, unknown.size, qp.A.shape[0], objective_value, residual)
    return StageSolution(stage, entity, cols, values, objective_value, residual, mult, seconds)


def vertex_step(ctx: ConstructionContext, vertex: int) -> Optional[StageSolution]:
    """
    Corner entries around one vertex; the vertex point itself is pinned to S.

    Returns:
        None for vertices of valency 1
    """
    vx = ctx.topology.vertices[vertex]
    if vx.valency < 2:
        return None
    sigma = ctx.params.sigma
    rows, targets, weights = [], [], []
    for patch, frame in zip(vx.patches, vx.frames):
        rows.append(ctx.patch_rows(patch, frame, 0.0, 0.0, _VERTEX_ORDERS)[:, 0])
        targets.append(ctx.S.local(patch, frame, 0.0, 0.0, _VERTEX_ORDERS)[:, 0])
        weights.append([sigma ** (a + b) for a, b in _VERTEX_ORDERS])
    corner = int(ctx.maps[vx.patches[0]][vx.frames[0].index(0, 0, ctx.space.n)])
    point = ctx.S.local(vx.patches[0], vx.frames[0], 0.0, 0.0, ((0, 0),))[0, 0]
    unknown = np.setdiff1d(ctx.owned(VERTEX, vertex), [corner])
    return _solve_local(ctx, VERTEX, vertex, unknown,
                        (np.vstack(rows), np.vstack(targets), np.concatenate(weights)),
                        _vertex_constraints(ctx, vertex), pinned={corner: point})


def interface_step(ctx: ConstructionContext, interface: int) -> StageSolution:
    """First two control rows of both sides plus f0, f1 of one interface."""
    view = ctx.topology.interface_view(interface)
    sigma = ctx.params.sigma
    rule = quadrature(ctx.space, ctx.params.order)
    zero = np.zeros_like(rule.nodes)
    rows, targets, weights = [], [], []
    for patch, frame, s, t in ((view.patch1, view.frame1, zero, rule.nodes),
                               (view.patch2, view.frame2, rule.nodes, zero)):
        rows.append(ctx.patch_rows(patch, frame, s, t, _EDGE_ORDERS).reshape(-1, ctx.size))
        targets.append(ctx.S.local(patch, frame, s, t, _EDGE_ORDERS).reshape(-1, 3))
        weights.append(np.concatenate([rule.weights * sigma ** (a + b) for a, b in _EDGE_ORDERS]))
    unknown = np.concatenate([ctx.owned(INTERFACE, interface), ctx.f0_columns(interface),
                              ctx.f1_columns(interface)])
    return _solve_local(ctx, INTERFACE, interface, unknown,
                        (np.vstack(rows), np.vstack(targets), np.concatenate(weights)),
                        _interface_constraints(ctx, interface))


def _patch_system(space: SplineSpace1D, sigma: float, order: int) -> np.ndarray:
    M = gram_1d(space, 0, 0, order)
    K = gram_1d(space, 1, 1, order)
    return np.kron(M, M) + sigma * (np.kron(K, M) + np.kron(M, K))


def _patch_load(S: SurfaceSource, patch: int, space: SplineSpace1D, sigma: float, order: int) -> np.ndarray:
    rule = quadrature(space, order)
    basis = eval_basis(space, rule.nodes, 1) * rule.weights[None, :, None]
    v = S.grid(patch, rule.nodes, rule.nodes, 0, 0)
    d1 = S.grid(patch, rule.nodes, rule.nodes, 1, 0)
    d2 = S.grid(patch, rule.nodes, rule.nodes, 0, 1)
    load = (np.einsum('ai,bj,abd->ijd', basis[0], basis[0], v)
            + sigma * (np.einsum('ai,bj,abd->ijd', basis[1], basis[0], d1)
                       + np.einsum('ai,bj,abd->ijd', basis[0], basis[1], d2)))
    return load.reshape(space.n ** 2, 3)


def patch_step(ctx: ConstructionContext, patch: int, gram: Optional[np.ndarray] = None) -> StageSolution:
    """Remaining control points of one patch by weighted-H1 fidelity with the rest held fixed."""
    start = time.perf_counter()
    sigma, order = ctx.params.sigma, ctx.params.order
    G = gram if gram is not None else _patch_system(ctx.space, sigma, order)
    load = _patch_load(ctx.S, patch, ctx.space, sigma, order)
    dofs = ctx.maps[patch].ravel()
    free = np.array([ctx.owner[d] == (PATCH, patch) for d in dofs])
    fixed = ~free
    if np.any(~ctx.assigned[dofs[fixed]]):
        raise DegenerateSystemError(f"patch {patch} starts before its vertex and interface stages",
                                    stage=f"patch {patch}")
    rhs = load[free] - G[np.ix_(free, fixed)] @ ctx.values[dofs[fixed]]
    try:
        factor = scipy.linalg.cho_factor(G[np.ix_(free, free)])
    except np.linalg.LinAlgError as exc:
        raise DegenerateSystemError(f"patch {patch} normal equations are singular: {exc}",
                                    stage=f"patch {patch}") from exc
    x = scipy.linalg.cho_solve(factor, rhs)
    seconds = time.perf_counter() - start
    logger.debug("patch %d: %d free control points", patch, int(free.sum()))
    return StageSolution(PATCH, patch, dofs[free], x, float(np.sum(x * (G[np.ix_(free, free)] @ x)) * 0.5
                                                          - np.sum(x * rhs)), 0.0, None, seconds)


def _prepare(S: SurfaceSource, topology: Topology, params: ConstructionParams,
             gluing: Optional[GluingData], threads: int) -> Tuple[ConstructionContext, float]:
    params.check_admissible(S.spline_space)
    if S.num_patches != topology.num_patches:
        raise AdmissibilityError("surface and topology disagree in patch count", bound="patches")
    check_regular(S)
    gluing = gluing if gluing is not None else estimate_gluing(S, topology, threads)
    residuals = g1_residual(S, topology, gluing, samples=33)
    worst = max(residuals.values(), default=0.0)
    if worst > 1e-2:
        logger.warning("input G1 residual %.3e with estimated linear gluing; the input may not be G1", worst)
    return ConstructionContext(S, topology, params, gluing), worst


def construct_local(S: SurfaceSource, topology: Topology, params: ConstructionParams,
                    gluing: Optional[GluingData] = None, threads: int = 1,
                    name: str = "asg1") -> ConstructionResult:
    """
    Three-stage local construction with barriers between the stages.

    Args:
        S: input surface
        topology: patch complex of S
        params: target space and tolerances
        gluing: gluing data (estimated from S when None)
        threads: workers per stage

    Returns:
        ConstructionResult with the AS-G1 geometry, edge functions and per-stage diagnostics
    """
    t0 = time.perf_counter()
    ctx, worst = _prepare(S, topology, params, gluing, threads)
    timings = {'setup': time.perf_counter() - t0}
    stages: List[StageSolution] = []
    gram = _patch_system(ctx.space, params.sigma, params.order)
    jobs = (
        (VERTEX, [vx.id for vx in topology.vertices], lambda v: vertex_step(ctx, v)),
        (INTERFACE, [rec.id for rec in topology.interfaces], lambda i: interface_step(ctx, i)),
        (PATCH, list(range(topology.num_patches)), lambda i: patch_step(ctx, i, gram)),
    )
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for stage, ids, work in jobs:
            t = time.perf_counter()
            results = list(pool.map(work, ids))
            for sol in results:
                if sol is not None:
                    ctx.commit(sol)
                    stages.append(sol)
            timings[stage] = time.perf_counter() - t
            logger.info("%s stage: %d problems in %.3f s", stage, sum(r is not None for r in results),
                        timings[stage])
    if not np.all(ctx.assigned[:ctx.ndof]):
        raise DegenerateSystemError("some control points were not assigned by any stage", stage="local")
    timings['total'] = time.perf_counter() - t0
    return ConstructionResult(ctx.geometry(name), ctx.gluing, ctx.edges(), stages, 'local', timings, worst)


def construct_global(S: SurfaceSource, topology: Topology, params: ConstructionParams,
                     gluing: Optional[GluingData] = None, threads: int = 1,
                     name: str = "asg1") -> ConstructionResult:
    """One KKT solve over all control points and edge functions with every constraint at once."""
    t0 = time.perf_counter()
    ctx, worst = _prepare(S, topology, params, gluing, threads)
    sigma, order = params.sigma, params.order
    G = _patch_system(ctx.space, sigma, order)
    H = np.zeros((ctx.size, ctx.size))
    c = np.zeros((ctx.size, 3))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        loads = list(pool.map(lambda i: _patch_load(S, i, ctx.space, sigma, order), range(topology.num_patches)))
        vertex_rows = list(pool.map(lambda v: _vertex_constraints(ctx, v),
                                    [vx.id for vx in topology.vertices if vx.valency >= 2]))
        iface_rows = list(pool.map(lambda i: _interface_constraints(ctx, i),
                                   [rec.id for rec in topology.interfaces]))
    for i, load in enumerate(loads):
        dofs = ctx.maps[i].ravel()
        np.add.at(H, (dofs[:, None], dofs[None, :]), G)
        np.add.at(c, dofs, -load)
    A = np.vstack(vertex_rows + iface_rows) if vertex_rows or iface_rows else np.zeros((0, ctx.size))
    timings = {'setup': time.perf_counter() - t0}
    t = time.perf_counter()
    x, mult = solve_saddle(QuadraticProgram(H, c, A, np.zeros((A.shape[0], 3)), label="global"),
                           rtol=params.rank_tol, feasibility_tol=params.feasibility_tol)
    timings['global'] = time.perf_counter() - t
    columns = np.arange(ctx.size)
    sol = StageSolution('global', 0, columns, x, float(0.5 * np.sum(x * (H @ x)) + np.sum(c * x)),
                        float(np.abs(A @ x).max(initial=0.0)), mult, timings['global'])
    ctx.commit(sol)
    timings['total'] = time.perf_counter() - t0
    logger.info("global solve: %d unknowns, %d constraints in %.3f s", ctx.size, A.shape[0], timings['global'])
    return ConstructionResult(ctx.geometry(name), ctx.gluing, ctx.edges(), [sol], 'global', timings, worst)


@dataclass
class Asg1Report:
    """Per-interface AS-G1 diagnostics, all normalized by the largest corner derivative."""

    rows: List[Dict[str, float]]

    @property
    def max_residual(self) -> float:
        keys = ('g1', 'c0', 'trace_membership', 'f1_identity', 'f1_membership')
        return max((max(r[k] for k in keys) for r in self.rows), default=0.0)

    @property
    def worst_interface(self) -> Optional[int]:
        if not self.rows:
            return None
        keys = ('g1', 'c0', 'trace_membership', 'f1_identity', 'f1_membership')
        return int(max(self.rows, key=lambda r: max(r[k] for k in keys))['interface'])

    @property
    def min_alpha_product(self) -> float:
        return min((r['min_alpha_product'] for r in self.rows), default=np.inf)

    def passed(self, tol: float = ASG1_TOL) -> bool:
        return self.max_residual <= tol and self.min_alpha_product > 0.0


def _l2_distance(space: SplineSpace1D, f, order: int) -> float:
    coeffs = l2_project(space, f, order)
    rule = quadrature(space, order + 2)
    diff = f(rule.nodes) - eval_basis(space, rule.nodes)[0] @ coeffs
    return float(np.sqrt(np.sum(rule.weights * np.sum(diff ** 2, axis=1))))


def check_asg1(F: MultiPatchSpline, gluing: GluingData, samples: int = DEFAULT_SAMPLES) -> Asg1Report:
    """
    AS-G1 residual map of a multi-patch spline: G1 identity at ``samples``
    points, trace mismatch, L2 distance of the trace to S^{p,r+1}, cleared f1
    identity at the Greville points and L2 distance of f1 to S^{p-1,r}.

    Spaces with r = p-1 have no trace or transversal space; their membership
    residuals are reported as 0 and the check reduces to the G1 and C0 rows.
    """
    src = F.source()
    space = F.space
    membership = space.r + 1 <= space.p - 1
    trace, transversal = companion_spaces(space) if membership else (None, None)
    g1 = g1_residual(src, F.topology, gluing, samples)
    xi = np.linspace(0.0, 1.0, samples)
    zeta = greville(space)
    order = space.p + 2
    rows = []
    for rec in F.topology.interfaces:
        view = F.topology.interface_view(rec.id)
        e = gluing[rec.id]
        ends = np.array([0.0, 1.0])
        corner = np.concatenate([src.local(view.patch1, view.frame1, [0.0, 0.0], ends, ((1, 0), (0, 1))),
                                 src.local(view.patch2, view.frame2, ends, [0.0, 0.0], ((1, 0), (0, 1)))], axis=1)
        scale = max(float(np.linalg.norm(corner, axis=2).max()), np.finfo(float).tiny)

        def side1(t, orders):
            return src.local(view.patch1, view.frame1, np.zeros_like(t), t, orders)

        def side2(t, orders):
            return src.local(view.patch2, view.frame2, t, np.zeros_like(t), orders)

        c0 = float(np.linalg.norm(side1(xi, ((0, 0),))[0] - side2(xi, ((0, 0),))[0], axis=1).max())
        ds1, dt1 = side1(zeta, ((1, 0), (0, 1)))
        ds2, dt2 = side2(zeta, ((1, 0), (0, 1)))
        cleared = (e.side2.alpha(zeta)[:, None] * (ds1 - e.side1.beta(zeta)[:, None] * dt1)
                   + e.side1.alpha(zeta)[:, None] * (dt2 - e.side2.beta(zeta)[:, None] * ds2))

        def f1(t):
            ds, dt = side1(t, ((1, 0), (0, 1)))
            return (ds - e.side1.beta(t)[:, None] * dt) / e.side1.alpha(t)[:, None]

        rows.append({
            'interface': rec.id,
            'g1': g1[rec.id],
            'c0': c0 / scale,
            'trace_membership': (_l2_distance(trace, lambda t: side1(t, ((0, 0),))[0], order) / scale
                                 if membership else 0.0),
            'f1_identity': float(np.linalg.norm(cleared, axis=1).max()) / scale,
            'f1_membership': _l2_distance(transversal, f1, order) / scale if membership else 0.0,
            'min_alpha_product': e.min_alpha_product(samples),
        })
    report = Asg1Report(rows)
    logger.info("AS-G1 check: max residual %.3e over %d interfaces", report.max_residual, len(rows))
    return report
