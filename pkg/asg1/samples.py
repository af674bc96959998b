"""
Bundled test geometries.

Interfaces are never typed in by hand: sides of different patches are matched
geometrically by their end points and midpoint, and the side direction decides
the ``reversed`` flag.
"""
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from utils.shared import CONFORMITY_TOL
from .errors import InvalidArgumentError, TopologyError
from .mpatch import (SIDES, AnalyticSurfaceSource, InterfaceRecord, MultiPatchSpline, Topology, build_topology,
                     canonicalize)
from .splinecore import SplinePatch, SplineSpace1D, eval_patch, interpolate_patch

logger = logging.getLogger(__name__)

BICUBIC = SplineSpace1D(3, 2, 2)

SidePoints = Callable[[int, str, np.ndarray], np.ndarray]


def _side_params(side: str, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Stored parameters of a side, run in its natural (increasing) direction."""
    fixed = np.full_like(t, 0.0 if side.endswith('0') else 1.0)
    return (fixed, t) if side.startswith('u') else (t, fixed)


def match_interfaces(num_patches: int, side_points: SidePoints, tol: float = 1e-8) -> List[InterfaceRecord]:
    """
    Pair up patch sides that trace the same curve.

    Args:
        num_patches: number of patches
        side_points: callable (patch, side, t) -> (len(t), 3) points along the side
        tol: matching tolerance relative to the model size

    Returns:
        Interface records numbered in discovery order
    """
    probe = np.array([0.0, 0.5, 1.0])
    samples = {(i, s): np.asarray(side_points(i, s, probe), dtype=float) for i in range(num_patches) for s in SIDES}
    scale = max(1.0, float(np.ptp(np.vstack(list(samples.values())), axis=0).max()))
    keys = list(samples)
    used = set()
    records = []
    for ia, a in enumerate(keys):
        if a in used:
            continue
        for b in keys[ia + 1:]:
            if b in used or b[0] == a[0]:
                continue
            pa, pb = samples[a], samples[b]
            if np.abs(pa - pb).max() <= tol * scale:
                rev = False
            elif np.abs(pa - pb[::-1]).max() <= tol * scale:
                rev = True
            else:
                continue
            records.append(InterfaceRecord(len(records), a[0], a[1], b[0], b[1], rev))
            used.update((a, b))
            break
    return records


def geometry_from_nets(space: SplineSpace1D, nets: Sequence[np.ndarray], name: str,
                       tol: float = CONFORMITY_TOL) -> MultiPatchSpline:
    """Conforming multi-patch spline from control nets with geometrically matched interfaces."""
    n = space.n
    full = []
    for net in nets:
        c = np.asarray(net, dtype=float).reshape(n, n, -1)
        if c.shape[2] == 2:
            c = np.concatenate([c, np.zeros((n, n, 1))], axis=2)
        full.append(c)

    def side_points(i, side, t):
        u, v = _side_params(side, t)
        return eval_patch(SplinePatch(space, full[i]), u, v)[0]

    interfaces = match_interfaces(len(full), side_points)
    return canonicalize(space, full, interfaces, tol=tol, name=name)


def _bilinear_net(space: SplineSpace1D, corners: np.ndarray) -> np.ndarray:
    """Coefficients of the bilinear map with corners c00, c10, c01, c11."""
    c00, c10, c01, c11 = (np.asarray(c, dtype=float) for c in corners)

    def target(u, v):
        uu, vv = np.meshgrid(u, v, indexing='ij')
        uu, vv = uu[..., None], vv[..., None]
        return (1 - uu) * (1 - vv) * c00 + uu * (1 - vv) * c10 + (1 - uu) * vv * c01 + uu * vv * c11

    return interpolate_patch(space, target)


def _grid_nodes(nx: int, ny: int, shift: float) -> np.ndarray:
    i, j = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing='ij')
    nodes = np.stack([i, j], axis=-1).astype(float)
    inner = (i > 0) & (i < nx) & (j > 0) & (j < ny)
    nodes[..., 0] += np.where(inner, shift * np.cos(i + 2.0 * j), 0.0)
    nodes[..., 1] += np.where(inner, shift * np.sin(2.0 * i + j), 0.0)
    return nodes


def bilinear_grid(nx: int = 2, ny: int = 2, shift: float = 0.2,
                  space: Optional[SplineSpace1D] = None) -> MultiPatchSpline:
    """
    nx x ny bilinear planar quads on [0, nx] x [0, ny] with the inner nodes moved
    by at most ``shift`` in each coordinate. Passes ``check_asg1`` in any space it is represented in.

    Patch (a, b) has index a * ny + b.
    """
    if nx < 1 or ny < 1:
        raise InvalidArgumentError(f"grid needs at least one patch per direction, got {nx}x{ny}")
    if not 0.0 <= shift < 0.5:
        raise InvalidArgumentError(f"shift must lie in [0, 0.5) to keep quads convex, got {shift}")
    space = space or BICUBIC
    X = _grid_nodes(nx, ny, shift)
    nets = [_bilinear_net(space, (X[a, b], X[a + 1, b], X[a, b + 1], X[a + 1, b + 1]))
            for a in range(nx) for b in range(ny)]
    return geometry_from_nets(space, nets, f"bilinear-{nx}x{ny}")


def perturbed_grid(nx: int = 2, ny: int = 2, amplitude: float = 0.05,
                   space: Optional[SplineSpace1D] = None) -> MultiPatchSpline:
    """
    Bilinear grid with the inner control points of every patch displaced by a
    smooth planar field. Conforming and regular, but not AS-G1.
    """
    grid = bilinear_grid(nx, ny, 0.2, space)
    n = grid.space.n
    if n < 3:
        raise InvalidArgumentError(f"{grid.space} has no inner control points to perturb")
    nets = []
    for p in grid.patches:
        c = p.coeffs.copy()
        inner = c[1:n - 1, 1:n - 1]
        x, y = inner[..., 0], inner[..., 1]
        inner[..., 0] += amplitude * np.sin(1.3 * x + 0.7 * y)
        inner[..., 1] += amplitude * np.cos(0.9 * x - 1.1 * y)
        nets.append(c)
    return canonicalize(grid.space, nets, grid.topology.interfaces, name=f"perturbed-{nx}x{ny}")


def corner_domain(space: Optional[SplineSpace1D] = None) -> MultiPatchSpline:
    """Equilateral triangle split into three quads meeting at the centroid (inner valency 3)."""
    space = space or BICUBIC
    A, B, C = np.array([0.0, 0.0]), np.array([2.0, 0.0]), np.array([1.0, np.sqrt(3.0)])
    O = (A + B + C) / 3.0
    mid = lambda P, Q: 0.5 * (P + Q)
    quads = [(A, mid(A, B), mid(C, A), O), (B, mid(B, C), mid(A, B), O), (C, mid(C, A), mid(B, C), O)]
    return geometry_from_nets(space, [_bilinear_net(space, q) for q in quads], "corner-domain")


_CUBE_FACES = (
    (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0])),
    (np.array([-1.0, 0, 0]), np.array([0, 0, 1.0]), np.array([0, 1.0, 0])),
    (np.array([0, 1.0, 0]), np.array([0, 0, 1.0]), np.array([1.0, 0, 0])),
    (np.array([0, -1.0, 0]), np.array([1.0, 0, 0]), np.array([0, 0, 1.0])),
    (np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0])),
    (np.array([0, 0, -1.0]), np.array([0, 1.0, 0]), np.array([1.0, 0, 0])),
)


def _sphere_face(center, e1, e2):
    """x(u, v) = q / |q| with q = c + (2u - 1) e1 + (2v - 1) e2 and e1 x e2 = c."""
    qa = {1: 2.0 * e1, 2: 2.0 * e2}

    def q_of(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return center + (2 * u[..., None] - 1) * e1 + (2 * v[..., None] - 1) * e2

    def value(u, v):
        q = q_of(u, v)
        return q / np.linalg.norm(q, axis=-1, keepdims=True)

    def deriv(u, v, l1, l2):
        q = q_of(u, v)
        rho = np.linalg.norm(q, axis=-1, keepdims=True)
        x = q / rho
        if (l1, l2) == (0, 0):
            return x

        def first(a):
            qa_ = qa[a]
            return (qa_ - x * np.sum(x * qa_, -1, keepdims=True)) / rho

        if l1 + l2 == 1:
            return first(1 if l1 else 2)
        if l1 + l2 != 2:
            raise InvalidArgumentError(f"cube sphere derivatives limited to order 2, got ({l1}, {l2})")
        a, b = (1, 1) if l1 == 2 else ((2, 2) if l2 == 2 else (1, 2))
        xa, xb = first(a), first(b)
        dot = lambda m, w: np.sum(m * w, -1, keepdims=True)
        return -(xb * dot(x, qa[a]) + x * dot(xb, qa[a]) + xa * dot(x, qa[b])) / rho

    return value, deriv


def cube_sphere() -> Tuple[AnalyticSurfaceSource, Topology]:
    """
    Unit sphere as the radial projection of the six faces of [-1, 1]^3, with
    analytic derivatives through order two, and the closed topology of the cube.
    """
    faces = [_sphere_face(*f) for f in _CUBE_FACES]
    source = AnalyticSurfaceSource([f[0] for f in faces], [f[1] for f in faces], name="cube-sphere")

    def side_points(i, side, t):
        u, v = _side_params(side, t)
        return faces[i][0](u, v)

    interfaces = match_interfaces(6, side_points)
    if len(interfaces) != 12:
        raise TopologyError(f"cube sphere matched {len(interfaces)} interfaces, expected 12")
    return source, build_topology(6, interfaces, root_sign=1)


def fitted_cube_sphere(p: int = 4, r: int = 1, k: int = 1, threads: int = 1) -> MultiPatchSpline:
    """AS-G1 spline approximation of the cube sphere by the local construction."""
    from .construction import ConstructionParams, construct_local
    source, topology = cube_sphere()
    result = construct_local(source, topology, ConstructionParams(p, r, k), threads=threads, name="cube-sphere")
    return result.geometry


def _split_net(geometry: MultiPatchSpline, patch: int, du: float, dv: float) -> np.ndarray:
    P = geometry.patches[patch]

    def target(u, v):
        uu, vv = np.meshgrid(0.5 * u + du, 0.5 * v + dv, indexing='ij')
        return eval_patch(P, uu.ravel(), vv.ravel())[0].reshape(uu.shape + (-1,))

    return interpolate_patch(geometry.space, target)


def subdivide(geometry: MultiPatchSpline) -> MultiPatchSpline:
    """
    Split every patch at xi = 1/2 in both directions. The quarters are
    represented exactly in the same space; the topology is rebuilt.
    """
    nets = [_split_net(geometry, i, du, dv) for i in range(geometry.num_patches)
            for du in (0.0, 0.5) for dv in (0.0, 0.5)]
    out = geometry_from_nets(geometry.space, nets, f"{geometry.name}-subdivided")
    logger.info("subdivided %d patches into %d", geometry.num_patches, out.num_patches)
    return out


SAMPLES: Dict[str, Callable[[], MultiPatchSpline]] = {
    'bilinear-grid': lambda: bilinear_grid(),
    'planar-asg1': lambda: bilinear_grid(space=SplineSpace1D(4, 1, 2)),
    'perturbed-grid': lambda: perturbed_grid(),
    'corner-domain': lambda: corner_domain(),
    'timing-grid': lambda: perturbed_grid(5, 3),
    'cube-sphere': lambda: fitted_cube_sphere(),
}
