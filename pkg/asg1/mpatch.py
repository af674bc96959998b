"""
Multi-patch surfaces: topology with per-interface and per-vertex local
frames, conforming spline containers, input-surface sources and the
weighted-H1 error metrics.

Orientation conventions in a local frame (s, t):

* interface between sides 1 and 2: F1(0, xi) = F2(xi, 0);
* vertex with counterclockwise patches m_1..m_nu: each patch sees the vertex
  at (0, 0), the interface towards m_{j+1} on s = 0 and the interface
  towards m_{j-1} on t = 0.

Patches keep their stored parametrization; frames are elements of the
dihedral group of the unit square mapping local coordinates to stored ones.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from utils.shared import CONFORMITY_TOL, FD_STEP
from .errors import ConformityError, InvalidArgumentError, RegularityError, TopologyError
from .splinecore import (SplinePatch, SplineSpace1D, eval_basis, eval_patch, gram_1d,
                         quadrature, refine_patch)

logger = logging.getLogger(__name__)

SIDES = ('u0', 'u1', 'v0', 'v1')
CORNERS = ((0, 0), (1, 0), (0, 1), (1, 1))


@dataclass(frozen=True)
class SquareFrame:
    """
    Symmetry of the unit square: local (s, t) -> stored (xi1, xi2).

    u = 1 - s if flip_s else s, v = 1 - t if flip_t else t, and
    (xi1, xi2) = (v, u) if swap else (u, v).
    """

    swap: bool = False
    flip_s: bool = False
    flip_t: bool = False

    @property
    def det(self) -> int:
        return -1 if (self.swap + self.flip_s + self.flip_t) % 2 else 1

    def transpose(self) -> 'SquareFrame':
        """Frame g' with g'(s, t) = g(t, s)."""
        return SquareFrame(not self.swap, self.flip_t, self.flip_s)

    def to_stored(self, s, t):
        u = 1.0 - np.asarray(s, dtype=float) if self.flip_s else np.asarray(s, dtype=float)
        v = 1.0 - np.asarray(t, dtype=float) if self.flip_t else np.asarray(t, dtype=float)
        return (v, u) if self.swap else (u, v)

    def corner(self, s: int, t: int) -> Tuple[int, int]:
        """Stored corner reached from local corner (s, t)."""
        u = 1 - s if self.flip_s else s
        v = 1 - t if self.flip_t else t
        return (v, u) if self.swap else (u, v)

    def index(self, a, b, n: int):
        """Stored coefficient index (j1, j2) of local index (a, b)."""
        ia = n - 1 - np.asarray(a) if self.flip_s else np.asarray(a)
        ib = n - 1 - np.asarray(b) if self.flip_t else np.asarray(b)
        return (ib, ia) if self.swap else (ia, ib)

    def flat_index(self, a, b, n: int):
        j1, j2 = self.index(a, b, n)
        return j1 * n + j2

    def derivative(self, a: int, b: int) -> Tuple[int, int, int]:
        """Stored orders (l1, l2) and sign of the local derivative d_s^a d_t^b."""
        sign = -1 if (a * self.flip_s + b * self.flip_t) % 2 else 1
        return (b, a, sign) if self.swap else (a, b, sign)

    def local_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficient array re-indexed to the local frame."""
        n = coeffs.shape[0]
        a, b = np.meshgrid(np.arange(n), np.arange(n), indexing='ij')
        j1, j2 = self.index(a, b, n)
        return coeffs[j1, j2]

    def side_u0(self) -> str:
        """Stored side hit by local s = 0."""
        c0, c1 = self.corner(0, 0), self.corner(0, 1)
        return _side_through(c0, c1)

    def side_v0(self) -> str:
        """Stored side hit by local t = 0."""
        return _side_through(self.corner(0, 0), self.corner(1, 0))

    @classmethod
    def on_side(cls, side: str, reverse: bool = False) -> 'SquareFrame':
        """Frame with local s = 0 on ``side``; t runs along the side (against it if reverse)."""
        if side not in SIDES:
            raise InvalidArgumentError(f"unknown side {side!r}")
        return cls(swap=side[0] == 'v', flip_s=side[1] == '1', flip_t=bool(reverse))

    @classmethod
    def at_corner(cls, corner: Tuple[int, int], u0_side: str) -> 'SquareFrame':
        """Frame with local (0, 0) at the stored ``corner`` and s = 0 on ``u0_side``."""
        c1, c2 = corner
        along = c2 if u0_side[0] == 'u' else c1
        return cls.on_side(u0_side, reverse=bool(along))


def _side_through(c0: Tuple[int, int], c1: Tuple[int, int]) -> str:
    if c0[0] == c1[0]:
        return 'u0' if c0[0] == 0 else 'u1'
    return 'v0' if c0[1] == 0 else 'v1'


def corner_sides(corner: Tuple[int, int]) -> Tuple[str, str]:
    """The two stored sides through a corner: (xi1 = c1 side, xi2 = c2 side)."""
    return ('u0' if corner[0] == 0 else 'u1'), ('v0' if corner[1] == 0 else 'v1')


@dataclass(frozen=True)
class InterfaceRecord:
    id: int
    patch_a: int
    side_a: str
    patch_b: int
    side_b: str
    reversed: bool = False

    @property
    def frames(self) -> Tuple[SquareFrame, SquareFrame]:
        """Canonical frames: patch_a sees the interface at s = 0, patch_b at t = 0."""
        return (SquareFrame.on_side(self.side_a),
                SquareFrame.on_side(self.side_b, self.reversed).transpose())


@dataclass(frozen=True)
class BoundaryRecord:
    id: int
    patch: int
    side: str
    frame: SquareFrame = SquareFrame()


@dataclass(frozen=True)
class VertexRecord:
    """
    A vertex with its counterclockwise patch fan.

    ``interfaces[j]`` joins ``patches[j]`` and ``patches[(j+1) % nu]``; boundary
    vertices carry nu - 1 of them plus the two boundary curves closing the fan.
    """

    id: int
    kind: str
    patches: Tuple[int, ...]
    corners: Tuple[Tuple[int, int], ...]
    frames: Tuple[SquareFrame, ...]
    interfaces: Tuple[int, ...]
    boundary_curves: Tuple[int, ...] = ()

    @property
    def valency(self) -> int:
        return len(self.patches)

    @property
    def is_inner(self) -> bool:
        return self.kind == 'inner'


@dataclass(frozen=True)
class InterfaceView:
    """An interface seen in a pair of local frames, relative to its canonical description."""

    interface: int
    patch1: int
    frame1: SquareFrame
    patch2: int
    frame2: SquareFrame
    swapped: bool = False
    reversed: bool = False


@dataclass
class Topology:
    num_patches: int
    interfaces: List[InterfaceRecord]
    boundary: List[BoundaryRecord]
    vertices: List[VertexRecord]
    orientation: Tuple[int, ...]
    _sides: Dict[Tuple[int, str], Tuple[str, int]] = field(default_factory=dict, repr=False)
    _corner_vertex: Dict[Tuple[int, Tuple[int, int]], int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._sides:
            for rec in self.interfaces:
                self._sides[(rec.patch_a, rec.side_a)] = ('interface', rec.id)
                self._sides[(rec.patch_b, rec.side_b)] = ('interface', rec.id)
            for rec in self.boundary:
                self._sides[(rec.patch, rec.side)] = ('boundary', rec.id)
        if not self._corner_vertex:
            for vx in self.vertices:
                for patch, corner in zip(vx.patches, vx.corners):
                    self._corner_vertex[(patch, corner)] = vx.id

    def side_kind(self, patch: int, side: str) -> Tuple[str, int]:
        return self._sides[(patch, side)]

    def corner_vertex(self, patch: int, corner: Tuple[int, int]) -> int:
        return self._corner_vertex[(patch, corner)]

    def interface_view(self, interface: int) -> InterfaceView:
        rec = self.interfaces[interface]
        fa, fb = rec.frames
        return InterfaceView(rec.id, rec.patch_a, fa, rec.patch_b, fb)

    def vertex_views(self, vertex: int) -> List[InterfaceView]:
        """Interfaces of a vertex fan in vertex frames, j = 1..nu - tau."""
        vx = self.vertices[vertex]
        nu = vx.valency
        views = []
        for j, iface in enumerate(vx.interfaces):
            nxt = (j + 1) % nu
            rec = self.interfaces[iface]
            f1, f2 = vx.frames[j], vx.frames[nxt]
            p1, p2 = vx.patches[j], vx.patches[nxt]
            swapped = not (p1 == rec.patch_a and f1.side_u0() == rec.side_a)
            fa, _ = rec.frames
            origin = fa.corner(0, 0)
            corner_a = vx.corners[nxt] if swapped else vx.corners[j]
            views.append(InterfaceView(iface, p1, f1, p2, f2, swapped=swapped,
                                       reversed=corner_a != origin))
        return views


def valency_and_sets(topology: Topology) -> Dict[str, object]:
    """Valencies per vertex and the inner/boundary partitions of curves and vertices."""
    return {
        'valency': {vx.id: vx.valency for vx in topology.vertices},
        'inner_interfaces': [rec.id for rec in topology.interfaces],
        'boundary_curves': [rec.id for rec in topology.boundary],
        'inner_vertices': [vx.id for vx in topology.vertices if vx.is_inner],
        'boundary_vertices': [vx.id for vx in topology.vertices if not vx.is_inner],
    }


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _orient(num_patches: int, interfaces: Sequence[InterfaceRecord], root_sign: int) -> Tuple[int, ...]:
    """Propagate patch orientations across interfaces; o_b = o_a det(g_a) det(g_b)."""
    sign: Dict[int, int] = {}
    adjacency: Dict[int, List[Tuple[int, int, InterfaceRecord]]] = {i: [] for i in range(num_patches)}
    for rec in interfaces:
        fa, fb = rec.frames
        rel = fa.det * fb.det
        adjacency[rec.patch_a].append((rec.patch_b, rel, rec))
        adjacency[rec.patch_b].append((rec.patch_a, rel, rec))
    for start in range(num_patches):
        if start in sign:
            continue
        sign[start] = root_sign if start == 0 else 1
        stack = [start]
        while stack:
            i = stack.pop()
            for j, rel, rec in adjacency[i]:
                want = sign[i] * rel
                if j not in sign:
                    sign[j] = want
                    stack.append(j)
                elif sign[j] != want:
                    raise TopologyError(f"surface is not orientable across interface {rec.id}",
                                        entity=f"interface {rec.id}")
    return tuple(sign[i] for i in range(num_patches))


def build_topology(num_patches: int, interfaces: Sequence[InterfaceRecord],
                   boundary: Optional[Sequence[Tuple[int, str]]] = None,
                   vertices: Optional[Sequence[Dict]] = None,
                   root_sign: int = 1) -> Topology:
    """
    Validate the combinatorics of a patch complex and derive vertex fans.

    Args:
        num_patches: number of patches
        interfaces: interface records (raw sides, canonical frames derived)
        boundary: optional (patch, side) list; derived from free sides when None
        vertices: optional records {'kind', 'patches_ccw'} checked against the derived fans
        root_sign: orientation of patch 0's stored frame

    Returns:
        Topology with vertex frames satisfying the counterclockwise convention
    """
    used: Dict[Tuple[int, str], int] = {}
    for rec in interfaces:
        if rec.patch_a == rec.patch_b:
            raise TopologyError(f"interface {rec.id} joins patch {rec.patch_a} to itself",
                                entity=f"interface {rec.id}")
        for patch, side in ((rec.patch_a, rec.side_a), (rec.patch_b, rec.side_b)):
            if not 0 <= patch < num_patches or side not in SIDES:
                raise TopologyError(f"interface {rec.id} references invalid side {patch}:{side}",
                                    entity=f"interface {rec.id}")
            if (patch, side) in used:
                raise TopologyError(
                    f"side {patch}:{side} shared by interfaces {used[(patch, side)]} and {rec.id}",
                    entity=f"interface {rec.id}")
            used[(patch, side)] = rec.id

    free = [(i, s) for i in range(num_patches) for s in SIDES if (i, s) not in used]
    if boundary is not None:
        given = [(int(i), str(s)) for i, s in boundary]
        if sorted(given) != sorted(free):
            raise TopologyError("boundary curves do not match the sides left free by interfaces",
                                entity="boundary")
        free = given

    orientation = _orient(num_patches, interfaces, root_sign)
    curves = []
    for cid, (patch, side) in enumerate(free):
        frame = SquareFrame.on_side(side)
        if frame.det != orientation[patch]:
            frame = SquareFrame.on_side(side, reverse=True)
        curves.append(BoundaryRecord(cid, patch, side, frame))

    side_of: Dict[Tuple[int, str], Tuple[str, int]] = {}
    for rec in interfaces:
        side_of[(rec.patch_a, rec.side_a)] = ('interface', rec.id)
        side_of[(rec.patch_b, rec.side_b)] = ('interface', rec.id)
    for rec in curves:
        side_of[(rec.patch, rec.side)] = ('boundary', rec.id)

    uf = _UnionFind()
    partner: Dict[Tuple[int, Tuple[int, int], int], Tuple[int, Tuple[int, int]]] = {}
    for rec in interfaces:
        fa, fb = rec.frames
        for la, lb in (((0, 0), (0, 0)), ((0, 1), (1, 0))):
            ca, cb = fa.corner(*la), fb.corner(*lb)
            uf.union((rec.patch_a, ca), (rec.patch_b, cb))
            partner[(rec.patch_a, ca, rec.id)] = (rec.patch_b, cb)
            partner[(rec.patch_b, cb, rec.id)] = (rec.patch_a, ca)
    classes: Dict[Tuple, List[Tuple[int, Tuple[int, int]]]] = {}
    for i in range(num_patches):
        for c in CORNERS:
            classes.setdefault(uf.find((i, c)), []).append((i, c))

    def right_handed(patch: int, corner: Tuple[int, int]) -> SquareFrame:
        for side in corner_sides(corner):
            frame = SquareFrame.at_corner(corner, side)
            if frame.det == orientation[patch]:
                return frame
        raise AssertionError("one of the two corner frames is right-handed")

    records: List[VertexRecord] = []
    for members in sorted(classes.values(), key=lambda m: m[0]):
        frames = {m: right_handed(*m) for m in members}
        starts = [m for m in members if side_of[(m[0], frames[m].side_v0())][0] == 'boundary']
        start = starts[0] if starts else members[0]
        kind = 'boundary' if starts else 'inner'
        if len(starts) > 1:
            raise TopologyError(f"non-manifold vertex at patch {start[0]} corner {start[1]}",
                                entity=f"patch {start[0]}")
        fan = [start]
        ifaces, bcurves = [], []
        if kind == 'boundary':
            bcurves.append(side_of[(start[0], frames[start].side_v0())][1])
        current = start
        while True:
            what, ident = side_of[(current[0], frames[current].side_u0())]
            if what == 'boundary':
                if kind == 'inner':
                    raise TopologyError(f"inconsistent fan around patch {current[0]}",
                                        entity=f"patch {current[0]}")
                bcurves.append(ident)
                break
            nxt = partner[(current[0], current[1], ident)]
            if nxt == start:
                ifaces.append(ident)
                break
            if nxt in fan or nxt not in frames:
                raise TopologyError(f"interface {ident} breaks the vertex fan", entity=f"interface {ident}")
            expected = side_of[(nxt[0], frames[nxt].side_v0())]
            if expected != ('interface', ident):
                raise TopologyError(f"orientation mismatch across interface {ident}",
                                    entity=f"interface {ident}")
            ifaces.append(ident)
            fan.append(nxt)
            current = nxt
        if len(fan) != len(members):
            raise TopologyError(f"vertex at patch {start[0]} corner {start[1]} is not a single fan",
                                entity=f"patch {start[0]}")
        records.append(VertexRecord(
            id=len(records), kind=kind,
            patches=tuple(m[0] for m in fan), corners=tuple(m[1] for m in fan),
            frames=tuple(frames[m] for m in fan), interfaces=tuple(ifaces),
            boundary_curves=tuple(bcurves)))

    if vertices is not None:
        _check_vertex_records(records, vertices)
    topology = Topology(num_patches, list(interfaces), curves, records, orientation)
    logger.debug("topology: %d patches, %d interfaces, %d boundary curves, %d vertices",
                 num_patches, len(interfaces), len(curves), len(records))
    return topology


def _check_vertex_records(derived: Sequence[VertexRecord], given: Sequence[Dict]) -> None:
    def key(kind, patches):
        patches = list(patches)
        if kind == 'inner':
            variants = []
            for seq in (patches, patches[::-1]):
                variants += [tuple(seq[i:] + seq[:i]) for i in range(len(seq))]
            return kind, min(variants)
        return kind, min(tuple(patches), tuple(patches[::-1]))

    want = sorted(key(v['kind'], v['patches_ccw']) for v in given)
    have = sorted(key(v.kind, v.patches) for v in derived)
    if want != have:
        raise TopologyError("vertex records disagree with the patch complex", entity="vertices")


def shared_dof_map(topology: Topology, n: int) -> Tuple[List[np.ndarray], int]:
    """
    Global numbering of control points with interface rows identified.

    Returns:
        (per-patch (n, n) arrays of dof ids, number of dofs)
    """
    uf = _UnionFind()
    for rec in topology.interfaces:
        fa, fb = rec.frames
        j = np.arange(n)
        ja1, ja2 = fa.index(np.zeros(n, dtype=int), j, n)
        jb1, jb2 = fb.index(j, np.zeros(n, dtype=int), n)
        for x in range(n):
            uf.union((rec.patch_a, int(ja1[x]), int(ja2[x])), (rec.patch_b, int(jb1[x]), int(jb2[x])))
    ids: Dict[Tuple[int, int, int], int] = {}
    maps = []
    for i in range(topology.num_patches):
        m = np.empty((n, n), dtype=int)
        for j1 in range(n):
            for j2 in range(n):
                root = uf.find((i, j1, j2))
                if root not in ids:
                    ids[root] = len(ids)
                m[j1, j2] = ids[root]
        maps.append(m)
    return maps, len(ids)


class SurfaceSource(ABC):
    """Evaluator of an input surface S patch by patch, derivatives up to total order 2."""

    name: str = "surface"

    @property
    @abstractmethod
    def num_patches(self) -> int:
        ...

    @property
    def spline_space(self) -> Optional[SplineSpace1D]:
        """Spline space of the input when it is a spline, else None."""
        return None

    @abstractmethod
    def derivatives(self, patch: int, xi1, xi2, orders: Sequence[Tuple[int, int]]) -> np.ndarray:
        """Partials in stored coordinates, shape (len(orders), m, 3)."""

    def local(self, patch: int, frame: SquareFrame, s, t, orders: Sequence[Tuple[int, int]]) -> np.ndarray:
        """Partials d_s^a d_t^b in a local frame, shape (len(orders), m, 3)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s, t = np.broadcast_arrays(s, t)
        xi1, xi2 = frame.to_stored(s, t)
        mapped = [frame.derivative(a, b) for a, b in orders]
        values = self.derivatives(patch, xi1, xi2, [(l1, l2) for l1, l2, _ in mapped])
        return values * np.array([sg for _, _, sg in mapped], dtype=float)[:, None, None]

    def grid(self, patch: int, u, v, l1: int = 0, l2: int = 0) -> np.ndarray:
        """One partial on the tensor grid u x v, shape (len(u), len(v), 3)."""
        uu, vv = np.meshgrid(np.asarray(u, dtype=float), np.asarray(v, dtype=float), indexing='ij')
        values = self.derivatives(patch, uu.ravel(), vv.ravel(), [(l1, l2)])[0]
        return values.reshape(uu.shape + (3,))


class AnalyticSurfaceSource(SurfaceSource):
    """
    Non-spline input given by callables ``maps[i](xi1, xi2) -> (m, 3)``.

    Registered analytic derivatives ``derivs[i](xi1, xi2, l1, l2)`` are used
    when present, otherwise fourth-order central differences with step 1e-5.
    """

    def __init__(self, maps: Sequence[Callable], derivs: Optional[Sequence[Callable]] = None,
                 name: str = "analytic", step: float = FD_STEP):
        self.maps = list(maps)
        self.derivs = list(derivs) if derivs is not None else None
        self.name = name
        self.step = step

    @property
    def num_patches(self) -> int:
        return len(self.maps)

    def _fd(self, f: Callable, xi1, xi2, l1: int, l2: int) -> np.ndarray:
        h = self.step
        first = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
        second = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
        offsets = np.arange(-2, 3) * h
        if (l1, l2) == (0, 0):
            return f(xi1, xi2)
        if l1 + l2 == 1:
            stencil, axis = first, 0 if l1 else 1
        elif l1 == 2 or l2 == 2:
            stencil, axis = second, 0 if l1 else 1
        else:
            return sum(w * self._fd(f, xi1 + o, xi2, 0, 1) for w, o in zip(first, offsets) if w)
        if axis == 0:
            return sum(w * f(xi1 + o, xi2) for w, o in zip(stencil, offsets) if w)
        return sum(w * f(xi1, xi2 + o) for w, o in zip(stencil, offsets) if w)

    def derivatives(self, patch, xi1, xi2, orders):
        xi1 = np.atleast_1d(np.asarray(xi1, dtype=float))
        xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
        out = []
        for l1, l2 in orders:
            if self.derivs is not None:
                out.append(np.asarray(self.derivs[patch](xi1, xi2, l1, l2), dtype=float))
            else:
                out.append(np.asarray(self._fd(self.maps[patch], xi1, xi2, l1, l2), dtype=float))
        return np.stack(out)


@dataclass
class MultiPatchSpline:
    """Conforming multi-patch spline surface in one tensor space."""

    space: SplineSpace1D
    patches: List[SplinePatch]
    topology: Topology
    name: str = "geometry"

    @property
    def num_patches(self) -> int:
        return len(self.patches)

    def evaluate(self, patch: int, xi1, xi2, orders=((0, 0),)) -> np.ndarray:
        return eval_patch(self.patches[patch], xi1, xi2, orders)

    def source(self) -> 'SplineSurfaceSource':
        return SplineSurfaceSource(self)

    def with_coeffs(self, coeffs: Sequence[np.ndarray], name: Optional[str] = None) -> 'MultiPatchSpline':
        return MultiPatchSpline(self.space, [SplinePatch(self.space, c) for c in coeffs],
                                self.topology, name or self.name)

    def refined(self, level: int) -> 'MultiPatchSpline':
        patches = [refine_patch(p, level) for p in self.patches]
        return MultiPatchSpline(patches[0].space, patches, self.topology, self.name)

    def transformed(self, rotation: np.ndarray, shift=(0.0, 0.0, 0.0)) -> 'MultiPatchSpline':
        """Image under x -> R x + shift."""
        R, b = np.asarray(rotation, dtype=float), np.asarray(shift, dtype=float)
        return self.with_coeffs([p.coeffs @ R.T + b for p in self.patches])

    def is_planar(self) -> bool:
        return all(np.all(p.coeffs[..., 2] == 0.0) for p in self.patches)


class SplineSurfaceSource(SurfaceSource):
    """Exact evaluator of a multi-patch spline."""

    def __init__(self, geometry: MultiPatchSpline):
        self.geometry = geometry
        self.name = geometry.name

    @property
    def num_patches(self) -> int:
        return self.geometry.num_patches

    @property
    def spline_space(self) -> Optional[SplineSpace1D]:
        return self.geometry.space

    def derivatives(self, patch, xi1, xi2, orders):
        return self.geometry.evaluate(patch, xi1, xi2, orders)

    def grid(self, patch, u, v, l1=0, l2=0):
        p = self.geometry.patches[patch]
        b1 = eval_basis(p.space, u, l1)[l1]
        b2 = eval_basis(p.space, v, l2)[l2]
        return np.einsum('ai,bj,ijd->abd', b1, b2, p.coeffs)


def _side_rows(coeffs: np.ndarray, frame: SquareFrame, on_u0: bool) -> np.ndarray:
    n = coeffs.shape[0]
    j = np.arange(n)
    zero = np.zeros(n, dtype=int)
    j1, j2 = frame.index(zero, j, n) if on_u0 else frame.index(j, zero, n)
    return coeffs[j1, j2]


def canonicalize(space: SplineSpace1D, nets: Sequence[np.ndarray], interfaces: Sequence[InterfaceRecord],
                 boundary: Optional[Sequence[Tuple[int, str]]] = None,
                 vertices: Optional[Sequence[Dict]] = None,
                 tol: float = CONFORMITY_TOL, name: str = "geometry") -> MultiPatchSpline:
    """
    Build a conforming multi-patch spline from raw control nets and sides.

    Interface rows are checked against ``tol`` relative to the model size and
    then snapped to their mean so both sides carry bitwise identical points.

    Raises:
        ConformityError: interface rows differ by more than the tolerance
        TopologyError: invalid or non-orientable complex
    """
    n = space.n
    coeffs = []
    for i, net in enumerate(nets):
        c = np.asarray(net, dtype=float)
        c = c.reshape(n, n, -1) if c.ndim != 3 else c
        if c.shape[:2] != (n, n):
            raise InvalidArgumentError(f"patch {i} has {c.shape[0]}x{c.shape[1]} points, expected {n}x{n}")
        if c.shape[2] == 2:
            c = np.concatenate([c, np.zeros((n, n, 1))], axis=2)
        coeffs.append(c.copy())
    scale = max(1.0, max(float(np.ptp(c.reshape(-1, 3), axis=0).max()) for c in coeffs))

    for rec in interfaces:
        fa, fb = rec.frames
        ra = _side_rows(coeffs[rec.patch_a], fa, True)
        rb = _side_rows(coeffs[rec.patch_b], fb, False)
        gap = float(np.abs(ra - rb).max())
        if gap > tol * scale:
            raise ConformityError(f"interface {rec.id} is not conforming (gap {gap:.3e})",
                                  entity=f"interface {rec.id}", gap=gap)
        mean = 0.5 * (ra + rb)
        j = np.arange(n)
        zero = np.zeros(n, dtype=int)
        coeffs[rec.patch_a][fa.index(zero, j, n)] = mean
        coeffs[rec.patch_b][fb.index(j, zero, n)] = mean

    root = 1
    if coeffs and all(np.all(c[..., 2] == 0.0) for c in coeffs):
        patch = SplinePatch(space, coeffs[0])
        d1, d2 = eval_patch(patch, [0.5], [0.5], [(1, 0), (0, 1)])[:, 0]
        root = 1 if d1[0] * d2[1] - d1[1] * d2[0] >= 0 else -1
    topology = build_topology(len(coeffs), interfaces, boundary, vertices, root_sign=root)
    return MultiPatchSpline(space, [SplinePatch(space, c) for c in coeffs], topology, name)


def check_regular(source: SurfaceSource, probes: int = 5) -> float:
    """Smallest |d1 S x d2 S| over a probe grid of every patch (corners included)."""
    t = np.linspace(0.0, 1.0, probes)
    u, v = np.meshgrid(t, t, indexing='ij')
    smallest = np.inf
    for i in range(source.num_patches):
        d1, d2 = source.derivatives(i, u.ravel(), v.ravel(), [(1, 0), (0, 1)])
        area = np.linalg.norm(np.cross(d1, d2), axis=1)
        if area.min() <= 0.0:
            k = int(np.argmin(area))
            raise RegularityError(f"patch {i} is singular at ({u.ravel()[k]}, {v.ravel()[k]})",
                                  patch=i, corner=(u.ravel()[k], v.ravel()[k]))
        smallest = min(smallest, float(area.min()))
    return smallest


def _spline_norm_sq(patch: SplinePatch, sigma: float) -> float:
    M = gram_1d(patch.space, 0, 0)
    K = gram_1d(patch.space, 1, 1)
    total = 0.0
    for d in range(patch.coeffs.shape[2]):
        C = patch.coeffs[:, :, d]
        total += np.sum(C * (M @ C @ M))
        total += sigma * (np.sum(C * (K @ C @ M)) + np.sum(C * (M @ C @ K)))
    return float(total)


def weighted_h1_norm(G, sigma: float) -> float:
    """
    Weighted H1 norm sqrt(sum_i sum_{l1+l2<=1} sigma^{l1+l2} int |d G_i|^2).

    Args:
        G: MultiPatchSpline, SplinePatch or a sequence of SplinePatch
        sigma: derivative weight (> 0)
    """
    if sigma <= 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    patches = G.patches if isinstance(G, MultiPatchSpline) else ([G] if isinstance(G, SplinePatch) else list(G))
    return float(np.sqrt(sum(_spline_norm_sq(p, sigma) for p in patches)))


def sampled_norms(evaluate: Callable[[int, np.ndarray, np.ndarray, int, int], np.ndarray],
                  num_patches: int, space: SplineSpace1D, sigma: float) -> Tuple[float, float]:
    """
    L2 and weighted-H1 norms of a patchwise field given by ``evaluate(i, u, v, l1, l2)``
    on tensor grids, with p + 1 Gauss points per knot span.
    """
    rule = quadrature(space)
    w2 = np.outer(rule.weights, rule.weights)
    l2 = h1 = 0.0
    for i in range(num_patches):
        val = evaluate(i, rule.nodes, rule.nodes, 0, 0)
        d1 = evaluate(i, rule.nodes, rule.nodes, 1, 0)
        d2 = evaluate(i, rule.nodes, rule.nodes, 0, 1)
        part = float(np.sum(w2 * np.sum(val ** 2, axis=-1)))
        l2 += part
        h1 += part + sigma * float(np.sum(w2 * (np.sum(d1 ** 2, axis=-1) + np.sum(d2 ** 2, axis=-1))))
    return float(np.sqrt(l2)), float(np.sqrt(h1))


def relative_errors(F: MultiPatchSpline, S: SurfaceSource, sigma: Optional[float] = None) -> Tuple[float, float]:
    """
    Relative L2 and weighted-H1 errors of F against S, sigma = 1/(p(k+1)) by default.

    Raises:
        ZeroDivisionError: S has zero norm
    """
    if S.num_patches != F.num_patches:
        raise InvalidArgumentError("F and S have different patch counts")
    sigma = sigma if sigma is not None else 1.0 / (F.space.p * (F.space.k + 1))
    src = F.source()

    def diff(i, u, v, l1, l2):
        return src.grid(i, u, v, l1, l2) - S.grid(i, u, v, l1, l2)

    e_l2, e_h1 = sampled_norms(diff, F.num_patches, F.space, sigma)
    s_l2, s_h1 = sampled_norms(lambda i, u, v, l1, l2: S.grid(i, u, v, l1, l2), F.num_patches, F.space, sigma)
    if s_l2 == 0.0 or s_h1 == 0.0:
        raise ZeroDivisionError("reference surface has zero norm")
    return e_l2 / s_l2, e_h1 / s_h1
