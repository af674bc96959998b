"""
Linear gluing data per interface, estimated from first derivatives of the
input surface at the interface's two end vertices.

For an interface seen in frames with F1(0, xi) = F2(xi, 0) the entry stores,
per side, the Bezier coefficients of

    alpha_1(xi) = |d_s S1 x d_t S1|(0, xi),   beta_1(xi) = d_s S1 . d_t S1 / |d_t S1|^2,
    alpha_2(xi) = |d_s S2 x d_t S2|(xi, 0),   beta_2(xi) = d_s S2 . d_t S2 / |d_s S2|^2,

interpolated linearly between the corner values.  The G1 relation then reads

    alpha_1 d_t F2 + alpha_2 d_s F1 - (alpha_1 beta_2 + alpha_2 beta_1) d_t F1 = 0.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateSystemError, RegularityError
from .mpatch import InterfaceView, MultiPatchSpline, SurfaceSource, Topology

logger = logging.getLogger(__name__)

_ORDERS = ((1, 0), (0, 1))


@dataclass(frozen=True)
class SideGluing:
    """Bezier coefficients of alpha and beta on one side of an interface."""

    a0: float
    a1: float
    b0: float
    b1: float

    def alpha(self, xi, deriv: int = 0) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if deriv:
            return np.full(xi.shape, self.a1 - self.a0)
        return self.a0 * (1.0 - xi) + self.a1 * xi

    def beta(self, xi, deriv: int = 0) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if deriv:
            return np.full(xi.shape, self.b1 - self.b0)
        return self.b0 * (1.0 - xi) + self.b1 * xi

    def reversed(self) -> 'SideGluing':
        return SideGluing(self.a1, self.a0, -self.b1, -self.b0)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.a0, self.a1, self.b0, self.b1)


BOUNDARY_SIDE = SideGluing(1.0, 1.0, 0.0, 0.0)


@dataclass(frozen=True)
class GluingEntry:
    interface: int
    side1: SideGluing
    side2: SideGluing

    def reoriented(self, swapped: bool = False, reversed: bool = False) -> 'GluingEntry':
        """Entry seen with the sides exchanged and/or the interface direction reversed."""
        s1, s2 = (self.side2, self.side1) if swapped else (self.side1, self.side2)
        if reversed:
            s1, s2 = s1.reversed(), s2.reversed()
        return GluingEntry(self.interface, s1, s2)

    def min_alpha_product(self, samples: int = 101) -> float:
        xi = np.linspace(0.0, 1.0, samples)
        return float(np.min(self.side1.alpha(xi) * self.side2.alpha(xi)))


@dataclass
class GluingData:
    """Gluing entries keyed by interface id, in canonical interface frames."""

    entries: Dict[int, GluingEntry] = field(default_factory=dict)

    def __getitem__(self, interface: int) -> GluingEntry:
        return self.entries[interface]

    def __len__(self) -> int:
        return len(self.entries)

    def view(self, view: InterfaceView) -> GluingEntry:
        return self.entries[view.interface].reoriented(view.swapped, view.reversed)

    def to_records(self) -> List[Dict[str, object]]:
        return [{'interface': e.interface, 'side1': list(e.side1.as_tuple()), 'side2': list(e.side2.as_tuple())}
                for _, e in sorted(self.entries.items())]

    @classmethod
    def from_records(cls, records: Iterable[Dict[str, object]]) -> 'GluingData':
        entries = {}
        for rec in records:
            iface = int(rec['interface'])
            entries[iface] = GluingEntry(iface, SideGluing(*map(float, rec['side1'])),
                                         SideGluing(*map(float, rec['side2'])))
        return cls(entries)

    def negated_beta(self) -> 'GluingData':
        """Copy with every beta coefficient negated."""
        flip = lambda s: SideGluing(s.a0, s.a1, -s.b0, -s.b1)
        return GluingData({i: GluingEntry(i, flip(e.side1), flip(e.side2)) for i, e in self.entries.items()})


def beta_composite(entry: GluingEntry, xi) -> np.ndarray:
    """beta(xi) = alpha_1 beta_2 + alpha_2 beta_1, a quadratic polynomial."""
    return entry.side1.alpha(xi) * entry.side2.beta(xi) + entry.side2.alpha(xi) * entry.side1.beta(xi)


def _corner_frames(S: SurfaceSource, view: InterfaceView):
    d1 = S.local(view.patch1, view.frame1, [0.0, 0.0], [0.0, 1.0], _ORDERS)
    d2 = S.local(view.patch2, view.frame2, [0.0, 1.0], [0.0, 0.0], _ORDERS)
    return d1, d2


def _ratios(ds: np.ndarray, dt: np.ndarray, denom: np.ndarray) -> np.ndarray:
    return np.einsum('md,md->m', ds, dt) / np.einsum('md,md->m', denom, denom)


def estimate_gluing_surface(S: SurfaceSource, topology: Topology, interface: int) -> GluingEntry:
    """
    Gluing entry from corner cross products and dot-product ratios.

    Raises:
        RegularityError: vanishing cross product at a corner
    """
    view = topology.interface_view(interface)
    (ds1, dt1), (ds2, dt2) = _corner_frames(S, view)
    a1 = np.linalg.norm(np.cross(ds1, dt1), axis=1)
    a2 = np.linalg.norm(np.cross(ds2, dt2), axis=1)
    for patch, values, frame, corners in ((view.patch1, a1, view.frame1, ((0, 0), (0, 1))),
                                          (view.patch2, a2, view.frame2, ((0, 0), (1, 0)))):
        for value, corner in zip(values, corners):
            if not value > 0.0:
                raise RegularityError(f"vanishing cross product on patch {patch} at corner "
                                      f"{frame.corner(*corner)} of interface {interface}",
                                      patch=patch, corner=frame.corner(*corner))
    b1 = _ratios(ds1, dt1, dt1)
    b2 = _ratios(ds2, dt2, ds2)
    return GluingEntry(interface, SideGluing(a1[0], a1[1], b1[0], b1[1]),
                       SideGluing(a2[0], a2[1], b2[0], b2[1]))


def estimate_gluing_planar_bilinear(S: SurfaceSource, topology: Topology, interface: int) -> GluingEntry:
    """
    Gluing entry of a planar bilinear multi-patch via signed 2x2 determinants.

    Raises:
        DegenerateSystemError: zero determinant or alphas of opposite sign
    """
    view = topology.interface_view(interface)
    (ds1, dt1), (ds2, dt2) = _corner_frames(S, view)
    a1 = ds1[:, 0] * dt1[:, 1] - ds1[:, 1] * dt1[:, 0]
    a2 = ds2[:, 0] * dt2[:, 1] - ds2[:, 1] * dt2[:, 0]
    if np.any(a1 == 0.0) or np.any(a2 == 0.0) or np.any(a1 * a2 <= 0.0):
        raise DegenerateSystemError(f"degenerate determinants at interface {interface}",
                                    stage=f"interface {interface}")
    b1 = _ratios(ds1, dt1, dt1)
    b2 = _ratios(ds2, dt2, ds2)
    return GluingEntry(interface, SideGluing(a1[0], a1[1], b1[0], b1[1]),
                       SideGluing(a2[0], a2[1], b2[0], b2[1]))


def estimate_gluing(S: SurfaceSource, topology: Topology, threads: int = 1) -> GluingData:
    """Surface-variant gluing data for every interface."""
    ids = [rec.id for rec in topology.interfaces]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        entries = list(pool.map(lambda i: estimate_gluing_surface(S, topology, i), ids))
    data = GluingData({e.interface: e for e in entries})
    if entries:
        worst = min(e.min_alpha_product() for e in entries)
        logger.debug("estimated gluing for %d interfaces, min alpha product %.3e", len(entries), worst)
    return data


def g1_residual(S: SurfaceSource, topology: Topology, gluing: GluingData,
                samples: int = 101) -> Dict[int, float]:
    """
    Normalized G1 residual per interface: max over samples of
    |alpha_1 d_t S2 + alpha_2 d_s S1 - beta d_t S1| divided by the largest
    corner first-derivative magnitude.
    """
    xi = np.linspace(0.0, 1.0, samples)
    zero = np.zeros_like(xi)
    out = {}
    for rec in topology.interfaces:
        view = topology.interface_view(rec.id)
        entry = gluing[rec.id]
        ds1, dt1 = S.local(view.patch1, view.frame1, zero, xi, _ORDERS)
        ds2, dt2 = S.local(view.patch2, view.frame2, xi, zero, _ORDERS)
        res = (entry.side1.alpha(xi)[:, None] * dt2 + entry.side2.alpha(xi)[:, None] * ds1
               - beta_composite(entry, xi)[:, None] * dt1)
        ends = [0, -1]
        scale = max(float(np.linalg.norm(d[ends], axis=1).max()) for d in (ds1, dt1, ds2, dt2))
        out[rec.id] = float(np.linalg.norm(res, axis=1).max()) / max(scale, np.finfo(float).tiny)
    return out


def gluing_for(geometry: MultiPatchSpline, stored: Optional[GluingData] = None) -> GluingData:
    """Stored gluing data when present, else the surface estimate of the geometry itself."""
    if stored is not None and len(stored) == len(geometry.topology.interfaces):
        return stored
    return estimate_gluing(geometry.source(), geometry.topology)
