"""
Geometry files: an XML document holding the spline space, control nets,
topology and (optionally) gluing data of a multi-patch surface.

    <geometry version="1" name="...">
      <space degree="p" regularity="r" segments="k"/>
      <patches><patch id="0">x y z x y z ...</patch></patches>       (index j1 * n + j2)
      <interfaces><interface id="0" patchA="0" sideA="u1" patchB="1" sideB="u0" reversed="false"/></interfaces>
      <boundary><curve patch="0" side="u0"/></boundary>
      <vertices><vertex id="0" kind="inner" patchesCcw="0 1 3 2"/></vertices>
      <gluing><entry interface="0" side1="a0 a1 b0 b1" side2="a0 a1 b0 b1"/></gluing>
    </geometry>

Numbers are written as shortest round-trip decimals, so write followed by read
reproduces every double exactly.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import xmltodict

from utils.shared import CONFORMITY_TOL
from .errors import Asg1Error, GeometryFormatError
from .gluing import GluingData
from .mpatch import SIDES, InterfaceRecord, MultiPatchSpline, canonicalize
from .splinecore import SplineSpace1D

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1"

PathLike = Union[str, Path]


def _as_list(node: Any) -> List[Any]:
    if node is None:
        return []
    return node if isinstance(node, list) else [node]


def _floats(text: Optional[str], what: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in (text or "").split()], dtype=float)
    except ValueError as exc:
        raise GeometryFormatError(f"non-numeric entry in {what}: {exc}") from exc


def _fmt(values) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(values))


def _attr(node: Dict[str, Any], key: str, what: str) -> str:
    try:
        return node[f'@{key}']
    except (KeyError, TypeError):
        raise GeometryFormatError(f"{what} is missing attribute '{key}'")


def _int(node: Dict[str, Any], key: str, what: str) -> int:
    raw = _attr(node, key, what)
    try:
        return int(raw)
    except ValueError:
        raise GeometryFormatError(f"{what}: attribute '{key}' is not an integer ({raw!r})")


def _flag(raw: str, what: str) -> bool:
    if raw.lower() in ('true', '1'):
        return True
    if raw.lower() in ('false', '0'):
        return False
    raise GeometryFormatError(f"{what}: expected true/false, got {raw!r}")


def parse_geometry(content: str, tol: float = CONFORMITY_TOL) -> Tuple[MultiPatchSpline, Optional[GluingData]]:
    """
    Parse geometry XML content.

    Args:
        content: XML document as string
        tol: relative C0 conformity tolerance at interfaces

    Returns:
        (geometry, stored gluing data or None)
    """
    try:
        doc = xmltodict.parse(content)
    except Exception as exc:
        raise GeometryFormatError(f"malformed geometry XML: {exc}") from exc
    root = (doc or {}).get('geometry')
    if not isinstance(root, dict):
        raise GeometryFormatError("missing <geometry> root element")
    version = root.get('@version', FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise GeometryFormatError(f"unsupported geometry format version {version!r}")

    record = root.get('space')
    if not isinstance(record, dict):
        raise GeometryFormatError("missing <space> element")
    try:
        space = SplineSpace1D(_int(record, 'degree', 'space'), _int(record, 'regularity', 'space'),
                              _int(record, 'segments', 'space'))
    except GeometryFormatError:
        raise
    except Asg1Error as exc:
        raise GeometryFormatError(f"invalid space: {exc}") from exc
    n = space.n

    patches = _as_list((root.get('patches') or {}).get('patch'))
    if not patches:
        raise GeometryFormatError("geometry has no patches")
    nets = [None] * len(patches)
    for node in patches:
        node = node if isinstance(node, dict) else {'#text': node}
        pid = _int(node, 'id', 'patch')
        if not 0 <= pid < len(patches) or nets[pid] is not None:
            raise GeometryFormatError(f"patch ids must be 0..{len(patches) - 1} without repeats, got {pid}")
        values = _floats(node.get('#text'), f"patch {pid}")
        if values.size != 3 * n * n:
            raise GeometryFormatError(f"patch {pid} holds {values.size} numbers, expected {3 * n * n} "
                                      f"for {space}")
        nets[pid] = values.reshape(n, n, 3)

    interfaces = []
    for node in _as_list((root.get('interfaces') or {}).get('interface')):
        iid = _int(node, 'id', 'interface')
        if iid != len(interfaces):
            raise GeometryFormatError(f"interface ids must be consecutive from 0, got {iid}")
        sides = (_attr(node, 'sideA', f"interface {iid}"), _attr(node, 'sideB', f"interface {iid}"))
        for side in sides:
            if side not in SIDES:
                raise GeometryFormatError(f"interface {iid}: unknown side {side!r}")
        interfaces.append(InterfaceRecord(iid, _int(node, 'patchA', f"interface {iid}"), sides[0],
                                          _int(node, 'patchB', f"interface {iid}"), sides[1],
                                          _flag(node.get('@reversed', 'false'), f"interface {iid}")))

    boundary = None
    if root.get('boundary') is not None:
        boundary = [(_int(c, 'patch', 'boundary curve'), _attr(c, 'side', 'boundary curve'))
                    for c in _as_list((root.get('boundary') or {}).get('curve'))]

    vertices = None
    if root.get('vertices') is not None:
        vertices = []
        for node in _as_list((root.get('vertices') or {}).get('vertex')):
            fan = _attr(node, 'patchesCcw', 'vertex')
            vertices.append({'kind': _attr(node, 'kind', 'vertex'),
                             'patches_ccw': [int(x) for x in fan.split()]})

    geometry = canonicalize(space, nets, interfaces, boundary, vertices, tol=tol,
                            name=root.get('@name', 'geometry'))

    gluing = None
    entries = _as_list((root.get('gluing') or {}).get('entry'))
    if entries:
        records = []
        for node in entries:
            s1 = _floats(_attr(node, 'side1', 'gluing entry'), 'gluing entry')
            s2 = _floats(_attr(node, 'side2', 'gluing entry'), 'gluing entry')
            if s1.size != 4 or s2.size != 4:
                raise GeometryFormatError("gluing entries need four coefficients per side")
            records.append({'interface': _int(node, 'interface', 'gluing entry'), 'side1': s1, 'side2': s2})
        gluing = GluingData.from_records(records)
    logger.info("parsed %s: %d patches in %s, %d interfaces%s", geometry.name, geometry.num_patches, space,
                len(interfaces), ", with gluing data" if gluing else "")
    return geometry, gluing


def read_geometry(path: PathLike, tol: float = CONFORMITY_TOL) -> Tuple[MultiPatchSpline, Optional[GluingData]]:
    """Read a geometry file; see ``parse_geometry``."""
    path = Path(path)
    try:
        content = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise GeometryFormatError(f"cannot read geometry file {path}: {exc.strerror or exc}") from exc
    return parse_geometry(content, tol)


def geometry_document(geometry: MultiPatchSpline, gluing: Optional[GluingData] = None) -> Dict[str, Any]:
    space, topo = geometry.space, geometry.topology
    doc = {
        '@version': FORMAT_VERSION,
        '@name': geometry.name,
        'space': {'@degree': str(space.p), '@regularity': str(space.r), '@segments': str(space.k)},
        'patches': {'patch': [{'@id': str(i), '#text': _fmt(p.coeffs)} for i, p in enumerate(geometry.patches)]},
        'interfaces': {'interface': [
            {'@id': str(rec.id), '@patchA': str(rec.patch_a), '@sideA': rec.side_a, '@patchB': str(rec.patch_b),
             '@sideB': rec.side_b, '@reversed': 'true' if rec.reversed else 'false'} for rec in topo.interfaces]},
        'boundary': {'curve': [{'@patch': str(b.patch), '@side': b.side} for b in topo.boundary]},
        'vertices': {'vertex': [{'@id': str(v.id), '@kind': v.kind, '@patchesCcw': " ".join(map(str, v.patches))}
                                for v in topo.vertices]},
    }
    if gluing is not None and len(gluing):
        doc['gluing'] = {'entry': [{'@interface': str(r['interface']), '@side1': _fmt(r['side1']),
                                    '@side2': _fmt(r['side2'])} for r in gluing.to_records()]}
    return {'geometry': doc}


def write_geometry(path: PathLike, geometry: MultiPatchSpline, gluing: Optional[GluingData] = None) -> Path:
    """Write a geometry file (gluing section only when given)."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(xmltodict.unparse(geometry_document(geometry, gluing), pretty=True), encoding='utf-8')
    logger.info("wrote %s (%d patches) to %s", geometry.name, geometry.num_patches, path)
    return path
