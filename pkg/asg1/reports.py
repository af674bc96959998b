"""
Construction/solver reports and figure or mesh exports.
"""
import json
import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from utils.shared import APP_NAME, APP_VERSION, ASG1_COLORS, DEFAULT_REACTION, PATCH_COLORSCALES
from .construction import Asg1Report, ConstructionParams, ConstructionResult
from .errors import InvalidArgumentError
from .gluing import GluingData
from .iga import ConvergenceLedger
from .mpatch import MultiPatchSpline, SurfaceSource

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ScalarField = Callable[[int, np.ndarray, np.ndarray], np.ndarray]

RUN_BLOCK = 'run'
EXPORT_FORMATS = ('vtk', 'csv-grid', 'html')


def _finite(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, np.ndarray):
        return _finite(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def construction_report(result: ConstructionResult, params: ConstructionParams, errors: Sequence[float],
                        check: Asg1Report) -> Dict[str, Any]:
    """Machine-readable summary of one construction run."""
    return {
        'tool': {'name': APP_NAME, 'version': APP_VERSION},
        'geometry': result.geometry.name,
        'mode': result.mode,
        'space': {'degree': params.p, 'regularity': params.r, 'segments': params.k, 'sigma': params.sigma},
        'patches': result.geometry.num_patches,
        'gluing': result.gluing.to_records(),
        'stages': [s.summary() for s in result.stages],
        'errors': {'eL2': float(errors[0]), 'eH1': float(errors[1])},
        'input_g1_residual': result.input_g1_residual,
        'asg1': {'max_residual': check.max_residual, 'worst_interface': check.worst_interface,
                 'min_alpha_product': check.min_alpha_product, 'passed': check.passed(params.asg1_tol),
                 'interfaces': check.rows},
        RUN_BLOCK: {'timings': dict(result.timings)},
    }


def check_report(name: str, check: Asg1Report, tol: float, gluing: GluingData) -> Dict[str, Any]:
    return {
        'tool': {'name': APP_NAME, 'version': APP_VERSION},
        'geometry': name,
        'gluing': gluing.to_records(),
        'asg1': {'max_residual': check.max_residual, 'worst_interface': check.worst_interface,
                 'min_alpha_product': check.min_alpha_product, 'tolerance': tol, 'passed': check.passed(tol),
                 'interfaces': check.rows},
        RUN_BLOCK: {},
    }


def ledger_report(name: str, kind: str, ledger: ConvergenceLedger, reaction: Optional[float] = None,
                  seconds: Optional[Dict[str, float]] = None) -> Dict[str, Any]:
    records = ledger.frame.drop(columns=['seconds'], errors='ignore').to_dict(orient='records')
    report = {
        'tool': {'name': APP_NAME, 'version': APP_VERSION},
        'geometry': name,
        'problem': kind,
        'measure': ledger.measure,
        'ledger': records,
        'final_orders': dict(zip(('oL2', 'oH1', 'oH2'), ledger.final_orders())),
        'notes': list(ledger.notes),
        RUN_BLOCK: {'timings': dict(seconds or {})},
    }
    if reaction is not None:
        report['reaction'] = {'value': reaction, 'is_default': reaction == DEFAULT_REACTION}
    return report


def write_report(path: PathLike, report: Dict[str, Any]) -> Path:
    """
    JSON report with sorted keys. Timings and the timestamp live in the ``run``
    block, so two runs with identical inputs differ only there.
    """
    path = Path(path)
    payload = _finite(report)
    payload.setdefault(RUN_BLOCK, {})['timestamp'] = datetime.now(timezone.utc).isoformat()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding='utf-8')
    logger.info("report written to %s", path)
    return path


def write_excel_report(path: PathLike, report: Dict[str, Any]) -> Path:
    """
    Excel workbook with sheets Summary, Gluing, Interfaces, Stages and Ledger
    (sheets without data are skipped).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary = {k: v for k, v in report.items() if not isinstance(v, (dict, list))}
    for key in ('errors', 'space'):
        for name, value in (report.get(key) or {}).items():
            summary[f"{key}.{name}"] = value
    asg1 = report.get('asg1') or {}
    for name in ('max_residual', 'worst_interface', 'min_alpha_product', 'passed'):
        if name in asg1:
            summary[f"asg1.{name}"] = asg1[name]
    gluing = [{'interface': g['interface'],
               **{f"side1.{k}": v for k, v in zip(('a0', 'a1', 'b0', 'b1'), g['side1'])},
               **{f"side2.{k}": v for k, v in zip(('a0', 'a1', 'b0', 'b1'), g['side2'])}}
              for g in report.get('gluing', [])]
    with pd.ExcelWriter(path, engine='openpyxl') as writer:
        pd.DataFrame([summary]).to_excel(writer, sheet_name='Summary', index=False)
        for sheet, rows in (('Gluing', gluing), ('Interfaces', asg1.get('interfaces', [])),
                            ('Stages', report.get('stages', [])), ('Ledger', report.get('ledger', []))):
            frame = pd.DataFrame(rows)
            if not frame.empty:
                frame.to_excel(writer, sheet_name=sheet, index=False)
    logger.info("workbook written to %s", path)
    return path


def write_ledger_csv(path: PathLike, ledger: ConvergenceLedger) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ledger.frame.loc[:, list(ConvergenceLedger.COLUMNS)].to_csv(path, index=False)
    return path


def distance_field(F: MultiPatchSpline, S: SurfaceSource) -> ScalarField:
    """Pointwise |F - S| on a parameter grid of one patch."""
    src = F.source()
    return lambda patch, u, v: np.linalg.norm(src.grid(patch, u, v) - S.grid(patch, u, v), axis=-1)


def _sample(geometry: MultiPatchSpline, samples: int):
    if samples < 2:
        raise InvalidArgumentError(f"need at least 2 samples per patch direction, got {samples}")
    t = np.linspace(0.0, 1.0, samples)
    src = geometry.source()
    return t, [src.grid(i, t, t) for i in range(geometry.num_patches)]


def plot_surface_html(path: PathLike, geometry: MultiPatchSpline, samples: int = 33,
                      scalar: Optional[ScalarField] = None, title: Optional[str] = None) -> Path:
    """One plotly surface trace per patch, coloured by ``scalar`` when given."""
    t, grids = _sample(geometry, samples)
    fig = go.Figure()
    for i, pts in enumerate(grids):
        color = scalar(i, t, t) if scalar is not None else None
        fig.add_trace(go.Surface(
            x=pts[..., 0], y=pts[..., 1], z=pts[..., 2], surfacecolor=color,
            colorscale='Viridis' if scalar is not None else PATCH_COLORSCALES[i % len(PATCH_COLORSCALES)],
            showscale=scalar is not None and i == 0, name=f"patch {i}"))
    fig.update_layout(title=title or geometry.name, paper_bgcolor=ASG1_COLORS['off_white'],
                      scene={'aspectmode': 'data'})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.write_html(str(path), include_plotlyjs='cdn')
    return path


def plot_convergence_html(path: PathLike, ledger: ConvergenceLedger, title: str = "Convergence") -> Path:
    """Log-log plot of the L2, H1 and H2-type columns against h."""
    frame = ledger.frame
    fig = go.Figure()
    palette = (ASG1_COLORS['deep_teal'], ASG1_COLORS['terracotta'], ASG1_COLORS['slate'])
    for column, color in zip(('eL2', 'eH1', 'eH2'), palette):
        fig.add_trace(go.Scatter(x=frame['h'], y=frame[column], mode='lines+markers', name=column,
                                 line={'color': color}))
    label = 'error' if ledger.measure == 'error' else 'h-h/2 estimator'
    fig.update_layout(title=title, xaxis={'type': 'log', 'title': 'h'}, yaxis={'type': 'log', 'title': label})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.write_html(str(path), include_plotlyjs='cdn')
    return path


def _vtk_lines(title: str, pts: np.ndarray, values: Optional[np.ndarray], scalar_name: str) -> List[str]:
    m = pts.shape[0]
    ordered = pts.transpose(1, 0, 2).reshape(-1, 3)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET STRUCTURED_GRID",
             f"DIMENSIONS {m} {m} 1", f"POINTS {m * m} double"]
    lines += [" ".join(repr(float(c)) for c in p) for p in ordered]
    if values is not None:
        lines += [f"POINT_DATA {m * m}", f"SCALARS {scalar_name} double 1", "LOOKUP_TABLE default"]
        lines += [repr(float(v)) for v in values.T.ravel()]
    return lines


def export_vtk(directory: PathLike, geometry: MultiPatchSpline, samples: int,
               scalar: Optional[ScalarField] = None, scalar_name: str = "distance") -> List[Path]:
    """
    Legacy ASCII VTK structured grids, one file ``<name>_patch<i>.vtk`` per patch.
    Points run with the first parameter fastest.
    """
    t, grids = _sample(geometry, samples)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, pts in enumerate(grids):
        values = scalar(i, t, t) if scalar is not None else None
        path = directory / f"{geometry.name}_patch{i}.vtk"
        path.write_text("\n".join(_vtk_lines(f"{geometry.name} patch {i}", pts, values, scalar_name)) + "\n",
                        encoding='ascii')
        paths.append(path)
    logger.info("exported %d VTK grids to %s", len(paths), directory)
    return paths


def export_csv_grid(path: PathLike, geometry: MultiPatchSpline, samples: int,
                    scalar: Optional[ScalarField] = None) -> Path:
    """One CSV with columns patch, i, j, u, v, x, y, z (and value when a scalar is given)."""
    t, grids = _sample(geometry, samples)
    frames = []
    for p, pts in enumerate(grids):
        i, j = np.meshgrid(np.arange(samples), np.arange(samples), indexing='ij')
        frame = pd.DataFrame({'patch': p, 'i': i.ravel(), 'j': j.ravel(), 'u': t[i.ravel()], 'v': t[j.ravel()],
                              'x': pts[..., 0].ravel(), 'y': pts[..., 1].ravel(), 'z': pts[..., 2].ravel()})
        if scalar is not None:
            frame['value'] = scalar(p, t, t).ravel()
        frames.append(frame)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format='%.17g')
    return path


def read_csv_grid(path: PathLike) -> pd.DataFrame:
    """Read a grid written by ``export_csv_grid``; floats come back bit-exact."""
    return pd.read_csv(path, float_precision='round_trip')
