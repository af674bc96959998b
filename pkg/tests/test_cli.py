"""End-to-end tests of the asg1 command line."""
import json
from pathlib import Path

import pandas as pd
import pytest

from asg1.cli import build_parser, main
from asg1.geometry_io import read_geometry

DATA = Path(__file__).resolve().parent.parent / "data"
TWO_SQUARES = str(DATA / "two_squares.xml")


@pytest.fixture(scope="module")
def sample_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("samples")
    assert main(['--quiet', 'samples', '--output-dir', str(out), 'planar-asg1', 'perturbed-grid']) == 0
    return out


class TestParser:
    def test_missing_command(self):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 1

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as info:
            main(['fit', '--input', TWO_SQUARES, '--output', 'x.xml', '--bogus'])
        assert info.value.code == 1

    def test_samples_per_patch_lower_bound(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(['export', '--input', TWO_SQUARES, '--samples-per-patch', '1', '--output', str(tmp_path)])
        assert info.value.code == 1

    def test_defaults(self):
        args = build_parser().parse_args(['convergence', '--input', 'g.xml'])
        assert args.levels == 3
        assert args.problem == 'dirichlet'
        assert build_parser().parse_args(['solve', '--input', 'g.xml']).levels == 1


class TestFit:
    def test_two_squares(self, tmp_path):
        out, report = tmp_path / "fit.xml", tmp_path / "fit.json"
        code = main(['--quiet', 'fit', '--input', TWO_SQUARES, '-p', '4', '-r', '1', '-k', '1',
                     '--output', str(out), '--report', str(report)])
        assert code == 0
        geometry, gluing = read_geometry(out)
        assert geometry.space.n == 5 + 1 * 3
        assert gluing is not None and len(gluing) == 1
        data = json.loads(report.read_text())
        assert data['asg1']['passed'] is True
        assert data['errors']['eL2'] <= 1e-9

    def test_excel_and_plot(self, tmp_path):
        excel, plot = tmp_path / "fit.xlsx", tmp_path / "fit.html"
        code = main(['--quiet', 'fit', '--input', TWO_SQUARES, '-p', '4', '-r', '1', '-k', '1', '--mode', 'global',
                     '--output', str(tmp_path / "fit.xml"), '--excel', str(excel), '--plot', str(plot)])
        assert code == 0
        assert 'Summary' in pd.ExcelFile(excel, engine='openpyxl').sheet_names
        assert plot.exists()

    def test_inadmissible_degree(self, tmp_path):
        code = main(['--quiet', 'fit', '--input', TWO_SQUARES, '-p', '2', '-r', '1', '-k', '1',
                     '--output', str(tmp_path / "x.xml")])
        assert code == 2
        assert not (tmp_path / "x.xml").exists()

    def test_missing_input(self, tmp_path):
        code = main(['--quiet', 'fit', '--input', str(tmp_path / "missing.xml"), '--output', str(tmp_path / "x.xml")])
        assert code == 1

    def test_unknown_analytic_input(self, tmp_path):
        code = main(['--quiet', 'fit', '--input', 'analytic:torus', '--output', str(tmp_path / "x.xml")])
        assert code == 1

    def test_compare(self, tmp_path):
        report = tmp_path / "compare.json"
        code = main(['--quiet', 'compare', '--input', TWO_SQUARES, '-p', '4', '-r', '1', '-k', '1',
                     '--report', str(report)])
        assert code == 0
        data = json.loads(report.read_text())
        assert set(data['errors']) == {'local', 'global'}


class TestCheck:
    def test_planar_asg1_passes(self, sample_dir, tmp_path):
        report = tmp_path / "check.json"
        assert main(['--quiet', 'check', '--input', str(sample_dir / "planar-asg1.xml"),
                     '--report', str(report)]) == 0
        assert json.loads(report.read_text())['asg1']['passed'] is True

    def test_bundled_c2_file_passes(self, tmp_path):
        report = tmp_path / "two.json"
        assert main(['--quiet', 'check', '--input', TWO_SQUARES, '--report', str(report)]) == 0
        data = json.loads(report.read_text())
        assert data['asg1']['passed'] is True

    def test_perturbed_fails(self, sample_dir):
        assert main(['--quiet', 'check', '--input', str(sample_dir / "perturbed-grid.xml")]) == 5

    def test_fitted_output_passes(self, tmp_path):
        out = tmp_path / "fit.xml"
        assert main(['--quiet', 'fit', '--input', TWO_SQUARES, '-p', '4', '-r', '1', '-k', '1',
                     '--output', str(out)]) == 0
        assert main(['--quiet', 'check', '--input', str(out)]) == 0


class TestSolve:
    def test_single_level(self, sample_dir, tmp_path):
        csv, report = tmp_path / "ledger.csv", tmp_path / "solve.json"
        code = main(['--quiet', 'solve', '--input', str(sample_dir / "planar-asg1.xml"),
                     '--csv', str(csv), '--report', str(report)])
        assert code == 0
        frame = pd.read_csv(csv)
        assert len(frame) == 1
        assert frame['oL2'].isna().all()
        data = json.loads(report.read_text())
        assert data['problem'] == 'dirichlet'
        assert 'reaction' not in data

    def test_reaction_on_planar_domain(self, sample_dir):
        code = main(['--quiet', 'solve', '--input', str(sample_dir / "planar-asg1.xml"),
                     '--problem', 'reaction', '--solution', 'cos-half-product'])
        assert code == 6

    def test_non_asg1_input(self, sample_dir):
        assert main(['--quiet', 'solve', '--input', str(sample_dir / "perturbed-grid.xml")]) == 5


class TestExport:
    def test_vtk(self, tmp_path):
        out = tmp_path / "vtk"
        assert main(['--quiet', 'export', '--input', TWO_SQUARES, '--samples-per-patch', '3',
                     '--output', str(out)]) == 0
        files = sorted(out.glob("*.vtk"))
        assert [f.name for f in files] == ["two-squares_patch0.vtk", "two-squares_patch1.vtk"]
        assert "DIMENSIONS 3 3 1" in files[0].read_text()

    def test_csv_grid_with_reference(self, tmp_path):
        out = tmp_path / "grid.csv"
        assert main(['--quiet', 'export', '--input', TWO_SQUARES, '--format', 'csv-grid', '--reference', TWO_SQUARES,
                     '--samples-per-patch', '4', '--output', str(out)]) == 0
        frame = pd.read_csv(out)
        assert len(frame) == 2 * 16
        assert (frame['value'] == 0.0).all()

    def test_html(self, tmp_path):
        out = tmp_path / "view.html"
        assert main(['--quiet', 'export', '--input', TWO_SQUARES, '--format', 'html', '--output', str(out)]) == 0
        assert out.exists()


class TestSamples:
    def test_written_samples_load(self, sample_dir):
        geometry, _ = read_geometry(sample_dir / "planar-asg1.xml")
        assert geometry.name == "planar-asg1"
        assert (geometry.space.p, geometry.space.r, geometry.space.k) == (4, 1, 2)

    def test_unknown_sample(self, tmp_path):
        assert main(['--quiet', 'samples', '--output-dir', str(tmp_path), 'klein-bottle']) == 1
