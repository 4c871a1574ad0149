import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coreg.exceptions import ConfigError, DimensionError
from coreg.io import (CsvFormatError, atomic_write, dumps_json, load_json, read_table,
                      write_table)
from coreg.plotting import (NEUTRAL, POSITIVE, diverging_color, heatmap_svg, render_heatmap,
                            roc_svg, venn_panel_svg)

SVG = "{http://www.w3.org/2000/svg}"


def rect_grid(svg):
    root = ET.fromstring(svg)
    cells = {}
    for r in root.iter(SVG + "rect"):
        cells[(int(r.get("y")), int(r.get("x")))] = r.get("fill")
    rows = sorted({k[0] for k in cells})
    cols = sorted({k[1] for k in cells})
    return [[cells[(y, x)] for x in cols] for y in rows]


class TestCsv:
    def test_read(self):
        t = read_table("a,b\n1,2\n3.5,-4e-3\n", from_text=True)
        assert t.columns == ["a", "b"]
        np.testing.assert_array_equal(t.values, [[1, 2], [3.5, -0.004]])
        np.testing.assert_array_equal(t.select(["b"]), [[2], [-0.004]])

    @pytest.mark.parametrize("text, fragment", [
        ("", "no header"),
        ("a,b\n", "header only"),
        ("a,b\n1,2\n3\n", "row 3"),
        ("a,b\n1,2\n3,oops\n", "row 3, column 2"),
        ("a,b\n1,\n", "row 2, column 2"),
        ("a,a\n1,2\n", "duplicate"),
        ("a,b\n1,nan\n", "non-finite"),
    ])
    def test_diagnostics(self, text, fragment):
        with pytest.raises(CsvFormatError, match=fragment):
            read_table(text, from_text=True)

    def test_missing_column(self):
        with pytest.raises(ConfigError, match="not found"):
            read_table("a\n1\n", from_text=True).select(["z"])

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64),
                             min_size=3, max_size=3), min_size=1, max_size=8))
    def test_round_trip_full_precision(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("csv") / "m.csv"
        write_table(path, ["a", "b", "c"], rows)
        back = read_table(path)
        np.testing.assert_array_equal(back.values, np.asarray(rows))


class TestJson:
    def test_nan_becomes_null(self):
        d = json.loads(dumps_json({"x": np.float64("nan"), "y": np.arange(2), "z": np.bool_(True)}))
        assert d == {"x": None, "y": [0, 1], "z": True}

    def test_load_errors(self, tmp_path):
        (tmp_path / "bad.json").write_text("{nope")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_json(tmp_path / "bad.json")
        with pytest.raises(ConfigError):
            load_json(tmp_path / "missing.json")

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        atomic_write(tmp_path / "sub" / "f.txt", "hello")
        assert (tmp_path / "sub" / "f.txt").read_text() == "hello"
        assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]


class TestHeatmap:
    def test_colour_scale(self):
        assert diverging_color(1.0) == "#{:02x}{:02x}{:02x}".format(*POSITIVE)
        assert diverging_color(0.0) == "#{:02x}{:02x}{:02x}".format(*NEUTRAL)
        assert diverging_color(-1.0) == "#2166ac"
        assert diverging_color(3.0) == diverging_color(1.0)

    def test_identity(self):
        grid = rect_grid(heatmap_svg(np.eye(5)))
        for i in range(5):
            for j in range(5):
                assert grid[i][j] == (diverging_color(1.0) if i == j else "#ffffff")

    def test_permuted_blocks_contiguous(self):
        R = np.eye(6)
        a, b = [0, 2, 4], [1, 3, 5]
        for grp in (a, b):
            for i in grp:
                for j in grp:
                    R[i, j] = 1.0 if i == j else 0.7
        grid = rect_grid(heatmap_svg(R, permutation=a + b))
        block = diverging_color(0.7)
        for i in range(6):
            for j in range(6):
                same = (i < 3) == (j < 3)
                if i != j:
                    assert (grid[i][j] == block) == same

    def test_well_formed_file(self, tmp_path):
        render_heatmap(np.eye(3), tmp_path / "h.svg", title="a < b & c")
        ET.parse(tmp_path / "h.svg")

    def test_downsampled(self):
        grid = rect_grid(heatmap_svg(np.eye(40), max_cells=10))
        assert len(grid) == 10

    def test_validation(self):
        with pytest.raises(DimensionError):
            heatmap_svg(np.eye(1))
        with pytest.raises(DimensionError):
            heatmap_svg(np.eye(3), permutation=[0, 0, 1])

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError):
            render_heatmap(np.eye(2), blocker / "h.svg")


class TestOtherFigures:
    def test_roc_ticks(self):
        root = ET.fromstring(roc_svg({"A": ([0, 0.5, 1], [0, 0.9, 1])}))
        labels = [t.text for t in root.iter(SVG + "text")]
        for k in range(11):
            assert f"{k / 10:.1f}" in labels
        assert len(list(root.iter(SVG + "polyline"))) == 1

    def test_venn_counts(self):
        summary = {"CoReg": {"only_arm1": 10.0, "intersection": 30.0, "only_arm2": 5.0,
                             "proportions": {"only_arm1": 10 / 45, "intersection": 30 / 45,
                                             "only_arm2": 5 / 45}}}
        root = ET.fromstring(venn_panel_svg(summary))
        texts = [t.text for t in root.iter(SVG + "text")]
        assert "30.0 (66.7%)" in texts and "CoReg" in texts
