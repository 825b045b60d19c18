import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from knowledge_collapse import persist, svg
from knowledge_collapse.simulation import SimConfig, run_simulation


@given(st.floats(-1e6, 1e6), st.floats(1e-3, 1e6))
def test_ticks_cover_range(lo, span):
    hi = lo + span
    ticks = svg.nice_ticks(lo, hi)
    assert 2 <= len(ticks) <= 12
    assert all(lo - 1e-9 * span <= t <= hi + 1e-9 * span for t in ticks)
    assert np.all(np.diff(ticks) > 0)


def test_padded_range():
    assert svg.padded_range(0, 10) == (-0.5, 10.5)
    lo, hi = svg.padded_range(2, 2)
    assert lo < 2 < hi
    with pytest.raises(ValueError):
        svg.padded_range(0, math.inf)


def test_overlay_and_lines_are_deterministic():
    x = np.linspace(-3, 3, 50)
    curves = [("a", x, np.exp(-x**2)), ("truth", x, np.exp(-x**2 / 2))]
    assert svg.kde_overlay(curves) == svg.kde_overlay(curves)
    doc = svg.kde_overlay(curves, title="t <&>")
    assert doc.startswith("<svg") and doc.endswith("</svg>\n")
    assert "t &lt;&amp;&gt;" in doc and 'stroke-dasharray="6 3"' in doc
    one = svg.distance_lines([("only", [(0.5, 0.3)])])
    assert "<polyline" not in one and one.count('class="marker"') == 1
    with pytest.raises(ValueError):
        svg.distance_lines([])


def test_fmt():
    assert persist.fmt(None) == "none"
    assert persist.fmt(True) == "true"
    assert persist.fmt(3) == "3"
    assert persist.fmt(np.float64(1 / 3)) == "0.333333333"
    assert persist.fmt(float("nan")) == "nan"


def test_write_run(tmp_path):
    res = run_simulation(SimConfig(n_rounds=4, seed=2))
    files = persist.write_run(res, tmp_path, command={"argv": ["run"]})
    assert {f.name for f in files} == {"rounds.csv", "final_pdf.csv", "metadata.json"}
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["config"] == res.config.to_dict() and meta["status"] == "ok"
    assert set(meta["versions"]) == {"knowledge_collapse", "numpy", "scipy", "python"}
    lines = (tmp_path / "final_pdf.csv").read_text().splitlines()
    assert lines[0] == "x,density" and len(lines) == 1 + res.config.grid_points
