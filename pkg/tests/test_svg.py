import xml.etree.ElementTree as ET

import numpy as np
import pytest

from clfree.dem import TrajectoryReport
from clfree.svg import EmptyReportError, emit_svg

NS = "{http://www.w3.org/2000/svg}"


def _report(k, band=0.0):
    i = np.arange(k)
    t = i / 10
    pred = 100 - i.astype(float)
    return TrajectoryReport("open_pairs", i, t, pred + 0.5, pred, np.full(k, band))


def _classes(text):
    root = ET.fromstring(text)
    return [(el.tag.replace(NS, ""), el.get("class")) for el in root.iter()]


def test_single_row_is_one_marker():
    els = _classes(emit_svg(_report(1)))
    assert sum(1 for tag, c in els if c == "marker") == 1
    assert not any(c == "band" for _, c in els)


def test_band_polygon():
    els = _classes(emit_svg(_report(20, band=2.0)))
    assert ("polygon", "band") in els
    assert any(c == "measured" for _, c in els) and any(c == "predicted" for _, c in els)


def test_byte_stable(tmp_path):
    a = emit_svg(_report(50, 1.0), tmp_path / "a.svg")
    b = emit_svg(_report(50, 1.0))
    assert a == b == (tmp_path / "a.svg").read_text()


def test_thinning():
    text = emit_svg(_report(5000, 1.0), max_points=100)
    assert text == emit_svg(_report(5000, 1.0), max_points=100)
    assert len(text) < len(emit_svg(_report(5000, 1.0)))


def test_scaling_table():
    table = {"n": [100, 200, 400], "edges": [10.0, 25.0, 62.0],
             "fits": {"edges": {"slope": 1.3, "intercept": -3.0}}}
    els = _classes(emit_svg(table, which="edges"))
    assert any(c == "fit" for _, c in els)


def test_empty_inputs():
    with pytest.raises(EmptyReportError):
        emit_svg(_report(0))
    with pytest.raises(EmptyReportError):
        emit_svg({"n": []})
