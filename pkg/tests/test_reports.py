import math

import numpy as np

from jumpflow.reports import Report, ratio, svg_plot


def test_ratio_sentinels():
    assert ratio(0.0, 0.0) == 0.0
    assert math.isinf(ratio(1.0, 0.0))
    assert ratio(1.0, 4.0) == 0.25


def test_report_csv_layout():
    rep = Report("demo")
    rep.add("p=2", 1.0, 0.1, 2.0)
    rep.add("p=4", 0.0, 0.0, 0.0)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "sweep_param,lhs,lhs_stderr,rhs,ratio"
    assert lines[1] == "p=2,1,0.10000000000000001,2,0.5"
    assert lines[2].endswith(",0")


def test_checks_and_summary():
    rep = Report("demo")
    rep.check("good", True)
    rep.check("bad", False, "detail")
    assert not rep.passed
    assert [c.name for c in rep.failures] == ["bad"]
    assert rep.summary().splitlines() == ["PASS  good", "FAIL  bad  (detail)"]


def test_svg_is_wellformed():
    import xml.etree.ElementTree as ET

    svg = svg_plot({"a": ([1, 10, 100], [1, 0.1, 0.01]), "b <&>": ([1, 2], [0, -1])}, title="t")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    lin = svg_plot({"a": (np.arange(5), np.arange(5) ** 2)}, log_x=False, log_y=False)
    assert "<polyline" in lin
    assert "<svg" in Report("empty").to_svg()
