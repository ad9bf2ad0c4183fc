import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from wslab.config import (build_s_nodes, build_shape, build_tube, dump_config, load_config,
                          parse_config)
from wslab.errors import ConfigError
from wslab.svg import line_plot


def test_defaults_and_roundtrip():
    cfg = parse_config({"command": "cross-section"})
    assert cfg.seed == 0 and cfg.threads == 1
    again = parse_config(json.loads(json.dumps(dump_config(cfg))))
    assert dump_config(again) == dump_config(cfg)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        parse_config({"command": "cross-section", "tube": {"radius": 1.0}})
    with pytest.raises(ConfigError):
        parse_config({"command": "no-such-command"})


def test_shape_parameter_count_checked():
    with pytest.raises(ConfigError):
        parse_config({"command": "cross-section", "tube": {"shape": {"kind": "ellipse",
                                                                      "params": [1.0]}}})


def test_report_is_accepted_as_config():
    cfg = parse_config({"command": "thin-limit", "seed": 3})
    report = {"schema": "wslab-report/1", "config": dump_config(cfg), "results": {}}
    assert parse_config(report).seed == 3


def test_toml_and_json_agree(tmp_path):
    toml = tmp_path / "c.toml"
    toml.write_text('command = "tube-spectrum"\n[tube.shape]\nkind = "ellipse"\n'
                    'params = [1.0, 0.5]\n')
    js = tmp_path / "c.json"
    js.write_text(json.dumps({"command": "tube-spectrum",
                              "tube": {"shape": {"kind": "ellipse", "params": [1.0, 0.5]}}}))
    assert dump_config(load_config(toml)) == dump_config(load_config(js))


def test_builders():
    cfg = parse_config({"command": "geometry-check", "tube": {
        "half_length": 3.0, "curve": {"preset": "helix", "kappa": 0.3, "tau": 0.2},
        "angle": {"preset": "tang"}, "shape": {"kind": "ellipse", "params": [0.5, 0.25]}}})
    spec = build_tube(cfg.tube)
    assert spec.a == pytest.approx(0.5)
    assert np.max(np.abs(spec.twist_rate(spec.curve.s_grid))) < 1e-12
    assert build_shape(cfg.tube.shape).area() == pytest.approx(np.pi * 0.125)
    s = build_s_nodes(cfg.discretization, -3.0, 3.0)
    assert s[0] == -3.0 and s[-1] == 3.0


def test_svg_is_deterministic_and_well_formed(tmp_path):
    x = np.linspace(0, 1, 11)
    series = [("a < b", x, x ** 2), ("flat", x, np.ones_like(x))]
    line_plot(tmp_path / "p1.svg", series, title="t & u", xlabel="s", ylabel="y")
    line_plot(tmp_path / "p2.svg", series, title="t & u", xlabel="s", ylabel="y")
    text = (tmp_path / "p1.svg").read_text()
    assert text == (tmp_path / "p2.svg").read_text()
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
