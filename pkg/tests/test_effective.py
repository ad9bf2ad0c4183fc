import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wslab.assembly import uniform_grid
from wslab.cross_section import CrossSectionShape, generate_mesh
from wslab.effective import (EffectiveOperator1D, effective_eigenvalues, effective_operator,
                             thin_limit_study)
from wslab.errors import HypothesisViolated
from wslab.geometry import AngleFunction, TubeSpec, bump_curve, line_curve


def _spec(curve, rate=None, shape=None, validate=True):
    rate = np.zeros_like(curve.s_grid) if rate is None else rate
    ang = AngleFunction.from_rate(curve.s_grid, rate)
    lo, hi = curve.span
    return TubeSpec(curve, ang, shape or CrossSectionShape.disc(1.0), 0.5 * (hi - lo),
                    s_range=(lo, hi), validate=validate)


def test_free_interval_levels():
    op = EffectiveOperator1D(uniform_grid(0, 2, 0.005), lambda s: 0.0 * s)
    vals = effective_eigenvalues(op, 3)
    exact = (np.arange(1, 4) * np.pi / 2) ** 2
    assert np.allclose(vals, exact, rtol=1e-4)


@settings(max_examples=10, deadline=None)
@given(c=st.floats(-5.0, 5.0))
def test_constant_potential_shifts_levels(c):
    s = uniform_grid(0, 2, 0.02)
    v0 = effective_eigenvalues(EffectiveOperator1D(s, lambda x: 0.0 * x), 2)
    vc = effective_eigenvalues(EffectiveOperator1D(s, lambda x: c + 0.0 * x), 2)
    assert np.allclose(vc, v0 + c, atol=1e-8 * (1 + abs(c)))


def test_unresolved_potential_is_rejected():
    with pytest.raises(ValueError):
        EffectiveOperator1D(uniform_grid(0, 2, 0.1), lambda s: np.sin(40 * s))


def test_effective_potential_of_spec():
    c = bump_curve(0.5 * np.e, 1.0, -2, 2, 0.01)
    spec = _spec(c, rate=np.full_like(c.s_grid, 0.5))
    op = effective_operator(spec, uniform_grid(-2, 2, 0.01), 0.3)
    s = np.array([0.0, 1.5])
    expect = -0.25 * c.kappa_at(s) ** 2 + 0.3 * 0.25
    assert np.allclose(op.potential_values(s), expect, atol=1e-12)


def test_straight_tube_thin_limit_is_exact():
    m = generate_mesh(CrossSectionShape.disc(1.0), 0.25)
    spec = _spec(line_curve(-1, 1, 0.01))
    tab = thin_limit_study(spec, [0.2, 0.1], 1, m, ds=0.05)
    assert np.all(np.abs(tab.d(1)) <= 1e-2 * abs(tab.rows[0].mu))


def test_hypothesis_violation_in_thin_limit():
    m = generate_mesh(CrossSectionShape.disc(1.0), 0.25)
    spec = _spec(bump_curve(1.0 * np.e, 1.0, -2, 2, 0.01), validate=False)
    with pytest.raises(HypothesisViolated):
        thin_limit_study(spec, [1.0], 1, m, ds=0.02)


def test_conditioning_warning():
    m = generate_mesh(CrossSectionShape.disc(1.0), 0.25)
    spec = _spec(line_curve(-1, 1, 0.01))
    with pytest.warns(RuntimeWarning):
        tab = thin_limit_study(spec, [1e-6], 1, m, ds=0.1)
    assert np.isfinite(tab.rows[0].d)


def test_thin_limit_csv(tmp_path):
    m = generate_mesh(CrossSectionShape.disc(1.0), 0.25)
    tab = thin_limit_study(_spec(line_curve(-1, 1, 0.01)), [0.2], 2, m, ds=0.05)
    tab.write_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["# wslab csv v1"]
    assert rows[1] == ["eps", "j", "lambda_j", "E1_over_eps2", "mu_j", "d_j"]
    assert len(rows) == 4 and rows[3][1] == "2"
