import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wslab.assembly import TubeDiscretization, assemble_straight_twisted, uniform_grid
from wslab.cross_section.modes import cached_ground_mode, solve_b_alpha0
from wslab.profiles import Bump, Constant, Hat
from wslab.spectral import (cutoff, lambda_alpha_I, lowest_eigenpairs, rayleigh_quotient,
                            weyl_probe)


def test_cutoff_shape():
    x = np.linspace(-2, 2, 4001)
    c = cutoff(x)
    assert np.all((c >= 0) & (c <= 1))
    assert np.all(c[np.abs(x) <= 0.5] == 1) and np.all(c[np.abs(x) >= 1] == 0)
    assert np.all(np.diff(c[x >= 0]) <= 0)


def test_report_serializes(ellipse_mesh_coarse):
    disc = TubeDiscretization(uniform_grid(0, 2, 0.25), ellipse_mesh_coarse)
    rep = lowest_eigenpairs(assemble_straight_twisted(1.0, disc), 2)
    d = json.loads(rep.to_json())
    assert d["eigenvalues"] == [float(x) for x in rep.eigenvalues]
    assert d["grid"]["end_condition"] == "dirichlet"
    assert np.all(rep.residuals < 1e-7)


def test_rayleigh_quotient_bounds_ground_state(ellipse_mesh_coarse):
    disc = TubeDiscretization(uniform_grid(0, 2, 0.25), ellipse_mesh_coarse)
    form = assemble_straight_twisted(Hat(1.0, 0.6, 2.0), disc)
    lam = lowest_eigenpairs(form).eigenvalues[0]
    rng = np.random.default_rng(3)
    for _ in range(5):
        assert rayleigh_quotient(form, rng.normal(size=disc.size)) >= lam


def test_untwisted_threshold_is_zero(ellipse_mesh_coarse):
    assert abs(lambda_alpha_I(0.0, (0, 1), ellipse_mesh_coarse, ds=0.1)) < 1e-9


@settings(max_examples=8, deadline=None)
@given(amp=st.floats(0.2, 3.0), center=st.floats(0.0, 1.0), width=st.floats(0.2, 1.0))
def test_threshold_is_nonnegative_and_bounded(ellipse_mesh_coarse, amp, center, width):
    alpha = Bump(amp, center, width)
    lam = lambda_alpha_I(alpha, (0, 1), ellipse_mesh_coarse, ds=0.1)
    assert lam >= -1e-9
    assert lam <= solve_b_alpha0(ellipse_mesh_coarse, alpha.sup_norm(0, 1)) + 1e-8


def test_dirichlet_threshold_dominates_natural(ellipse_mesh_coarse):
    nat = lambda_alpha_I(Constant(1.0), (0, 2), ellipse_mesh_coarse, ds=0.1)
    dir_ = lambda_alpha_I(Constant(1.0), (0, 2), ellipse_mesh_coarse, ds=0.1,
                          end_condition="dirichlet")
    assert dir_ >= nat
    assert dir_ >= solve_b_alpha0(ellipse_mesh_coarse, 1.0) - 1e-8


def test_weyl_probe_quotient(ellipse_mesh_coarse):
    m = ellipse_mesh_coarse
    E1 = cached_ground_mode(m).E1
    disc = TubeDiscretization(uniform_grid(0, 40, 0.2), m)
    form = assemble_straight_twisted(0.0, disc)
    psi = weyl_probe(disc, 5.0, 1.0)
    assert rayleigh_quotient(form, psi) == pytest.approx(E1 + 1.0, rel=2e-2)
