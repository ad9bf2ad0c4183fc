import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bessel_j0_first_root
from wslab.cross_section import (CrossSectionShape, generate_mesh, is_rotationally_invariant,
                                 load_mesh, refine, rotation, save_mesh)
from wslab.cross_section import fem
from wslab.cross_section.modes import (angular_norm, cached_ground_mode, cross_section_modes,
                                       export_mode_csv, extract_c_omega,
                                       perturbation_coefficients, solve_b_alpha0,
                                       solve_ground_mode)
from wslab.errors import MeshFailure

SHAPES = {
    "disc": CrossSectionShape.disc(1.0),
    "annulus": CrossSectionShape.annulus(0.4, 1.0),
    "ellipse": CrossSectionShape.ellipse(1.0, 0.5),
    "rectangle": CrossSectionShape.rectangle(1.0, 0.7, center=(0.1, -0.2), tilt=0.3),
    "polygon": CrossSectionShape.polygon([(0, 0), (1.2, 0), (1.0, 0.8), (0.2, 1.0)]),
    "offset_disc": CrossSectionShape.disc(0.5, center=(0.3, 0.0)),
}


@pytest.mark.parametrize("name", sorted(SHAPES))
def test_mesh_quality(name):
    shape = SHAPES[name]
    h = 0.1
    m = generate_mesh(shape, h)
    assert np.all(m.signed_areas() > 0)
    assert m.max_edge() <= 1.5 * h
    assert abs(m.signed_areas().sum() - shape.area()) / shape.area() < 0.02
    assert np.all(shape.contains(m.nodes[m.interior]))


def test_mesh_failure_for_large_h():
    with pytest.raises(MeshFailure):
        generate_mesh(CrossSectionShape.ellipse(1.0, 0.2), 0.5)


@pytest.mark.parametrize("name", ["disc", "ellipse", "polygon"])
def test_save_load_roundtrip(tmp_path, name):
    m = generate_mesh(SHAPES[name], 0.2)
    save_mesh(m, tmp_path / "m.txt")
    m2 = load_mesh(tmp_path / "m.txt")
    assert np.array_equal(m.nodes, m2.nodes)
    assert np.array_equal(m.triangles, m2.triangles)
    assert np.array_equal(m.boundary, m2.boundary)
    F, F2 = fem.forms(m), fem.forms(m2)
    assert abs(F.K - F2.K).max() == 0.0


@pytest.mark.parametrize("name", ["disc", "rectangle"])
def test_refinement_halves_edges_and_converges(name):
    m = generate_mesh(SHAPES[name], 0.2)
    r = refine(m)
    assert r.max_edge() <= 0.55 * m.max_edge() + 1e-12
    e0, e1 = solve_ground_mode(m).E1, solve_ground_mode(r).E1
    assert e1 < e0  # conforming P1 refinement: monotone from above


def test_disc_ground_energy_against_bessel_root():
    m = generate_mesh(CrossSectionShape.disc(1.0), 1 / 16)
    j01 = bessel_j0_first_root()
    assert j01 == pytest.approx(2.404825557695773, abs=1e-12)
    assert solve_ground_mode(m).E1 == pytest.approx(j01 ** 2, rel=2e-3)


def test_square_ground_energy(square_mesh):
    assert cached_ground_mode(square_mesh).E1 == pytest.approx(2 * np.pi ** 2, rel=1.5e-2)


def test_rectangle_spectrum_separable():
    m = generate_mesh(CrossSectionShape.rectangle(2.0, 1.0), 1 / 16)
    vals, _ = cross_section_modes(m, 3)
    exact = np.pi ** 2 * np.array([1 / 4 + 1, 1 + 1, 9 / 4 + 1])
    assert np.allclose(vals, exact, rtol=2e-2)


def test_ground_mode_positive_and_normalized(ellipse_mesh_coarse):
    g = cached_ground_mode(ellipse_mesh_coarse)
    J = g.interior
    M = fem.forms(ellipse_mesh_coarse).M
    assert np.all(J > 0)
    assert J @ (M @ J) == pytest.approx(1.0, abs=1e-12)
    assert g.residual < 1e-8


@settings(max_examples=10, deadline=None)
@given(eps=st.floats(0.01, 10.0))
def test_mapped_mesh_scaling(eps):
    m = generate_mesh(CrossSectionShape.ellipse(1.0, 0.5), 0.25)
    e1 = cached_ground_mode(m).E1
    e1_eps = solve_ground_mode(m.scaled(eps)).E1
    assert e1_eps * eps ** 2 == pytest.approx(e1, rel=1e-11)


@settings(max_examples=8, deadline=None)
@given(beta=st.floats(-np.pi, np.pi))
def test_rotated_shape_has_same_spectrum(beta):
    shape = CrossSectionShape.rectangle(1.0, 0.6, tilt=0.2)
    m0 = generate_mesh(shape, 0.2)
    m1 = generate_mesh(shape.rotate(beta), 0.2)
    assert solve_ground_mode(m1).E1 == pytest.approx(solve_ground_mode(m0).E1, rel=1e-10)


def test_rotation_group_law():
    a, b = 0.3, -1.1
    assert np.allclose(rotation(a) @ rotation(b), rotation(a + b))


def test_invariance_detection():
    assert is_rotationally_invariant(CrossSectionShape.disc(1.0))
    assert is_rotationally_invariant(CrossSectionShape.annulus(0.3, 1.0))
    assert not is_rotationally_invariant(CrossSectionShape.disc(1.0, center=(0.1, 0.0)))
    assert not is_rotationally_invariant(CrossSectionShape.ellipse(1.0, 0.5))
    assert is_rotationally_invariant(CrossSectionShape.ellipse(0.7, 0.7))


def test_centered_disc_angular_derivative_vanishes(disc_mesh_coarse):
    J = cached_ground_mode(disc_mesh_coarse).J1
    assert angular_norm(disc_mesh_coarse, J) < 1e-10
    assert solve_b_alpha0(disc_mesh_coarse, 3.0) < 1e-9
    assert extract_c_omega(disc_mesh_coarse) == 0.0


def test_offset_disc_is_twistable():
    m = generate_mesh(SHAPES["offset_disc"], 0.1)
    assert angular_norm(m, cached_ground_mode(m).J1) > 0.1
    assert solve_b_alpha0(m, 1.0) > 1e-3


def test_c_omega_two_routes():
    """Richardson limit of lambda(alpha0)/alpha0^2 against the first-order coefficient."""
    m = generate_mesh(CrossSectionShape.ellipse(1.0, 0.5), 1 / 16)
    est = extract_c_omega(m, details=True)
    c1, c2 = perturbation_coefficients(m)
    assert est.value == pytest.approx(c1, rel=1e-6)
    # second order: lambda(a)/a^2 = c1 - c2 a^2 + O(a^4)
    a = 0.1
    assert solve_b_alpha0(m, a) / a ** 2 == pytest.approx(c1 - c2 * a * a, abs=2e-3 * a * a)
    # mesh convergence band of the ellipse value
    assert est.value == pytest.approx(0.6156, rel=0.02)


def test_b_alpha0_monotone_in_alpha(ellipse_mesh_coarse):
    vals = [solve_b_alpha0(ellipse_mesh_coarse, a) for a in (0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(vals) > 0)


def test_mode_csv(tmp_path, ellipse_mesh_coarse):
    g = cached_ground_mode(ellipse_mesh_coarse)
    export_mode_csv(ellipse_mesh_coarse, g.J1, tmp_path / "j.csv")
    lines = (tmp_path / "j.csv").read_text().splitlines()
    assert lines[:2] == ["# wslab csv v1", "node,t2,t3,value"]
    assert len(lines) == ellipse_mesh_coarse.n_nodes + 2
