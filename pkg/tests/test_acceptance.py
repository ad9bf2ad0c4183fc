"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line in ``conftest.ACCEPTANCE``; the lines are
printed in the terminal summary. Tolerances are fixed by the criteria.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from conftest import bessel_j0_first_root
from wslab.analysis import certify_bending, hardy_scan, partition_lower_bound
from wslab.assembly import (TubeDiscretization, assemble_full_tube, assemble_straight_twisted,
                            graded_grid, uniform_grid)
from wslab.cli import main
from wslab.cross_section import CrossSectionShape, generate_mesh
from wslab.cross_section.modes import cached_ground_mode, solve_b_alpha0, solve_ground_mode
from wslab.geometry import AngleFunction, TubeSpec, bump_curve, helix_curve, metric_at
from wslab.profiles import Bump, Constant, Decaying, Hat, Plateau, Sampled
from wslab.spectral import lambda_alpha_I, lowest_eigenpairs, rayleigh_quotient, weyl_probe

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def record(n: int, ok: bool, detail: str) -> None:
    conftest.ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def _random_profiles(rng, count, lo, hi):
    out = []
    for i in range(count):
        kind = i % 3
        if kind == 0:
            out.append(Bump(rng.uniform(-3, 3), rng.uniform(lo, hi), rng.uniform(0.2, hi - lo)))
        elif kind == 1:
            out.append(Hat(rng.uniform(lo, hi), rng.uniform(0.2, hi - lo), rng.uniform(-3, 3)))
        else:
            s = np.linspace(lo, hi, 6)
            out.append(Sampled(tuple(s), tuple(rng.uniform(-2, 2, 6))))
    return out


@pytest.fixture(scope="module")
def ellipse_fine():
    return generate_mesh(CrossSectionShape.ellipse(1.0, 0.5), 1 / 12)


def test_criterion_01_cross_section_oracles():
    h = 1 / 64
    t = time.perf_counter()
    sq = solve_ground_mode(generate_mesh(CrossSectionShape.rectangle(1.0, 1.0), h)).E1
    t_sq = time.perf_counter() - t
    t = time.perf_counter()
    dc = solve_ground_mode(generate_mesh(CrossSectionShape.disc(1.0), h)).E1
    t_dc = time.perf_counter() - t
    j01 = bessel_j0_first_root()
    e_sq = abs(sq - 2 * np.pi ** 2) / (2 * np.pi ** 2)
    e_dc = abs(dc - j01 ** 2) / j01 ** 2
    ok = e_sq < 5e-3 and e_dc < 5e-3 and t_sq < 30 and t_dc < 30
    record(1, ok, f"square rel err {e_sq:.2e} ({t_sq:.1f} s), disc rel err {e_dc:.2e} "
                  f"({t_dc:.1f} s), j01^2 = {j01 ** 2:.6f}")
    assert ok


def test_criterion_02_metric_identities():
    c = helix_curve(0.6, 0.4, -5.0, 5.0, 0.01)
    ang = AngleFunction.from_rate(c.s_grid, 0.8 * np.sin(c.s_grid), 0.3)
    spec = TubeSpec(c, ang, CrossSectionShape.ellipse(1.0, 0.6), 5.0)
    rng = np.random.default_rng(0)
    det_err = inv_err = 0.0
    for _ in range(1000):
        s = rng.uniform(-5, 5)
        r, phi = np.sqrt(rng.uniform()), rng.uniform(0, 2 * np.pi)
        t = r * np.array([np.cos(phi), 0.6 * np.sin(phi)])
        m = metric_at(spec, s, t)
        det_err = max(det_err, abs(np.linalg.det(m.G) - m.h ** 2) / m.h ** 2)
        inv_err = max(inv_err, float(np.max(np.abs(m.G @ m.G_inv - np.eye(3)))))
    ok = det_err <= 1e-12 and inv_err <= 1e-12
    record(2, ok, f"1000 samples: max rel |det G - h^2| {det_err:.1e}, max |G G^-1 - I| {inv_err:.1e}")
    assert ok


def test_criterion_03_threshold_nonnegative(ellipse_mesh):
    zero = lambda_alpha_I(0.0, (0, 1), ellipse_mesh, ds=0.05)
    rng = np.random.default_rng(3)
    vals = [lambda_alpha_I(a, (0, 1), ellipse_mesh, ds=0.05)
            for a in _random_profiles(rng, 20, 0.0, 1.0)]
    ok = abs(zero) <= 1e-9 and min(vals) >= -1e-9
    record(3, ok, f"lambda(0,I) = {zero:.1e}; min over 20 random alpha = {min(vals):.3e}")
    assert ok


def test_criterion_04_twisting_is_effective(ellipse_fine, disc_mesh_coarse):
    alpha, I = Bump(2.0, 0.5, 0.5), (0.0, 1.0)
    coarse = lambda_alpha_I(alpha, I, ellipse_fine, ds=0.05)
    fine = lambda_alpha_I(alpha, I, generate_mesh(CrossSectionShape.ellipse(1.0, 0.5), 1 / 24),
                          ds=0.025)
    change = abs(fine - coarse) / fine
    disc = lambda_alpha_I(alpha, I, disc_mesh_coarse, ds=0.05)
    ok = coarse > 0 and fine > 0 and change <= 0.05 and abs(disc) <= 1e-6
    record(4, ok, f"ellipse lambda = {coarse:.5f} (h=1/12), {fine:.5f} (h=1/24), change "
                  f"{100 * change:.2f}%; centered disc {disc:.1e}")
    assert ok


def test_criterion_05_upper_bound(ellipse_mesh):
    rng = np.random.default_rng(5)
    worst = -np.inf
    for a in _random_profiles(rng, 10, 0.0, 1.0):
        lam = lambda_alpha_I(a, (0, 1), ellipse_mesh, ds=0.05)
        bound = solve_b_alpha0(ellipse_mesh, a.sup_norm(0.0, 1.0))
        worst = max(worst, lam - bound)
    ok = worst <= 1e-8
    record(5, ok, f"max over 10 random alpha of lambda(alpha,I) - lambda(sup|alpha|) = {worst:.3e}")
    assert ok


def test_criterion_06_long_interval_limit(ellipse_mesh):
    lam0 = solve_b_alpha0(ellipse_mesh, 1.0)
    gaps, dir_gaps = [], []
    for L in (1, 2, 4, 8, 16):
        nat = lambda_alpha_I(Constant(1.0), (-L, L), ellipse_mesh, ds=0.125)
        dir_ = lambda_alpha_I(Constant(1.0), (-L, L), ellipse_mesh, ds=0.125,
                              end_condition="dirichlet")
        gaps.append(abs(nat - lam0) / lam0)
        dir_gaps.append(dir_ - lam0)
    ok = gaps[-1] <= 0.02 and bool(np.all(np.diff(gaps) < 0)) and min(dir_gaps) >= -1e-8
    record(6, ok, f"lambda(alpha0) = {lam0:.5f}; natural rel gaps "
                  f"{', '.join(f'{g:.2e}' for g in gaps)}; min Dirichlet excess {min(dir_gaps):.2e}")
    assert ok


def test_criterion_07_partition_inequality(ellipse_mesh_coarse):
    res = partition_lower_bound(Bump(1.5, 0.0, 3.0), (-4, 4), [(-4, -2), (-2, 0), (0, 2), (2, 4)],
                                ellipse_mesh_coarse, ds=0.1, n_random=100, seed=7)
    ok = res.passed and res.min_slack_random >= -1e-8 and res.slack_ground >= -1e-8
    record(7, ok, f"min random slack {res.min_slack_random:.3e}, ground-state slack "
                  f"{res.slack_ground:.3e}, lambda_j {[round(x, 5) for x in res.lambdas]}")
    assert ok


def test_criterion_08_hardy_constant(disc_mesh_coarse):
    alpha = Plateau(1.0, -1.0, 1.0, 1.0)
    ell = CrossSectionShape.ellipse(1.0, 0.5)
    m6, m8 = generate_mesh(ell, 1 / 6), generate_mesh(ell, 1 / 8)
    base = hardy_scan(alpha, (-20, 20), m6, ds_core=0.2, ds_far=2.0)
    longer = hardy_scan(alpha, (-40, 40), m6, ds_core=0.2, ds_far=2.0)
    finer = hardy_scan(alpha, (-20, 20), m8, ds_core=0.2, ds_far=2.0)
    ctrl = hardy_scan(alpha, (-20, 20), disc_mesh_coarse, ds_core=0.2, ds_far=2.0, control=True)
    dl = abs(longer.c_star - base.c_star) / base.c_star
    dh = abs(finer.c_star - base.c_star) / base.c_star
    ok = base.c_star > 0 and dl <= 0.10 and dh <= 0.10 and ctrl.c_star <= 1e-6
    record(8, ok, f"c* = {base.c_star:.5f}; L doubled {longer.c_star:.5f} ({100 * dl:.1f}%); "
                  f"h 1/6->1/8 {finer.c_star:.5f} ({100 * dh:.1f}%); disc control {ctrl.c_star:.1e}")
    assert ok


def test_criterion_09_bending_binds():
    t0 = time.perf_counter()
    c = bump_curve(0.3 * np.e, 4.0, -128, 128, 0.01)
    spec = TubeSpec(c, AngleFunction.constant(c.s_grid), CrossSectionShape.disc(1.0), 128)
    ak = spec.a * c.kappa_sup()
    cert = certify_bending(spec, generate_mesh(CrossSectionShape.disc(1.0), 0.25), ds_core=0.1)
    s = graded_grid(-128, 128, (-4, 4), 0.2, 4.0, 1.1)
    margins = []
    for h in (0.25, 0.125):
        m = generate_mesh(CrossSectionShape.disc(1.0), h)
        E1 = cached_ground_mode(m).E1
        rep = lowest_eigenpairs(assemble_full_tube(spec, TubeDiscretization(s, m)).shifted(E1), 1)
        margins.append(-float(rep.eigenvalues[0]))
    err = abs(margins[1] - margins[0]) / 3  # P1 error ~ h^2: e(h/2) ~ (m_h - m_{h/2}) / 3
    elapsed = time.perf_counter() - t0
    ok = ak <= 0.3 + 1e-12 and cert.value < 0 and margins[1] > 0 and margins[1] > 3 * err \
        and elapsed < 600
    record(9, ok, f"a sup|kappa| = {ak:.3f}; certificate n={cert.n} value {cert.value:.3e}; "
                  f"E1 - lambda1 = {margins[1]:.4e} vs Richardson error {err:.1e}; {elapsed:.0f} s")
    assert ok


def _report(out):
    return json.loads((Path(out) / "report.json").read_text())


def test_criterion_10_mild_bending(tmp_path):
    out = tmp_path / "mild"
    code = main(["mild-bending", "--config", str(CONFIGS / "mild_bending.toml"), "--out", str(out)])
    res = _report(out)["results"]
    E1, tol = res["E1"], 1e-9
    half = 0.5 * res["eps0_certified"]
    rows = []
    for key, scan in res["scans"].items():
        for e, lam in zip(scan["eps0"], scan["lowest"]):
            if e == pytest.approx(half, rel=1e-6):
                rows.append((key, lam - E1))
    ctrl = res["control"]
    ok = code == 0 and len(rows) == 2 and all(d >= -10 * tol for _, d in rows) \
        and ctrl["lowest"] < E1
    record(10, ok, f"eps0* = {res['eps0_certified']:.4e}; at eps0*/2 lowest - E1: "
                   f"{', '.join(f'{k} {d:.3e}' for k, d in rows)}; untwisted eps0={ctrl['eps0']} "
                   f"lowest - E1 = {ctrl['lowest'] - E1:.3e}")
    assert ok


def test_criterion_11_thin_limit(tmp_path):
    details, ok = [], True
    for name, sign in (("thin_limit_bent", -1), ("thin_limit_twisted", 1)):
        out = tmp_path / name
        code = main(["thin-limit", "--config", str(CONFIGS / f"{name}.toml"), "--out", str(out)])
        res = _report(out)["results"]
        d = np.abs([r["d"] for r in res["rows"] if r["j"] == 1])
        dec = bool(np.all(np.diff(d) < 0))
        sgn = np.sign(res["mu_1"] - res["free_mu_1"]) == sign
        ok = ok and code == 0 and dec and sgn
        details.append(f"{name.split('_')[-1]}: |d1| {', '.join(f'{x:.3e}' for x in d)}, "
                       f"mu1 {res['mu_1']:.4f} vs pi^2/|I|^2 {res['free_mu_1']:.4f}")
    record(11, ok, "; ".join(details))
    assert ok


def test_criterion_12_weyl_probe(ellipse_mesh_coarse):
    m = ellipse_mesh_coarse
    E1 = cached_ground_mode(m).E1
    L = 100.0
    disc = TubeDiscretization(uniform_grid(-L, L, 0.25), m, "dirichlet")
    form = assemble_straight_twisted(Decaying(1.0, 0.0), disc)
    # the probe is supported on [n^2 - n, n^2 + n]; use every n whose support fits
    ns = [n for n in range(4, 20) if n * n + n < L]
    errs = {}
    for k in (0.0, 1.0):
        errs[k] = [abs(rayleigh_quotient(form, weyl_probe(disc, n, k)) - (E1 + k * k)) / (E1 + k * k)
                   for n in ns]
    last = max(errs[0.0][-1], errs[1.0][-1])
    mono = bool(np.all(np.diff(errs[0.0]) < 0))
    ok = last <= 0.02 and mono
    seq = "; ".join(f"k={k:g}: " + ", ".join(f"{e:.1e}" for e in v) for k, v in errs.items())
    record(12, ok, f"n = {ns[0]}..{ns[-1]}; rel deviation at n={ns[-1]}: {last:.2e}; "
                   f"k=0 monotone {mono} ({seq})")
    assert ok


def test_criterion_13_determinism(tmp_path):
    cases = [("twist-threshold", CONFIGS / "disc_twist_threshold.toml"),
             ("partition-bound", CONFIGS / "ellipse_partition.toml"),
             ("thin-limit", CONFIGS / "thin_limit_bent.toml")]
    ok, notes = True, []
    for cmd, cfg in cases:
        a, b = tmp_path / f"{cmd}_a", tmp_path / f"{cmd}_b"
        c1 = main([cmd, "--config", str(cfg), "--out", str(a), "--threads", "1"])
        c2 = main([cmd, "--config", str(a / "report.json"), "--out", str(b), "--threads", "1"])
        same = _report(a)["results"] == _report(b)["results"]
        ok = ok and c1 == 0 and c2 == 0 and same
        notes.append(f"{cmd} {'identical' if same else 'DIFFERS'}")
    record(13, ok, "rerun from report.json: " + ", ".join(notes))
    assert ok
