"""Command-line front end: ``wsl <command> --config <path> [--out <dir>] [--threads N]``.

Every command writes ``report.json`` (with the full configuration embedded),
CSV traces and SVG plots into the output directory. Exit codes: 0 when every
asserted check passes, 1 when a check fails, 2 for configuration errors, 3
for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict

import numpy as np
from threadpoolctl import threadpool_limits

from . import CSV_MARKER, __version__
from .config import (COMMANDS, ExperimentConfig, build_s_nodes, build_shape, build_tube,
                     dump_config, load_config, window)
from .errors import (ConfigError, HypothesisViolated, InvariantCrossSection, NoCertificateFound,
                     TheoremCheckFailed, WaveguideError)

log = logging.getLogger("wslab")

REPORT_SCHEMA = "wslab-report/1"


class Run:
    """Collects results, named checks and artifact paths of one command."""

    def __init__(self, command: str, cfg: ExperimentConfig, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.results: dict = {}
        self.checks: list = []
        self.flags: list = []
        self.artifacts: list = []

    def check(self, name: str, passed: bool, **detail) -> bool:
        self.checks.append({"name": name, "passed": bool(passed), **_jsonable(detail)})
        return bool(passed)

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def csv(self, name: str, header, rows) -> None:
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            fh.write(CSV_MARKER + "\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(x) for x in r])

    def report(self) -> dict:
        return {"schema": REPORT_SCHEMA, "version": __version__, "command": self.command,
                "config": dump_config(self.cfg), "results": _jsonable(self.results),
                "flags": self.flags, "checks": self.checks,
                "passed": all(c["passed"] for c in self.checks),
                "artifacts": sorted(set(self.artifacts))}


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else repr(x)
    return obj


# ---------------------------------------------------------------------------
# shared helpers


def _mesh(cfg: ExperimentConfig):
    from .cross_section import generate_mesh
    return generate_mesh(build_shape(cfg.tube.shape), cfg.discretization.h_mesh)


def _alpha(cfg: ExperimentConfig, required: bool = True):
    from .profiles import Constant, from_dict
    if cfg.experiment.alpha is not None:
        return from_dict(cfg.experiment.alpha)
    if cfg.tube.angle.alpha is not None:
        return from_dict(cfg.tube.angle.alpha)
    if required:
        raise ConfigError("experiment.alpha (a profile table) is required for this command")
    return Constant(cfg.experiment.alpha0)


def _invariant_flag(run: Run, shape) -> bool:
    from .cross_section import is_rotationally_invariant
    inv = is_rotationally_invariant(shape)
    if inv:
        run.flags.append("twist ineffective: rotationally invariant")
    run.results["rotationally_invariant"] = inv
    return inv


def _profile_plot(run: Run, name: str, spec, title: str) -> None:
    from .svg import line_plot
    lo, hi = spec.window
    s = np.linspace(lo, hi, 401)
    line_plot(run.path(name), [("kappa", s, spec.curve.kappa_at(s)),
                               ("tau - theta'", s, spec.twist_rate(s))],
              title=title, xlabel="s", ylabel="1/length")


# ---------------------------------------------------------------------------
# commands


def cmd_cross_section(run: Run) -> None:
    from .cross_section import save_mesh
    from .cross_section.modes import (angular_norm, cached_ground_mode, cross_section_modes,
                                      export_mode_csv, extract_c_omega)
    from .svg import line_plot
    cfg = run.cfg
    mesh = _mesh(cfg)
    inv = _invariant_flag(run, mesh.shape)
    g = cached_ground_mode(mesh)
    k = min(cfg.experiment.n_modes, len(mesh.interior) - 2)
    vals, _ = cross_section_modes(mesh, k)
    du = angular_norm(mesh, g.J1)
    if inv:
        c_omega, ratios = 0.0, []
    else:
        est = extract_c_omega(mesh, details=True)
        c_omega, ratios = est.value, list(est.ratios)
    run.results.update({"E1": g.E1, "ground_residual": g.residual, "eigenvalues": vals,
                        "du_J1_norm": du, "C_omega": c_omega, "C_omega_ratios": ratios,
                        "area": mesh.shape.area(), "a": mesh.shape.farthest_radius,
                        "n_nodes": mesh.n_nodes, "n_triangles": len(mesh.triangles)})
    run.check("ground residual <= 1e-8", g.residual <= 1e-8, value=g.residual)
    run.check("E1 > 0", g.E1 > 0, value=g.E1)
    run.check("C(omega) >= 0", c_omega >= 0, value=c_omega)
    export_mode_csv(mesh, g.J1, run.path("ground_mode.csv"))
    save_mesh(mesh, run.path("mesh.txt"))
    line_plot(run.path("cross_section_spectrum.svg"),
              [("E_j", np.arange(1, len(vals) + 1), vals)], title="cross-section eigenvalues",
              xlabel="j", ylabel="E_j", markers=True)


def cmd_tube_spectrum(run: Run) -> None:
    from .assembly import TubeDiscretization, assemble_full_tube
    from .cross_section.modes import cached_ground_mode
    from .geometry import check_hypotheses
    from .spectral import lowest_eigenpairs
    from .svg import line_plot
    cfg, d, e = run.cfg, run.cfg.discretization, run.cfg.experiment
    spec = build_tube(cfg.tube)
    hyp = check_hypotheses(spec, e.sample_count, cfg.seed)
    mesh = _mesh(cfg)
    E1 = cached_ground_mode(mesh).E1
    lo, hi = spec.window
    disc = TubeDiscretization(build_s_nodes(d, lo, hi), mesh, d.end_condition)
    form = assemble_full_tube(spec, disc)
    rep = lowest_eigenpairs(form.shifted(E1), e.k, e.tol)
    ev = rep.eigenvalues + E1
    out = rep.to_dict()
    out["eigenvalues"] = ev
    run.results.update({"spectrum": out, "E1": E1, "below_threshold": int(np.sum(ev < E1)),
                        "hypotheses": hyp.to_dict()})
    run.check("eigenvalues ascending", bool(np.all(np.diff(ev) >= 0)))
    run.check("residuals <= 1e-6", bool(np.all(rep.residuals <= 1e-6)),
              max_residual=float(np.max(rep.residuals)))
    run.csv("eigenvalues.csv", ["j", "lambda_j", "residual"],
            [(j + 1, v, r) for j, (v, r) in enumerate(zip(ev, rep.residuals))])
    j = np.arange(1, len(ev) + 1)
    line_plot(run.path("spectrum.svg"), [("lambda_j", j, ev), ("E1", j, np.full(len(j), E1))],
              title="tube spectrum", xlabel="j", ylabel="eigenvalue", markers=True)
    _profile_plot(run, "profiles.svg", spec, "curvature and twist")


def cmd_twist_threshold(run: Run) -> None:
    from .cross_section.modes import solve_b_alpha0
    from .profiles import Constant
    from .spectral import lambda_alpha_I
    from .svg import line_plot
    cfg, d, e = run.cfg, run.cfg.discretization, run.cfg.experiment
    mesh = _mesh(cfg)
    _invariant_flag(run, mesh.shape)
    alpha = _alpha(cfg, required=False)
    I = tuple(e.interval)
    sup = alpha.sup_norm(*I)
    lam = lambda_alpha_I(alpha, I, mesh, d.ds, tol=e.tol)
    lam_D = lambda_alpha_I(alpha, I, mesh, d.ds, end_condition="dirichlet", tol=e.tol)
    lam_sup = solve_b_alpha0(mesh, sup)
    lam_star = solve_b_alpha0(mesh, e.alpha0)
    rows = []
    for L in e.L_list:
        nat = lambda_alpha_I(Constant(e.alpha0), (-L, L), mesh, d.ds, tol=e.tol)
        dir_ = lambda_alpha_I(Constant(e.alpha0), (-L, L), mesh, d.ds,
                              end_condition="dirichlet", tol=e.tol)
        rows.append((L, nat, dir_, (nat - lam_star) / lam_star if lam_star > 1e-10 else float("nan")))
    run.results.update({"lambda_alpha_I": lam, "lambda_D_alpha_I": lam_D, "sup_alpha": sup,
                        "lambda_sup_alpha": lam_sup, "alpha0": e.alpha0,
                        "lambda_alpha0": lam_star,
                        "long_interval_table": [dict(zip(("L", "natural", "dirichlet", "rel_gap"), r))
                                             for r in rows]})
    run.check("lambda(alpha, I) >= -1e-9", lam >= -1e-9, value=lam)
    run.check("lambda(alpha, I) <= lambda(sup|alpha|) + 1e-8", lam <= lam_sup + 1e-8,
              lhs=lam, rhs=lam_sup)
    for L, nat, dir_, _ in rows:
        run.check(f"lambda_D(alpha0, (-{L:g}, {L:g})) >= lambda(alpha0) - 1e-8",
                  dir_ >= lam_star - 1e-8, lhs=dir_, rhs=lam_star)
    gaps = [abs(r[3]) for r in rows]
    if lam_star > 1e-12 and len(gaps) > 1:
        run.check("natural truncation gap decreasing in L", all(np.diff(gaps) < 0), gaps=gaps)
    run.csv("long_interval.csv", ["L", "lambda_natural", "lambda_dirichlet", "rel_gap"], rows)
    Ls = np.array([r[0] for r in rows])
    line_plot(run.path("threshold_vs_L.svg"),
              [("natural", Ls, [r[1] for r in rows]), ("dirichlet", Ls, [r[2] for r in rows]),
               ("lambda(alpha0)", Ls, np.full(len(Ls), lam_star))],
              title="twisted threshold vs truncation", xlabel="L", ylabel="lambda", markers=True)


def cmd_hardy_scan(run: Run) -> None:
    from .analysis import hardy_scan
    from .svg import line_plot
    cfg, d, e = run.cfg, run.cfg.discretization, run.cfg.experiment
    mesh = _mesh(cfg)
    inv = _invariant_flag(run, mesh.shape)
    alpha = _alpha(cfg)
    res = hardy_scan(alpha, e.interval, mesh, s0=e.s0, ds_core=d.ds,
                     ds_far=d.ds_far or 1.0, tol=e.tol, control=inv or e.control)
    run.results.update(res.to_dict())
    if inv:
        run.check("invariant control: c_star <= 1e-6", res.c_star <= 1e-6, value=res.c_star)
    else:
        run.check("c_star > 0", res.c_star > 0, value=res.c_star)
        if res.pencil_check is not None:
            rel = abs(res.pencil_check - res.c_star) / max(res.c_star, 1e-300)
            run.check("bisection agrees with pencil eigenvalue (1e-3)", rel <= 1e-3,
                      bisection=res.c_star, pencil=res.pencil_check)
    run.csv("hardy_history.csv", ["step", "c", "psd"],
            [(i, h["c"], int(h["psd"])) for i, h in enumerate(res.history)])
    lo, hi = e.interval
    s = np.linspace(lo, hi, 801)
    line_plot(run.path("hardy_weight.svg"),
              [("c*/(1+(s-s0)^2)", s, res.c_star / (1 + (s - res.s0) ** 2)), ("alpha", s, alpha(s))],
              title="Hardy weight", xlabel="s", ylabel="weight")


def cmd_partition_bound(run: Run) -> None:
    from .analysis import partition_lower_bound
    from .svg import line_plot
    cfg, d, e = run.cfg, run.cfg.discretization, run.cfg.experiment
    mesh = _mesh(cfg)
    _invariant_flag(run, mesh.shape)
    alpha = _alpha(cfg, required=False)
    part = e.partition or [tuple(e.interval)]
    res = partition_lower_bound(alpha, e.interval, part, mesh, d.ds, e.n_random, cfg.seed, e.tol)
    run.results.update(res.to_dict())
    run.check("partition inequality on random vectors (slack >= -tol)",
              res.min_slack_random >= -e.tol, slack=res.min_slack_random)
    run.check("partition inequality at the ground state (slack >= -tol)",
              res.slack_ground >= -e.tol, slack=res.slack_ground)
    run.csv("partition.csv", ["lo", "hi", "lambda"],
            [(a, b, l) for (a, b), l in zip(res.intervals, res.lambdas)])
    xs, ys = [], []
    for (a, b), l in zip(res.intervals, res.lambdas):
        xs += [a, b]
        ys += [l, l]
    line_plot(run.path("partition.svg"), [("lambda(alpha, I_j)", xs, ys)],
              title="piecewise lower bound", xlabel="s", ylabel="lambda")


def cmd_certify_bending(run: Run) -> None:
    from .analysis import certify_bending
    from .spectral import lowest_eigenpairs
    from .assembly import assemble_full_tube
    from .svg import line_plot
    cfg, d, e = run.cfg, run.cfg.discretization, run.cfg.experiment
    spec = build_tube(cfg.tube)
    mesh = _mesh(cfg)
    try:
        cert = certify_bending(spec, mesh, ds_core=d.ds, schedule=[int(n) for n in e.schedule])
    except NoCertificateFound as exc:
        run.results["certificate"] = None
        run.flags.append(f"no certificate found: {exc}")
        return
    run.results["certificate"] = cert.to_dict()
    run.check("certificate value < 0", cert.value < 0, value=cert.value)
    if e.verify_eigen:
        form = assemble_full_tube(spec, cert.disc).shifted(cert.E1)
        rep = lowest_eigenpairs(form, 1, e.tol)
        lam = float(rep.eigenvalues[0]) + cert.E1
        run.results["lowest_eigenvalue"] = lam
        run.check("eigensolver: lambda_1 < E1", lam < cert.E1, lhs=lam, rhs=cert.E1)
        run.check("dominance: lambda_1 <= E1 + value/||psi||^2 + tol",
                  lam <= cert.rayleigh + e.tol, lhs=lam, rhs=cert.rayleigh)
    run.csv("certificate_history.csv", ["n", "epsilon", "value"],
            [(h["n"], h["epsilon"], h["value"]) for h in cert.history])
    line_plot(run.path("certificate.svg"),
              [("Q1 value", [h["n"] for h in cert.history], [h["value"] for h in cert.history])],
              title="certificate value vs n", xlabel="n", ylabel="Q1", markers=True)
    _profile_plot(run, "profiles.svg", spec, "curvature")


def cmd_thin_limit(run: Run) -> None:
    from .effective import effective_operator, thin_limit_study
    from .svg import line_plot
    cfg, d, e = run.cfg, run.cfg.discretization, run.cfg.experiment
    # only the scaled tubes need a eps sup|kappa| < 1; thin_limit_study checks that
    spec = build_tube(cfg.tube, validate=False)
    mesh = _mesh(cfg)
    lo, hi = spec.window
    s = build_s_nodes(d, lo, hi)
    table = thin_limit_study(spec, e.eps_list, e.j_max, mesh, c_omega=e.c_omega, s_nodes=s)
    d1 = table.d(1)
    mu1 = [r.mu for r in table.rows if r.j == 1][0]
    free = np.pi ** 2 / (hi - lo) ** 2
    run.results.update({"rows": [r.__dict__ for r in table.rows], "C_omega": table.c_omega,
                        "E1": table.E1, "mu_1": mu1, "free_mu_1": free})
    order = np.argsort(-np.asarray(e.eps_list, float))
    seq = np.abs(d1[order])
    run.check("|d_1(eps)| strictly decreasing as eps decreases", bool(np.all(np.diff(seq) < 0)),
              d_1=list(seq))
    bent = spec.curve.kappa_sup() > 0
    twisted = float(np.max(np.abs(spec.twist_rate(s)))) > 0
    if bent and not twisted:
        run.check("bending lowers mu_1 below pi^2/|I|^2", mu1 < free, lhs=mu1, rhs=free)
    if twisted and not bent and table.c_omega > 0:
        run.check("twisting raises mu_1 above pi^2/|I|^2", mu1 > free, lhs=mu1, rhs=free)
    table.write_csv(run.path("thin_limit.csv"))
    eps = np.asarray(e.eps_list, float)
    line_plot(run.path("thin_limit.svg"), [("|d_1|", eps, np.abs(d1))],
              title="thin-tube comparison", xlabel="eps", ylabel="|d_1|", markers=True)
    op = effective_operator(spec, s, table.c_omega)
    line_plot(run.path("potential.svg"), [("V", s, op.potential_values())],
              title="effective potential", xlabel="s", ylabel="V")


def cmd_mild_bending(run: Run) -> None:
    from .analysis import certified_eps0, g_function, hardy_scan, mild_bending_scan
    from .assembly import uniform_grid
    from .cross_section.modes import cached_ground_mode
    from .geometry import AngleFunction, TubeSpec, mild_curve
    from .svg import line_plot
    cfg, d, e = run.cfg, run.cfg.discretization, run.cfg.experiment
    mesh = _mesh(cfg)
    if _invariant_flag(run, mesh.shape):
        raise InvariantCrossSection("mild-bending needs a cross-section that is not rotationally invariant")
    alpha = _alpha(cfg)
    shape = mesh.shape
    E1 = cached_ground_mode(mesh).E1
    a = shape.farthest_radius
    s0 = 0.0 if e.s0 is None else e.s0
    if e.c_star is not None:
        c_star = e.c_star
    else:
        hi_ = e.hardy_interval or window(cfg.tube)
        c_star = hardy_scan(alpha, hi_, mesh, s0=s0, ds_core=d.ds, ds_far=d.ds_far or 1.0,
                            tol=e.tol).c_star
    L = cfg.tube.half_length
    s_cert = uniform_grid(-2 * L, 2 * L, d.ds)
    eps_star = certified_eps0(s_cert, a, E1, c_star, s0)
    eps_list = list(e.eps0_list)
    if e.eps0_fraction is not None:
        eps_list.append(e.eps0_fraction * eps_star)

    def make(length, twist=True, eps0=0.0):
        curve = mild_curve(eps0, -length, length, cfg.tube.curve.ds)
        ang = (AngleFunction.from_rate(curve.s_grid, alpha(curve.s_grid)) if twist
               else AngleFunction.constant(curve.s_grid))
        return TubeSpec(curve, ang, shape, length)

    tables = {}
    for length in (L, 2 * L):
        res = mild_bending_scan(lambda x: make(length, True, x), eps_list, mesh, c_star, s0,
                                d.ds, e.tol)
        tables[length] = res
    run.results.update({"c_star": c_star, "s0": s0, "E1": E1, "a": a,
                        "eps0_certified": eps_star,
                        "scans": {f"L={k:g}": v.to_dict() for k, v in tables.items()}})
    for i, x in enumerate(eps_list):
        if x <= eps_star:
            for length, res in tables.items():
                run.check(f"eps0={x:.6g} <= eps0*: lowest >= E1 - 10 tol at L={length:g}",
                          res.threshold_ok[i], lowest=res.lowest[i], E1=E1)
    kap = [x / (1 + s_cert ** 2) for x in eps_list if x > 0]
    if kap:
        x = [x for x in eps_list if x > 0][0]
        decay = float(np.max(np.abs(g_function(x / (1 + s_cert ** 2), a)) * (1 + s_cert ** 2)))
        run.results["g_decay"] = {"eps0": x, "max_abs_g_times_1_plus_s2": decay,
                                  "three_a_eps0": 3 * a * x, "four_a_eps0": 4 * a * x}
    if e.control_eps0 is not None:
        from .assembly import TubeDiscretization, assemble_full_tube
        from .spectral import lowest_eigenpairs
        spec = make(L, False, e.control_eps0)
        disc = TubeDiscretization(uniform_grid(-L, L, d.ds), mesh, "dirichlet")
        lam = float(lowest_eigenpairs(assemble_full_tube(spec, disc).shifted(E1), 1,
                                      e.tol).eigenvalues[0]) + E1
        run.results["control"] = {"eps0": e.control_eps0, "lowest": lam}
        run.check("control without twist: eigenvalue below E1", lam < E1, lowest=lam, E1=E1)
    rows = [(length, x, lw, int(t), int(c)) for length, res in tables.items()
            for x, lw, t, c in zip(res.eps0, res.lowest, res.threshold_ok, res.condition_ok)]
    run.csv("mild_bending.csv", ["L", "eps0", "lowest", "threshold_ok", "condition_ok"], rows)
    res = tables[L]
    line_plot(run.path("mild_bending.svg"),
              [("lowest - E1", res.eps0, np.asarray(res.lowest) - E1)],
              title="lowest eigenvalue vs eps0", xlabel="eps0", ylabel="lambda - E1", markers=True)


def cmd_geometry_check(run: Run) -> None:
    from .geometry import (check_hypotheses, curve_roundtrip, export_frames_csv,
                           export_metric_csv, metric_at)
    cfg, e = run.cfg, run.cfg.experiment
    spec = build_tube(cfg.tube, validate=False)
    hyp = check_hypotheses(spec, e.sample_count, cfg.seed)
    run.results["hypotheses"] = hyp.to_dict()
    run.check("a sup|kappa| < 1", hyp.margin > 0, margin=hyp.margin)
    F = spec.frame.frames
    ortho = float(np.max(np.abs(np.einsum("nij,nkj->nik", F, F) - np.eye(3))))
    det = float(np.max(np.abs(np.linalg.det(F) - 1)))
    run.results.update({"frame_orthogonality_error": ortho, "frame_det_error": det})
    run.check("frames orthonormal (1e-8)", ortho <= 1e-8 and det <= 1e-8, value=max(ortho, det))
    rng = np.random.default_rng(cfg.seed)
    lo, hi = spec.window
    from .geometry import _sample_shape
    ts = _sample_shape(spec.shape, 1000, rng)
    ss = rng.uniform(lo, hi, 1000)
    det_err, inv_err = 0.0, 0.0
    for s, t in zip(ss, ts):
        m = metric_at(spec, float(s), t)
        det_err = max(det_err, abs(np.linalg.det(m.G) - m.h ** 2) / m.h ** 2)
        inv_err = max(inv_err, float(np.max(np.abs(m.G @ m.G_inv - np.eye(3)))))
    run.results.update({"metric_det_error": det_err, "metric_inverse_error": inv_err})
    run.check("det G = h^2 (1e-12)", det_err <= 1e-12, value=det_err)
    run.check("G G^-1 = I (1e-12)", inv_err <= 1e-12, value=inv_err)
    try:
        k_err, t_err = curve_roundtrip(spec.frame)
        run.results["curve_roundtrip"] = {"kappa_error": k_err, "tau_error": t_err}
    except ValueError as exc:
        run.results["curve_roundtrip"] = {"skipped": str(exc)}
    export_frames_csv(spec.frame, run.path("frames.csv"))
    a = spec.a
    export_metric_csv(spec, np.linspace(lo, hi, 21), [(0.0, 0.0), (0.5 * a, 0.0), (0.0, 0.5 * a)],
                      run.path("metric.csv"))
    _profile_plot(run, "profiles.svg", spec, "curvature and twist")


HANDLERS: Dict[str, Callable[[Run], None]] = {
    "cross-section": cmd_cross_section,
    "tube-spectrum": cmd_tube_spectrum,
    "twist-threshold": cmd_twist_threshold,
    "hardy-scan": cmd_hardy_scan,
    "partition-bound": cmd_partition_bound,
    "certify-bending": cmd_certify_bending,
    "thin-limit": cmd_thin_limit,
    "mild-bending": cmd_mild_bending,
    "geometry-check": cmd_geometry_check,
}
assert set(HANDLERS) == set(COMMANDS)


def run(command: str, cfg: ExperimentConfig, out: Path) -> dict:
    """Execute one command and write its report; returns the report dict.

    Raises TheoremCheckFailed (after writing the report) if a check fails.
    """
    out.mkdir(parents=True, exist_ok=True)
    r = Run(command, cfg, out)
    HANDLERS[command](r)
    report = r.report()
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=False) + "\n")
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    if failed:
        raise TheoremCheckFailed("failed: " + "; ".join(failed), failed[0])
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wsl", description="Spectral experiments for twisted and bent tubes.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML config or a report.json to re-run")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=None, help="thread count for BLAS/LAPACK")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        update = {"command": args.command}
        if args.out is not None:
            update["output"] = args.out
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be positive")
            update["threads"] = args.threads
        cfg = cfg.model_copy(update=update)
        with threadpool_limits(limits=cfg.threads):
            run(args.command, cfg, Path(cfg.output))
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (TheoremCheckFailed, HypothesisViolated) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except (WaveguideError, np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(f"{args.command}: all checks passed; report in {Path(cfg.output) / 'report.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
