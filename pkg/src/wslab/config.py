"""Experiment configuration: TOML (or an earlier report.json) parsed into pydantic models.

Unknown keys are rejected. Every default is materialized by ``model_dump`` so
reports embed the complete configuration that produced them.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

COMMANDS = ("cross-section", "tube-spectrum", "twist-threshold", "hardy-scan", "partition-bound",
            "certify-bending", "thin-limit", "mild-bending", "geometry-check")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CurveConfig(_Strict):
    """Curve preset. ``height`` is the peak curvature of the bump preset."""

    preset: Literal["line", "circle", "helix", "bump", "mild", "samples"] = "line"
    height: float = 0.0
    width: float = 1.0
    center: float = 0.0
    eps0: float = 0.0
    radius: float = 1.0
    kappa: float = 1.0
    tau: float = 0.0
    ds: float = Field(0.01, gt=0)
    s: Optional[List[float]] = None
    kappa_samples: Optional[List[float]] = None
    tau_samples: Optional[List[float]] = None

    @model_validator(mode="after")
    def _samples(self):
        if self.preset == "samples":
            if self.s is None or self.kappa_samples is None:
                raise ValueError("samples preset needs s and kappa_samples")
            n = len(self.s)
            if len(self.kappa_samples) != n or (self.tau_samples is not None and len(self.tau_samples) != n):
                raise ValueError("curve samples must have equal lengths")
        return self


class AngleConfig(_Strict):
    """theta preset: ``zero``/``constant`` (theta = theta0), ``tang`` (theta' = tau),
    ``twist`` (theta' = tau + alpha with ``alpha`` a profile), ``samples`` (theta' samples)."""

    preset: Literal["zero", "constant", "tang", "twist", "samples"] = "zero"
    theta0: float = 0.0
    alpha: Optional[dict] = None
    s: Optional[List[float]] = None
    theta_dot: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.preset == "twist" and self.alpha is None:
            raise ValueError("twist preset needs an alpha profile")
        if self.preset == "samples" and (self.s is None or self.theta_dot is None
                                         or len(self.s) != len(self.theta_dot)):
            raise ValueError("samples preset needs s and theta_dot of equal length")
        return self


class ShapeConfig(_Strict):
    kind: Literal["disc", "annulus", "ellipse", "rectangle", "polygon"] = "disc"
    params: List[float] = [1.0]
    center: Tuple[float, float] = (0.0, 0.0)
    tilt: float = 0.0
    vertices: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="after")
    def _check(self):
        need = {"disc": 1, "annulus": 2, "ellipse": 2, "rectangle": 2, "polygon": 0}[self.kind]
        if self.kind == "polygon":
            if not self.vertices or len(self.vertices) < 3:
                raise ValueError("polygon needs at least three vertices")
        elif len(self.params) != need:
            raise ValueError(f"{self.kind} needs {need} parameter(s), got {len(self.params)}")
        return self


class TubeConfig(_Strict):
    curve: CurveConfig = CurveConfig()
    angle: AngleConfig = AngleConfig()
    shape: ShapeConfig = ShapeConfig()
    half_length: float = Field(10.0, gt=0)
    s_range: Optional[Tuple[float, float]] = None


class DiscretizationConfig(_Strict):
    """Mesh size, s-spacing and ends. With ``ds_far`` set the s-grid is graded
    outside ``core``."""

    h_mesh: float = Field(0.125, gt=0)
    ds: float = Field(0.1, gt=0)
    end_condition: Literal["dirichlet", "natural"] = "dirichlet"
    ds_far: Optional[float] = Field(None, gt=0)
    core: Optional[Tuple[float, float]] = None
    ratio: float = Field(1.1, gt=1)


class ExperimentBlock(_Strict):
    k: int = Field(4, ge=1)
    tol: float = Field(1e-9, gt=0)
    alpha: Optional[dict] = None
    alpha0: float = 1.0
    interval: Tuple[float, float] = (0.0, 1.0)
    L_list: List[float] = [1.0, 2.0, 4.0, 8.0, 16.0]
    partition: List[Tuple[float, float]] = []
    n_random: int = Field(100, ge=1)
    eps_list: List[float] = [0.2, 0.1, 0.05]
    j_max: int = Field(1, ge=1)
    c_omega: Optional[float] = None
    eps0_list: List[float] = []
    eps0_fraction: Optional[float] = None
    control_eps0: Optional[float] = None
    c_star: Optional[float] = None
    hardy_interval: Optional[Tuple[float, float]] = None
    s0: Optional[float] = None
    control: bool = False
    schedule: List[float] = [8, 16, 32, 64, 128, 256, 512, 1024]
    verify_eigen: bool = True
    n_modes: int = Field(4, ge=1)
    sample_count: int = Field(4000, ge=10)

    @field_validator("alpha")
    @classmethod
    def _alpha(cls, v):
        if v is not None:
            from .profiles import from_dict
            try:
                from_dict(v)
            except (TypeError, ValueError, KeyError) as exc:
                raise ValueError(f"invalid alpha profile: {exc}") from exc
        return v


class ExperimentConfig(_Strict):
    command: Optional[Literal[COMMANDS]] = None
    seed: int = 0
    length_unit: str = "unit"
    output: str = "out"
    threads: int = Field(1, ge=1)
    tube: TubeConfig = TubeConfig()
    discretization: DiscretizationConfig = DiscretizationConfig()
    experiment: ExperimentBlock = ExperimentBlock()


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a mapping; a report (dict with a ``config`` key) yields its embedded config."""
    if "config" in data and "results" in data:
        data = data["config"]
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    return parse_config(data)


def dump_config(cfg: ExperimentConfig) -> dict:
    return json.loads(cfg.model_dump_json())


# ---------------------------------------------------------------------------
# builders


def build_shape(c: ShapeConfig):
    from .cross_section import CrossSectionShape
    if c.kind == "polygon":
        return CrossSectionShape.polygon(c.vertices)
    if c.kind == "disc":
        return CrossSectionShape.disc(c.params[0], c.center)
    if c.kind == "annulus":
        return CrossSectionShape.annulus(c.params[0], c.params[1], c.center)
    if c.kind == "ellipse":
        return CrossSectionShape.ellipse(c.params[0], c.params[1], c.center, c.tilt)
    return CrossSectionShape.rectangle(c.params[0], c.params[1], c.center, c.tilt)


def window(t: TubeConfig) -> Tuple[float, float]:
    if t.s_range is not None:
        return float(t.s_range[0]), float(t.s_range[1])
    return -float(t.half_length), float(t.half_length)


def build_curve(c: CurveConfig, lo: float, hi: float):
    from . import geometry as g
    if c.preset == "samples":
        s = np.asarray(c.s, float)
        tau = np.zeros_like(s) if c.tau_samples is None else np.asarray(c.tau_samples, float)
        return g.CurveData(s, np.asarray(c.kappa_samples, float), tau)
    if c.preset == "line":
        return g.line_curve(lo, hi, c.ds)
    if c.preset == "circle":
        return g.circle_curve(c.radius, lo, hi, c.ds)
    if c.preset == "helix":
        return g.helix_curve(c.kappa, c.tau, lo, hi, c.ds)
    if c.preset == "bump":
        return g.bump_curve(c.height * np.e, c.width, lo, hi, c.ds, c.center)
    return g.mild_curve(c.eps0, lo, hi, c.ds)


def build_angle(c: AngleConfig, curve):
    from . import geometry as g
    from .profiles import from_dict
    s = curve.s_grid
    if c.preset in ("zero", "constant"):
        return g.AngleFunction.constant(s, c.theta0)
    if c.preset == "tang":
        return g.tang_frame_angle(curve, c.theta0)
    if c.preset == "twist":
        alpha = from_dict(c.alpha)
        return g.AngleFunction.from_rate(s, curve.tau + alpha(s), c.theta0)
    return g.AngleFunction.from_rate(np.asarray(c.s, float), np.asarray(c.theta_dot, float), c.theta0)


def build_tube(t: TubeConfig, validate: bool = True):
    from .geometry import TubeSpec
    lo, hi = window(t)
    curve = build_curve(t.curve, lo, hi)
    angle = build_angle(t.angle, curve)
    return TubeSpec(curve, angle, build_shape(t.shape), t.half_length, t.s_range, validate)


def build_s_nodes(d: DiscretizationConfig, lo: float, hi: float) -> np.ndarray:
    from .assembly import graded_grid, uniform_grid
    if d.ds_far is None:
        return uniform_grid(lo, hi, d.ds)
    core = d.core if d.core is not None else (lo, hi)
    return graded_grid(lo, hi, core, d.ds, d.ds_far, d.ratio)
