"""Planar cross-section descriptors."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from ..errors import MeshFailure

KINDS = ("disc", "annulus", "ellipse", "rectangle", "polygon")


def rotation(beta: float) -> np.ndarray:
    """Matrix M(beta) with M(a) @ M(b) = M(a + b).

    Rotating the shape by ``beta`` means mapping t -> M(beta) t; the tube map is
    unchanged if the angle function is shifted by -beta at the same time.
    """
    c, s = np.cos(beta), np.sin(beta)
    return np.array([[c, s], [-s, c]])


@dataclass(frozen=True)
class CrossSectionShape:
    """Bounded open planar set described by a few parameters.

    Parameters
    ----------
    kind : str
        One of ``disc``, ``annulus``, ``ellipse``, ``rectangle``, ``polygon``.
    params : tuple of float
        disc: (radius,); annulus: (r_in, r_out); ellipse: (semi_a, semi_b);
        rectangle: (width, height); polygon: unused.
    center : (float, float)
        Offset of the shape center from the origin.
    tilt : float
        Orientation angle in radians, applied as ``M(tilt)`` about the center.
    vertices : tuple of (float, float)
        Polygon vertices in counter-clockwise order (polygon only).
    """

    kind: str
    params: Tuple[float, ...] = ()
    center: Tuple[float, float] = (0.0, 0.0)
    tilt: float = 0.0
    vertices: Tuple[Tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MeshFailure(f"unknown shape kind {self.kind!r}")
        p = self.params
        if self.kind == "disc" and (len(p) != 1 or p[0] <= 0):
            raise MeshFailure("disc needs a positive radius")
        if self.kind == "annulus" and (len(p) != 2 or not 0 < p[0] < p[1]):
            raise MeshFailure("annulus needs 0 < r_in < r_out")
        if self.kind in ("ellipse", "rectangle") and (len(p) != 2 or min(p) <= 0):
            raise MeshFailure(f"{self.kind} needs two positive lengths")
        if self.kind == "polygon":
            v = np.asarray(self.vertices, dtype=float)
            if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
                raise MeshFailure("polygon needs at least three 2D vertices")
            if _signed_area(v) <= 0:
                raise MeshFailure("polygon vertices must be counter-clockwise with positive area")

    # constructors -----------------------------------------------------------
    @classmethod
    def disc(cls, radius: float = 1.0, center=(0.0, 0.0)) -> "CrossSectionShape":
        return cls("disc", (float(radius),), _pair(center))

    @classmethod
    def annulus(cls, r_in: float, r_out: float, center=(0.0, 0.0)) -> "CrossSectionShape":
        return cls("annulus", (float(r_in), float(r_out)), _pair(center))

    @classmethod
    def ellipse(cls, semi_a: float, semi_b: float, center=(0.0, 0.0), tilt: float = 0.0):
        return cls("ellipse", (float(semi_a), float(semi_b)), _pair(center), float(tilt))

    @classmethod
    def rectangle(cls, width: float, height: float, center=(0.0, 0.0), tilt: float = 0.0):
        return cls("rectangle", (float(width), float(height)), _pair(center), float(tilt))

    @classmethod
    def polygon(cls, vertices) -> "CrossSectionShape":
        v = tuple((float(x), float(y)) for x, y in vertices)
        return cls("polygon", (), (0.0, 0.0), 0.0, v)

    # geometry ---------------------------------------------------------------
    @property
    def farthest_radius(self) -> float:
        """a = sup over the shape of |t|."""
        c = np.asarray(self.center)
        if self.kind == "disc":
            return float(np.hypot(*c) + self.params[0])
        if self.kind == "annulus":
            return float(np.hypot(*c) + self.params[1])
        if self.kind in ("rectangle", "polygon"):
            return float(np.max(np.hypot(*self.boundary_vertices().T)))
        # ellipse: maximize |c + R p(phi)| over the boundary parameter
        f = lambda phi: -float(np.hypot(*self._ellipse_point(phi)))
        grid = np.linspace(0.0, 2 * np.pi, 721)
        vals = np.array([f(x) for x in grid])
        i = int(np.argmin(vals))
        res = minimize_scalar(f, bracket=(grid[i] - 0.01, grid[i], grid[i] + 0.01),
                              options={"xtol": 1e-14})
        return float(max(-res.fun, -vals[i]))

    def _ellipse_point(self, phi):
        a, b = self.params
        local = np.array([a * np.cos(phi), b * np.sin(phi)])
        return np.asarray(self.center) + rotation(self.tilt) @ local

    @property
    def inradius(self) -> float:
        """Radius of a disc that fits inside the shape (used for mesh-size checks)."""
        if self.kind == "disc":
            return self.params[0]
        if self.kind == "annulus":
            return 0.5 * (self.params[1] - self.params[0])
        if self.kind in ("ellipse",):
            return min(self.params)
        if self.kind == "rectangle":
            return 0.5 * min(self.params)
        v = np.asarray(self.vertices)
        lo, hi = v.min(0), v.max(0)
        g = np.stack(np.meshgrid(np.linspace(lo[0], hi[0], 101), np.linspace(lo[1], hi[1], 101)), -1)
        g = g.reshape(-1, 2)
        g = g[self.contains(g)]
        return float(np.max(_segment_distance(g, v))) if len(g) else 0.0

    def boundary_vertices(self) -> np.ndarray:
        """Corner points of rectangles and polygons in physical coordinates."""
        if self.kind == "polygon":
            return np.asarray(self.vertices, dtype=float)
        if self.kind == "rectangle":
            w, h = self.params
            loc = 0.5 * np.array([[-w, -h], [w, -h], [w, h], [-w, h]])
            return np.asarray(self.center) + loc @ rotation(self.tilt).T
        raise ValueError(f"{self.kind} has no corner points")

    def to_local(self, pts: np.ndarray) -> np.ndarray:
        """Coordinates relative to the center, undoing the tilt."""
        return (np.asarray(pts) - np.asarray(self.center)) @ rotation(self.tilt)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        loc = self.to_local(pts) if self.kind != "polygon" else pts
        if self.kind == "disc":
            return np.hypot(*loc.T) < self.params[0]
        if self.kind == "annulus":
            r = np.hypot(*loc.T)
            return (r > self.params[0]) & (r < self.params[1])
        if self.kind == "ellipse":
            a, b = self.params
            return (loc[:, 0] / a) ** 2 + (loc[:, 1] / b) ** 2 < 1.0
        if self.kind == "rectangle":
            w, h = self.params
            return (np.abs(loc[:, 0]) < w / 2) & (np.abs(loc[:, 1]) < h / 2)
        return _point_in_polygon(pts, np.asarray(self.vertices))

    def area(self) -> float:
        if self.kind == "disc":
            return np.pi * self.params[0] ** 2
        if self.kind == "annulus":
            return np.pi * (self.params[1] ** 2 - self.params[0] ** 2)
        if self.kind == "ellipse":
            return np.pi * self.params[0] * self.params[1]
        if self.kind == "rectangle":
            return self.params[0] * self.params[1]
        return _signed_area(np.asarray(self.vertices))

    # transformations --------------------------------------------------------
    def rotate(self, beta: float) -> "CrossSectionShape":
        """Image of the shape under t -> M(beta) t."""
        R = rotation(beta)
        if self.kind == "polygon":
            v = np.asarray(self.vertices) @ R.T
            return CrossSectionShape.polygon(v)
        c = tuple(R @ np.asarray(self.center))
        return CrossSectionShape(self.kind, self.params, c, self.tilt + beta)

    def scale(self, eps: float) -> "CrossSectionShape":
        """Image of the shape under t -> eps t."""
        if eps <= 0:
            raise ValueError("scale factor must be positive")
        if self.kind == "polygon":
            return CrossSectionShape.polygon(eps * np.asarray(self.vertices))
        c = tuple(eps * np.asarray(self.center))
        return CrossSectionShape(self.kind, tuple(eps * p for p in self.params), c, self.tilt)

    def is_rotationally_invariant(self, tol: float = 1e-12) -> bool:
        return is_rotationally_invariant(self, tol)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "polygon":
            d["vertices"] = [list(v) for v in self.vertices]
        else:
            d["params"] = list(self.params)
            d["center"] = list(self.center)
            d["tilt"] = self.tilt
        return d


def is_rotationally_invariant(shape: CrossSectionShape, tol: float = 1e-12) -> bool:
    """True iff the shape is a disc or an annulus centered at the origin.

    Decided from the descriptor alone. Polygons, rectangles and ellipses with
    unequal axes are never invariant; an ellipse with equal axes is a disc.
    """
    centered = float(np.hypot(*shape.center)) <= tol
    if shape.kind in ("disc", "annulus"):
        return centered
    if shape.kind == "ellipse":
        a, b = shape.params
        return centered and abs(a - b) <= tol * max(a, b)
    return False


def _pair(c) -> Tuple[float, float]:
    c = tuple(float(x) for x in c)
    if len(c) != 2:
        raise MeshFailure("center offset must have two components")
    return c


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _point_in_polygon(pts: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Even-odd rule; points on the boundary may go either way."""
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = v[:, 0][None, :], v[:, 1][None, :]
    x1, y1 = np.roll(v[:, 0], -1)[None, :], np.roll(v[:, 1], -1)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = ((y0 > y) != (y1 > y)) & (x < (x1 - x0) * (y - y0) / (y1 - y0) + x0)
    return (np.count_nonzero(cross, axis=1) % 2) == 1


def _segment_distance(pts: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Distance from each point to the closed polygonal chain ``v``."""
    a = v[None, :, :]
    b = np.roll(v, -1, axis=0)[None, :, :]
    p = pts[:, None, :]
    ab = b - a
    t = np.clip(np.sum((p - a) * ab, axis=2) / np.sum(ab * ab, axis=2), 0.0, 1.0)
    d = p - (a + t[..., None] * ab)
    return np.min(np.hypot(d[..., 0], d[..., 1]), axis=1)
