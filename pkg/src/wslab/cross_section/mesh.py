"""Triangulations of cross-sections.

Discs and annuli are meshed in a polar chart about their center: elements are
triangles in the (r, phi) plane and the basis functions are linear in (r, phi).
The innermost ring of a disc uses collapsed elements whose first vertex is the
pole. Every other shape uses straight P1 triangles in Cartesian coordinates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import Delaunay

from ..errors import MeshFailure
from .shapes import CrossSectionShape, rotation, _segment_distance

log = logging.getLogger(__name__)

MESH_HEADER = "# wslab mesh v1"


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Conforming triangulation of a cross-section.

    Attributes
    ----------
    nodes : (n, 2) array
        Physical node coordinates (t2, t3).
    triangles : (m, 3) int array
        Counter-clockwise vertex indices.
    boundary : (n,) bool array
        True for nodes on the boundary (Dirichlet nodes).
    h_mesh : float
        Target mesh size used to build the mesh.
    chart : str
        ``"cartesian"`` or ``"polar"``.
    chart_coords : (m, 3, 2) array
        Per-element vertex coordinates in the chart. Polar charts store
        (r, phi) with phi unwrapped inside each element.
    collapsed : (m,) bool array
        Polar elements whose first vertex is the pole.
    center : (float, float)
        Pole of the polar chart.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h_mesh: float
    chart: str = "cartesian"
    chart_coords: Optional[np.ndarray] = None
    collapsed: Optional[np.ndarray] = None
    center: tuple = (0.0, 0.0)
    shape: Optional[CrossSectionShape] = field(default=None, repr=False)

    def __post_init__(self):
        if self.chart_coords is None:
            object.__setattr__(self, "chart_coords", self.nodes[self.triangles].copy())
        if self.collapsed is None:
            object.__setattr__(self, "collapsed", np.zeros(len(self.triangles), dtype=bool))
        for arr in (self.nodes, self.triangles, self.boundary, self.chart_coords, self.collapsed):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def interior(self) -> np.ndarray:
        """Indices of the interior (free) nodes."""
        return np.flatnonzero(~self.boundary)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges(self) -> np.ndarray:
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                            self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def max_edge(self) -> float:
        e = self.edges()
        return float(np.max(np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]], axis=1)))

    def scaled(self, eps: float) -> "Mesh2D":
        """Mesh of the set eps * omega obtained by mapping every node."""
        cc = self.chart_coords.copy()
        if self.chart == "polar":
            cc[..., 0] *= eps
        else:
            cc *= eps
        return Mesh2D(eps * self.nodes, self.triangles.copy(), self.boundary.copy(),
                      eps * self.h_mesh, self.chart, cc, self.collapsed.copy(),
                      tuple(eps * np.asarray(self.center)),
                      None if self.shape is None else self.shape.scale(eps))

    def save(self, path) -> None:
        save_mesh(self, path)


# ---------------------------------------------------------------------------
# generators


def generate_mesh(shape: CrossSectionShape, h_mesh: float) -> Mesh2D:
    """Triangulate ``shape`` with target element size ``h_mesh``."""
    if not h_mesh > 0:
        raise MeshFailure("h_mesh must be positive")
    if h_mesh >= shape.inradius:
        raise MeshFailure(f"h_mesh={h_mesh} is not smaller than the inradius {shape.inradius}")
    if shape.kind == "disc":
        return _polar_mesh(shape, 0.0, shape.params[0], h_mesh)
    if shape.kind == "annulus":
        return _polar_mesh(shape, shape.params[0], shape.params[1], h_mesh)
    if shape.kind == "ellipse":
        return _ellipse_mesh(shape, h_mesh)
    if shape.kind == "rectangle":
        return _rectangle_mesh(shape, h_mesh)
    return _polygon_mesh(shape, h_mesh)


def _polar_mesh(shape, r_in, r_out, h, n_r=None, n_phi=None) -> Mesh2D:
    n_r = n_r or int(np.ceil((r_out - r_in) / h))
    n_phi = n_phi or max(int(np.ceil(2 * np.pi * r_out / h)), 6)
    radii = np.linspace(r_in, r_out, n_r + 1)
    dphi = 2 * np.pi / n_phi
    c = np.asarray(shape.center, dtype=float)
    tilt = shape.tilt
    has_pole = r_in == 0.0

    ring0 = 1 if has_pole else 0  # first ring stored as a full ring of n_phi nodes
    rings = radii[ring0:]
    phi = tilt + dphi * np.arange(n_phi)
    rr, pp = np.meshgrid(rings, phi, indexing="ij")
    ring_nodes = c + np.stack([rr * np.cos(pp), rr * np.sin(pp)], axis=-1).reshape(-1, 2)
    if has_pole:
        nodes = np.vstack([c[None, :], ring_nodes])
        off = 1
    else:
        nodes = ring_nodes
        off = 0

    def idx(k, j):  # k indexes `rings`
        return off + k * n_phi + (j % n_phi)

    tris, coords, coll = [], [], []
    j = np.arange(n_phi)
    if has_pole:
        r1 = rings[0]
        t = np.stack([np.zeros(n_phi, int), idx(0, j), idx(0, j + 1)], axis=1)
        cc = np.stack([np.stack([np.zeros(n_phi), phi], 1),
                       np.stack([np.full(n_phi, r1), phi], 1),
                       np.stack([np.full(n_phi, r1), phi + dphi], 1)], axis=1)
        tris.append(t)
        coords.append(cc)
        coll.append(np.ones(n_phi, bool))
    for k in range(len(rings) - 1):
        ra, rb = rings[k], rings[k + 1]
        t1 = np.stack([idx(k, j), idx(k + 1, j), idx(k, j + 1)], axis=1)
        t2 = np.stack([idx(k, j + 1), idx(k + 1, j), idx(k + 1, j + 1)], axis=1)
        c1 = np.stack([np.stack([np.full(n_phi, ra), phi], 1),
                       np.stack([np.full(n_phi, rb), phi], 1),
                       np.stack([np.full(n_phi, ra), phi + dphi], 1)], axis=1)
        c2 = np.stack([np.stack([np.full(n_phi, ra), phi + dphi], 1),
                       np.stack([np.full(n_phi, rb), phi], 1),
                       np.stack([np.full(n_phi, rb), phi + dphi], 1)], axis=1)
        tris += [t1, t2]
        coords += [c1, c2]
        coll += [np.zeros(n_phi, bool)] * 2
    # interleave so that element order is deterministic ring by ring
    triangles = np.concatenate(tris).astype(np.int64)
    chart_coords = np.concatenate(coords)
    collapsed = np.concatenate(coll)
    boundary = np.zeros(len(nodes), bool)
    boundary[idx(len(rings) - 1, j)] = True
    if not has_pole:
        boundary[idx(0, j)] = True
    return Mesh2D(nodes, triangles, boundary, float(h), "polar", chart_coords, collapsed,
                  tuple(c), shape)


def _ring_disc(n_rings: int):
    """Unit-disc nodes on concentric rings with 6k nodes on ring k, zipped into triangles."""
    pts = [np.zeros((1, 2))]
    angles = [np.zeros(1)]
    for k in range(1, n_rings + 1):
        a = 2 * np.pi * np.arange(6 * k) / (6 * k)
        r = k / n_rings
        pts.append(np.stack([r * np.cos(a), r * np.sin(a)], 1))
        angles.append(a)
    starts = np.cumsum([0] + [len(p) for p in pts])
    tris = []
    for k in range(n_rings):
        ia, ib = angles[k], angles[k + 1]
        na, nb = len(ia), len(ib)
        sa, sb = starts[k], starts[k + 1]
        if na == 1:
            for q in range(nb):
                tris.append((sa, sb + q, sb + (q + 1) % nb))
            continue
        i = q = 0
        while i < na or q < nb:
            # advance on the ring whose next node comes first in angle
            next_a = ia[i + 1] if i + 1 < na else 2 * np.pi
            next_b = ib[q + 1] if q + 1 < nb else 2 * np.pi
            if q < nb and (i >= na or next_b <= next_a):
                tris.append((sa + i % na, sb + q, sb + (q + 1) % nb))
                q += 1
            else:
                tris.append((sa + i % na, sb + q % nb, sa + (i + 1) % na))
                i += 1
    nodes = np.vstack(pts)
    boundary = np.zeros(len(nodes), bool)
    boundary[starts[n_rings]:] = True
    return nodes, np.asarray(tris, dtype=np.int64), boundary


def _ellipse_mesh(shape, h) -> Mesh2D:
    a, b = shape.params
    n_rings = max(int(np.ceil(1.25 * max(a, b) / h)), 2)
    unit, tris, boundary = _ring_disc(n_rings)
    nodes = np.asarray(shape.center) + (unit * np.array([a, b])) @ rotation(shape.tilt).T
    return Mesh2D(nodes, tris, boundary, float(h), shape=shape)


def _rectangle_mesh(shape, h) -> Mesh2D:
    w, ht = shape.params
    nx, ny = int(np.ceil(w / h - 1e-12)), int(np.ceil(ht / h - 1e-12))
    x = np.linspace(-w / 2, w / 2, nx + 1)
    y = np.linspace(-ht / 2, ht / 2, ny + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    loc = np.stack([X.ravel(), Y.ravel()], 1)
    nodes = np.asarray(shape.center) + loc @ rotation(shape.tilt).T
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    I, J = I.ravel(), J.ravel()
    n00 = I * (ny + 1) + J
    n10, n01, n11 = n00 + ny + 1, n00 + 1, n00 + ny + 2
    tris = np.concatenate([np.stack([n00, n10, n11], 1), np.stack([n00, n11, n01], 1)])
    Xi, Yi = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    boundary = ((Xi == 0) | (Xi == nx) | (Yi == 0) | (Yi == ny)).ravel()
    return _orient(Mesh2D(nodes, tris.astype(np.int64), boundary, float(h), shape=shape))


def _polygon_mesh(shape, h, _attempt: int = 0) -> Mesh2D:
    v = np.asarray(shape.vertices, dtype=float)
    spacing = 0.8 * h / (2 ** _attempt)
    bpts = []
    for p, q in zip(v, np.roll(v, -1, axis=0)):
        n = max(int(np.ceil(np.linalg.norm(q - p) / spacing)), 1)
        bpts.append(p + np.outer(np.arange(n) / n, q - p))
    bpts = np.vstack(bpts)
    lo, hi = v.min(0), v.max(0)
    step = 0.9 * h
    xs = np.arange(lo[0], hi[0] + step, step)
    ys = np.arange(lo[1], hi[1] + step, step * np.sqrt(3) / 2)
    grid = []
    for r, y in enumerate(ys):
        grid.append(np.stack([xs + (0.5 * step if r % 2 else 0.0), np.full(len(xs), y)], 1))
    grid = np.vstack(grid)
    inside = shape.contains(grid)
    grid = grid[inside]
    grid = grid[_segment_distance(grid, v) > 0.4 * h]
    nodes = np.vstack([bpts, grid])
    tri = Delaunay(nodes, qhull_options="Qbb Qc Qz Q12").simplices
    cen = nodes[tri].mean(axis=1)
    tri = tri[shape.contains(cen)]
    # collinear boundary points on the hull yield zero-area simplices
    e1, e2 = nodes[tri[:, 1]] - nodes[tri[:, 0]], nodes[tri[:, 2]] - nodes[tri[:, 0]]
    tri = tri[np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) > 1e-10 * h * h]
    nb = len(bpts)
    bedges = {tuple(sorted((i, (i + 1) % nb))) for i in range(nb)}
    have = {tuple(sorted(e)) for t in tri for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))}
    if not bedges <= have:
        if _attempt >= 3:
            raise MeshFailure("polygon boundary could not be recovered by the triangulation")
        log.debug("polygon mesh missing boundary edges, refining boundary (attempt %d)", _attempt)
        return _polygon_mesh(shape, h, _attempt + 1)
    used = np.unique(tri)
    remap = -np.ones(len(nodes), np.int64)
    remap[used] = np.arange(len(used))
    boundary = np.zeros(len(nodes), bool)
    boundary[:nb] = True
    mesh = Mesh2D(nodes[used], remap[tri].astype(np.int64), boundary[used], float(h), shape=shape)
    return _orient(mesh)


def _orient(mesh: Mesh2D) -> Mesh2D:
    area = mesh.signed_areas()
    if np.any(np.abs(area) < 1e-14 * mesh.h_mesh ** 2):
        raise MeshFailure("degenerate triangle")
    if np.all(area > 0):
        return mesh
    tris = mesh.triangles.copy()
    neg = area < 0
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return Mesh2D(mesh.nodes.copy(), tris, mesh.boundary.copy(), mesh.h_mesh, shape=mesh.shape)


# ---------------------------------------------------------------------------
# refinement


def refine(mesh: Mesh2D) -> Mesh2D:
    """Nested refinement halving the mesh size.

    Polar meshes halve both the radial and the angular step, which nests the
    finite-element spaces. Cartesian meshes are split into four by edge
    midpoints; new boundary midpoints stay on the old polygonal boundary.
    """
    if mesh.chart == "polar":
        shape = mesh.shape
        r = mesh.chart_coords[..., 0]
        r_in, r_out = float(r.min()), float(r.max())
        n_r = int(round((r_out - r_in) / _radial_step(mesh)))
        n_phi = int(round(2 * np.pi / _angular_step(mesh)))
        return _polar_mesh(shape, r_in, r_out, mesh.h_mesh / 2, 2 * n_r, 2 * n_phi)
    edges = mesh.edges()
    n = mesh.n_nodes
    mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    key = {tuple(e): n + i for i, e in enumerate(edges)}

    def m(a, b):
        return key[(a, b) if a < b else (b, a)]

    new = []
    for a, b, c in mesh.triangles:
        ab, bc, ca = m(a, b), m(b, c), m(c, a)
        new += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    bmid = mesh.boundary[edges[:, 0]] & mesh.boundary[edges[:, 1]]
    # an edge with both ends on the boundary is a boundary edge iff it has one triangle
    count = np.zeros(len(edges), int)
    for a, b, c in mesh.triangles:
        for e in ((a, b), (b, c), (c, a)):
            count[m(*e) - n] += 1
    bmid &= count == 1
    return Mesh2D(np.vstack([mesh.nodes, mids]), np.asarray(new, np.int64),
                  np.concatenate([mesh.boundary, bmid]), mesh.h_mesh / 2, shape=mesh.shape)


def _radial_step(mesh):
    cc = mesh.chart_coords
    dr = np.abs(cc[:, 1, 0] - cc[:, 0, 0])
    return float(np.max(dr))


def _angular_step(mesh):
    cc = mesh.chart_coords
    return float(np.max(np.abs(cc[:, 2, 1] - cc[:, 0, 1])))


# ---------------------------------------------------------------------------
# text IO


def save_mesh(mesh: Mesh2D, path) -> None:
    """Plain-text export: a comment line, a counts line, nodes, then triangles.

    Node lines are ``t2 t3 boundary_flag``; triangle lines are three indices.
    Polar meshes append the chart coordinates and collapse flag to each
    triangle line so that the basis functions can be rebuilt exactly.
    """
    lines = [f"{MESH_HEADER} chart={mesh.chart} h_mesh={float(mesh.h_mesh)!r} "
             f"center={float(mesh.center[0])!r},{float(mesh.center[1])!r}",
             f"{mesh.n_nodes} {len(mesh.triangles)}"]
    for (x, y), b in zip(mesh.nodes, mesh.boundary):
        lines.append(f"{float(x)!r} {float(y)!r} {int(b)}")
    for t, cc, col in zip(mesh.triangles, mesh.chart_coords, mesh.collapsed):
        row = f"{t[0]} {t[1]} {t[2]}"
        if mesh.chart == "polar":
            row += " " + " ".join(repr(float(x)) for x in cc.ravel()) + f" {int(col)}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path, shape: Optional[CrossSectionShape] = None) -> Mesh2D:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(MESH_HEADER):
        raise MeshFailure(f"{path}: not a wslab mesh file")
    meta = dict(tok.split("=", 1) for tok in text[0][len(MESH_HEADER):].split())
    n, m = (int(x) for x in text[1].split())
    node_rows = np.array([[float(x) for x in ln.split()] for ln in text[2:2 + n]])
    tri_rows = [ln.split() for ln in text[2 + n:2 + n + m]]
    tris = np.array([[int(x) for x in r[:3]] for r in tri_rows], np.int64)
    chart = meta["chart"]
    cc = coll = None
    if chart == "polar":
        cc = np.array([[float(x) for x in r[3:9]] for r in tri_rows]).reshape(m, 3, 2)
        coll = np.array([bool(int(r[9])) for r in tri_rows])
    center = tuple(float(x) for x in meta["center"].split(","))
    return Mesh2D(node_rows[:, :2], tris, node_rows[:, 2].astype(bool), float(meta["h_mesh"]),
                  chart, cc, coll, center, shape)
