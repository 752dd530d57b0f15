"""Triangulated surfaces with boundary: construction, I/O, topology, built-ins.

A :class:`TriangulatedSurface` is an indexed triangle list with a derived
edge table. Every constructor path goes through :func:`make_surface`, which
checks manifoldness, makes triangle orientations consistent and extracts the
oriented boundary loops.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ClosedSurfaceError,
    DegenerateTriangleError,
    MeshError,
    NonManifoldError,
    OrientationError,
    ParseError,
    ResolutionError,
    TopologyError,
)

__all__ = [
    "TriangulatedSurface",
    "TopologyInvariants",
    "make_surface",
    "load_mesh",
    "save_mesh",
    "compute_topology",
    "builtin_surface",
    "refine_mesh",
    "critical_catenoid_neck",
    "BUILTIN_NAMES",
]

BUILTIN_NAMES = ("flat_disk", "critical_catenoid", "flat_annulus")

DEGENERATE_RELATIVE_AREA = 1e-14
ANNULUS_INNER_RADIUS = 0.5


@dataclass(frozen=True)
class TopologyInvariants:
    genus: int
    boundary_count: int
    euler_char: int

    def as_dict(self) -> dict:
        return {"g": self.genus, "m": self.boundary_count, "chi": self.euler_char}


@dataclass(frozen=True, eq=False)
class TriangulatedSurface:
    """Oriented triangle mesh with marked boundary loops.

    Attributes
    ----------
    vertices : ndarray of shape (V, 3)
        Embedded (or parametric, with zero third coordinate) coordinates.
    triangles : ndarray of shape (F, 3)
        Consistently oriented vertex triples.
    boundary_loops : tuple of tuple of int
        Boundary cycles, each traversed in the direction induced by the
        triangle orientation.
    edges : ndarray of shape (E, 2)
        Unique undirected edges with ``edges[:, 0] < edges[:, 1]``.
    tag : str or None
        Name of the built-in this mesh was generated from. Refinement uses it
        to reproject new vertices onto the analytic surface.
    chart : ndarray of shape (V, 2) or None
        Conformal chart coordinates, when known.
    orientation_flag : bool
        True if some input triangles had to be flipped to reach a consistent
        orientation.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loops: tuple
    edges: np.ndarray
    tag: Optional[str] = None
    chart: Optional[np.ndarray] = None
    orientation_flag: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def boundary_vertices(self) -> np.ndarray:
        if "bverts" not in self._cache:
            ids = sorted(v for loop in self.boundary_loops for v in loop)
            self._cache["bverts"] = _frozen(np.asarray(ids, dtype=np.int64))
        return self._cache["bverts"]

    @property
    def boundary_mask(self) -> np.ndarray:
        if "bmask" not in self._cache:
            mask = np.zeros(self.n_vertices, dtype=bool)
            mask[self.boundary_vertices] = True
            self._cache["bmask"] = _frozen(mask)
        return self._cache["bmask"]

    @property
    def boundary_edges(self) -> np.ndarray:
        """Directed boundary edges ``(a, b)``, loop by loop."""
        if "bedges" not in self._cache:
            rows = []
            for loop in self.boundary_loops:
                for i, a in enumerate(loop):
                    rows.append((a, loop[(i + 1) % len(loop)]))
            self._cache["bedges"] = _frozen(np.asarray(rows, dtype=np.int64).reshape(-1, 2))
        return self._cache["bedges"]

    def topology(self) -> TopologyInvariants:
        return compute_topology(self)

    def mean_edge_length(self) -> float:
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return float(np.mean(np.linalg.norm(d, axis=1)))

    def with_vertices(self, vertices: np.ndarray) -> "TriangulatedSurface":
        """Same connectivity, new coordinates (drops the built-in tag)."""
        return make_surface(vertices, self.triangles, chart=self.chart)

    def __repr__(self) -> str:
        return (
            f"TriangulatedSurface(V={self.n_vertices}, E={self.n_edges}, "
            f"F={self.n_faces}, m={len(self.boundary_loops)}, tag={self.tag!r})"
        )


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)


def _orient_consistently(triangles: np.ndarray) -> tuple[np.ndarray, bool]:
    """Flip triangles so shared edges are traversed oppositely."""
    half = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    if np.unique(half, axis=0).shape[0] == half.shape[0]:
        return triangles, False

    F = triangles.shape[0]
    edge_faces: dict = {}
    for f, (a, b, c) in enumerate(triangles.tolist()):
        for u, v in ((a, b), (b, c), (c, a)):
            edge_faces.setdefault((min(u, v), max(u, v)), []).append((f, u < v))

    flip = np.full(F, -1, dtype=np.int8)
    for seed in range(F):
        if flip[seed] >= 0:
            continue
        flip[seed] = 0
        queue = deque([seed])
        while queue:
            f = queue.popleft()
            a, b, c = triangles[f].tolist()
            for u, v in ((a, b), (b, c), (c, a)):
                key = (min(u, v), max(u, v))
                forward_f = (u < v) != bool(flip[f])
                for g, forward_g_raw in edge_faces[key]:
                    if g == f:
                        continue
                    # g must traverse the shared edge opposite to f
                    want = 0 if forward_g_raw != forward_f else 1
                    if flip[g] < 0:
                        flip[g] = want
                        queue.append(g)
                    elif flip[g] != want:
                        raise OrientationError("surface is not orientable")
    out = triangles.copy()
    sel = flip == 1
    out[sel] = out[sel][:, [0, 2, 1]]
    return out, bool(sel.any())


def _boundary_loops(triangles: np.ndarray, boundary_keys: np.ndarray) -> tuple:
    half = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(half, axis=1)
    bset = {tuple(k) for k in boundary_keys.tolist()}
    nxt: dict = {}
    for (u, v), k in zip(half.tolist(), key.tolist()):
        if tuple(k) in bset:
            if u in nxt:
                raise NonManifoldError(f"boundary vertex {u} is pinched (two outgoing boundary edges)")
            nxt[u] = v
    loops = []
    seen: set = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        v = nxt[start]
        while v != start:
            if v in seen or v not in nxt:
                raise NonManifoldError("boundary edges do not form simple loops")
            loop.append(v)
            seen.add(v)
            v = nxt[v]
        loops.append(tuple(loop))
    return tuple(loops)


def make_surface(
    vertices,
    triangles,
    tag: Optional[str] = None,
    chart=None,
) -> TriangulatedSurface:
    """Validate raw arrays and build a :class:`TriangulatedSurface`.

    Raises
    ------
    MeshError
        Bad shapes, out-of-range or unreferenced vertices.
    NonManifoldError
        An edge shared by more than two triangles, or a pinched boundary vertex.
    ClosedSurfaceError
        No boundary edges.
    OrientationError
        Orientations cannot be made consistent.
    DegenerateTriangleError
        A triangle with area below the relative threshold.
    """
    V = np.array(vertices, dtype=float)
    T = np.array(triangles, dtype=np.int64)
    if V.ndim != 2 or V.shape[1] not in (2, 3):
        raise MeshError("vertices must have shape (V, 2) or (V, 3)")
    if V.shape[1] == 2:
        V = np.column_stack([V, np.zeros(len(V))])
    if T.ndim != 2 or T.shape[1] != 3 or T.shape[0] == 0:
        raise MeshError("triangles must have shape (F, 3) with F >= 1")
    if T.min() < 0 or T.max() >= V.shape[0]:
        raise MeshError("triangle references a vertex out of range")
    if np.any((T[:, 0] == T[:, 1]) | (T[:, 1] == T[:, 2]) | (T[:, 0] == T[:, 2])):
        raise DegenerateTriangleError("triangle with repeated vertex")
    if np.unique(T).size != V.shape[0]:
        raise MeshError("mesh has unreferenced vertices")
    if not np.all(np.isfinite(V)):
        raise MeshError("non-finite vertex coordinates")

    keys = np.sort(np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
    edges, counts = np.unique(keys, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise NonManifoldError("edge shared by more than two triangles")
    if np.unique(np.sort(T, axis=1), axis=0).shape[0] != T.shape[0]:
        raise NonManifoldError("duplicate triangle")
    boundary_keys = edges[counts == 1]
    if boundary_keys.shape[0] == 0:
        raise ClosedSurfaceError("mesh has no boundary edges")

    T, flipped = _orient_consistently(T)

    extent = np.sort(V.max(axis=0) - V.min(axis=0))
    bbox_area = extent[-1] * extent[-2]
    areas = _triangle_areas(V, T)
    if np.any(areas < DEGENERATE_RELATIVE_AREA * bbox_area):
        raise DegenerateTriangleError(
            f"{int(np.sum(areas < DEGENERATE_RELATIVE_AREA * bbox_area))} degenerate triangle(s)"
        )

    loops = _boundary_loops(T, boundary_keys)
    if chart is not None:
        chart = np.array(chart, dtype=float)
        if chart.shape != (V.shape[0], 2):
            raise MeshError("chart must have shape (V, 2)")
        chart = _frozen(chart)
    return TriangulatedSurface(
        vertices=_frozen(V),
        triangles=_frozen(T),
        boundary_loops=loops,
        edges=_frozen(edges),
        tag=tag,
        chart=chart,
        orientation_flag=flipped,
    )


def compute_topology(surface: TriangulatedSurface) -> TopologyInvariants:
    """Euler characteristic, boundary count and genus from the counts V, E, F."""
    chi = surface.n_vertices - surface.n_edges + surface.n_faces
    m = len(surface.boundary_loops)
    twice_g = 2 - chi - m
    if twice_g < 0 or twice_g % 2:
        raise TopologyError(f"2 - chi - m = {twice_g} is not a nonnegative even integer")
    return TopologyInvariants(genus=twice_g // 2, boundary_count=m, euler_char=chi)


# ----------------------------------------------------------------------------
# I/O


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _read_off(text: str):
    lines = [s for s in (_strip(l) for l in text.splitlines()) if s]
    if not lines:
        raise ParseError("empty OFF file")
    head = lines[0].split()
    if head[0] != "OFF":
        raise ParseError("missing OFF header")
    rest = head[1:]
    pos = 1
    if not rest:
        rest = lines[1].split()
        pos = 2
    try:
        nv, nf = int(rest[0]), int(rest[1])
        verts = [[float(x) for x in lines[pos + i].split()[:3]] for i in range(nv)]
        faces = []
        for i in range(nf):
            tok = lines[pos + nv + i].split()
            k = int(tok[0])
            if k != 3:
                raise ParseError(f"face {i} has {k} vertices; only triangles are supported")
            faces.append([int(t) for t in tok[1:4]])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed OFF file: {exc}") from exc
    return verts, faces


def _read_obj(text: str):
    verts, faces = [], []
    try:
        for raw in text.splitlines():
            s = _strip(raw)
            if not s:
                continue
            tok = s.split()
            if tok[0] == "v":
                verts.append([float(x) for x in tok[1:4]])
            elif tok[0] == "f":
                idx = [int(t.split("/")[0]) for t in tok[1:]]
                if len(idx) != 3:
                    raise ParseError("only triangular OBJ faces are supported")
                faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    except ValueError as exc:
        raise ParseError(f"malformed OBJ file: {exc}") from exc
    if not verts or not faces:
        raise ParseError("OBJ file has no vertices or faces")
    return verts, faces


def load_mesh(path, format: Optional[str] = None) -> TriangulatedSurface:
    """Read an ASCII OFF or OBJ triangle mesh.

    ``format`` defaults to the file suffix. OBJ normals and texture
    coordinates are ignored.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    text = path.read_text()
    if fmt == "off":
        verts, faces = _read_off(text)
    elif fmt == "obj":
        verts, faces = _read_obj(text)
    else:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    if any(len(v) != 3 for v in verts):
        raise ParseError("vertices need three coordinates")
    return make_surface(np.asarray(verts), np.asarray(faces))


def save_mesh(surface: TriangulatedSurface, path, format: Optional[str] = None) -> None:
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    V, T = surface.vertices, surface.triangles
    if fmt == "off":
        out = [f"OFF\n{len(V)} {len(T)} 0"]
        out += [f"{x!r} {y!r} {z!r}" for x, y, z in V.tolist()]
        out += [f"3 {a} {b} {c}" for a, b, c in T.tolist()]
    elif fmt == "obj":
        out = [f"v {x!r} {y!r} {z!r}" for x, y, z in V.tolist()]
        out += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in T.tolist()]
    else:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    path.write_text("\n".join(out) + "\n")


# ----------------------------------------------------------------------------
# Built-in surfaces


def critical_catenoid_neck(tol: float = 1e-14) -> float:
    """Root of ``t * tanh(t) = 1`` by bisection.

    The catenoid ``(cosh t cos s, cosh t sin s, t)`` cut at ``|t| = t0`` meets
    the sphere through its boundary orthogonally exactly when the position
    vector is parallel to the conormal there, which reduces to this equation.
    """
    lo, hi = 0.5, 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid * math.tanh(mid) - 1.0 > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _catenoid_scale(t0: float) -> float:
    return 1.0 / math.sqrt(math.cosh(t0) ** 2 + t0**2)


def _fix_ccw(points2d: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p = points2d[tris]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tris = tris.copy()
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris


def _flat_disk(res: int):
    pts = [(0.0, 0.0)]
    rings = [[0]]
    for k in range(1, res + 1):
        n = 6 * k
        r = k / res
        ids = []
        for j in range(n):
            a = 2 * math.pi * j / n
            ids.append(len(pts))
            pts.append((r * math.cos(a), r * math.sin(a)))
        rings.append(ids)
    tris = []
    for k in range(1, res + 1):
        inner, outer = rings[k - 1], rings[k]
        ni, no = len(inner), len(outer)
        if ni == 1:
            for j in range(no):
                tris.append((inner[0], outer[j], outer[(j + 1) % no]))
            continue
        i = j = 0
        while i < ni or j < no:
            a_in = (i + 1) / ni
            a_out = (j + 1) / no
            if j < no and (i >= ni or a_out <= a_in + 1e-12):
                tris.append((inner[i % ni], outer[j], outer[(j + 1) % no]))
                j += 1
            else:
                tris.append((inner[i], outer[j % no], inner[(i + 1) % ni]))
                i += 1
    P = np.asarray(pts)
    T = _fix_ccw(P, np.asarray(tris, dtype=np.int64))
    return np.column_stack([P, np.zeros(len(P))]), T


def _polar_grid(n_theta: int, radii: np.ndarray):
    pts, ids = [], {}
    for j, r in enumerate(radii):
        for i in range(n_theta):
            a = 2 * math.pi * i / n_theta
            ids[i, j] = len(pts)
            pts.append((r * math.cos(a), r * math.sin(a)))
    tris = []
    for j in range(len(radii) - 1):
        for i in range(n_theta):
            a, b = ids[i, j], ids[(i + 1) % n_theta, j]
            c, d = ids[(i + 1) % n_theta, j + 1], ids[i, j + 1]
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    return np.asarray(pts), np.asarray(tris, dtype=np.int64)


def _flat_annulus(res: int):
    radii = np.linspace(ANNULUS_INNER_RADIUS, 1.0, res + 1)
    P, T = _polar_grid(6 * res, radii)
    T = _fix_ccw(P, T)
    return np.column_stack([P, np.zeros(len(P))]), T


def _catenoid(res: int):
    t0 = critical_catenoid_neck()
    s = _catenoid_scale(t0)
    n_theta = 4 * res
    n_t = max(2, int(round(n_theta * t0 / math.pi)))
    ts = np.linspace(-t0, t0, n_t + 1)
    # the conformal chart z = exp(t + i theta) maps the catenoid onto a planar annulus
    P, T = _polar_grid(n_theta, np.exp(ts))
    T = _fix_ccw(P, T)
    return _catenoid_from_chart(P, t0, s), T


def _catenoid_from_chart(chart: np.ndarray, t0: float, s: float) -> np.ndarray:
    r = np.hypot(chart[:, 0], chart[:, 1])
    t = np.clip(np.log(r), -t0, t0)
    c, sn = chart[:, 0] / r, chart[:, 1] / r
    return s * np.column_stack([np.cosh(t) * c, np.cosh(t) * sn, t])


def _catenoid_chart(vertices: np.ndarray) -> np.ndarray:
    t0 = critical_catenoid_neck()
    s = _catenoid_scale(t0)
    t = np.clip(vertices[:, 2] / s, -t0, t0)
    theta = np.arctan2(vertices[:, 1], vertices[:, 0])
    return np.column_stack([np.exp(t) * np.cos(theta), np.exp(t) * np.sin(theta)])


def _chart_for(tag: str, vertices: np.ndarray) -> np.ndarray:
    if tag == "critical_catenoid":
        return _catenoid_chart(vertices)
    return vertices[:, :2].copy()


def builtin_surface(name: str, resolution: int) -> TriangulatedSurface:
    """Generate one of the analytic test surfaces.

    ``flat_disk`` is the equatorial unit disk (``6 * resolution**2``
    triangles), ``critical_catenoid`` the catenoid scaled to meet the unit
    sphere orthogonally, ``flat_annulus`` a planar annulus with radii 0.5 and 1.
    """
    if int(resolution) != resolution or resolution < 1:
        raise ResolutionError(f"resolution must be a positive integer, got {resolution!r}")
    resolution = int(resolution)
    if name == "flat_disk":
        V, T = _flat_disk(resolution)
    elif name == "critical_catenoid":
        V, T = _catenoid(resolution)
    elif name == "flat_annulus":
        V, T = _flat_annulus(resolution)
    else:
        raise ValueError(f"unknown built-in surface {name!r}; choose from {BUILTIN_NAMES}")
    return make_surface(V, T, tag=name, chart=_chart_for(name, V))


def _project_new_vertices(tag: Optional[str], P: np.ndarray, new: np.ndarray, on_boundary: np.ndarray) -> None:
    if tag == "flat_disk":
        b = new[on_boundary]
        P[b, :2] /= np.linalg.norm(P[b, :2], axis=1)[:, None]
        P[b, 2] = 0.0
    elif tag == "flat_annulus":
        b = new[on_boundary]
        r = np.linalg.norm(P[b, :2], axis=1)
        target = np.where(r > 0.5 * (1.0 + ANNULUS_INNER_RADIUS), 1.0, ANNULUS_INNER_RADIUS)
        P[b, :2] *= (target / r)[:, None]
    elif tag == "critical_catenoid":
        t0 = critical_catenoid_neck()
        s = _catenoid_scale(t0)
        P[new] = _catenoid_from_chart(_catenoid_chart(P[new]), t0, s)


def refine_mesh(surface: TriangulatedSurface, levels: int) -> TriangulatedSurface:
    """Uniform 1-to-4 midpoint subdivision, repeated ``levels`` times.

    Built-in surfaces have their new vertices reprojected onto the analytic
    surface (boundary vertices onto the analytic boundary); other meshes are
    refined affinely.
    """
    if int(levels) != levels or levels < 0:
        raise ValueError("levels must be a nonnegative integer")
    out = surface
    for _ in range(int(levels)):
        out = _refine_once(out)
    return out


def _refine_once(s: TriangulatedSurface) -> TriangulatedSurface:
    V, T, E = s.vertices, s.triangles, s.edges
    nv = V.shape[0]
    mid_ids = nv + np.arange(E.shape[0])
    lookup = {(int(a), int(b)): int(m) for (a, b), m in zip(E, mid_ids)}

    def mid(a, b):
        return np.array([lookup[(min(x, y), max(x, y))] for x, y in zip(a.tolist(), b.tolist())])

    a, b, c = T[:, 0], T[:, 1], T[:, 2]
    mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
    newT = np.concatenate(
        [
            np.column_stack([a, mab, mca]),
            np.column_stack([mab, b, mbc]),
            np.column_stack([mca, mbc, c]),
            np.column_stack([mab, mbc, mca]),
        ]
    )
    P = np.concatenate([V, 0.5 * (V[E[:, 0]] + V[E[:, 1]])])
    bkeys = {(min(int(x), int(y)), max(int(x), int(y))) for x, y in s.boundary_edges}
    on_boundary = np.array([(int(x), int(y)) in bkeys for x, y in E], dtype=bool)
    _project_new_vertices(s.tag, P, mid_ids, on_boundary)
    if s.tag in BUILTIN_NAMES:
        chart = _chart_for(s.tag, P)
    elif s.chart is not None:
        chart = np.concatenate([s.chart, 0.5 * (s.chart[E[:, 0]] + s.chart[E[:, 1]])])
    else:
        chart = None
    return make_surface(P, newT, tag=s.tag, chart=chart)
