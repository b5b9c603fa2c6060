"""Graded, crack-conforming triangulations of a disk.

The disk is triangulated once with every crack chain, extra polyline and
extra circle as a constrained edge set (Triangle, constrained Delaunay with
quality bounds). A *cut* along a crack set is then produced by splitting the
star of every vertex lying on the crack into the groups of triangles that
remain connected across uncut edges. Each group receives its own copy of the
vertex. Since cutting never changes the triangulation, meshes cut along a
crack and along a larger crack carry nested finite-element spaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import triangle
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .core_model import CrackSet, _point_segment_distance

BOUNDARY_MARK = 1
CONSTRAINT_MARK = 2


@dataclass(frozen=True)
class MeshParams:
    """Element size control.

    The target size at distance d from the nearest focus (crack tips) is
    ``h * (d / grading_radius) ** alpha`` clipped to
    ``[h * grading ** levels, coarsen * h]``, where ``alpha = log2(1 / grading)``.
    Size thus drops by the factor ``grading`` in every dyadic annulus inside
    ``grading_radius``.

    Args:
        h: Element size away from the tips.
        grading: Size ratio between consecutive dyadic annuli, in (0, 1].
        grading_radius: Radius where grading starts; defaults to R / 4.
        levels: Number of graded annuli before the size floor.
        coarsen: Largest element size as a multiple of ``h``.
        min_angle: Minimum angle passed to the mesher, in degrees.
    """

    h: float
    grading: float = 0.5
    grading_radius: float | None = None
    levels: int = 8
    coarsen: float = 1.0
    min_angle: float = 28.0

    def __post_init__(self):
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError("mesh size h must be positive")
        if not (0 < self.grading <= 1):
            raise ValueError("grading must lie in (0, 1]")
        if self.levels < 0 or self.coarsen < 1:
            raise ValueError("levels must be >= 0 and coarsen >= 1")


class SizeField:
    """Target element size as a function of position."""

    def __init__(self, params: MeshParams, foci: np.ndarray, radius: float):
        self.p = params
        self.foci = np.atleast_2d(np.asarray(foci, dtype=float))
        self.rho = params.grading_radius if params.grading_radius else radius / 4
        self.alpha = np.log2(1.0 / params.grading)
        self.tree = cKDTree(self.foci)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        d, _ = self.tree.query(np.atleast_2d(x))
        p = self.p
        s = p.h * (d / self.rho) ** self.alpha if self.alpha > 0 else np.full(len(d), p.h)
        return np.clip(s, p.h * p.grading ** p.levels, p.coarsen * p.h)


def _graded_parameters(points_at, length: float, size: SizeField) -> np.ndarray:
    """Parameters in [0, 1] spacing a curve according to the size field."""
    g = np.geomspace(1e-12, 1.0, 300)
    t = np.unique(np.concatenate([np.linspace(0, 1, 513), g, 1 - g]))
    s = size(points_at(t))
    dens = length / s
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(t))])
    n = max(1, int(np.ceil(cum[-1] - 1e-9)))
    out = np.interp(np.linspace(0, cum[-1], n + 1), cum, t)
    out[0], out[-1] = 0.0, 1.0
    return out


def _segment_intersections(p, q, segs) -> list[float]:
    """Parameters along p->q where it crosses any of ``segs`` (m, 2, 2)."""
    if len(segs) == 0:
        return []
    d = q - p
    a, b = segs[:, 0], segs[:, 1]
    e = b - a
    den = d[0] * e[:, 1] - d[1] * e[:, 0]
    ok = np.abs(den) > 1e-14
    w = a - p
    t = np.where(ok, (w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]) / np.where(ok, den, 1), -1)
    u = np.where(ok, (w[:, 0] * d[1] - w[:, 1] * d[0]) / np.where(ok, den, 1), -1)
    hit = ok & (t > 1e-12) & (t < 1 - 1e-12) & (u >= -1e-12) & (u <= 1 + 1e-12)
    return list(t[hit])


def _circle_crossings(p, q, r) -> list[float]:
    d = q - p
    a, b, c = d @ d, 2 * p @ d, p @ p - r * r
    disc = b * b - 4 * a * c
    if disc <= 0:
        return []
    sq = np.sqrt(disc)
    return [t for t in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)) if 1e-12 < t < 1 - 1e-12]


class _PointPool:
    """Deduplicating vertex store."""

    def __init__(self, tol: float):
        self.tol = tol
        self.pts: list[np.ndarray] = []
        self.index: dict[tuple[int, int], list[int]] = {}

    def add(self, x: np.ndarray) -> int:
        key = (int(np.floor(x[0] / self.tol)), int(np.floor(x[1] / self.tol)))
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for i in self.index.get((key[0] + dx, key[1] + dy), ()):
                    if np.linalg.norm(self.pts[i] - x) <= self.tol:
                        return i
        self.pts.append(np.asarray(x, dtype=float))
        self.index.setdefault(key, []).append(len(self.pts) - 1)
        return len(self.pts) - 1


@dataclass
class Triangulation:
    """Uncut triangulation with its constrained edges."""

    vertices: np.ndarray
    triangles: np.ndarray
    constrained: np.ndarray
    boundary_vertex: np.ndarray
    radius: float
    params: MeshParams


def free_ends(crack: CrackSet, radius: float, tol: float = 1e-12) -> list[np.ndarray]:
    """Chain endpoints inside the open disk that touch no other segment."""
    out = []
    for ci, c in enumerate(crack.chains):
        for end, adj in ((0, 0), (len(c) - 1, len(c) - 2)):
            p = c[end]
            if np.linalg.norm(p) >= radius * (1 - 1e-9):
                continue
            others = []
            for cj, d in enumerate(crack.chains):
                seg = np.stack([d[:-1], d[1:]], axis=1)
                if cj == ci:
                    seg = np.delete(seg, adj, axis=0)
                others.append(seg)
            others = np.concatenate(others)
            if len(others) == 0 or _point_segment_distance(p[None], others).min() > tol:
                out.append(p)
    return out


def triangulate_disk(radius: float, polylines: list[np.ndarray], params: MeshParams,
                     circles: tuple = (), foci=None, upper_half: bool = False) -> Triangulation:
    """Constrained, graded triangulation of the disk (or its upper half).

    Args:
        radius: Disk radius.
        polylines: Constrained chains, already clipped to the disk.
        params: Size control.
        circles: Radii of extra constrained circles centred at 0.
        foci: Points the size field grades toward; the origin is always added.
        upper_half: Triangulate only the part with x2 >= 0, the diameter being a
            constrained boundary edge.

    Returns:
        The triangulation.
    """
    foci = [np.zeros(2)] + [np.asarray(f, dtype=float) for f in (foci or [])]
    size = SizeField(params, np.array(foci), radius)
    pool = _PointPool(1e-11 * radius)
    edges: list[tuple[int, int, int]] = []
    pool.add(np.zeros(2))

    segs_all = [np.stack([c[:-1], c[1:]], axis=1) for c in polylines]
    segs_all = np.concatenate(segs_all) if segs_all else np.zeros((0, 2, 2))
    circ = [radius] + [float(r) for r in circles]

    for c in polylines:
        for p, q in zip(c[:-1], c[1:]):
            ts = [0.0, 1.0] + _segment_intersections(p, q, segs_all)
            for r in circ:
                ts += _circle_crossings(p, q, r)
            d = q - p
            t0 = -(p @ d) / (d @ d)
            if 1e-12 < t0 < 1 - 1e-12 and np.linalg.norm(p + t0 * d) < 1e-11 * radius:
                ts.append(t0)
            ts = np.unique(np.round(np.array(ts), 14))
            for a, b in zip(ts[:-1], ts[1:]):
                pa, pb = p + a * d, p + b * d
                L = np.linalg.norm(pb - pa)
                if L <= 1e-11 * radius:
                    continue
                tt = _graded_parameters(lambda t: pa + t[:, None] * (pb - pa), L, size)
                ids = [pool.add(pa + t * (pb - pa)) for t in tt]
                edges += [(i, j, CONSTRAINT_MARK) for i, j in zip(ids[:-1], ids[1:]) if i != j]

    for k, r in enumerate(circ):
        mark = BOUNDARY_MARK if k == 0 else CONSTRAINT_MARK
        angles = [0.0, np.pi] if upper_half else [0.0]
        for p, q in (s for s in segs_all):
            for t in _circle_crossings(p, q, r) + [0.0, 1.0]:
                x = p + t * (q - p)
                if abs(np.linalg.norm(x) - r) < 1e-11 * radius:
                    angles.append(float(np.mod(np.arctan2(x[1], x[0]), 2 * np.pi)))
        angles = np.unique(np.round(np.array(angles), 13))
        if upper_half:
            angles = angles[angles <= np.pi + 1e-13]
            stops = list(angles)
        else:
            stops = list(angles) + [angles[0] + 2 * np.pi]
        pts_on = []
        for a, b in zip(stops[:-1], stops[1:]):
            L = r * (b - a)
            tt = _graded_parameters(lambda t: r * np.stack([np.cos(a + t * (b - a)), np.sin(a + t * (b - a))], -1), L, size)
            n_min = int(np.ceil(64 * (b - a) / (2 * np.pi))) if k == 0 else 1
            if len(tt) - 1 < n_min:
                tt = np.linspace(0, 1, n_min + 1)
            th = a + tt * (b - a)
            pts_on += [r * np.array([np.cos(x), np.sin(x)]) for x in (th if not pts_on else th[1:])]
        if not upper_half:
            pts_on = pts_on[:-1]
        ids = [pool.add(x) for x in pts_on]
        ring = list(zip(ids[:-1], ids[1:]))
        if not upper_half:
            ring.append((ids[-1], ids[0]))
        edges += [(i, j, mark) for i, j in ring if i != j]

    if upper_half:
        # the diameter is the lower boundary of the half disk
        xs = [-radius, 0.0, radius]
        for c in polylines:
            xs += [x[0] for x in c if abs(x[1]) < 1e-12 * radius]
        for r in circ[1:]:
            xs += [-r, r]
        xs = np.unique(np.round(np.array(xs), 13))
        for a, b in zip(xs[:-1], xs[1:]):
            pa, pb = np.array([a, 0.0]), np.array([b, 0.0])
            tt = _graded_parameters(lambda t: pa + t[:, None] * (pb - pa), b - a, size)
            ids = [pool.add(pa + t * (pb - pa)) for t in tt]
            edges += [(i, j, CONSTRAINT_MARK) for i, j in zip(ids[:-1], ids[1:]) if i != j]

    verts = np.array(pool.pts)
    seg = np.array(sorted({(min(i, j), max(i, j), m) for i, j, m in edges}), dtype=np.int64)
    # keep the boundary mark when a segment was registered twice
    uniq: dict[tuple[int, int], int] = {}
    for i, j, m in seg.tolist():
        uniq[(i, j)] = min(m, uniq.get((i, j), m))
    seg_ij = np.array(list(uniq.keys()), dtype=np.int32)
    seg_m = np.array(list(uniq.values()), dtype=np.int32)

    flags = f"pq{params.min_angle:g}YQ"
    pslg = dict(vertices=verts, segments=seg_ij, segment_markers=seg_m[:, None])
    if upper_half:
        pslg["holes"] = np.array([[0.0, -radius / 2]])
    out = triangle.triangulate(pslg, flags)
    for _ in range(20):
        P, T = out["vertices"], out["triangles"]
        cen = P[T].mean(axis=1)
        target = size(cen) ** 2
        area = 0.5 * np.abs((P[T[:, 1], 0] - P[T[:, 0], 0]) * (P[T[:, 2], 1] - P[T[:, 0], 1])
                            - (P[T[:, 2], 0] - P[T[:, 0], 0]) * (P[T[:, 1], 1] - P[T[:, 0], 1]))
        if np.all(area <= 1.05 * target):
            break
        out = triangle.triangulate(dict(vertices=P, triangles=T, segments=out["segments"],
                                        segment_markers=out["segment_markers"],
                                        triangle_max_area=target), "r" + flags + "a")
    P = np.asarray(out["vertices"], dtype=float)
    T = np.asarray(out["triangles"], dtype=np.int64)
    S = np.asarray(out["segments"], dtype=np.int64)
    M = np.asarray(out["segment_markers"]).ravel()
    T = _orient(P, T)
    bmask = np.zeros(len(P), dtype=bool)
    if upper_half:
        on_arc = np.abs(np.hypot(P[:, 0], P[:, 1]) - radius) < 1e-9 * radius
        bmask[on_arc] = True
        constrained = S
    else:
        bmask[S[M == BOUNDARY_MARK].ravel()] = True
        constrained = S
    return Triangulation(P, T, np.sort(constrained, axis=1), bmask, radius, params)


def _orient(P: np.ndarray, T: np.ndarray) -> np.ndarray:
    a = ((P[T[:, 1], 0] - P[T[:, 0], 0]) * (P[T[:, 2], 1] - P[T[:, 0], 1])
         - (P[T[:, 2], 0] - P[T[:, 0], 0]) * (P[T[:, 1], 1] - P[T[:, 0], 1]))
    T = T.copy()
    neg = a < 0
    T[neg] = T[neg][:, [0, 2, 1]]
    return T


def _mirror(tri: Triangulation) -> Triangulation:
    """Reflects an upper-half triangulation across the first axis."""
    P, T = tri.vertices, tri.triangles
    on_axis = np.abs(P[:, 1]) <= 1e-12 * tri.radius
    P = P.copy()
    P[on_axis, 1] = 0.0
    off = np.nonzero(~on_axis)[0]
    new_id = np.arange(len(P))
    new_id[off] = len(P) + np.arange(len(off))
    P2 = np.vstack([P, P[off] * np.array([1.0, -1.0])])
    T2 = np.vstack([T, new_id[T][:, [0, 2, 1]]])
    S = tri.constrained
    S_m = np.sort(new_id[S], axis=1)
    S2 = np.unique(np.vstack([S, S_m]), axis=0)
    b = np.concatenate([tri.boundary_vertex, tri.boundary_vertex[off]])
    return Triangulation(P2, T2, S2, b, tri.radius, tri.params)


@dataclass
class CrackMesh:
    """Triangulation of a disk cut along a crack set.

    Attributes:
        vertices: (n, 2) node coordinates; nodes on the cut appear once per face.
        triangles: (m, 3) counter-clockwise node indices.
        crack_pairs: (k, 2) node pairs (lower face, upper face) at the same point.
        tip_index: Node at the origin, or -1 when the origin is not a vertex.
        boundary: (n,) True for nodes on the outer circle.
        h: Target element size.
        grading: Geometric refinement ratio toward the tips.
        radius: Disk radius.
        parent: (n,) index of the uncut vertex each node comes from.
        crack: The cut crack set.
        base: The uncut triangulation.
        side_probe: (n, 2) points slightly inside the elements around each node,
            used to evaluate one-sided boundary data at duplicated nodes.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    crack_pairs: np.ndarray
    tip_index: int
    boundary: np.ndarray
    h: float
    grading: float
    radius: float
    parent: np.ndarray
    crack: CrackSet
    base: Triangulation = field(repr=False)
    side_probe: np.ndarray = field(repr=False, default=None)

    @property
    def n_nodes(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        P, T = self.vertices, self.triangles
        return 0.5 * ((P[T[:, 1], 0] - P[T[:, 0], 0]) * (P[T[:, 2], 1] - P[T[:, 0], 1])
                      - (P[T[:, 2], 0] - P[T[:, 0], 0]) * (P[T[:, 1], 1] - P[T[:, 0], 1]))

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def shape_gradients(self) -> np.ndarray:
        """Gradients of the three barycentric coordinates per element, (m, 3, 2)."""
        P, T = self.vertices, self.triangles
        x, y = P[T, 0], P[T, 1]
        a2 = 2 * self.signed_areas
        gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], -1) / a2[:, None]
        gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], -1) / a2[:, None]
        return np.stack([gx, gy], -1)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (e, 2), sorted."""
        T = self.triangles
        e = np.sort(np.vstack([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def element_edges(self) -> np.ndarray:
        """Edge ids of each element in the order (01, 12, 20)."""
        T = self.triangles
        e = np.sort(np.stack([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]], axis=1), axis=2)
        key = e[..., 0] * self.n_nodes + e[..., 1]
        ekey = self.edges[:, 0] * self.n_nodes + self.edges[:, 1]
        return np.searchsorted(ekey, key)

    def euler_characteristic(self) -> int:
        return self.n_nodes - len(self.edges) + self.n_elements

    def components(self) -> tuple[int, np.ndarray]:
        """Connected components of the node graph induced by the elements."""
        T = self.triangles
        i = np.concatenate([T[:, 0], T[:, 1], T[:, 2]])
        j = np.concatenate([T[:, 1], T[:, 2], T[:, 0]])
        g = coo_matrix((np.ones(len(i)), (i, j)), shape=(self.n_nodes, self.n_nodes))
        return connected_components(g, directed=False)

    def cut_along(self, crack: CrackSet) -> "CrackMesh":
        """The same triangulation cut along another crack set."""
        return cut_triangulation(self.base, crack, self.h, self.grading)

    def validate(self) -> None:
        """Raises AssertionError when a structural invariant fails."""
        assert np.all(self.signed_areas > 0), "non-positive element area"
        used = np.zeros(self.n_nodes, dtype=bool)
        used[self.triangles.ravel()] = True
        assert used.all(), "unused node"
        if len(self.crack_pairs):
            d = self.vertices[self.crack_pairs[:, 0]] - self.vertices[self.crack_pairs[:, 1]]
            assert np.abs(d).max() == 0.0, "twin nodes at different places"

    def copies(self, node: int) -> np.ndarray:
        return np.nonzero(self.parent == self.parent[node])[0]


def _crack_edges(tri: Triangulation, crack: CrackSet) -> np.ndarray:
    """Constrained edges lying on the crack set."""
    if crack.is_empty or len(tri.constrained) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    P = tri.vertices
    S = tri.constrained
    tol = 1e-9 * tri.radius
    mids = 0.5 * (P[S[:, 0]] + P[S[:, 1]])
    on = crack.distance(mids) <= tol
    on &= crack.distance(P[S[:, 0]]) <= tol
    on &= crack.distance(P[S[:, 1]]) <= tol
    return S[on]


def cut_triangulation(tri: Triangulation, crack: CrackSet, h: float, grading: float) -> CrackMesh:
    """Duplicates vertices so that no element pair is connected across the crack."""
    P, T = tri.vertices, tri.triangles
    cut = _crack_edges(tri, crack)
    cut_set = {tuple(e) for e in cut.tolist()}
    on_cut = np.unique(cut.ravel()) if len(cut) else np.zeros(0, dtype=np.int64)
    # vertex -> incident triangles
    order = np.argsort(T.ravel(), kind="stable")
    tri_of = order // 3
    starts = np.searchsorted(T.ravel()[order], np.arange(len(P) + 1))
    T_new = T.copy()
    parent = list(range(len(P)))
    pairs = []
    for v in on_cut.tolist():
        inc = tri_of[starts[v]:starts[v + 1]]
        # union-find over incident triangles joined through uncut edges at v
        link: dict[tuple[int, int], list[int]] = {}
        for t in inc.tolist():
            for w in T[t].tolist():
                if w != v:
                    link.setdefault((min(v, w), max(v, w)), []).append(t)
        par = {t: t for t in inc.tolist()}

        def find(t):
            while par[t] != t:
                par[t] = par[par[t]]
                t = par[t]
            return t

        for e, ts in link.items():
            if e in cut_set or len(ts) < 2:
                continue
            a, b = find(ts[0]), find(ts[1])
            if a != b:
                par[max(a, b)] = min(a, b)
        groups: dict[int, list[int]] = {}
        for t in sorted(inc.tolist()):
            groups.setdefault(find(t), []).append(t)
        glist = sorted(groups.values(), key=lambda g: g[0])
        ids = [v]
        for g in glist[1:]:
            nid = len(parent)
            parent.append(v)
            ids.append(nid)
            for t in g:
                T_new[t][T[t] == v] = nid
        if len(glist) == 2:
            pairs.append((v, ids, glist))
    parent = np.array(parent, dtype=np.int64)
    V = P[parent]
    cen = P[T].mean(axis=1)
    crack_pairs = []
    for v, ids, glist in pairs:
        # orient each pair so that the second node sits on the right of the
        # crack direction pointing away from the origin
        nb = [e for e in cut.tolist() if v in e]
        w = nb[0][1] if nb[0][0] == v else nb[0][0]
        d = P[w] - P[v]
        if np.linalg.norm(P[w]) < np.linalg.norm(P[v]):
            d = -d
        right = np.array([d[1], -d[0]])
        side = [float((cen[g].mean(axis=0) - P[v]) @ right) for g in glist]
        lower, upper = (ids[0], ids[1]) if side[1] > side[0] else (ids[1], ids[0])
        crack_pairs.append((lower, upper))
    crack_pairs = np.array(crack_pairs, dtype=np.int64).reshape(-1, 2)
    boundary = tri.boundary_vertex[parent]
    origin = np.nonzero(np.linalg.norm(P, axis=1) <= 1e-12 * tri.radius)[0]
    tip = int(origin[0]) if len(origin) else -1
    mesh = CrackMesh(V, T_new, crack_pairs, tip, boundary, h, grading, tri.radius, parent, crack, tri)
    mesh.side_probe = _side_probes(mesh)
    return mesh


def _side_probes(mesh: CrackMesh) -> np.ndarray:
    """Node positions pulled a tiny distance toward their incident elements."""
    probe = mesh.vertices.copy()
    dup = np.bincount(mesh.parent, minlength=len(mesh.base.vertices))[mesh.parent] > 1
    if not dup.any():
        return probe
    T = mesh.triangles
    acc = np.zeros_like(probe)
    cnt = np.zeros(len(probe))
    cen = mesh.centroids
    for k in range(3):
        np.add.at(acc, T[:, k], cen)
        np.add.at(cnt, T[:, k], 1)
    direction = acc / cnt[:, None] - probe
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
    probe[dup] += 1e-9 * mesh.radius * direction[dup]
    return probe


def build_disk_mesh(R: float, crack: CrackSet, h: float, grading: float = 0.5, *,
                    embed: CrackSet | None = None, circles: tuple = (),
                    grading_radius: float | None = None, levels: int = 8,
                    coarsen: float = 1.0, symmetric: bool = False) -> CrackMesh:
    """Graded triangulation of the disk B_R cut along ``crack``.

    Args:
        R: Disk radius.
        crack: Crack set; parts outside the disk are clipped away.
        h: Element size away from the tips.
        grading: Size ratio between consecutive dyadic annuli toward the tips.
        embed: Extra chains meshed as constrained but uncut edges. Cutting the
            returned mesh along ``crack`` united with them (see
            ``CrackMesh.cut_along``) gives nested spaces.
        circles: Radii of constrained circles.
        grading_radius: Radius where grading starts (default R / 4).
        levels: Number of graded annuli.
        coarsen: Largest element size as a multiple of h.
        symmetric: Mesh the upper half and mirror it; the crack and embedded
            chains must then lie on the first axis.

    Returns:
        The cut mesh.

    Raises:
        ValueError: Invalid size parameters or a degenerate crack.
    """
    if not (R > 0):
        raise ValueError("radius must be positive")
    params = MeshParams(h, grading, grading_radius, levels, coarsen)
    if crack.has_repeated_vertices():
        raise ValueError("crack chain has repeated consecutive vertices")
    crack = crack.clipped_to_disk(R)
    extra = embed.clipped_to_disk(R) if embed is not None else CrackSet.empty()
    if extra.has_repeated_vertices():
        raise ValueError("embedded chain has repeated consecutive vertices")
    union = crack.union(extra)
    foci = free_ends(union, R)
    if symmetric:
        for c in union.chains:
            if np.abs(c[:, 1]).max() > 1e-12 * R:
                raise ValueError("symmetric meshes need chains on the first axis")
        tri = triangulate_disk(R, [], params, tuple(circles), foci, upper_half=True)
        # record the chain vertices lying on the axis before mirroring
        tri = _mirror(tri)
        axis = CrackSet(([[-R, 0.0], [R, 0.0]],))
        on_axis = _crack_edges(tri, axis)
        tri = replace(tri, constrained=np.unique(np.vstack([tri.constrained, on_axis]), axis=0))
    else:
        tri = triangulate_disk(R, list(union.chains), params, tuple(circles), foci)
    return cut_triangulation(tri, crack, h, grading)


def refine_uniform(mesh: CrackMesh) -> CrackMesh:
    """Splits every element into four; cut and constrained edges are preserved."""
    tri = mesh.base
    P, T = tri.vertices, tri.triangles
    e = np.sort(np.vstack([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
    edges, inv = np.unique(e, axis=0, return_inverse=True)
    inv = inv.ravel()
    m = len(T)
    mid = len(P) + inv.reshape(3, m).T  # (m, 3) for edges 01, 12, 20
    P2 = np.vstack([P, 0.5 * (P[edges[:, 0]] + P[edges[:, 1]])])
    a, b, c = T[:, 0], T[:, 1], T[:, 2]
    ab, bc, ca = mid[:, 0], mid[:, 1], mid[:, 2]
    T2 = np.vstack([np.c_[a, ab, ca], np.c_[ab, b, bc], np.c_[ca, bc, c], np.c_[ab, bc, ca]])
    ekey = {tuple(x): len(P) + k for k, x in enumerate(edges.tolist())}
    S2 = []
    for i, j in tri.constrained.tolist():
        k = ekey[(i, j)]
        S2 += [(min(i, k), max(i, k)), (min(j, k), max(j, k))]
    S2 = np.array(S2, dtype=np.int64).reshape(-1, 2)
    bmask = np.concatenate([tri.boundary_vertex,
                            tri.boundary_vertex[edges[:, 0]] & tri.boundary_vertex[edges[:, 1]]
                            & np.array([tuple(x) in {tuple(s) for s in tri.constrained.tolist()}
                                        for x in edges.tolist()])])
    params = replace(tri.params, h=tri.params.h / 2)
    tri2 = Triangulation(P2, T2, S2, bmask, tri.radius, params)
    return cut_triangulation(tri2, mesh.crack, mesh.h / 2, mesh.grading)
