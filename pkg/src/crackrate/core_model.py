"""Material law, symmetric tensors, rigid motions and crack geometry.

Everything here is plain numpy. Tensors are stored by their three independent
components so that a single ``SymTensor2`` can carry either scalars or whole
arrays of values (one per quadrature point, element, ...).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import directed_hausdorff

GEOM_TOL = 1e-12


@dataclass(frozen=True)
class ElasticMaterial:
    """Isotropic material given by its Lame constants.

    Args:
        lam: First Lame constant.
        mu: Shear modulus.
    """

    lam: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.lam) and np.isfinite(self.mu)):
            raise ValueError("Lame constants must be finite")
        if self.lam <= 0 or self.mu <= 0:
            raise ValueError(f"Lame constants must be positive, got lam={self.lam}, mu={self.mu}")

    @property
    def young(self) -> float:
        return self.mu * (3 * self.lam + 2 * self.mu) / (self.lam + self.mu)

    @property
    def poisson(self) -> float:
        return self.lam / (2 * (self.lam + self.mu))

    def elasticity_matrix(self) -> np.ndarray:
        """Plane matrix acting on (e11, e22, 2 e12)."""
        lam, mu = self.lam, self.mu
        return np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])


def young_poisson(mat: ElasticMaterial) -> tuple[float, float]:
    """Returns (E, nu) of the material."""
    return mat.young, mat.poisson


@dataclass(frozen=True)
class SymTensor2:
    """Symmetric 2x2 tensor stored as (xx, xy, yy); components may be arrays."""

    xx: np.ndarray | float
    xy: np.ndarray | float
    yy: np.ndarray | float

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "SymTensor2":
        m = np.asarray(m, dtype=float)
        return cls(m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1])

    @classmethod
    def from_array(cls, a: np.ndarray) -> "SymTensor2":
        """Builds from an array whose last axis holds (xx, xy, yy)."""
        a = np.asarray(a, dtype=float)
        return cls(a[..., 0], a[..., 1], a[..., 2])

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.xx, self.xy, self.yy), axis=-1).astype(float)

    def as_matrix(self) -> np.ndarray:
        xx, xy, yy = np.broadcast_arrays(self.xx, self.xy, self.yy)
        return np.stack([np.stack([xx, xy], -1), np.stack([xy, yy], -1)], -2).astype(float)

    def trace(self):
        return self.xx + self.yy

    def ddot(self, other: "SymTensor2"):
        """Full contraction a:b."""
        return self.xx * other.xx + 2 * self.xy * other.xy + self.yy * other.yy

    def norm_sq(self):
        return self.ddot(self)

    def __add__(self, other: "SymTensor2") -> "SymTensor2":
        return SymTensor2(self.xx + other.xx, self.xy + other.xy, self.yy + other.yy)

    def __sub__(self, other: "SymTensor2") -> "SymTensor2":
        return SymTensor2(self.xx - other.xx, self.xy - other.xy, self.yy - other.yy)

    def scale(self, c) -> "SymTensor2":
        return SymTensor2(c * self.xx, c * self.xy, c * self.yy)

    def apply(self, n: np.ndarray) -> np.ndarray:
        """Tensor times vector(s) ``n`` with components on the last axis."""
        n = np.asarray(n, dtype=float)
        return np.stack([self.xx * n[..., 0] + self.xy * n[..., 1],
                         self.xy * n[..., 0] + self.yy * n[..., 1]], axis=-1)


def apply_hooke(mat: ElasticMaterial, e: SymTensor2) -> SymTensor2:
    """Stress of a strain: lam tr(e) I + 2 mu e."""
    tr = e.trace()
    return SymTensor2(mat.lam * tr + 2 * mat.mu * e.xx, 2 * mat.mu * e.xy,
                      mat.lam * tr + 2 * mat.mu * e.yy)


def inverse_hooke(mat: ElasticMaterial, s: SymTensor2) -> SymTensor2:
    """Strain of a plane stress field: (1 + nu)/E (s - nu tr(s) I)."""
    E, nu = young_poisson(mat)
    tr = s.trace()
    a, b = (1 + nu) / E, (1 + nu) * nu / E
    return SymTensor2(a * s.xx - b * tr, a * s.xy, a * s.yy - b * tr)


@dataclass(frozen=True)
class RigidMotion:
    """Infinitesimal rigid displacement x -> (a - c x2, b + c x1)."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([self.a - self.c * x[..., 1], self.b + self.c * x[..., 0]], axis=-1)

    def strain(self, x: np.ndarray) -> SymTensor2:
        z = np.zeros(np.shape(x)[:-1])
        return SymTensor2(z, z, z)


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------------------
# crack sets


def _clean_chain(chain) -> np.ndarray:
    a = np.asarray(chain, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2 or len(a) < 2:
        raise ValueError("each chain must be an (n>=2, 2) array of points")
    if not np.all(np.isfinite(a)):
        raise ValueError("chain coordinates must be finite")
    return a


@dataclass(frozen=True, eq=False)
class CrackSet:
    """Union of polygonal chains in the plane.

    Args:
        chains: Sequence of (n_i, 2) vertex arrays, one per polyline.
    """

    chains: tuple

    def __post_init__(self):
        object.__setattr__(self, "chains", tuple(_clean_chain(c) for c in self.chains))

    @classmethod
    def empty(cls) -> "CrackSet":
        return cls(())

    @classmethod
    def from_points(cls, *chains) -> "CrackSet":
        return cls(tuple(chains))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CrackSet) or len(self.chains) != len(other.chains):
            return False
        return all(a.shape == b.shape and np.array_equal(a, b)
                   for a, b in zip(self.chains, other.chains))

    def __hash__(self):
        return hash(tuple(c.tobytes() for c in self.chains))

    @property
    def is_empty(self) -> bool:
        return len(self.chains) == 0

    def segments(self) -> np.ndarray:
        """All segments as an (m, 2, 2) array."""
        if self.is_empty:
            return np.zeros((0, 2, 2))
        return np.concatenate([np.stack([c[:-1], c[1:]], axis=1) for c in self.chains])

    def length(self) -> float:
        seg = self.segments()
        return float(np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1).sum())

    def union(self, other: "CrackSet") -> "CrackSet":
        return CrackSet(self.chains + other.chains)

    def transformed(self, scale: float = 1.0, angle: float = 0.0) -> "CrackSet":
        """Copy mapped by x -> scale * R(angle) x."""
        rot = rotation_matrix(angle)
        return CrackSet(tuple(scale * c @ rot.T for c in self.chains))

    def distance(self, x: np.ndarray) -> np.ndarray:
        """Euclidean distance of points to the set."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        seg = self.segments()
        if len(seg) == 0:
            return np.full(len(x), np.inf)
        return _point_segment_distance(x, seg).min(axis=1)

    def contains_origin(self, tol: float = GEOM_TOL) -> bool:
        return (not self.is_empty) and float(self.distance(np.zeros((1, 2)))[0]) <= tol

    def is_connected(self, tol: float = GEOM_TOL) -> bool:
        seg = self.segments()
        if len(seg) <= 1:
            return True
        parent = list(range(len(seg)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(len(seg)):
            d = _segment_segment_distance(seg[i], seg[i + 1:])
            for j in np.nonzero(d <= tol)[0] + i + 1:
                parent[find(i)] = find(int(j))
        return len({find(i) for i in range(len(seg))}) == 1

    def has_repeated_vertices(self) -> bool:
        return any(np.any(np.linalg.norm(np.diff(c, axis=0), axis=1) <= GEOM_TOL)
                   for c in self.chains)

    def check_admissible(self) -> None:
        """Raises ValueError unless the set is empty or connected through the origin."""
        if self.is_empty:
            return
        if self.has_repeated_vertices():
            raise ValueError("crack chain has repeated consecutive vertices")
        if not self.contains_origin():
            raise ValueError("crack set does not contain the origin")
        if not self.is_connected():
            raise ValueError("crack set is not connected")

    def sample(self, spacing: float) -> np.ndarray:
        """Points along every segment with gaps at most ``spacing``."""
        seg = self.segments()
        if len(seg) == 0:
            return np.zeros((0, 2))
        out = []
        for p, q in seg:
            n = max(1, int(np.ceil(np.linalg.norm(q - p) / spacing)))
            t = np.linspace(0.0, 1.0, n + 1)[:, None]
            out.append(p + t * (q - p))
        return np.concatenate(out)

    def clipped_to_disk(self, radius: float) -> "CrackSet":
        """Intersection with the closed disk of given radius centred at 0."""
        pieces = []
        for c in self.chains:
            cur: list[np.ndarray] = []
            for p, q in zip(c[:-1], c[1:]):
                iv = segment_disk_interval(p, q, radius)
                if iv is None:
                    if len(cur) >= 2:
                        pieces.append(np.array(cur))
                    cur = []
                    continue
                t0, t1 = iv
                a, b = p + t0 * (q - p), p + t1 * (q - p)
                if cur and (t0 > 0 or np.linalg.norm(cur[-1] - a) > GEOM_TOL):
                    if len(cur) >= 2:
                        pieces.append(np.array(cur))
                    cur = []
                if not cur:
                    cur = [a]
                if np.linalg.norm(b - cur[-1]) > GEOM_TOL:
                    cur.append(b)
                if t1 < 1:
                    if len(cur) >= 2:
                        pieces.append(np.array(cur))
                    cur = []
            if len(cur) >= 2:
                pieces.append(np.array(cur))
        return CrackSet(tuple(pieces))

    def to_json(self) -> str:
        return json.dumps([c.tolist() for c in self.chains])

    @classmethod
    def from_json(cls, text: str) -> "CrackSet":
        data = json.loads(text)
        return cls(tuple(np.array(c, dtype=float) for c in data))


def _point_segment_distance(x: np.ndarray, seg: np.ndarray) -> np.ndarray:
    """Distances between points (n, 2) and segments (m, 2, 2), shape (n, m)."""
    p, q = seg[:, 0], seg[:, 1]
    d = q - p
    dd = np.maximum((d * d).sum(1), 1e-300)
    t = np.clip(((x[:, None, :] - p[None]) * d[None]).sum(-1) / dd, 0.0, 1.0)
    proj = p[None] + t[..., None] * d[None]
    return np.linalg.norm(x[:, None, :] - proj, axis=-1)


def _segment_segment_distance(s: np.ndarray, others: np.ndarray) -> np.ndarray:
    """Distance from one segment to each of ``others``."""
    if len(others) == 0:
        return np.zeros(0)
    p, q = s
    a, b = others[:, 0], others[:, 1]

    def orient(u, v, w):
        return (v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1]) - (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0])

    o1, o2 = orient(p, q, a), orient(p, q, b)
    o3, o4 = orient(a, b, p), orient(a, b, q)
    crossing = (o1 * o2 < 0) & (o3 * o4 < 0)
    d = np.minimum.reduce([
        _point_segment_distance(a, s[None])[:, 0],
        _point_segment_distance(b, s[None])[:, 0],
        _point_segment_distance(p[None], others)[0],
        _point_segment_distance(q[None], others)[0],
    ])
    d[crossing] = 0.0
    return d


def segment_disk_interval(p: np.ndarray, q: np.ndarray, radius: float):
    """Parameter interval [t0, t1] of the segment p + t (q - p) inside the disk.

    Returns:
        Tuple (t0, t1) or None when the segment misses the closed disk.
    """
    d = q - p
    a = float(d @ d)
    b = 2.0 * float(p @ d)
    c = float(p @ p) - radius * radius
    disc = b * b - 4 * a * c
    if a == 0.0 or disc < 0:
        return None
    sq = np.sqrt(disc)
    t0 = max(0.0, (-b - sq) / (2 * a))
    t1 = min(1.0, (-b + sq) / (2 * a))
    if t1 < t0 or t1 - t0 <= 0.0:
        return None
    return t0, t1


def crack_length(crack: CrackSet) -> float:
    return crack.length()


def density_ratio(crack: CrackSet, rho: float) -> float:
    """Length of the crack inside the disk of radius ``rho`` divided by 2 rho.

    The length is computed by exact segment and disk clipping.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    total = 0.0
    for p, q in crack.segments():
        iv = segment_disk_interval(p, q, rho)
        if iv is not None:
            total += (iv[1] - iv[0]) * float(np.linalg.norm(q - p))
    return total / (2.0 * rho)


def _as_points(obj, spacing: float) -> np.ndarray:
    if isinstance(obj, CrackSet):
        return obj.sample(spacing)
    return np.atleast_2d(np.asarray(obj, dtype=float))


def hausdorff_distance(a, b, tol: float = 1e-3) -> float:
    """Hausdorff distance between two crack sets or point sets.

    Crack sets are replaced by samples spaced at most ``tol / 4``.

    Args:
        a: CrackSet or (n, 2) array of points.
        b: CrackSet or (m, 2) array of points.
        tol: Target accuracy of the distance.

    Returns:
        The symmetric Hausdorff distance.
    """
    pa, pb = _as_points(a, tol / 4), _as_points(b, tol / 4)
    if len(pa) == 0 or len(pb) == 0:
        if len(pa) == len(pb):
            return 0.0
        raise ValueError("Hausdorff distance between an empty and a non-empty set")
    return max(directed_hausdorff(pa, pb)[0], directed_hausdorff(pb, pa)[0])


def reference_half_line(radius: float = 1.0) -> CrackSet:
    """The straight crack along the negative first axis, clipped to a disk."""
    return CrackSet(([[0.0, 0.0], [-radius, 0.0]],))


def rescale_crack(crack: CrackSet, eps: float, rot: float) -> CrackSet:
    """Part of the crack inside B_eps, rotated by ``rot`` and scaled by 1/eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return crack.clipped_to_disk(eps).transformed(1.0 / eps, rot)


def blowup_rotation(crack: CrackSet, eps: float, n_scan: int = 4096,
                    tol: float = 1e-3, refine_tol: float = 1e-10) -> float:
    """Rotation aligning the eps-rescaled crack with the reference half-line.

    The objective is the Hausdorff distance, inside the closed unit disk, between
    the rotated rescaled crack and the unit segment on the negative first axis.
    A uniform scan of ``n_scan`` angles is refined by golden-section search.

    Args:
        crack: The crack set.
        eps: Blow-up radius.
        n_scan: Number of angles in the initial scan.
        tol: Sampling accuracy of the Hausdorff objective during refinement.
        refine_tol: Width of the final golden-section bracket.

    Returns:
        Angle in [0, 2 pi).
    """
    local = rescale_crack(crack, eps, 0.0)
    if local.is_empty:
        raise ValueError("crack does not meet the disk of radius eps")
    verts = np.concatenate(local.chains)
    ref_dir = np.array([-1.0, 0.0])

    def make_objective(spacing):
        tree = cKDTree(local.sample(spacing))
        s = np.linspace(0.0, 1.0, max(2, int(np.ceil(1.0 / spacing)) + 1))

        def objective(angle):
            # distance of rotated vertices to the reference segment (convexity:
            # vertices suffice), then reference samples to the crack
            rot = rotation_matrix(angle)
            q = verts @ rot.T
            t = np.clip(q @ ref_dir, 0.0, 1.0)
            d1 = np.linalg.norm(q - t[:, None] * ref_dir, axis=1).max()
            back = (s[:, None] * ref_dir) @ rot  # R^T applied to reference samples
            d2 = tree.query(back)[0].max()
            return max(d1, d2)

        return objective

    coarse = make_objective(max(tol, 2 * np.pi / n_scan) * 2)
    grid = 2 * np.pi * np.arange(n_scan) / n_scan
    vals = np.array([coarse(t) for t in grid])
    objective = make_objective(tol / 4)
    step = 2 * np.pi / n_scan
    # polish around the few best scan angles with the fine objective
    cands = np.argsort(vals, kind="stable")[:3]
    best, fbest = None, np.inf
    for k in cands:
        lo, hi = grid[k] - step, grid[k] + step
        g = (np.sqrt(5) - 1) / 2
        c, d = hi - g * (hi - lo), lo + g * (hi - lo)
        fc, fd = objective(c), objective(d)
        while hi - lo > refine_tol:
            if fc <= fd:
                hi, d, fd = d, c, fc
                c = hi - g * (hi - lo)
                fc = objective(c)
            else:
                lo, c, fc = c, d, fd
                d = lo + g * (hi - lo)
                fd = objective(d)
        for a in (0.5 * (lo + hi), grid[k]):
            fa = objective(a)
            if fa < fbest - 1e-15:
                best, fbest = a, fa
    out = float(np.mod(best, 2 * np.pi))
    return 0.0 if out > 2 * np.pi - 1e-12 else out


def wrap_angle(a):
    """Maps angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2 * np.pi)


def as_crack(obj: CrackSet | Sequence | Iterable) -> CrackSet:
    return obj if isinstance(obj, CrackSet) else CrackSet(tuple(obj))
