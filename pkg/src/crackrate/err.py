"""Energy release under crack increments and its blow-up limit.

``compute_G`` is half the elastic energy difference between the solutions
with and without an increment, ``g_eps`` minimizes ``G / eps`` over a family
of increments of length ``eps`` at the tip, and ``limit_functional`` solves the
limit problem on the slit plane around the pure singular field.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .core_model import CrackSet, ElasticMaterial, apply_hooke
from .fem_solver import (BoundaryData, CholeskySolver, Field, FunctionSpace, SolveInfo,
                         assemble_stiffness, elastic_energy, pinned_dofs, quadrature,
                         solve_dirichlet, strain_at)
from .mesh import CrackMesh, build_disk_mesh
from .singular_fields import SingularDisplacement, SingularModeSet, stress_of_singular

KINDS = ("segment", "kink", "circle")


@dataclass(frozen=True)
class MeshSpec:
    """Mesh controls shared by the solves of one study.

    Attributes:
        h: Element size away from the foci.
        grading: Size ratio per dyadic annulus toward the foci.
        grading_radius: Radius where grading starts (None: a quarter of the disk radius).
        levels: Number of graded annuli.
        coarsen: Largest element size as a multiple of h.
        order: Element order.
    """

    h: float = 0.02
    grading: float = 0.5
    grading_radius: float | None = None
    levels: int = 8
    coarsen: float = 1.0
    order: int = 1

    def build(self, R: float, crack: CrackSet, embed: CrackSet | None = None,
              circles=()) -> CrackMesh:
        return build_disk_mesh(R, crack, self.h, self.grading, embed=embed, circles=circles,
                               grading_radius=self.grading_radius, levels=self.levels,
                               coarsen=self.coarsen)


def tip_direction(base: CrackSet) -> float:
    """Angle of the straight continuation of the crack beyond the origin.

    The chain through the origin leaves it along some direction d; the
    continuation points along -d. An empty crack gives 0.
    """
    for c in base.chains:
        for end, nxt in ((0, 1), (-1, -2)):
            if np.linalg.norm(c[end]) <= 1e-12:
                d = c[nxt] - c[end]
                return float(np.arctan2(-d[1], -d[0]))
    return 0.0


def segment_increment(eps: float, angle: float) -> CrackSet:
    """Straight increment of length eps leaving the origin at ``angle``."""
    return CrackSet(([[0.0, 0.0], [eps * np.cos(angle), eps * np.sin(angle)]],))


def kink_increment(eps: float, angle1: float, angle2: float, split: float) -> CrackSet:
    """Two-segment increment: ``split * eps`` along angle1, then the rest along angle2."""
    if not (0 < split < 1):
        raise ValueError("kink split fraction must lie in (0, 1)")
    p = split * eps * np.array([np.cos(angle1), np.sin(angle1)])
    q = p + (1 - split) * eps * np.array([np.cos(angle2), np.sin(angle2)])
    return CrackSet(([[0.0, 0.0], p.tolist(), q.tolist()],))


def circle_radius(eps: float) -> float:
    """Radius of the circle competitor: circle plus radius have total length eps."""
    return eps / (2 * np.pi + 1)


def circle_increment(eps: float, angle: float = 0.0, n_poly: int = 128) -> CrackSet:
    """Inscribed polygon of the competitor circle plus the radius joining it to the tip."""
    rho = circle_radius(eps)
    th = angle + 2 * np.pi * np.arange(n_poly + 1) / n_poly
    ring = rho * np.stack([np.cos(th), np.sin(th)], -1)
    ring[-1] = ring[0]
    spoke = np.array([[0.0, 0.0], ring[0]])
    return CrackSet((spoke, ring))


@dataclass(frozen=True)
class IncrementFamily:
    """Parametric family of increments of length at most eps.

    Attributes:
        kind: ``"segment"`` (angle grid), ``"kink"`` (pairs of angles) or
            ``"circle"`` (the circle competitor only).
        angles: Angles relative to the straight continuation of the crack.
        split: Fraction of the length before the kink.
        refine: Golden-section refinement around the best grid angle (segments).
        include_circle: Add the circle competitor to the candidates.
    """

    kind: str = "segment"
    # k pi / 6 for k = -3..3, exactly symmetric about 0
    angles: tuple = tuple(float(a) for a in np.pi / 2 * np.arange(-3, 4) / 3)
    split: float = 0.5
    refine: bool = True
    include_circle: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown increment family {self.kind!r}")

    def candidates(self, eps: float, base: CrackSet) -> list[tuple[str, tuple, CrackSet]]:
        """(label, parameters, increment) for every grid candidate."""
        d = tip_direction(base)
        out = []
        if self.kind == "segment":
            for a in self.angles:
                out.append(("segment", (float(a),), segment_increment(eps, d + a)))
        elif self.kind == "kink":
            for a in self.angles:
                for b in self.angles:
                    out.append(("kink", (float(a), float(b)),
                                kink_increment(eps, d + a, d + b, self.split)))
        return out


def _energy_inside(u: Field, mat: ElasticMaterial, radius: float) -> float:
    """Elastic energy of elements whose vertices all lie in the closed disk."""
    mesh = u.mesh
    inside = np.all(np.linalg.norm(mesh.vertices[mesh.triangles], axis=2) <= radius * (1 + 1e-9),
                    axis=1)
    e = strain_at(u)
    dens = apply_hooke(mat, e).ddot(e)
    return 0.5 * float(np.sum(mesh.areas[inside] * dens[inside]))


@dataclass
class NestedSolve:
    """Energies of the base and incremented problems on one mesh."""

    energy_base: float
    energy_incremented: float
    base_field: Field
    info: list

    @property
    def G(self) -> float:
        return self.energy_incremented - self.energy_base


def nested_solve(base: CrackSet, increment: CrackSet, R: float, mesh: MeshSpec,
                 mat: ElasticMaterial, bd: BoundaryData) -> NestedSolve:
    """Solves with and without the increment on one triangulation.

    The increment is embedded as constrained edges, so the incremented space
    contains the base space and the energy difference is never positive.

    Raises:
        ValueError: The union of base and increment is not an admissible crack.
    """
    union = base.union(increment)
    if not increment.is_empty:
        union.check_admissible()
    m0 = mesh.build(R, base, embed=increment)
    info: list[SolveInfo] = []
    u0 = solve_dirichlet(m0, mat, bd, mesh.order, info)
    e0 = elastic_energy(u0, mat)
    if increment.is_empty:
        return NestedSolve(e0, e0, u0, info)
    m1 = m0.cut_along(union)
    u1 = solve_dirichlet(m1, mat, bd, mesh.order, info)
    return NestedSolve(e0, elastic_energy(u1, mat), u0, info)


def compute_G(base: CrackSet, increment: CrackSet, R: float = 1.0, mesh: MeshSpec = MeshSpec(),
              mat: ElasticMaterial = ElasticMaterial(), bd: BoundaryData | None = None) -> float:
    """Energy change caused by the increment (non-positive).

    Args:
        base: Crack before the increment.
        increment: Added crack, connected to the base at the origin.
        R: Disk radius.
        mesh: Mesh controls.
        mat: Material.
        bd: Outer displacement (default zero).
    """
    bd = bd or BoundaryData.zero()
    return nested_solve(base, increment, R, mesh, mat, bd).G


@dataclass
class CircleCompetitor:
    """Circle competitor at one eps.

    Attributes:
        eps: Length budget.
        G_over_eps: Computed energy change divided by eps.
        bound: Minus the base energy inside the competitor polygon, divided
            by eps; G_over_eps never exceeds it.
    """

    eps: float
    G_over_eps: float
    bound: float


def circle_competitor(base: CrackSet, eps: float, R: float = 1.0, mesh: MeshSpec = MeshSpec(),
                      mat: ElasticMaterial = ElasticMaterial(), bd: BoundaryData | None = None,
                      n_poly: int = 128) -> CircleCompetitor:
    """Energy change of the circle competitor and its energy bound on the same mesh.

    Raises:
        ValueError: The competitor ball does not fit in the disk.
    """
    bd = bd or BoundaryData.zero()
    rho = circle_radius(eps)
    if 2 * rho >= R:
        raise ValueError("competitor ball does not fit in the disk")
    inc = circle_increment(eps, tip_direction(base), n_poly)
    ns = nested_solve(base, inc, R, mesh, mat, bd)
    bound = -_energy_inside(ns.base_field, mat, rho) / eps
    return CircleCompetitor(float(eps), ns.G / eps, float(bound))


def circle_competitor_bound(u0: Field, mat: ElasticMaterial, eps: float, n_poly: int = 128) -> float:
    """Minus the energy of a base solution inside the competitor polygon, over eps.

    Elements are counted when all their vertices lie in the competitor disk;
    on a mesh with the competitor polygon embedded this is exactly the
    polygon interior.
    """
    return -_energy_inside(u0, mat, circle_radius(eps)) / eps


@dataclass
class Candidate:
    label: str
    params: tuple
    G: float
    G_over_eps: float


@dataclass
class ErrResult:
    """Scaled infimum over an increment family.

    Attributes:
        eps: Length budget.
        g_eps: Smallest G / eps among the candidates.
        best: The minimizing candidate.
        candidates: Every evaluated candidate in evaluation order.
        circle: The circle competitor (None when excluded).
    """

    eps: float
    g_eps: float
    best: Candidate
    candidates: list
    circle: CircleCompetitor | None = None

    def as_dict(self) -> dict:
        d = dict(eps=self.eps, g_eps=self.g_eps, best=asdict(self.best),
                 candidates=[asdict(c) for c in self.candidates])
        d["circle"] = asdict(self.circle) if self.circle else None
        return d


def _map(fn, items, jobs: int):
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def g_eps(base: CrackSet, family: IncrementFamily, eps: float, R: float = 1.0,
          mesh: MeshSpec = MeshSpec(), mat: ElasticMaterial = ElasticMaterial(),
          bd: BoundaryData | None = None, refine_tol: float = 1e-2, jobs: int = 1) -> ErrResult:
    """Minimum of G / eps over the candidates of a family.

    For segment families the best grid angle is refined by a bounded
    golden-section search between its grid neighbours. Ties are broken by the
    candidate parameters.

    Raises:
        ValueError: The ball of radius 2 eps does not fit in the disk.
    """
    bd = bd or BoundaryData.zero()
    if 2 * eps >= R:
        raise ValueError("eps too large for the disk")

    def rate(cand):
        label, params, inc = cand
        G = compute_G(base, inc, R, mesh, mat, bd)
        return Candidate(label, params, G, G / eps)

    cands = _map(rate, family.candidates(eps, base), jobs)
    circle = None
    if family.include_circle or family.kind == "circle":
        circle = circle_competitor(base, eps, R, mesh, mat, bd)
        cands.append(Candidate("circle", (), circle.G_over_eps * eps, circle.G_over_eps))
    if family.kind == "segment" and family.refine and len(family.angles) >= 3:
        seg = [c for c in cands if c.label == "segment"]
        k = int(np.argmin([c.G_over_eps for c in seg]))
        grid = sorted(family.angles)
        i = grid.index(seg[k].params[0])
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        d = tip_direction(base)
        seen = {}

        def f(a):
            key = round(float(a), 12)
            if key not in seen:
                seen[key] = compute_G(base, segment_increment(eps, d + a), R, mesh, mat, bd)
            return seen[key] / eps

        minimize_scalar(f, bounds=(lo, hi), method="bounded", options=dict(xatol=refine_tol))
        for a, G in sorted(seen.items()):
            cands.append(Candidate("segment-refined", (a,), G, G / eps))
    best = min(cands, key=lambda c: (c.G_over_eps, c.label, c.params))
    return ErrResult(float(eps), best.G_over_eps, best, cands, circle)


def sweep_window(results: list[ErrResult]) -> tuple[float, float]:
    """(G_lower, G_upper) with -G_upper <= g_eps <= -G_lower over a sweep."""
    vals = np.array([r.g_eps for r in results])
    return float(-vals.max()), float(-vals.min())


# ---------------------------------------------------------------------------
# limit functional


DEFAULT_OUTER_FACTOR = 128.0


def limit_mesh_spec(R: float, R_out: float, h: float = 0.05) -> MeshSpec:
    """Mesh graded toward the tips inside B_{R/2}, growing to R_out / 8 far out."""
    return MeshSpec(h=h, grading_radius=R / 2, coarsen=max(1.0, R_out / (8 * h)))


def slit(R_out: float) -> CrackSet:
    """The reference crack: the negative first axis up to radius R_out."""
    return CrackSet(([[0.0, 0.0], [-R_out, 0.0]],))


@dataclass
class LimitResult:
    """Value of the limit functional and the discretization it came from."""

    value: float
    R: float
    R_out: float
    n_nodes: int
    n_elements: int
    kappa: tuple

    def as_dict(self) -> dict:
        d = asdict(self)
        d["kappa"] = list(self.kappa)
        return d


def _inner_boundary_edges(mesh: CrackMesh, R: float):
    """Edges separating elements inside the embedded circle from those outside.

    Returns:
        Node pairs (k, 2) oriented counter-clockwise for the inner element.
    """
    tri = mesh.vertices[mesh.triangles]
    inside = np.all(np.linalg.norm(tri, axis=2) <= R * (1 + 1e-9), axis=1)
    E = mesh.element_edges
    n_in = np.bincount(E[inside].ravel(), minlength=len(mesh.edges))
    n_out = np.bincount(E[~inside].ravel(), minlength=len(mesh.edges))
    cross = (n_in == 1) & (n_out == 1)
    T = mesh.triangles
    out = []
    for k, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
        sel = inside & cross[E[:, k]]
        out.append(np.stack([T[sel, a], T[sel, b]], -1))
    return inside, np.concatenate(out)


def _forcing(mesh: CrackMesh, sd: SingularDisplacement, R: float, order: int,
             n_gauss: int = 4) -> np.ndarray:
    """Load vector of  int_{B_R} C e(u) : e(w) - int_{dB_R} (C e(u) nu) . w  for analytic u."""
    if order != 1:
        raise ValueError("the limit functional is implemented for P1 elements")
    n = mesh.n_nodes
    inside, edges = _inner_boundary_edges(mesh, R)
    f = np.zeros(2 * n)
    pts, wts = quadrature(5)
    T = mesh.triangles[inside]
    P = mesh.vertices
    g = mesh.shape_gradients[inside]
    area = mesh.areas[inside]
    for lam, w in zip(pts, wts):
        x = np.einsum("k,mki->mi", lam, P[T])
        s = stress_of_singular(sd, x)
        # sigma : e(phi_a e_i) = (sigma grad phi_a)_i
        fx = s.xx[:, None] * g[..., 0] + s.xy[:, None] * g[..., 1]
        fy = s.xy[:, None] * g[..., 0] + s.yy[:, None] * g[..., 1]
        f += np.bincount(2 * T.ravel(), (w * area[:, None] * fx).ravel(), minlength=2 * n)
        f += np.bincount(2 * T.ravel() + 1, (w * area[:, None] * fy).ravel(), minlength=2 * n)
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    a, b = P[edges[:, 0]], P[edges[:, 1]]
    d = b - a
    ln = np.linalg.norm(d, axis=1)
    nu = np.stack([d[:, 1], -d[:, 0]], -1) / ln[:, None]
    for t, w in zip(0.5 * (xg + 1), 0.5 * wg):
        x = a + t * d
        tr = stress_of_singular(sd, x).apply(nu)
        for node, phi in ((edges[:, 0], 1 - t), (edges[:, 1], t)):
            np.add.at(f, 2 * node, -w * ln * phi * tr[:, 0])
            np.add.at(f, 2 * node + 1, -w * ln * phi * tr[:, 1])
    return f


def limit_mesh(increment: CrackSet, R: float, R_out: float, mesh: MeshSpec,
               circles=None) -> CrackMesh:
    """Mesh of B_{R_out} cut along the slit and the increment, with circles embedded."""
    crack = slit(R_out).union(increment) if not increment.is_empty else slit(R_out)
    return mesh.build(R_out, crack, circles=tuple(circles) if circles is not None else (R,))


def _validate_limit(increment: CrackSet, R: float, R_out: float):
    if R_out < 8 * R * (1 - 1e-12):
        raise ValueError("R_out must be at least 8 R")
    if not increment.is_empty:
        increment.check_admissible()
        seg = increment.segments()
        if np.linalg.norm(seg, axis=2).max() >= R * (1 - 1e-9):
            raise ValueError("the increment must lie strictly inside B_R")


def _limit_value(m: CrackMesh, K, solver: CholeskySolver, free: np.ndarray, sd, R) -> float:
    f = _forcing(m, sd, R, 1)
    w = np.zeros(len(f))
    w[free] = solver.solve(-f[free])
    return float(0.5 * w @ (K @ w) + f @ w)


def limit_functional(increment: CrackSet, kappa=(1.0, 0.0), R: float = 2.0,
                     R_out: float | None = None, mesh: MeshSpec | None = None,
                     mat: ElasticMaterial = ElasticMaterial(),
                     modes: SingularModeSet | None = None) -> LimitResult:
    """Minimum of the limit energy around the pure singular field.

    The unknown w lives on B_{R_out} cut along the slit and the increment,
    with a traction-free outer circle and its rigid motion pinned. The
    functional is  1/2 a(w, w) + int_{B_R} C e(u) : e(w) - int_{dB_R} (C e(u) nu) . w
    with u the analytic singular field; both integrals use the polygon of the
    embedded circle.

    Args:
        increment: Crack increment in blow-up coordinates, inside B_R.
        kappa: Mode coefficients of the singular field.
        R: Radius of the forcing circle.
        R_out: Truncation radius, at least 8 R (default 128 R). The
            traction-free truncation misses an energy of order 1 / R_out.
        mesh: Mesh controls (default ``limit_mesh_spec``).
        mat: Material.
        modes: Mode set (default classical, angles in (-pi, pi]).

    Raises:
        ValueError: Invalid radii or an increment touching the circle.
    """
    R_out = DEFAULT_OUTER_FACTOR * R if R_out is None else R_out
    _validate_limit(increment, R, R_out)
    mesh = mesh or limit_mesh_spec(R, R_out)
    modes = modes or SingularModeSet(mat)
    sd = SingularDisplacement(modes, float(kappa[0]), float(kappa[1]))
    m = limit_mesh(increment, R, R_out, mesh)
    K, free = _neumann_system(m, mat)
    if kappa[0] == 0 and kappa[1] == 0:
        value = 0.0
    else:
        value = _limit_value(m, K, CholeskySolver(K[free][:, free]), free, sd, R)
    return LimitResult(value, float(R), float(R_out), m.n_nodes, m.n_elements,
                       (float(kappa[0]), float(kappa[1])))


def _neumann_system(m: CrackMesh, mat: ElasticMaterial):
    K = assemble_stiffness(FunctionSpace(m, 1), mat)
    free = np.ones(K.shape[0], dtype=bool)
    free[pinned_dofs(m, np.zeros(0, dtype=np.int64))] = False
    return K, free


def r_independence_check(increment: CrackSet, kappa=(1.0, 0.0), R_list=(2.0, 3.0, 4.0),
                         R_out: float | None = None, mesh: MeshSpec | None = None,
                         mat: ElasticMaterial = ElasticMaterial()) -> tuple[float, list]:
    """Spread of the limit functional over forcing radii on one shared mesh.

    Returns:
        (max pairwise relative difference, values in the order of R_list).
    """
    R_list = [float(r) for r in R_list]
    R_out = DEFAULT_OUTER_FACTOR * max(R_list) if R_out is None else R_out
    for r in R_list:
        _validate_limit(increment, r, R_out)
    mesh = mesh or limit_mesh_spec(min(R_list), R_out)
    sd = SingularDisplacement(SingularModeSet(mat), float(kappa[0]), float(kappa[1]))
    m = limit_mesh(increment, R_list[0], R_out, mesh, circles=R_list)
    if kappa[0] == 0 and kappa[1] == 0:
        return 0.0, [0.0] * len(R_list)
    K, free = _neumann_system(m, mat)
    solver = CholeskySolver(K[free][:, free])
    vals = [_limit_value(m, K, solver, free, sd, r) for r in R_list]
    v = np.array(vals)
    scale = np.abs(v).max()
    spread = float((v.max() - v.min()) / scale) if scale > 0 else 0.0
    return spread, vals


def irwin_rate(kappa, mat: ElasticMaterial = ElasticMaterial()) -> float:
    """Energy release per unit length of a straight extension under the singular field.

    Closed form of the classical crack-closure computation for the modes of
    this package: 2 pi mu (lam + mu)(lam + 2 mu)(kappa1^2 + kappa2^2).
    """
    lam, mu = mat.lam, mat.mu
    return 2 * np.pi * mu * (lam + mu) * (lam + 2 * mu) * (kappa[0] ** 2 + kappa[1] ** 2)


# ---------------------------------------------------------------------------
# output


def write_sweep_csv(path: str | Path, results: list[ErrResult]) -> None:
    """Writes ``eps, candidate_param, G, G_over_eps`` rows."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["eps", "candidate_param", "G", "G_over_eps"])
        for r in results:
            for c in r.candidates:
                param = c.label + ("" if not c.params else ":" + ";".join(format(p, ".17g") for p in c.params))
                wr.writerow([format(r.eps, ".17g"), param, format(c.G, ".17g"),
                             format(c.G_over_eps, ".17g")])


def write_json(path: str | Path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
