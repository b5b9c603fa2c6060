"""Dual potentials of a computed stress field.

A divergence-free symmetric stress has two scalar potentials ``p1`` and
``p2`` with ``grad p1 = (s22, -s12)`` and ``grad p2 = (-s12, s11)``. They give
the harmonic conjugate ``v0 = (p2, -p1)``, whose gradient is the rotated
stress, and the Airy function ``w0`` with ``grad w0 = (p1, p2)``, whose
hessian is ``[[s22, -s12], [-s12, s11]]``.

All potentials are recovered by global least squares on the cut mesh with
the gauge fixed by a zero value at the crack tip.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.sparse import coo_matrix

from .core_model import CrackSet, SymTensor2, segment_disk_interval
from .fem_solver import (CholeskySolver, Field, FunctionSpace, PointLocator, energy_in_ball,
                         evaluate, quadrature)
from .mesh import CrackMesh


@dataclass
class PotentialPair:
    """Potentials recovered from one stress field.

    Attributes:
        p1: Scalar potential with gradient (s22, -s12).
        p2: Scalar potential with gradient (-s12, s11).
        v0: Harmonic conjugate (p2, -p1).
        w0: Airy function, filled by ``dual_potentials``.
        loop_residual: Largest relative circulation of the prescribed
            gradients around a closed vertex star.
    """

    p1: Field
    p2: Field
    v0: Field
    w0: Field | None = None
    loop_residual: float = 0.0


def _gauge_nodes(mesh: CrackMesh) -> np.ndarray:
    """One pinned node per connected component, the tip for the one containing it."""
    ncomp, label = mesh.components()
    if mesh.tip_index >= 0:
        anchor = mesh.tip_index
    else:
        anchor = int(np.argmin(np.linalg.norm(mesh.vertices, axis=1)))
    pins = [anchor]
    for c in range(ncomp):
        if c != label[anchor]:
            pins.append(int(np.nonzero(label == c)[0][0]))
    return np.array(pins, dtype=np.int64)


def gradient_fit(mesh: CrackMesh, grads: np.ndarray, order: int = 1) -> list[np.ndarray]:
    """Least-squares Lagrange potentials for prescribed gradients.

    Each potential minimizes the integral of |grad v - g|^2 over the mesh,
    with the value 0 at the tip node (and at one node of every other
    component).

    Args:
        mesh: Cut mesh.
        grads: (k, m, 2) element-wise constant targets, or (k, m, q, 2)
            values at the points of the degree 2 quadrature rule.
        order: Element order of the potentials (1 or 2).

    Returns:
        k nodal value arrays.

    Raises:
        SingularSystemError: The normal equations are singular.
    """
    grads = np.asarray(grads, dtype=float)
    pts, wts = quadrature(2)
    if grads.ndim == 3:
        grads = np.repeat(grads[:, :, None, :], len(wts), axis=2)
    space = FunctionSpace(mesh, order)
    en = space.element_nodes
    n = space.n_nodes
    nb = en.shape[1]
    Ke = 0.0
    rhs = np.zeros((n, len(grads)))
    for q, (lam, w) in enumerate(zip(pts, wts)):
        g = space.gradients(lam)
        wa = w * mesh.areas
        Ke = Ke + wa[:, None, None] * np.einsum("mai,mbi->mab", g, g)
        for k, gk in enumerate(grads):
            contrib = wa[:, None] * np.einsum("mai,mi->ma", g, gk[:, q])
            rhs[:, k] += np.bincount(en.ravel(), contrib.ravel(), minlength=n)
    rows = np.repeat(en, nb, axis=1).ravel()
    cols = np.tile(en, (1, nb)).ravel()
    L = coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    free = np.ones(n, dtype=bool)
    free[_gauge_nodes(mesh)] = False
    out = np.zeros((n, len(grads)))
    out[free] = CholeskySolver(L[free][:, free]).solve(rhs[free])
    return [out[:, k] for k in range(len(grads))]


def closed_star_nodes(mesh: CrackMesh) -> np.ndarray:
    """Nodes whose incident elements form a closed loop (no boundary or crack edge)."""
    count = np.bincount(mesh.element_edges.ravel(), minlength=len(mesh.edges))
    open_edges = mesh.edges[count == 1]
    ok = np.ones(mesh.n_nodes, dtype=bool)
    ok[open_edges.ravel()] = False
    return ok


def loop_residual(mesh: CrackMesh, grads: np.ndarray) -> float:
    """Largest relative circulation of element-wise vector fields around vertex stars.

    For every node with a closed star, the field of each element is
    integrated along the element edge opposite the node; the sum is the
    circulation around the star. It vanishes for exact gradients. For the
    rotated stress of a P1 solution it equals twice the nodal equilibrium
    residual.

    Args:
        mesh: Cut mesh.
        grads: (k, m, 2) element-wise fields.

    Returns:
        max over nodes and fields of |circulation| / sum of |field| * edge
        length, 0 when the fields vanish.
    """
    P, T = mesh.vertices, mesh.triangles
    n = mesh.n_nodes
    closed = closed_star_nodes(mesh)
    worst = 0.0
    for gk in np.asarray(grads, dtype=float):
        circ = np.zeros(n)
        absc = np.zeros(n)
        for k in range(3):
            t = P[T[:, (k + 2) % 3]] - P[T[:, (k + 1) % 3]]
            circ += np.bincount(T[:, k], (gk * t).sum(1), minlength=n)
            absc += np.bincount(T[:, k], np.linalg.norm(gk, axis=1) * np.linalg.norm(t, axis=1),
                                minlength=n)
        ok = closed & (absc > 0)
        if ok.any():
            worst = max(worst, float(np.max(np.abs(circ[ok]) / absc[ok])))
    return worst


def _potential_gradients(s: SymTensor2) -> np.ndarray:
    return np.stack([np.stack([s.yy, -s.xy], -1), np.stack([-s.xy, s.xx], -1)])


def reconstruct_conjugate(stress: Field) -> PotentialPair:
    """Harmonic conjugate of an element stress field.

    Args:
        stress: Element stress field.

    Returns:
        The pair of scalar potentials and the conjugate ``v0`` with
        ``grad v0 ~ [[-s12, s11], [-s22, s12]]`` (rows are component
        gradients), all zero at the tip.
    """
    mesh = stress.mesh
    grads = _potential_gradients(stress.tensor())
    p1, p2 = gradient_fit(mesh, grads)
    return PotentialPair(Field(mesh, p1, "scalar"), Field(mesh, p2, "scalar"),
                         Field(mesh, np.stack([p2, -p1], -1), "vector"),
                         loop_residual=loop_residual(mesh, grads))


def element_gradients(f: Field, lam=(1 / 3, 1 / 3, 1 / 3)) -> np.ndarray:
    """Gradients at one barycentric point per element.

    Returns:
        (m, 2) for scalar fields, (m, 2, 2) with rows per component for vector fields.
    """
    space = f.space
    g = space.gradients(np.asarray(lam, dtype=float))
    vals = f.values[space.element_nodes]
    if f.kind == "scalar":
        return np.einsum("ma,mai->mi", vals, g)
    return np.einsum("mac,mai->mci", vals, g)


def reconstruct_airy(pp: PotentialPair, order: int = 2) -> Field:
    """Airy function with gradient (p1, p2) in the least-squares sense, zero at the tip.

    With ``order=2`` the fit is exact whenever (p1, p2) is the gradient of a
    quadratic, in particular for constant stresses.
    """
    mesh = pp.p1.mesh
    T = mesh.triangles
    pts, _ = quadrature(2)
    p = np.stack([pp.p1.values[T] @ pts.T, pp.p2.values[T] @ pts.T], -1)  # (m, q, 2)
    (w,) = gradient_fit(mesh, p[None], order)
    return Field(mesh, w, "scalar", order)


def dual_potentials(stress: Field, order: int = 2) -> PotentialPair:
    """Conjugate potentials and the Airy function of a stress field."""
    pp = reconstruct_conjugate(stress)
    pp.w0 = reconstruct_airy(pp, order)
    return pp


def conjugate_misfit(pp: PotentialPair, stress: Field) -> float:
    """Relative L2 misfit between grad v0 and the rotated stress."""
    s = stress.tensor()
    gv = element_gradients(pp.v0)
    target = np.stack([np.stack([-s.xy, s.xx], -1), np.stack([-s.yy, s.xy], -1)], 1)
    a = stress.mesh.areas
    num = np.sum(a * ((gv - target) ** 2).sum((1, 2)))
    den = np.sum(a * ((target ** 2).sum((1, 2))))
    return float(np.sqrt(num / den)) if den > 0 else 0.0


def recovered_gradient(w: Field) -> np.ndarray:
    """Nodal gradients of a P1 scalar by superconvergent patch recovery.

    Element gradients, sampled at centroids, are fitted by a linear polynomial
    over the elements around each node and evaluated at the node. Nodes with
    fewer than three elements or a degenerate patch get the area-weighted
    patch average instead.

    Returns:
        (n, 2) nodal gradients.
    """
    mesh = w.mesh
    n = mesh.n_nodes
    T = mesh.triangles
    ge = element_gradients(w)
    node = T.ravel()
    elem = np.repeat(np.arange(len(T)), 3)
    scale = np.sqrt(mesh.areas)[elem]
    # local scaling by element size keeps the 3x3 systems well conditioned
    h_node = np.zeros(n)
    np.maximum.at(h_node, node, scale)
    d = (mesh.centroids[elem] - mesh.vertices[node]) / h_node[node][:, None]
    basis = np.column_stack([np.ones(len(node)), d])
    A = np.zeros((n, 3, 3))
    np.add.at(A, node, basis[:, :, None] * basis[:, None, :])
    b = np.zeros((n, 3, 2))
    np.add.at(b, node, basis[:, :, None] * ge[elem][:, None, :])
    cnt = np.bincount(node, minlength=n)
    wa = mesh.areas[elem]
    avg = np.zeros((n, 2))
    np.add.at(avg, node, wa[:, None] * ge[elem])
    avg /= np.bincount(node, wa, minlength=n)[:, None]
    out = avg.copy()
    ok = cnt >= 3
    det = np.linalg.det(A[ok])
    good = np.nonzero(ok)[0][np.abs(det) > 1e-8 * cnt[ok] ** 3]
    if len(good):
        out[good] = np.linalg.solve(A[good], b[good])[:, 0, :]
    return out


def recovered_hessian(w: Field) -> SymTensor2:
    """Element hessians of a scalar field.

    P2 fields are differentiated exactly. For P1 fields the hessian is the
    gradient of the P1 interpolant of the patch-recovered gradient.
    """
    mesh = w.mesh
    g = mesh.shape_gradients
    if w.order == 2:
        v = w.values[FunctionSpace(mesh, 2).element_nodes]
        H = np.zeros((mesh.n_elements, 2, 2))
        for k in range(3):
            gk = g[:, k]
            H += 4 * v[:, k, None, None] * np.einsum("mi,mj->mij", gk, gk)
        for k, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            ga, gb = g[:, a], g[:, b]
            H += 4 * v[:, 3 + k, None, None] * (np.einsum("mi,mj->mij", ga, gb)
                                                + np.einsum("mi,mj->mij", gb, ga))
    else:
        G = recovered_gradient(w)
        H = np.einsum("mac,mai->mci", G[mesh.triangles], g)
    return SymTensor2(H[:, 0, 0], 0.5 * (H[:, 0, 1] + H[:, 1, 0]), H[:, 1, 1])


@dataclass
class HessianMisfit:
    """L2 misfit between the hessian of w0 and the rotated stress.

    Attributes:
        absolute: L2 norm of the difference.
        relative: absolute divided by the L2 norm of the stress (0 if zero).
        annuli: (r_in, r_out, relative misfit) per annulus.
    """

    absolute: float
    relative: float
    annuli: list


def verify_hessian(w0: Field, stress: Field, annuli=None) -> HessianMisfit:
    """Compares the recovered hessian of ``w0`` with [[s22, -s12], [-s12, s11]].

    Args:
        w0: P1 Airy function.
        stress: Element stress field on the same mesh.
        annuli: Radii bounding the annuli of the breakdown (default dyadic
            radii R, R/2, ..., R/16 and 0).

    Returns:
        HessianMisfit.
    """
    mesh = w0.mesh
    s = stress.tensor()
    H = recovered_hessian(w0)
    target = SymTensor2(s.yy, -s.xy, s.xx)
    diff = (H - target).norm_sq()
    ref = target.norm_sq()
    a = mesh.areas
    if annuli is None:
        annuli = [0.0] + [mesh.radius / 2 ** k for k in range(4, -1, -1)]
    r = np.linalg.norm(mesh.centroids, axis=1)
    rows = []
    for r0, r1 in zip(annuli[:-1], annuli[1:]):
        sel = (r >= r0) & (r < r1)
        den = np.sum(a[sel] * ref[sel])
        rows.append((float(r0), float(r1),
                     float(np.sqrt(np.sum(a[sel] * diff[sel]) / den)) if den > 0 else 0.0))
    absolute = float(np.sqrt(np.sum(a * diff)))
    den = float(np.sqrt(np.sum(a * ref)))
    return HessianMisfit(absolute, absolute / den if den > 0 else 0.0, rows)


def _crack_edge_ids(mesh: CrackMesh) -> np.ndarray:
    count = np.bincount(mesh.element_edges.ravel(), minlength=len(mesh.edges))
    ids = np.nonzero(count == 1)[0]
    e = mesh.edges[ids]
    return ids[~(mesh.boundary[e[:, 0]] & mesh.boundary[e[:, 1]])]


def crack_edges(mesh: CrackMesh) -> np.ndarray:
    """Boundary edges of the cut mesh lying on the crack faces, (k, 2)."""
    return mesh.edges[_crack_edge_ids(mesh)]


@dataclass
class TraceNorms:
    """L2 norms of w and grad w on the crack faces and their bulk references.

    The references are the root mean squares over the annulus spanned by the
    crack, times the square root of the crack face length, so that they have
    the units of a trace norm.
    """

    value_norm: float
    gradient_norm: float
    value_ref: float
    gradient_ref: float

    @property
    def value_ratio(self) -> float:
        return self.value_norm / self.value_ref if self.value_ref > 0 else 0.0

    @property
    def gradient_ratio(self) -> float:
        return self.gradient_norm / self.gradient_ref if self.gradient_ref > 0 else 0.0


def crack_trace_norms(w0: Field, n_gauss: int = 3) -> TraceNorms:
    """Traces of an Airy function and of its gradient on both crack faces.

    Both traces are integrated by Gauss quadrature on every face edge, using
    the element that owns the edge. Meshes without crack edges give zeros.
    """
    mesh = w0.mesh
    ids = _crack_edge_ids(mesh)
    if len(ids) == 0:
        return TraceNorms(0.0, 0.0, 0.0, 0.0)
    space = w0.space
    m = mesh.n_elements
    owner = np.empty(len(mesh.edges), dtype=np.int64)
    local = np.empty(len(mesh.edges), dtype=np.int64)
    owner[mesh.element_edges.ravel()] = np.repeat(np.arange(m), 3)
    local[mesh.element_edges.ravel()] = np.tile(np.arange(3), m)
    el, j = owner[ids], local[ids]
    e = mesh.edges[ids]
    ln = np.linalg.norm(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]], axis=1)
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    vnodes = w0.values[space.element_nodes[el]]
    val2 = grad2 = 0.0
    for t, wt in zip(0.5 * (xg + 1), 0.5 * wg):
        lam = np.zeros((len(ids), 3))
        lam[np.arange(len(ids)), j] = 1 - t
        lam[np.arange(len(ids)), (j + 1) % 3] = t
        v = (space.values(lam) * vnodes).sum(1)
        g = np.einsum("nb,nbi->ni", vnodes, space.gradients(lam, el))
        val2 += float(np.sum(wt * ln * v ** 2))
        grad2 += float(np.sum(wt * ln * (g ** 2).sum(1)))

    rr = np.linalg.norm(mesh.vertices[e.ravel()], axis=1)
    rc = np.linalg.norm(mesh.centroids, axis=1)
    sel = (rc >= rr.min()) & (rc <= rr.max())
    area = mesh.areas[sel]
    if area.sum() <= 0:
        return TraceNorms(np.sqrt(val2), np.sqrt(grad2), 0.0, 0.0)
    c = np.full(3, 1 / 3)
    wc = (space.values(c)[0] * w0.values[space.element_nodes[sel]]).sum(1)
    gc = element_gradients(w0)[sel]
    total = np.sum(ln)
    vref = np.sqrt(np.sum(area * wc ** 2) / np.sum(area) * total)
    gref = np.sqrt(np.sum(area * (gc ** 2).sum(1)) / np.sum(area) * total)
    return TraceNorms(float(np.sqrt(val2)), float(np.sqrt(grad2)), float(vref), float(gref))


def decay_profile(stress: Field, radii) -> list[tuple[float, float]]:
    """Ball energies normalized by the radius.

    Args:
        stress: Element stress field.
        radii: Radii inside the mesh, consecutive sorted values at least a
            factor 2 apart.

    Returns:
        (rho, energy_in_ball(rho) / rho) for rho in increasing order.

    Raises:
        ValueError: Radii outside the mesh or too close to each other.
    """
    rs = sorted(float(r) for r in radii)
    if not rs or rs[0] <= 0 or rs[-1] > stress.mesh.radius:
        raise ValueError("radii must lie in (0, R]")
    for a, b in zip(rs[:-1], rs[1:]):
        if b < 2 * a * (1 - 1e-12):
            raise ValueError("consecutive radii must differ by a factor of at least 2")
    return [(r, energy_in_ball(stress, r) / r) for r in rs]


def profile_spread(profile) -> float:
    """max / min of a decay profile (1 for a constant profile, inf if min is 0)."""
    v = np.array([p[1] for p in profile])
    if np.all(v == 0):
        return 1.0
    return float(v.max() / v.min()) if v.min() > 0 else float("inf")


def circle_crack_angles(crack: CrackSet, r: float) -> np.ndarray:
    """Sorted angles in [0, 2 pi) where the circle of radius r meets the crack."""
    out = []
    for p, q in crack.segments():
        iv = segment_disk_interval(p, q, r)
        if iv is None:
            continue
        for t in iv:
            x = p + t * (q - p)
            if abs(np.hypot(*x) - r) <= 1e-9 * r:
                out.append(np.mod(np.arctan2(x[1], x[0]), 2 * np.pi))
    if not out:
        return np.zeros(0)
    out = np.sort(np.array(out))
    keep = np.concatenate([[True], np.diff(out) > 1e-12])
    return out[keep]


@dataclass
class PoincareCheck:
    """Both sides of |v(x)|^2 <= pi r * int |d_tau v|^2 on a cut circle."""

    lhs_max: float
    rhs: float

    def holds(self, tol: float = 1e-9) -> bool:
        return self.lhs_max <= self.rhs * (1 + tol)


def arc_poincare_check(v: Field | Callable[[np.ndarray], np.ndarray], r: float,
                       crack: CrackSet | None = None, n_samples: int = 4096) -> PoincareCheck:
    """Arc Poincare inequality for a function vanishing where the circle meets the crack.

    Samples sit at the midpoints of a uniform angular grid on every arc between
    consecutive crack crossings; tangential derivatives are differences of
    neighbouring samples within an arc.

    Args:
        v: Nodal field or vectorized function of points.
        r: Circle radius.
        crack: Crack set (default: the field's mesh crack).
        n_samples: Total number of samples on the circle.

    Raises:
        ValueError: The circle does not meet the crack.
    """
    if crack is None:
        if not isinstance(v, Field):
            raise ValueError("a crack set is needed for function input")
        crack = v.mesh.crack
    cuts = circle_crack_angles(crack, r)
    if len(cuts) == 0:
        raise ValueError("the circle does not meet the crack")
    bounds = np.append(cuts, cuts[0] + 2 * np.pi)
    if isinstance(v, Field):
        loc = PointLocator(v.mesh)

        def fn(x):
            return evaluate(v, x, loc)
    else:
        fn = v
    lhs = 0.0
    energy = 0.0
    for a0, a1 in zip(bounds[:-1], bounds[1:]):
        k = max(8, int(round(n_samples * (a1 - a0) / (2 * np.pi))))
        dt = (a1 - a0) / k
        th = a0 + (np.arange(k) + 0.5) * dt
        x = r * np.stack([np.cos(th), np.sin(th)], -1)
        vals = np.asarray(fn(x), dtype=float).reshape(k, -1)
        lhs = max(lhs, float(np.max((vals ** 2).sum(1))))
        dv = np.diff(vals, axis=0)
        energy += float(np.sum((dv ** 2).sum(1)) / (r * dt))
    return PoincareCheck(lhs, np.pi * r * energy)


def write_profile_csv(path: str | Path, rows, header=("rho", "value")) -> None:
    """Writes (rho, value) rows with round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([format(float(x), ".17g") for x in row])
