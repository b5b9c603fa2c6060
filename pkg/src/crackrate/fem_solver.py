"""Lagrange finite elements for plane linear elasticity on cut meshes.

Displacements are continuous piecewise linear (order 1) or quadratic
(order 2) on a ``CrackMesh``. Because crack faces carry separate nodes, the
discrete fields may jump across the crack and the faces are traction free
through the natural boundary condition.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import cvxopt
import numpy as np
from cvxopt import cholmod
from scipy.sparse import coo_matrix, csr_matrix
from scipy.spatial import cKDTree

from .core_model import ElasticMaterial, RigidMotion, SymTensor2, apply_hooke, segment_disk_interval
from .mesh import CrackMesh
from .singular_fields import SingularDisplacement, eval_u, stress_of_singular


class SingularSystemError(RuntimeError):
    """The constrained stiffness matrix is singular."""


# barycentric quadrature rules (points, weights summing to 1)
_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]), np.full(3, 1 / 3)),
    5: (np.array([[1 / 3, 1 / 3, 1 / 3],
                  [0.0597158717, 0.4701420641, 0.4701420641],
                  [0.4701420641, 0.0597158717, 0.4701420641],
                  [0.4701420641, 0.4701420641, 0.0597158717],
                  [0.7974269853, 0.1012865073, 0.1012865073],
                  [0.1012865073, 0.7974269853, 0.1012865073],
                  [0.1012865073, 0.1012865073, 0.7974269853]]),
        np.array([0.225, 0.1323941527, 0.1323941527, 0.1323941527,
                  0.1259391805, 0.1259391805, 0.1259391805])),
}


def quadrature(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points and weights exact up to the requested degree (1, 2 or 5)."""
    for d in sorted(_RULES):
        if d >= degree:
            return _RULES[d]
    raise ValueError("quadrature degree above 5 is not available")


class FunctionSpace:
    """Vector Lagrange space of order 1 or 2 on a cut mesh."""

    def __init__(self, mesh: CrackMesh, order: int = 1):
        if order not in (1, 2):
            raise ValueError("element order must be 1 or 2")
        self.mesh = mesh
        self.order = order

    @cached_property
    def element_nodes(self) -> np.ndarray:
        """(m, nb) scalar node ids of every element."""
        m = self.mesh
        if self.order == 1:
            return m.triangles
        return np.hstack([m.triangles, m.n_nodes + m.element_edges])

    @property
    def n_nodes(self) -> int:
        m = self.mesh
        return m.n_nodes if self.order == 1 else m.n_nodes + len(m.edges)

    @cached_property
    def points(self) -> np.ndarray:
        m = self.mesh
        if self.order == 1:
            return m.vertices
        e = m.edges
        return np.vstack([m.vertices, 0.5 * (m.vertices[e[:, 0]] + m.vertices[e[:, 1]])])

    @cached_property
    def probes(self) -> np.ndarray:
        """Evaluation points for boundary data, nudged to the correct crack side."""
        m = self.mesh
        if self.order == 1:
            return m.side_probe
        e = m.edges
        return np.vstack([m.side_probe, 0.5 * (m.side_probe[e[:, 0]] + m.side_probe[e[:, 1]])])

    @cached_property
    def boundary(self) -> np.ndarray:
        m = self.mesh
        if self.order == 1:
            return m.boundary
        e = m.edges
        on_circle = m.boundary[e[:, 0]] & m.boundary[e[:, 1]]
        # a chord between two boundary nodes is a boundary edge only if it has one element
        count = np.bincount(m.element_edges.ravel(), minlength=len(e))
        return np.concatenate([m.boundary, on_circle & (count == 1)])

    def values(self, lam: np.ndarray) -> np.ndarray:
        """Basis values at barycentric points ``lam`` (q, 3) -> (q, nb)."""
        lam = np.atleast_2d(lam)
        if self.order == 1:
            return lam
        l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
        return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                         4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], -1)

    def gradients(self, lam: np.ndarray, elements=None) -> np.ndarray:
        """Basis gradients at one barycentric point per element, (m, nb, 2).

        Args:
            lam: Barycentric coordinates, (3,) shared or (m, 3) per element.
            elements: Optional subset of element ids.
        """
        g = self.mesh.shape_gradients if elements is None else self.mesh.shape_gradients[elements]
        if self.order == 1:
            return g
        lam = np.broadcast_to(np.asarray(lam, dtype=float), (len(g), 3))
        l0, l1, l2 = (lam[:, k, None] for k in range(3))
        g0, g1, g2 = g[:, 0], g[:, 1], g[:, 2]
        return np.stack([(4 * l0 - 1) * g0, (4 * l1 - 1) * g1, (4 * l2 - 1) * g2,
                         4 * (l0 * g1 + l1 * g0), 4 * (l1 * g2 + l2 * g1),
                         4 * (l2 * g0 + l0 * g2)], axis=1)


@dataclass
class Field:
    """Nodal vector/scalar values or element tensors on a mesh.

    Attributes:
        mesh: The mesh.
        values: (n, 2) nodal vectors, (n,) nodal scalars or (m, 3) element
            tensors stored as (xx, xy, yy).
        kind: ``"vector"``, ``"scalar"`` or ``"tensor"``.
        order: Polynomial order of nodal fields.
    """

    mesh: CrackMesh
    values: np.ndarray
    kind: str = "vector"
    order: int = 1

    def __post_init__(self):
        n_expected = {"tensor": self.mesh.n_elements}.get(
            self.kind, FunctionSpace(self.mesh, self.order).n_nodes)
        if len(self.values) != n_expected:
            raise ValueError(f"{self.kind} field has {len(self.values)} values, expected {n_expected}")

    @property
    def space(self) -> FunctionSpace:
        return FunctionSpace(self.mesh, self.order)

    def tensor(self) -> SymTensor2:
        if self.kind != "tensor":
            raise TypeError("not a tensor field")
        return SymTensor2.from_array(self.values)


@dataclass
class BoundaryData:
    """Prescribed outer-boundary displacement given by a vectorized function."""

    func: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("boundary data is not finite")
        return vals

    @classmethod
    def zero(cls) -> "BoundaryData":
        return cls(lambda x: np.zeros_like(x), "zero")

    @classmethod
    def rigid(cls, m: RigidMotion) -> "BoundaryData":
        return cls(m, "rigid")

    @classmethod
    def affine(cls, A, b=(0.0, 0.0)) -> "BoundaryData":
        A, b = np.asarray(A, dtype=float), np.asarray(b, dtype=float)
        return cls(lambda x: x @ A.T + b, "affine")

    @classmethod
    def singular(cls, sd: SingularDisplacement) -> "BoundaryData":
        return cls(lambda x: eval_u(sd, x), "singular")

    @classmethod
    def table(cls, angles, values) -> "BoundaryData":
        """Periodic linear interpolation of values sampled at boundary angles."""
        a = np.asarray(angles, dtype=float)
        v = np.asarray(values, dtype=float)
        order = np.argsort(a)
        a, v = a[order], v[order]

        def f(x):
            t = np.arctan2(x[:, 1], x[:, 0])
            return np.stack([np.interp(t, a, v[:, k], period=2 * np.pi) for k in range(2)], -1)

        return cls(f, "table")


def _b_matrices(grads: np.ndarray) -> np.ndarray:
    """Strain-displacement matrices acting on (ux0, uy0, ux1, ...), (m, 3, 2 nb)."""
    m, nb, _ = grads.shape
    B = np.zeros((m, 3, 2 * nb))
    B[:, 0, 0::2] = grads[..., 0]
    B[:, 1, 1::2] = grads[..., 1]
    B[:, 2, 0::2] = grads[..., 1]
    B[:, 2, 1::2] = grads[..., 0]
    return B


def _element_dofs(space: FunctionSpace) -> np.ndarray:
    en = space.element_nodes
    d = np.empty((len(en), 2 * en.shape[1]), dtype=np.int64)
    d[:, 0::2] = 2 * en
    d[:, 1::2] = 2 * en + 1
    return d


def assemble_stiffness(space: FunctionSpace, mat: ElasticMaterial) -> csr_matrix:
    """Global stiffness matrix; coincident entries are summed in a fixed order."""
    D = mat.elasticity_matrix()
    pts, wts = quadrature(2 * (space.order - 1) if space.order > 1 else 1)
    area = space.mesh.areas
    Ke = 0.0
    for lam, w in zip(pts, wts):
        B = _b_matrices(space.gradients(lam))
        Ke = Ke + (w * area)[:, None, None] * np.einsum("mki,kl,mlj->mij", B, D, B)
    dofs = _element_dofs(space)
    nb = dofs.shape[1]
    rows = np.repeat(dofs, nb, axis=1).ravel()
    cols = np.tile(dofs, (1, nb)).ravel()
    n = 2 * space.n_nodes
    return coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def pinned_dofs(mesh: CrackMesh, constrained_nodes: np.ndarray) -> list[int]:
    """Three dofs fixing the rigid motion of every component without constraints.

    Two components are fixed at the smallest node index of the component and
    one at the node of the component farthest from it; the direction is chosen
    so that the three constraints remove every rigid motion.
    """
    ncomp, label = mesh.components()
    out = []
    touched = np.zeros(ncomp, dtype=bool)
    touched[label[constrained_nodes[constrained_nodes < mesh.n_nodes]]] = True
    for c in range(ncomp):
        if touched[c]:
            continue
        nodes = np.nonzero(label == c)[0]
        a = int(nodes[0])
        pa = mesh.vertices[a]
        d = np.linalg.norm(mesh.vertices[nodes] - pa, axis=1)
        b = int(nodes[np.argmax(d)])
        dx, dy = mesh.vertices[b] - pa
        out += [2 * a, 2 * a + 1, 2 * b if abs(dy) >= abs(dx) else 2 * b + 1]
    return out


@dataclass
class SolveInfo:
    """Statistics of one linear solve."""

    n_nodes: int
    n_elements: int
    n_dofs: int
    n_free: int
    n_pinned: int
    order: int
    factorization_time: float = 0.0

    def as_dict(self, timings: bool = False) -> dict:
        d = dict(n_nodes=self.n_nodes, n_elements=self.n_elements, n_dofs=self.n_dofs,
                 n_free=self.n_free, n_pinned=self.n_pinned, order=self.order)
        if timings:
            d["factorization_time"] = self.factorization_time
        return d


class CholeskySolver:
    """Sparse Cholesky factorization of a symmetric positive definite matrix.

    Raises:
        SingularSystemError: The matrix is not numerically positive definite.
    """

    def __init__(self, A):
        A = A.tocoo()
        lower = A.row >= A.col
        self.n = A.shape[0]
        self._S = cvxopt.spmatrix(A.data[lower].tolist(), A.row[lower].tolist(),
                                  A.col[lower].tolist(), A.shape)
        opts = cholmod.options
        opts["supernodal"] = 2
        t0 = time.perf_counter()
        try:
            self._F = cholmod.symbolic(self._S, uplo="L")
            cholmod.numeric(self._S, self._F)
        except ArithmeticError as exc:
            raise SingularSystemError("stiffness matrix is not positive definite") from exc
        self.elapsed = time.perf_counter() - t0
        piv = np.array(cholmod.diag(self._F)).ravel() ** 2
        if piv.size and piv.min() <= 1e-9 * piv.max():
            raise SingularSystemError("stiffness matrix is numerically singular")

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        B = cvxopt.matrix(b.reshape(self.n, -1).copy())
        cholmod.solve(self._F, B)
        return np.array(B).reshape(b.shape)


def solve_constrained(K: csr_matrix, rhs: np.ndarray, fixed: np.ndarray,
                      fixed_values: np.ndarray) -> tuple[np.ndarray, float]:
    """Solves K u = rhs with prescribed entries, by sparse Cholesky of the free block.

    ``rhs`` and ``fixed_values`` may carry a trailing axis of load cases.

    Returns:
        The full solution and the factorization time in seconds.

    Raises:
        SingularSystemError: The free block is singular.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = K.shape[0]
    u = np.zeros(rhs.shape)
    u[fixed] = fixed_values
    free = np.ones(n, dtype=bool)
    free[fixed] = False
    Kr = K[free]
    b = rhs[free] - Kr[:, ~free] @ u[~free]
    chol = CholeskySolver(Kr[:, free])
    u[free] = chol.solve(b)
    return u, chol.elapsed


def solve_dirichlet(mesh: CrackMesh, mat: ElasticMaterial, bd: BoundaryData,
                    order: int = 1, info: list | None = None) -> Field:
    """Minimizes the elastic energy with ``bd`` imposed on the outer boundary.

    Args:
        mesh: Cut mesh.
        mat: Material.
        bd: Boundary displacement, sampled at the boundary nodes.
        order: Element order (1 or 2).
        info: If given, a SolveInfo is appended to it.

    Returns:
        Nodal displacement field.
    """
    space = FunctionSpace(mesh, order)
    K = assemble_stiffness(space, mat)
    bnodes = np.nonzero(space.boundary)[0]
    vals = bd(space.probes[bnodes])
    fixed = np.concatenate([2 * bnodes, 2 * bnodes + 1])
    fixed_vals = np.concatenate([vals[:, 0], vals[:, 1]])
    pins = pinned_dofs(mesh, bnodes)
    fixed = np.concatenate([fixed, np.array(pins, dtype=np.int64)])
    fixed_vals = np.concatenate([fixed_vals, np.zeros(len(pins))])
    u, t = solve_constrained(K, np.zeros(K.shape[0]), fixed, fixed_vals)
    if info is not None:
        info.append(SolveInfo(mesh.n_nodes, mesh.n_elements, K.shape[0], K.shape[0] - len(fixed),
                              len(pins), order, t))
    return Field(mesh, u.reshape(-1, 2), "vector", order)


def strain_at(u: Field, lam=(1 / 3, 1 / 3, 1 / 3)) -> SymTensor2:
    """Element strains at one barycentric point."""
    space = u.space
    g = space.gradients(np.asarray(lam, dtype=float))
    ue = u.values[space.element_nodes]  # (m, nb, 2)
    grad = np.einsum("mbi,mbj->mij", ue, g)  # du_i/dx_j
    return SymTensor2(grad[:, 0, 0], 0.5 * (grad[:, 0, 1] + grad[:, 1, 0]), grad[:, 1, 1])


def elastic_energy(u: Field, mat: ElasticMaterial) -> float:
    """Half the integral of C e(u) : e(u), exact for the polynomial field."""
    pts, wts = quadrature(2 * (u.order - 1) if u.order > 1 else 1)
    area = u.mesh.areas
    total = 0.0
    for lam, w in zip(pts, wts):
        e = strain_at(u, lam)
        total += float(np.sum(w * area * apply_hooke(mat, e).ddot(e)))
    return 0.5 * total


def stress_recovery(u: Field, mat: ElasticMaterial) -> Field:
    """Element stress C e(u_h) at the element centroids."""
    s = apply_hooke(mat, strain_at(u))
    return Field(u.mesh, s.as_array(), "tensor")


def element_tensor_field(mesh: CrackMesh, fn: Callable[[np.ndarray], SymTensor2]) -> Field:
    """Tensor field from a function evaluated at the element centroids."""
    return Field(mesh, fn(mesh.centroids).as_array(), "tensor")


def singular_stress_field(mesh: CrackMesh, sd: SingularDisplacement) -> Field:
    return element_tensor_field(mesh, lambda x: stress_of_singular(sd, x))


def interpolate(mesh: CrackMesh, fn: Callable[[np.ndarray], np.ndarray], order: int = 1,
                probe: bool = True) -> Field:
    """Nodal interpolant of a vector or scalar function."""
    space = FunctionSpace(mesh, order)
    x = space.probes if probe else space.points
    vals = np.asarray(fn(x), dtype=float)
    return Field(mesh, vals, "vector" if vals.ndim == 2 else "scalar", order)


def energy_in_ball(stress: Field, rho: float) -> float:
    """Integral of |sigma|^2 over elements whose centroid lies in B_rho."""
    inside = np.linalg.norm(stress.mesh.centroids, axis=1) < rho
    s = stress.tensor()
    return float(np.sum(stress.mesh.areas[inside] * s.norm_sq()[inside]))


class PointLocator:
    """Finds the element containing query points."""

    def __init__(self, mesh: CrackMesh):
        self.mesh = mesh
        self.tree = cKDTree(mesh.centroids)

    def barycentric(self, x: np.ndarray, elems: np.ndarray) -> np.ndarray:
        g = self.mesh.shape_gradients[elems]
        c = self.mesh.centroids[elems]
        return 1 / 3 + np.einsum("...ki,...i->...k", g, x - c)

    def locate(self, x: np.ndarray, nudge: np.ndarray | None = None,
               tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
        """Element ids (-1 outside) and barycentric coordinates of points.

        Args:
            x: (n, 2) query points.
            nudge: Optional (n, 2) offsets; among elements containing ``x`` the
                one containing ``x + nudge`` is preferred (crack side hint).
            tol: Inclusion tolerance on barycentric coordinates.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        elem = np.full(len(x), -1)
        todo = np.arange(len(x))
        for k in (8, 32, 128):
            if len(todo) == 0:
                break
            k = min(k, self.mesh.n_elements)
            _, cand = self.tree.query(x[todo], k=k)
            cand = np.atleast_2d(cand).reshape(len(todo), -1)
            lam = self.barycentric(x[todo][:, None, :], cand)
            ok = lam.min(axis=-1) >= -tol
            if nudge is not None:
                lam_n = self.barycentric((x[todo] + nudge[todo])[:, None, :], cand)
                ok_n = ok & (lam_n.min(axis=-1) >= -tol)
                ok = np.where(ok_n.any(axis=1, keepdims=True), ok_n, ok)
            hit = ok.any(axis=1)
            first = np.argmax(ok, axis=1)
            elem[todo[hit]] = cand[hit, first[hit]]
            todo = todo[~hit]
        lam = np.zeros((len(x), 3))
        found = elem >= 0
        lam[found] = self.barycentric(x[found], elem[found])
        return elem, lam


def evaluate(u: Field, x: np.ndarray, locator: PointLocator | None = None,
             nudge: np.ndarray | None = None) -> np.ndarray:
    """Values of a nodal field at arbitrary points (NaN outside the mesh)."""
    loc = locator or PointLocator(u.mesh)
    elem, lam = loc.locate(x, nudge)
    space = u.space
    shape = (len(elem),) + u.values.shape[1:]
    out = np.full(shape, np.nan)
    ok = elem >= 0
    phi = space.values(lam[ok])
    nodes = space.element_nodes[elem[ok]]
    out[ok] = np.einsum("nb,nb...->n...", phi, u.values[nodes])
    return out


# ---------------------------------------------------------------------------
# generalized integration by parts on a circle


def _signed_angle(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.arctan2(u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0], (u * v).sum(-1))


def triangle_disk_area(tri_pts: np.ndarray, r: float) -> np.ndarray:
    """Exact areas of triangles (m, 3, 2) intersected with the disk B_r."""
    total = np.zeros(len(tri_pts))
    for k in range(3):
        a, b = tri_pts[:, k], tri_pts[:, (k + 1) % 3]
        d = b - a
        A = (d * d).sum(1)
        B = 2 * (a * d).sum(1)
        C = (a * a).sum(1) - r * r
        disc = B * B - 4 * A * C
        sq = np.sqrt(np.maximum(disc, 0))
        t0 = np.clip((-B - sq) / (2 * A), 0, 1)
        t1 = np.clip((-B + sq) / (2 * A), 0, 1)
        hit = (disc > 0) & (t1 > t0)
        p0 = a + t0[:, None] * d
        p1 = a + t1[:, None] * d
        chord = 0.5 * (p0[:, 0] * p1[:, 1] - p0[:, 1] * p1[:, 0])
        with_hit = 0.5 * r * r * (_signed_angle(a, p0) + _signed_angle(p1, b)) + chord
        no_hit = 0.5 * r * r * _signed_angle(a, b)
        total += np.where(hit, with_hit, no_hit)
    return total


@dataclass
class FluxBalance:
    """Terms of the identity  int_{outside B_r} sigma : e(v) = -int_{dB_r} (sigma nu) . v.

    Attributes:
        residual: |volume + boundary|.
        volume: Integral of sigma : e(v) outside B_r.
        boundary: Integral of (sigma nu) . v over the circle.
        scale: Integral of |sigma| |e(v)| outside B_r.
    """

    residual: float
    volume: float
    boundary: float
    scale: float


def flux_balance_check(stress: Field, v: Field, r: float, n_gauss: int = 6) -> FluxBalance:
    """Checks the integration-by-parts identity on the circle of radius ``r``.

    The volume term uses exact triangle and disk clipping, the boundary term
    integrates over the exact arcs of the circle inside each element.

    Raises:
        ValueError: The circle is not inside the mesh.
    """
    mesh = stress.mesh
    if not (0 < r < mesh.radius):
        raise ValueError("radius must lie strictly inside the mesh")
    if v.order != 1 or v.kind != "vector":
        raise ValueError("test field must be a piecewise linear vector field")
    s = stress.tensor()
    ev = strain_at(v)
    dens = s.ddot(ev)
    tri = mesh.vertices[mesh.triangles]
    outside = mesh.areas - triangle_disk_area(tri, r)
    volume = float(np.sum(dens * outside))
    scale = float(np.sum(np.sqrt(s.norm_sq()) * np.sqrt(ev.norm_sq()) * outside))

    rad = np.linalg.norm(tri, axis=2)
    cand = np.nonzero((rad.max(axis=1) >= r) & (outside < mesh.areas))[0]
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    boundary = 0.0
    for e in cand.tolist():
        angs = []
        for k in range(3):
            a, b = tri[e, k], tri[e, (k + 1) % 3]
            iv = segment_disk_interval(a, b, r)
            if iv is None:
                continue
            for t in iv:
                p = a + t * (b - a)
                if abs(np.linalg.norm(p) - r) < 1e-12 * r:
                    angs.append(np.arctan2(p[1], p[0]))
        if len(angs) < 2:
            continue
        angs = np.sort(np.mod(np.array(angs), 2 * np.pi))
        angs = np.append(angs, angs[0] + 2 * np.pi)
        c = mesh.centroids[e]
        g = mesh.shape_gradients[e]
        for a0, a1 in zip(angs[:-1], angs[1:]):
            if a1 - a0 < 1e-14:
                continue
            mid = 0.5 * (a0 + a1)
            pm = r * np.array([np.cos(mid), np.sin(mid)])
            if (1 / 3 + g @ (pm - c)).min() < -1e-12:
                continue
            th = 0.5 * (a1 - a0) * xg + mid
            w = 0.5 * (a1 - a0) * wg * r
            nu = np.stack([np.cos(th), np.sin(th)], -1)
            x = r * nu
            lam = 1 / 3 + (x - c) @ g.T
            vals = lam @ v.values[mesh.triangles[e]]
            traction = SymTensor2(s.xx[e], s.xy[e], s.yy[e]).apply(nu)
            boundary += float(np.sum(w * (traction * vals).sum(-1)))
    return FluxBalance(abs(volume + boundary), volume, boundary, scale)


# ---------------------------------------------------------------------------
# export


def _f(x: float) -> str:
    return format(float(x), ".17g")


def write_vtk(path: str | Path, mesh: CrackMesh, point_vectors: dict | None = None,
              point_scalars: dict | None = None, cell_tensors: dict | None = None,
              title: str = "crack mesh") -> None:
    """Legacy ASCII VTK unstructured grid with optional point and cell data."""
    P, T = mesh.vertices, mesh.triangles
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(P)} double"]
    lines += [f"{_f(x)} {_f(y)} 0" for x, y in P]
    lines.append(f"CELLS {len(T)} {4 * len(T)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in T]
    lines.append(f"CELL_TYPES {len(T)}")
    lines += ["5"] * len(T)
    if point_vectors or point_scalars:
        lines.append(f"POINT_DATA {len(P)}")
        for name, vals in (point_vectors or {}).items():
            lines.append(f"VECTORS {name} double")
            lines += [f"{_f(a)} {_f(b)} 0" for a, b in np.asarray(vals)[:len(P)]]
        for name, vals in (point_scalars or {}).items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_f(a) for a in np.asarray(vals)[:len(P)]]
    if cell_tensors:
        lines.append(f"CELL_DATA {len(T)}")
        for name, vals in cell_tensors.items():
            lines.append(f"TENSORS {name} double")
            for xx, xy, yy in np.asarray(vals):
                lines += [f"{_f(xx)} {_f(xy)} 0", f"{_f(xy)} {_f(yy)} 0", "0 0 0"]
    Path(path).write_text("\n".join(lines) + "\n")


def solver_stats(info: SolveInfo, energy: float, timings: bool = False) -> dict:
    d = info.as_dict(timings)
    d["energy"] = energy
    return d


def write_json(path: str | Path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
