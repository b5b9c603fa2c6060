import numpy as np
import pytest
from scipy.sparse import csr_matrix

from crackrate.core_model import CrackSet, ElasticMaterial, RigidMotion, SymTensor2
from crackrate.fem_solver import (BoundaryData, CholeskySolver, Field, SingularSystemError,
                                  elastic_energy, element_tensor_field, energy_in_ball, evaluate,
                                  flux_balance_check, interpolate, solve_dirichlet,
                                  stress_recovery, triangle_disk_area, write_vtk)
from crackrate.mesh import build_disk_mesh, refine_uniform
from crackrate.singular_fields import (SingularDisplacement, SingularModeSet, eval_u,
                                       stress_of_singular)

from oracles import ball_energy

MAT = ElasticMaterial(1.0, 1.0)
SLIT = CrackSet.from_points([[0.0, 0.0], [-1.0, 0.0]])


@pytest.fixture(scope="module")
def slit_mesh():
    return build_disk_mesh(1.0, SLIT, 0.05)


@pytest.fixture(scope="module")
def plain_mesh():
    return build_disk_mesh(1.0, CrackSet.empty(), 0.1)


# mesh ------------------------------------------------------------------------


def test_mesh_structure(slit_mesh):
    m = slit_mesh
    m.validate()
    assert np.all(m.signed_areas > 0)
    assert m.euler_characteristic() == 1
    assert m.components()[0] == 1
    assert m.tip_index >= 0 and np.all(m.vertices[m.tip_index] == 0)
    # every interior crack vertex has two copies; the tip keeps a single one
    on_crack = (np.abs(m.vertices[:, 1]) < 1e-14) & (m.vertices[:, 0] < -1e-14)
    on_crack &= ~m.boundary
    assert np.all(np.bincount(m.parent)[m.parent[on_crack]] == 2)
    assert len(m.copies(m.tip_index)) == 1
    assert m.areas.sum() == pytest.approx(np.pi, rel=2e-3)


def test_mesh_refines_geometrically():
    counts = [build_disk_mesh(1.0, SLIT, h).n_nodes for h in (0.1, 0.05, 0.025)]
    for a, b in zip(counts[:-1], counts[1:]):
        assert 3 <= b / a <= 5


def test_mesh_grading_toward_tip(slit_mesh):
    m = slit_mesh
    d = np.linalg.norm(m.centroids, axis=1)
    size = np.sqrt(m.areas)
    assert size[d < 0.02].max() < 0.5 * size[d > 0.5].min()


def test_uniform_refinement_keeps_cut(slit_mesh):
    fine = refine_uniform(build_disk_mesh(1.0, SLIT, 0.2))
    fine.validate()
    assert fine.euler_characteristic() == 1
    assert len(fine.crack_pairs) > 0


def test_mesh_rejects_bad_parameters():
    with pytest.raises(ValueError):
        build_disk_mesh(1.0, SLIT, 0.0)
    with pytest.raises(ValueError):
        build_disk_mesh(1.0, SLIT, 0.1, grading=1.5)
    with pytest.raises(ValueError):
        build_disk_mesh(-1.0, SLIT, 0.1)


# solver ---------------------------------------------------------------------


def test_zero_data_gives_zero(slit_mesh):
    u = solve_dirichlet(slit_mesh, MAT, BoundaryData.zero())
    assert np.abs(u.values).max() == 0.0
    assert elastic_energy(u, MAT) == 0.0


def test_rigid_data_is_reproduced(plain_mesh):
    m = RigidMotion(0.3, -0.2, 0.5)
    u = solve_dirichlet(plain_mesh, MAT, BoundaryData.rigid(m))
    np.testing.assert_allclose(u.values, m(plain_mesh.vertices), atol=1e-12)
    assert elastic_energy(u, MAT) < 1e-20


@pytest.mark.parametrize("order", [1, 2])
def test_affine_data_gives_constant_stress(slit_mesh, order):
    A = np.array([[0.2, 0.1], [-0.3, 0.4]])
    bd = BoundaryData.affine(A, (0.1, 0.0))
    m = build_disk_mesh(1.0, CrackSet.empty(), 0.1)
    u = solve_dirichlet(m, MAT, bd, order=order)
    s = stress_recovery(u, MAT).tensor()
    e = 0.5 * (A + A.T)
    tr = np.trace(e)
    ref = [2 * e[0, 0] + tr, 2 * e[0, 1], 2 * e[1, 1] + tr]
    np.testing.assert_allclose(s.as_array(), np.broadcast_to(ref, (m.n_elements, 3)), atol=1e-10)


def test_singular_energy_matches_oracle():
    kappa = (1.0, 0.5)
    mesh = build_disk_mesh(1.0, SLIT, 0.02)
    sd = SingularDisplacement(SingularModeSet(), *kappa)
    u = solve_dirichlet(mesh, MAT, BoundaryData.singular(sd))
    ref = ball_energy(kappa)
    assert ref == pytest.approx(29.845130209103036, rel=1e-12)
    assert elastic_energy(u, MAT) == pytest.approx(ref, rel=0.02)
    # the discrete minimizer cannot have more energy than the interpolant
    assert elastic_energy(u, MAT) <= elastic_energy(interpolate(mesh, lambda x: eval_u(sd, x)), MAT)


def test_crack_faces_open_under_mode_one(slit_mesh):
    sd = SingularDisplacement(SingularModeSet(), 1.0, 0.0)
    u = solve_dirichlet(slit_mesh, MAT, BoundaryData.singular(sd))
    lo, hi = slit_mesh.crack_pairs[:, 0], slit_mesh.crack_pairs[:, 1]
    jump = u.values[hi, 1] - u.values[lo, 1]
    far = slit_mesh.vertices[lo, 0] < -0.05
    assert np.all(np.abs(jump[far]) > 0)


def test_energy_in_ball_example(plain_mesh):
    ident = element_tensor_field(plain_mesh, lambda x: SymTensor2(np.ones(len(x)), np.zeros(len(x)),
                                                                  np.ones(len(x))))
    fine = build_disk_mesh(1.0, CrackSet.empty(), 0.02)
    ident_fine = element_tensor_field(fine, lambda x: SymTensor2(np.ones(len(x)), np.zeros(len(x)),
                                                                 np.ones(len(x))))
    assert energy_in_ball(ident_fine, 0.5) == pytest.approx(np.pi / 2, rel=0.03)
    assert energy_in_ball(ident, 1e-6) == 0.0


def test_triangle_disk_area():
    tri = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    assert triangle_disk_area(tri, 10.0)[0] == pytest.approx(0.5)
    assert triangle_disk_area(tri, 0.5)[0] == pytest.approx(np.pi / 16)
    assert triangle_disk_area(tri + 5.0, 0.5)[0] == pytest.approx(0.0, abs=1e-15)


def test_flux_balance_for_constant_stress(plain_mesh):
    sig = element_tensor_field(plain_mesh, lambda x: SymTensor2(np.full(len(x), 1.0),
                                                                np.full(len(x), 0.3),
                                                                np.full(len(x), -0.5)))
    v = interpolate(plain_mesh, lambda x: (1 - (x ** 2).sum(-1))[:, None] * np.array([1.0, 2.0]),
                    probe=False)
    v.values[plain_mesh.boundary] = 0.0
    fb = flux_balance_check(sig, v, 0.45)
    assert fb.scale > 0.1
    assert fb.residual < 1e-10 * fb.scale


def bump(x):
    # smooth field supported in the annulus 0.3 < |x| < 0.9
    r = np.linalg.norm(x, axis=1)
    t = np.clip((r - 0.3) / 0.6, 0.0, 1.0)
    b = np.where((t > 0) & (t < 1), np.sin(np.pi * t) ** 2, 0.0)
    return b[:, None] * np.array([1.0, -0.5])


def test_flux_balance_for_discrete_solution():
    sd = SingularDisplacement(SingularModeSet(), 1.0, 0.0)
    rel = []
    for h in (0.1, 0.05, 0.025):
        mesh = build_disk_mesh(1.0, SLIT, h)
        sig = stress_recovery(solve_dirichlet(mesh, MAT, BoundaryData.singular(sd)), MAT)
        fb = flux_balance_check(sig, interpolate(mesh, bump), 0.5)
        rel.append(fb.residual / fb.scale)
    assert rel[-1] < 0.01
    assert rel[2] < rel[0]


def test_flux_balance_trivial_cases(slit_mesh):
    sd = SingularDisplacement(SingularModeSet(), 1.0, 0.0)
    sig = stress_recovery(solve_dirichlet(slit_mesh, MAT, BoundaryData.singular(sd)), MAT)
    zero_v = interpolate(slit_mesh, lambda x: np.zeros_like(x))
    assert flux_balance_check(sig, zero_v, 0.5).residual == 0.0
    zero_s = Field(slit_mesh, np.zeros((slit_mesh.n_elements, 3)), "tensor")
    assert flux_balance_check(zero_s, interpolate(slit_mesh, bump), 0.5).residual == 0.0


def test_stress_near_tip_matches_closed_form():
    sd = SingularDisplacement(SingularModeSet(), 1.0, 0.0)
    mesh = build_disk_mesh(1.0, SLIT, 0.01)
    sig = stress_recovery(solve_dirichlet(mesh, MAT, BoundaryData.singular(sd)), MAT)
    x = np.array([[0.5, 0.2]])
    e = np.argmin(np.linalg.norm(mesh.centroids - x, axis=1))
    ref = stress_of_singular(sd, mesh.centroids[e:e + 1]).as_array()[0]
    assert np.linalg.norm(sig.values[e] - ref) < 0.05 * np.linalg.norm(ref)


def test_flux_balance_rejects_outer_radius(plain_mesh):
    sig = element_tensor_field(plain_mesh, lambda x: SymTensor2(*np.zeros((3, len(x)))))
    v = interpolate(plain_mesh, lambda x: np.zeros_like(x))
    with pytest.raises(ValueError):
        flux_balance_check(sig, v, 1.5)


def test_singular_matrix_is_detected():
    A = csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularSystemError):
        CholeskySolver(A)
    A = csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(SingularSystemError):
        CholeskySolver(A)


def test_cholesky_solves():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(6, 6))
    A = M @ M.T + 6 * np.eye(6)
    b = rng.normal(size=6)
    np.testing.assert_allclose(CholeskySolver(csr_matrix(A)).solve(b), np.linalg.solve(A, b),
                               rtol=1e-12)


def test_evaluate_matches_nodal_values(slit_mesh):
    f = interpolate(slit_mesh, lambda x: np.stack([x[:, 0] + 2 * x[:, 1], 3 * x[:, 0]], -1))
    pts = np.array([[0.3, 0.2], [-0.1, 0.5], [0.6, -0.3]])
    np.testing.assert_allclose(evaluate(f, pts), np.stack([pts[:, 0] + 2 * pts[:, 1],
                                                           3 * pts[:, 0]], -1), atol=1e-12)


def test_vtk_export(tmp_path, plain_mesh):
    p = tmp_path / "m.vtk"
    u = interpolate(plain_mesh, lambda x: x)
    write_vtk(p, plain_mesh, {"u": u.values})
    text = p.read_text().splitlines()
    assert text[0].startswith("# vtk")
    assert f"POINTS {plain_mesh.n_nodes} double" in text
    assert f"CELLS {plain_mesh.n_elements} {4 * plain_mesh.n_elements}" in text
