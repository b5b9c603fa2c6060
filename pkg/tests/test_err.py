import json

import numpy as np
import pytest

from crackrate.core_model import CrackSet, ElasticMaterial
from crackrate.err import (IncrementFamily, MeshSpec, circle_competitor, circle_competitor_bound,
                           circle_increment, circle_radius, compute_G, g_eps, irwin_rate,
                           kink_increment, limit_functional, r_independence_check,
                           segment_increment, sweep_window, tip_direction, write_json,
                           write_sweep_csv)
from crackrate.fem_solver import BoundaryData, solve_dirichlet
from crackrate.singular_fields import SingularDisplacement, SingularModeSet

from oracles import irwin_release_rate

SLIT = CrackSet.from_points([[0.0, 0.0], [-1.0, 0.0]])
COARSE = MeshSpec(h=0.05)
MODE_I = BoundaryData.singular(SingularDisplacement(SingularModeSet(), 1.0, 0.0))
UNIT = segment_increment(1.0, 0.0)


def test_increment_geometry():
    assert tip_direction(SLIT) == pytest.approx(0.0)
    assert tip_direction(CrackSet.from_points([[0, 0], [0, -1]])) == pytest.approx(np.pi / 2)
    assert tip_direction(CrackSet.empty()) == 0.0
    seg = segment_increment(0.1, np.pi / 2)
    np.testing.assert_allclose(seg.chains[0][-1], [0.0, 0.1], atol=1e-17)
    k = kink_increment(0.1, 0.0, np.pi / 2, 0.4)
    np.testing.assert_allclose(k.chains[0], [[0, 0], [0.04, 0], [0.04, 0.06]], atol=1e-17)
    with pytest.raises(ValueError):
        kink_increment(0.1, 0.0, 0.0, 1.0)
    c = circle_increment(0.1)
    total = sum(np.linalg.norm(np.diff(ch, axis=0), axis=1).sum() for ch in c.chains)
    assert total == pytest.approx(0.1, rel=1e-3)
    assert circle_radius(2 * np.pi + 1) == pytest.approx(1.0)


def test_zero_data_gives_zero():
    assert compute_G(SLIT, segment_increment(0.1, 0.0), 1.0, COARSE) == 0.0
    res = g_eps(SLIT, IncrementFamily(angles=(-0.5, 0.0, 0.5), refine=False), 0.1, mesh=COARSE)
    assert all(c.G == 0.0 for c in res.candidates)
    u0 = solve_dirichlet(COARSE.build(1.0, SLIT), ElasticMaterial(), BoundaryData.zero())
    assert circle_competitor_bound(u0, ElasticMaterial(), 0.1) == 0.0


def test_empty_increment_changes_nothing():
    assert compute_G(SLIT, CrackSet.empty(), 1.0, COARSE, bd=MODE_I) == 0.0


def test_release_is_negative():
    G = compute_G(SLIT, segment_increment(0.1, 0.0), 1.0, COARSE, bd=MODE_I)
    assert G < 0


def test_collinear_release_matches_limit():
    eps = 0.05
    G = compute_G(SLIT, segment_increment(eps, 0.0), 1.0, MeshSpec(h=0.02), bd=MODE_I)
    F = limit_functional(UNIT, (1.0, 0.0), 2.0, 512.0).value
    assert G / eps == pytest.approx(F, rel=0.05)


def test_symmetric_sweep():
    fam = IncrementFamily(refine=False, include_circle=False)
    res = g_eps(SLIT, fam, 0.1, mesh=COARSE, bd=MODE_I)
    rates = {c.params[0]: c.G_over_eps for c in res.candidates}
    angles = sorted(rates)
    assert len(angles) == 7
    for a in angles:
        assert rates[a] == pytest.approx(rates[-a], rel=0.03)
    assert res.best.params[0] == pytest.approx(0.0, abs=1e-12)
    lo, hi = sweep_window([res])
    assert lo == hi == -res.g_eps


def test_refined_sweep_stays_at_collinear_angle():
    fam = IncrementFamily(angles=(-0.5, 0.0, 0.5), include_circle=False)
    res = g_eps(SLIT, fam, 0.1, mesh=COARSE, bd=MODE_I)
    assert abs(res.best.params[0]) < 0.25
    assert any(c.label == "segment-refined" for c in res.candidates)


def test_circle_competitor_bound():
    cc = circle_competitor(SLIT, 0.1, 1.0, COARSE, bd=MODE_I)
    assert cc.G_over_eps <= cc.bound
    assert cc.G_over_eps < 0
    with pytest.raises(ValueError):
        circle_competitor(SLIT, 20.0, 1.0, COARSE, bd=MODE_I)


def test_sweep_input_validation():
    with pytest.raises(ValueError):
        g_eps(SLIT, IncrementFamily(), 0.6, mesh=COARSE)
    with pytest.raises(ValueError):
        IncrementFamily(kind="spiral")


def test_irwin_rate():
    assert irwin_rate((1.0, 0.0)) == pytest.approx(12 * np.pi)
    for lam, mu in ((1.0, 1.0), (2.0, 0.5)):
        mat = ElasticMaterial(lam, mu)
        assert irwin_rate((0.3, -0.7), mat) == pytest.approx(
            irwin_release_rate((0.3, -0.7), lam, mu), rel=1e-12)


def test_limit_zero_load():
    assert limit_functional(UNIT, (0.0, 0.0), 2.0, 16.0, MeshSpec(h=0.2)).value == 0.0
    spread, vals = r_independence_check(UNIT, (0.0, 0.0), (2.0, 3.0), 32.0, MeshSpec(h=0.2))
    assert spread == 0.0 and vals == [0.0, 0.0]


def test_limit_validation():
    with pytest.raises(ValueError):
        limit_functional(UNIT, (1.0, 0.0), 2.0, 8.0)
    with pytest.raises(ValueError):
        limit_functional(segment_increment(2.5, 0.0), (1.0, 0.0), 2.0, 32.0)


def test_limit_collinear_close_to_irwin():
    F = limit_functional(UNIT, (1.0, 0.0), 2.0, 512.0).value
    assert F < 0
    assert -F == pytest.approx(irwin_rate((1.0, 0.0)), rel=0.02)


def test_limit_quadratic_in_load():
    spec = MeshSpec(h=0.1, grading_radius=1.0, coarsen=8.0)
    v = [limit_functional(UNIT, (t, 0.0), 2.0, 32.0, spec).value for t in (1.0, 2.0)]
    assert v[1] == pytest.approx(4 * v[0], rel=1e-10)


def test_limit_empty_increment_baseline():
    F0 = limit_functional(CrackSet.empty(), (1.0, 0.0), 2.0, 256.0).value
    assert F0 <= 1e-12
    assert abs(F0) < 1e-4


def test_r_independence():
    spread, vals = r_independence_check(UNIT, (1.0, 0.0), (2.0, 3.0, 4.0), 256.0)
    assert spread < 0.03
    assert all(v < 0 for v in vals)


def test_outputs(tmp_path):
    fam = IncrementFamily(angles=(0.0,), refine=False, include_circle=False)
    res = g_eps(SLIT, fam, 0.1, mesh=COARSE, bd=MODE_I)
    write_sweep_csv(tmp_path / "s.csv", [res])
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "eps,candidate_param,G,G_over_eps"
    assert rows[1].startswith("0.10000000000000001,segment:0,")
    write_json(tmp_path / "r.json", res.as_dict())
    assert json.loads((tmp_path / "r.json").read_text())["g_eps"] == res.g_eps
