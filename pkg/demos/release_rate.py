"""Energy released by a short crack extension and its blow-up limit.

For the opening mode, the energy change of a collinear extension of length
eps, divided by eps, settles as eps shrinks. Its limit is the whole-plane
functional evaluated around the pure singular field. That value is also
compared with Irwin's closed-form rate.

Run with ``python3 demos/release_rate.py`` (about half a minute).
"""

from crackrate.core_model import CrackSet
from crackrate.err import (IncrementFamily, MeshSpec, g_eps, irwin_rate, limit_functional,
                           segment_increment)
from crackrate.fem_solver import BoundaryData
from crackrate.singular_fields import SingularDisplacement, SingularModeSet

crack = CrackSet.from_points([[0.0, 0.0], [-1.0, 0.0]])
bd = BoundaryData.singular(SingularDisplacement(SingularModeSet(), 1.0, 0.0))

# a few kink angles plus the circle competitor at each length
family = IncrementFamily(angles=(-0.5, 0.0, 0.5), refine=False, include_circle=True)
for eps in (0.2, 0.1, 0.05):
    res = g_eps(crack, family, eps, mesh=MeshSpec(h=0.03), bd=bd)
    rates = ", ".join(f"{c.label}{c.params}: {c.G_over_eps:.2f}" for c in res.candidates)
    print(f"eps={eps}: g_eps={res.g_eps:.3f}  [{rates}]")

limit = limit_functional(segment_increment(1.0, 0.0), (1.0, 0.0), R=2.0, R_out=256.0)
print(f"blow-up limit F = {limit.value:.3f} on {limit.n_nodes} nodes")
print(f"Irwin rate     = {-irwin_rate((1.0, 0.0)):.3f}")
