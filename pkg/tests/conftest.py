import sys
from functools import lru_cache
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from crackrate.airy_dual import dual_potentials  # noqa: E402
from crackrate.core_model import CrackSet, ElasticMaterial  # noqa: E402
from crackrate.fem_solver import BoundaryData, solve_dirichlet, stress_recovery  # noqa: E402
from crackrate.mesh import build_disk_mesh  # noqa: E402
from crackrate.singular_fields import SingularDisplacement, SingularModeSet  # noqa: E402

SLIT = CrackSet.from_points([[0.0, 0.0], [-1.0, 0.0]])


@lru_cache(maxsize=None)
def manufactured(h: float, kappa=(1.0, 0.5)):
    """Straight crack in the unit disk with the singular field as boundary data.

    Returns:
        (displacement, stress, potentials) of the discrete solve.
    """
    mat = ElasticMaterial(1.0, 1.0)
    mesh = build_disk_mesh(1.0, SLIT, h)
    sd = SingularDisplacement(SingularModeSet(), *kappa)
    u = solve_dirichlet(mesh, mat, BoundaryData.singular(sd))
    s = stress_recovery(u, mat)
    return u, s, dual_potentials(s)


def affine_calibrated_error(values: np.ndarray, x: np.ndarray, target: np.ndarray) -> float:
    """Max difference after removing the least-squares affine part."""
    A = np.c_[np.ones(len(x)), x]
    d = values - target
    coef, *_ = np.linalg.lstsq(A, d, rcond=None)
    return float(np.abs(d - A @ coef).max())


ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    """Stores the one-line verdict of an acceptance criterion and echoes it."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
