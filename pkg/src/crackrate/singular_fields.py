"""Closed-form near-tip fields of a straight crack.

Each angular function is a combination of cos(t/2), sin(t/2), cos(3t/2) and
sin(3t/2), stored as a 4-vector of coefficients. Derivatives and the shift
between the two angle conventions then act linearly on those coefficients.

Two families of modes are available. ``"classical"`` is the traction-free
displacement pair and the clamped Airy pair (faces free of load, stress
function and its normal derivative vanishing on the faces). ``"published"``
evaluates an alternative set of printed coefficient tables verbatim. They are
kept for auditing only: the displacement pair does not solve the Lame system
with free faces, and the Airy pair is biharmonic but not clamped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core_model import ElasticMaterial, SymTensor2, apply_hooke

CONVENTIONS = ("theta-pm-pi", "theta-0-2pi")
VARIANTS = ("classical", "published")
DEFAULT_CONVENTION = "theta-pm-pi"

# derivative and shift-by-pi operators on coefficients of (c1, s1, c3, s3)
_D = np.array([[0.0, 0.5, 0.0, 0.0],
               [-0.5, 0.0, 0.0, 0.0],
               [0.0, 0.0, 0.0, 1.5],
               [0.0, 0.0, -1.5, 0.0]])
_SHIFT = np.array([[0.0, -1.0, 0.0, 0.0],
                   [1.0, 0.0, 0.0, 0.0],
                   [0.0, 0.0, 0.0, 1.0],
                   [0.0, 0.0, -1.0, 0.0]])


def _basis(theta) -> np.ndarray:
    t = np.asarray(theta, dtype=float)
    return np.stack([np.cos(t / 2), np.sin(t / 2), np.cos(1.5 * t), np.sin(1.5 * t)], axis=-1)


def _displacement_tables(mat: ElasticMaterial, variant: str) -> np.ndarray:
    """Coefficient tables (mode, component, basis) for faces at +-pi or as printed."""
    lam, mu = mat.lam, mat.mu
    a = (lam + mu) / 2
    if variant == "classical":
        m1 = [[(lam + 5 * mu) / 2, 0.0, -a, 0.0],
              [0.0, (3 * lam + 7 * mu) / 2, 0.0, -a]]
        m2 = [[0.0, (5 * lam + 9 * mu) / 2, 0.0, a],
              [(lam - 3 * mu) / 2, 0.0, -a, 0.0]]
    else:
        m1 = [[(lam - 3 * mu) / 2, 0.0, a, 0.0],
              [0.0, (5 * lam + 9 * mu) / 2, 0.0, a]]
        m2 = [[0.0, -(3 * lam + 7 * mu) / 2, 0.0, -a],
              [(lam + 5 * mu) / 2, 0.0, a, 0.0]]
    return np.array([m1, m2])


def _airy_tables(variant: str) -> np.ndarray:
    if variant == "classical":
        return np.array([[1.5, 0.0, 0.5, 0.0], [0.0, 1.0, 0.0, 1.0]])
    return np.array([[1.5, 0.0, -0.5, 0.0], [0.0, 1.5, 0.0, 0.5]])


@dataclass(frozen=True)
class SingularModeSet:
    """Angular mode tables for one material and angle convention.

    Args:
        mat: Material.
        convention: ``"theta-pm-pi"`` (faces at -pi and pi, crack on the
            negative first axis) or ``"theta-0-2pi"`` (faces at 0 and 2 pi,
            crack on the positive first axis).
        variant: ``"classical"`` or ``"published"``.
    """

    mat: ElasticMaterial = field(default_factory=ElasticMaterial)
    convention: str = DEFAULT_CONVENTION
    variant: str = "classical"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown mode variant {self.variant!r}")

    @property
    def face_angles(self) -> tuple[float, float]:
        """Angles of the (upper, lower) faces; the upper face borders x2 > 0."""
        return (np.pi, -np.pi) if self.convention == "theta-pm-pi" else (0.0, 2 * np.pi)

    def displacement_coefficients(self) -> np.ndarray:
        tab = _displacement_tables(self.mat, self.variant)
        if self.variant == "classical" and self.convention == "theta-0-2pi":
            # the field rotated by pi: u'(x) = -u(-x)
            tab = -tab @ _SHIFT.T
        return tab

    def airy_coefficients(self) -> np.ndarray:
        tab = _airy_tables(self.variant)
        if self.variant == "classical" and self.convention == "theta-0-2pi":
            tab = tab @ _SHIFT.T
        return tab

    def polar(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Radius and angle of points under this convention."""
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        t = np.arctan2(x[..., 1], x[..., 0])
        if self.convention == "theta-0-2pi":
            t = np.mod(t, 2 * np.pi)
        return r, t


def eval_displacement_modes(modes: SingularModeSet, theta, order: int = 0):
    """Angular displacement modes or their derivatives.

    Args:
        modes: Mode set.
        theta: Angle(s).
        order: Derivative order in theta.

    Returns:
        Tuple (phi1, phi2) of arrays with a trailing axis of length 2.
    """
    tab = modes.displacement_coefficients()
    for _ in range(order):
        tab = tab @ _D.T
    b = _basis(theta)
    vals = np.einsum("...k,mck->m...c", b, tab)
    return vals[0], vals[1]


def eval_airy_modes(modes: SingularModeSet, theta, order: int = 0):
    """Angular Airy modes or their derivatives; returns (psi1, psi2)."""
    tab = modes.airy_coefficients()
    for _ in range(order):
        tab = tab @ _D.T
    b = _basis(theta)
    vals = np.einsum("...k,mk->m...", b, tab)
    return vals[0], vals[1]


@dataclass(frozen=True)
class SingularDisplacement:
    """Field sqrt(r) (kappa1 phi1 + kappa2 phi2)."""

    modes: SingularModeSet = field(default_factory=SingularModeSet)
    kappa1: float = 1.0
    kappa2: float = 0.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return eval_u(self, x)


@dataclass(frozen=True)
class SingularAiry:
    """Stress function r^(3/2) (c1 psi1 + c2 psi2)."""

    modes: SingularModeSet = field(default_factory=SingularModeSet)
    c1: float = 1.0
    c2: float = 0.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return eval_w(self, x)


def _angular_u(sd: SingularDisplacement, theta, order: int = 0) -> np.ndarray:
    p1, p2 = eval_displacement_modes(sd.modes, theta, order)
    return sd.kappa1 * p1 + sd.kappa2 * p2


def _angular_w(sa: SingularAiry, theta, order: int = 0) -> np.ndarray:
    q1, q2 = eval_airy_modes(sa.modes, theta, order)
    return sa.c1 * q1 + sa.c2 * q2


def eval_u(sd: SingularDisplacement, x: np.ndarray) -> np.ndarray:
    """Displacement at points ``x`` (shape (..., 2)); zero at the tip."""
    r, t = sd.modes.polar(x)
    return np.sqrt(r)[..., None] * _angular_u(sd, t)


def eval_w(sa: SingularAiry, x: np.ndarray) -> np.ndarray:
    """Stress function at points ``x``; zero at the tip."""
    r, t = sa.modes.polar(x)
    return r ** 1.5 * _angular_w(sa, t)


def gradient_polar(sd: SingularDisplacement, r, theta) -> np.ndarray:
    """Displacement gradient du_i/dx_j at polar points, shape (..., 2, 2)."""
    r = np.asarray(r, dtype=float)
    f = _angular_u(sd, theta)
    df = _angular_u(sd, theta, 1)
    c, s = np.cos(theta), np.sin(theta)
    scale = 1.0 / np.sqrt(r)
    gx = scale[..., None] * (0.5 * c[..., None] * f - s[..., None] * df)
    gy = scale[..., None] * (0.5 * s[..., None] * f + c[..., None] * df)
    return np.stack([gx, gy], axis=-1)


def stress_polar(sd: SingularDisplacement, r, theta) -> SymTensor2:
    """Closed-form stress at polar coordinates (r, theta)."""
    g = gradient_polar(sd, r, theta)
    e = SymTensor2(g[..., 0, 0], 0.5 * (g[..., 0, 1] + g[..., 1, 0]), g[..., 1, 1])
    return apply_hooke(sd.modes.mat, e)


def strain_of_singular(sd: SingularDisplacement, x: np.ndarray) -> SymTensor2:
    r, t = sd.modes.polar(x)
    g = gradient_polar(sd, r, t)
    return SymTensor2(g[..., 0, 0], 0.5 * (g[..., 0, 1] + g[..., 1, 0]), g[..., 1, 1])


def stress_of_singular(sd: SingularDisplacement, x: np.ndarray) -> SymTensor2:
    """Stress of the singular displacement at points ``x`` (off the tip)."""
    return apply_hooke(sd.modes.mat, strain_of_singular(sd, x))


def airy_hessian(sa: SingularAiry, x: np.ndarray) -> np.ndarray:
    """Closed-form Hessian of the stress function, shape (..., 2, 2)."""
    r, t = sa.modes.polar(x)
    f, df, ddf = (_angular_w(sa, t, k) for k in range(3))
    c, s = np.cos(t), np.sin(t)
    sq = np.sqrt(r)
    w_rr = 0.75 * f / sq
    w_r_over_r = 1.5 * f / sq
    w_tt_over_r2 = ddf / sq
    mixed = 1.5 * df / sq - df / sq  # w_rt / r - w_t / r^2
    a = w_r_over_r + w_tt_over_r2
    hxx = c * c * w_rr + s * s * a - 2 * c * s * mixed
    hyy = s * s * w_rr + c * c * a + 2 * c * s * mixed
    hxy = c * s * (w_rr - a) + (c * c - s * s) * mixed
    return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


def stress_of_airy(sa: SingularAiry, x: np.ndarray) -> SymTensor2:
    """Stress generated by a stress function: (w_22, -w_12, w_11)."""
    hess = airy_hessian(sa, x)
    return SymTensor2(hess[..., 1, 1], -hess[..., 0, 1], hess[..., 0, 0])


def airy_for_displacement(sd: SingularDisplacement, n_theta: int = 64) -> tuple[SingularAiry, float]:
    """Stress function of the same mode family reproducing the stress of ``sd``.

    The coefficients are found by least squares on an angular grid at r = 1.

    Returns:
        The matching SingularAiry and the relative misfit of the fit.
    """
    lo, hi = sorted(sd.modes.face_angles)
    t = np.linspace(lo, hi, n_theta + 2)[1:-1]
    x = np.stack([np.cos(t), np.sin(t)], -1)
    target = stress_of_singular(sd, x).as_array().ravel()
    cols = [stress_of_airy(SingularAiry(sd.modes, *c), x).as_array().ravel()
            for c in ((1.0, 0.0), (0.0, 1.0))]
    A = np.stack(cols, -1)
    coef, *_ = np.linalg.lstsq(A, target, rcond=None)
    misfit = np.linalg.norm(A @ coef - target) / max(np.linalg.norm(target), 1e-300)
    return SingularAiry(sd.modes, float(coef[0]), float(coef[1])), float(misfit)


def kappa_to_airy_matrix(modes: SingularModeSet) -> np.ndarray:
    """Linear map (kappa1, kappa2) -> (c1, c2) between the two mode families."""
    cols = [airy_for_displacement(SingularDisplacement(modes, *k))[0] for k in ((1.0, 0.0), (0.0, 1.0))]
    return np.array([[cols[0].c1, cols[1].c1], [cols[0].c2, cols[1].c2]])


def lame_residual(sd: SingularDisplacement, x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference divergence of the closed-form stress."""
    x = np.asarray(x, dtype=float)
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    sxp, sxm = stress_of_singular(sd, x + ex), stress_of_singular(sd, x - ex)
    syp, sym = stress_of_singular(sd, x + ey), stress_of_singular(sd, x - ey)
    d1 = (sxp.xx - sxm.xx + syp.xy - sym.xy) / (2 * h)
    d2 = (sxp.xy - sxm.xy + syp.yy - sym.yy) / (2 * h)
    return np.stack([d1, d2], -1)


def face_normal(modes: SingularModeSet, face: str) -> np.ndarray:
    """Outward unit normal of the body on a crack face."""
    if face == "upper":
        return np.array([0.0, -1.0])
    if face == "lower":
        return np.array([0.0, 1.0])
    raise ValueError("face must be 'upper' or 'lower'")


def crack_traction(sd: SingularDisplacement, r: float, face: str) -> np.ndarray:
    """Traction vector on a crack face at distance ``r`` from the tip."""
    upper, lower = sd.modes.face_angles
    theta = upper if face == "upper" else lower
    n = face_normal(sd.modes, face)
    return stress_polar(sd, np.asarray(r, dtype=float), np.asarray(theta)).apply(n)


def stress_scale(sd: SingularDisplacement, r: float, n_theta: int = 721) -> float:
    """Largest Frobenius norm of the stress on the circle of radius ``r``."""
    lo, hi = sorted(sd.modes.face_angles)
    t = np.linspace(lo, hi, n_theta)
    s = stress_polar(sd, np.full_like(t, r), t)
    return float(np.sqrt(s.norm_sq()).max())


def relative_crack_traction(sd: SingularDisplacement, r: float = 1.0) -> float:
    """Largest face traction relative to the stress scale at radius ``r``."""
    t = max(np.linalg.norm(crack_traction(sd, r, f)) for f in ("upper", "lower"))
    return float(t / max(stress_scale(sd, r), 1e-300))


def biharmonic_residual(sa: SingularAiry, x: np.ndarray, h: float) -> np.ndarray:
    """Thirteen-point finite-difference bilaplacian of the stress function."""
    x = np.asarray(x, dtype=float)

    def w(dx, dy):
        return eval_w(sa, x + np.array([dx * h, dy * h]))

    total = 20 * w(0, 0)
    total -= 8 * (w(1, 0) + w(-1, 0) + w(0, 1) + w(0, -1))
    total += 2 * (w(1, 1) + w(1, -1) + w(-1, 1) + w(-1, -1))
    total += w(2, 0) + w(-2, 0) + w(0, 2) + w(0, -2)
    return total / h ** 4


def mode_table(modes: SingularModeSet, n_theta: int = 181) -> np.ndarray:
    """Rows (theta, phi1_x, phi1_y, phi2_x, phi2_y, psi1, psi2) on the open angle range."""
    lo, hi = sorted(modes.face_angles)
    t = np.linspace(lo, hi, n_theta + 2)[1:-1]
    p1, p2 = eval_displacement_modes(modes, t)
    q1, q2 = eval_airy_modes(modes, t)
    return np.column_stack([t, p1, p2, q1, q2])


def write_mode_table(path: str | Path, modes: SingularModeSet, n_theta: int = 181) -> None:
    """Writes the mode table as CSV."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["theta", "phi1_x", "phi1_y", "phi2_x", "phi2_y", "psi1", "psi2"])
        for row in mode_table(modes, n_theta):
            wr.writerow([format(v, ".17g") for v in row])
