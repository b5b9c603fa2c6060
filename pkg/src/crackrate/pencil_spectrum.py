"""Exponents and angular profiles of clamped biharmonic functions on a slit plane.

A function r^lam f(theta) is biharmonic exactly when

    (d^2/dtheta^2 + (lam - 2)^2)(d^2/dtheta^2 + lam^2) f = 0,

and it is clamped on the slit when f and f' vanish on both faces. The plain
solution basis {cos lam t, sin lam t, cos (lam-2) t, sin (lam-2) t} degenerates
at lam in {0, 1, 2}. A divided-difference basis spanning the same space is
used wherever a basis valid for every lam is needed:

    g1 = cos(lam t)
    g2 = sin(lam t) / lam
    g3 = (cos((lam-2) t) - cos(lam t)) / (lam - 1)
    g4 = (sin((lam-2) t)/(lam-2) - sin(lam t)/lam) / (lam - 1)

The full 4x4 determinant has double roots, so the root scan is done on the
two 2x2 blocks obtained from the profiles that are even and odd about the
middle of the angular interval. Each block has simple roots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .singular_fields import CONVENTIONS, SingularModeSet, eval_airy_modes

DEGENERATE = (0.0, 1.0, 2.0)
GUARD = 1e-6
SCAN_STEP = 1e-3
ROOT_TOL = 1e-10
RANK_TOL = 1e-8


def face_angles(convention: str) -> tuple[float, float]:
    if convention == "theta-pm-pi":
        return -np.pi, np.pi
    if convention == "theta-0-2pi":
        return 0.0, 2 * np.pi
    raise ValueError(f"unknown convention {convention!r}")


def _sinc(x):
    """sin(x)/x with the removable singularity filled in."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def _sinc_d(x):
    """Derivative of sin(x)/x."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    out = (xs * np.cos(xs) - np.sin(xs)) / xs ** 2
    return np.where(small, -x / 3 + x ** 3 / 30, out)


def standard_basis(lam: float, theta, order: int = 0) -> np.ndarray:
    """Values (order 0) or derivatives of the four plain basis functions."""
    t = np.asarray(theta, dtype=float)
    out = []
    for w in (lam, lam - 2):
        c, s = np.cos(w * t), np.sin(w * t)
        vals = [(c, s), (-w * s, w * c), (-w * w * c, -w * w * s)]
        if order > 2:
            raise ValueError("order <= 2 supported")
        out.extend(vals[order])
    return np.stack([out[0], out[1], out[2], out[3]], -1)


def supplemented_basis(lam: float, theta, order: int = 0) -> np.ndarray:
    """Values or derivatives (order 0 or 1) of the divided-difference basis."""
    t = np.asarray(theta, dtype=float)
    c = lam - 1.0
    if order == 0:
        g1 = np.cos(lam * t)
        g2 = t * _sinc(lam * t)
        g3 = 2 * np.sin(t) * t * _sinc(c * t)
        if abs(c * c - 1) > 0.1:
            num = -2 * np.cos(c * t) * np.sin(t) + 2 * t * np.cos(t) * _sinc(c * t)
            g4 = num / (c * c - 1)
        else:
            g4 = (t * _sinc((lam - 2) * t) - t * _sinc(lam * t)) / c
        return np.stack([g1, g2, g3, g4], -1)
    if order == 1:
        g1 = -lam * np.sin(lam * t)
        g2 = np.cos(lam * t)
        # d/dt [2 sin t * sin(c t)/c]
        g3 = 2 * np.cos(t) * t * _sinc(c * t) + 2 * np.sin(t) * np.cos(c * t)
        if abs(c) > 1e-3:
            g4 = (np.cos((lam - 2) * t) - np.cos(lam * t)) / c
        else:
            # (cos((lam-2)t) - cos(lam t))/(lam-1) = 2 sin t sin(c t)/c
            g4 = 2 * np.sin(t) * t * _sinc(c * t)
        return np.stack([g1, g2, g3, g4], -1)
    raise ValueError("order must be 0 or 1")


def near_degenerate(lam: float, guard: float = GUARD) -> bool:
    return any(abs(lam - d) <= guard for d in DEGENERATE)


def characteristic_matrix(lam: float, convention: str = "theta-pm-pi",
                          supplemented: bool = False, guard: float = GUARD) -> np.ndarray:
    """Clamped face conditions applied to the angular solution basis.

    Rows are f(a), f'(a), f(b), f'(b) for the faces a < b of the convention.

    Args:
        lam: Exponent.
        convention: Angle convention.
        supplemented: Use the divided-difference basis, valid for every lam.
        guard: Width of the excluded zone around {0, 1, 2} for the plain basis.

    Returns:
        The 4x4 matrix.

    Raises:
        ValueError: lam lies in a degenerate zone and ``supplemented`` is False.
    """
    a, b = face_angles(convention)
    if supplemented:
        basis = supplemented_basis
    else:
        if near_degenerate(lam, guard):
            raise ValueError(f"exponent {lam} is within {guard} of a degenerate value; "
                             "use the supplemented basis")
        basis = standard_basis
    return np.array([basis(lam, a), basis(lam, a, 1), basis(lam, b), basis(lam, b, 1)])


def parity_determinants(lam: float) -> tuple[float, float]:
    """Determinants of the even and odd 2x2 clamped blocks about the mid-angle."""
    t = np.pi
    g0, g1 = supplemented_basis(lam, t), supplemented_basis(lam, t, 1)
    even = np.array([[g0[0], g0[2]], [g1[0], g1[2]]])
    odd = np.array([[g0[1], g0[3]], [g1[1], g1[3]]])
    return float(np.linalg.det(even)), float(np.linalg.det(odd))


@dataclass
class SpectrumEntry:
    """One exponent of the clamped pencil.

    Attributes:
        lam: The exponent.
        multiplicity: Dimension of the null space of the characteristic matrix.
        eigvecs: Orthonormal null-space coefficient vectors, shape (multiplicity, 4).
        basis: ``"standard"`` or ``"supplemented"``, the basis of ``eigvecs``.
        convention: Angle convention.
    """

    lam: float
    multiplicity: int
    eigvecs: np.ndarray
    basis: str = "standard"
    convention: str = "theta-pm-pi"


@dataclass
class AngularFunction:
    """Angular profile given by coefficients over one of the two bases."""

    lam: float
    coeffs: np.ndarray
    basis: str = "standard"

    def __call__(self, theta, order: int = 0) -> np.ndarray:
        fn = standard_basis if self.basis == "standard" else supplemented_basis
        return fn(self.lam, theta, order) @ self.coeffs


def _null_space(m: np.ndarray, rank_tol: float) -> np.ndarray:
    _, s, vt = np.linalg.svd(m)
    rank = int(np.sum(s > rank_tol * s[0]))
    return vt[rank:]


def _entry(lam: float, convention: str, rank_tol: float) -> SpectrumEntry:
    sup = characteristic_matrix(lam, convention, supplemented=True)
    mult = len(_null_space(sup, rank_tol))
    if near_degenerate(lam):
        vecs = _null_space(sup, rank_tol)
        return SpectrumEntry(lam, mult, vecs, "supplemented", convention)
    std = characteristic_matrix(lam, convention)
    # the plain basis is ill scaled near degenerate points; keep the rank from
    # the supplemented basis and take the matching number of singular vectors
    _, _, vt = np.linalg.svd(std)
    vecs = vt[4 - mult:] if mult else np.zeros((0, 4))
    return SpectrumEntry(lam, mult, vecs, "standard", convention)


def spectrum_in_interval(a: float, b: float, convention: str = "theta-pm-pi",
                         tol: float = ROOT_TOL, step: float = SCAN_STEP,
                         rank_tol: float = RANK_TOL) -> list[SpectrumEntry]:
    """All real exponents of the clamped pencil in [a, b].

    The even and odd block determinants are scanned on a uniform grid, sign
    changes are refined with Brent's method to machine precision, and
    coincident roots are merged.

    Returns:
        Entries sorted by exponent.
    """
    if not a < b:
        raise ValueError("need a < b")
    n = max(2, int(np.ceil((b - a) / step)) + 1)
    grid = np.linspace(a, b, n)
    roots: list[float] = []
    for which in (0, 1):
        def f(x, which=which):
            return parity_determinants(x)[which]

        vals = np.array([f(x) for x in grid])
        for i in range(n - 1):
            if vals[i] == 0.0:
                roots.append(float(grid[i]))
            elif vals[i] * vals[i + 1] < 0:
                roots.append(float(brentq(f, grid[i], grid[i + 1], xtol=min(tol, 1e-15), maxiter=200)))
        if vals[-1] == 0.0:
            roots.append(float(grid[-1]))
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if merged and abs(r - merged[-1]) < 10 * tol:
            continue
        merged.append(r)
    return [_entry(r, convention, rank_tol) for r in merged]


def eigenfunctions(lam: float, convention: str = "theta-pm-pi",
                   rank_tol: float = RANK_TOL) -> list[AngularFunction]:
    """Orthonormal null-space profiles at an exponent.

    Raises:
        ValueError: ``lam`` is not an exponent of the pencil.
    """
    e = _entry(lam, convention, rank_tol)
    if e.multiplicity == 0:
        raise ValueError(f"{lam} is not an exponent of the clamped pencil")
    return [AngularFunction(lam, v, e.basis) for v in e.eigvecs]


def clamped_residual(f: AngularFunction, convention: str) -> float:
    a, b = face_angles(convention)
    return float(max(abs(f(a)), abs(f(a, 1)), abs(f(b)), abs(f(b, 1))))


def _gauss_grid(convention: str, n: int = 400):
    a, b = face_angles(convention)
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def projection_residual(values: np.ndarray, space: np.ndarray, weights: np.ndarray) -> float:
    """Relative L2 distance of a sampled function to the span of sampled functions.

    Args:
        values: Samples of the function, shape (n,).
        space: Samples of the spanning functions, shape (k, n).
        weights: Quadrature weights, shape (n,).

    Returns:
        ||f - P f|| / ||f||, defined as 0 for the zero function.
    """
    sw = np.sqrt(weights)
    f = values * sw
    norm = np.linalg.norm(f)
    if norm == 0.0:
        return 0.0
    q, _ = np.linalg.qr((space * sw).T)
    return float(np.linalg.norm(f - q @ (q.T @ f)) / norm)


def span_intersection_dim(a: np.ndarray, b: np.ndarray, weights: np.ndarray, tol: float = 1e-8) -> int:
    """Number of principal angles below ``tol`` between two sampled spans."""
    sw = np.sqrt(weights)
    qa, _ = np.linalg.qr((a * sw).T)
    qb, _ = np.linalg.qr((b * sw).T)
    cos = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return int(np.sum(cos > 1 - tol))


def _fmt(x: float) -> str:
    return "<1e-12" if abs(x) < 1e-12 else format(x, ".10e")


def audit_published_modes(conventions=CONVENTIONS) -> dict:
    """Compares both Airy mode tables with the exponent-3/2 clamped eigenspace.

    For each convention the relative L2 projection residual of each profile
    onto the computed eigenspace is reported, together with the dimension of
    the intersection of the two spans and a verdict (match, partial or none).

    Returns:
        A JSON-ready dictionary.
    """
    report = {"exponent": 1.5, "projection_tolerance": 1e-8, "conventions": {}}
    for conv in conventions:
        theta, w = _gauss_grid(conv)
        eig = np.array([f(theta) for f in eigenfunctions(1.5, conv)])
        entry = {"eigenspace_dimension": int(len(eig))}
        for variant in ("published", "classical"):
            q1, q2 = eval_airy_modes(SingularModeSet(convention=conv, variant=variant), theta)
            res = [projection_residual(q, eig, w) for q in (q1, q2)]
            dim = span_intersection_dim(np.array([q1, q2]), eig, w)
            verdict = "match" if dim == 2 else ("partial" if dim == 1 else "none")
            entry[variant] = {"psi1_residual": _fmt(res[0]), "psi2_residual": _fmt(res[1]),
                              "intersection_dimension": dim, "verdict": verdict}
        report["conventions"][conv] = entry
    return report


def audit_text(report: dict) -> str:
    """Human-readable rendering of :func:`audit_published_modes`."""
    lines = [f"Clamped eigenspace audit at exponent {report['exponent']}",
             f"projection tolerance {report['projection_tolerance']}", ""]
    for conv, entry in report["conventions"].items():
        lines.append(f"[{conv}] eigenspace dimension {entry['eigenspace_dimension']}")
        for variant in ("published", "classical"):
            e = entry[variant]
            lines.append(f"  {variant:9s} psi1 residual {e['psi1_residual']}  "
                         f"psi2 residual {e['psi2_residual']}  "
                         f"shared dimension {e['intersection_dimension']}  verdict {e['verdict']}")
        lines.append("")
    return "\n".join(lines)


def audit_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def spectrum_rows(entries: list[SpectrumEntry]) -> list[tuple[float, int]]:
    return [(e.lam, e.multiplicity) for e in entries]


def eigvecs_json(entries: list[SpectrumEntry]) -> list[dict]:
    return [{"lambda": e.lam, "multiplicity": e.multiplicity, "basis": e.basis,
             "convention": e.convention, "eigvecs": e.eigvecs.tolist()} for e in entries]


@dataclass
class PencilConfig:
    """Scan parameters exposed to configuration files."""

    a: float = 0.4
    b: float = 3.6
    tol: float = ROOT_TOL
    rank_tol: float = RANK_TOL
    conventions: tuple = field(default_factory=lambda: CONVENTIONS)
