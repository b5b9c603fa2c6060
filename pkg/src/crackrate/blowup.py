"""Blow-up of computed fields at the crack tip and singular-mode fitting.

Displacements are rescaled as ``eps**-0.5 * Q u(Q^T (eps y))`` and Airy
functions as ``eps**-1.5 * w(Q^T (eps y))``, where ``Q`` is the rotation that
aligns the rescaled crack with the negative first axis. The rescaled fields
are fitted on an annulus by the singular modes plus a rigid motion (resp. an
affine function).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core_model import CrackSet, RigidMotion, blowup_rotation, rotation_matrix
from .fem_solver import Field, PointLocator, evaluate
from .singular_fields import (SingularModeSet, eval_airy_modes, eval_displacement_modes)

DEFAULT_ANNULUS = (0.5, 1.0)


def _side_hint(y: np.ndarray, rot: float, eps: float) -> np.ndarray:
    """Offsets in physical space pushing samples toward their side of the rescaled crack."""
    side = np.where(y[:, 1] >= 0, 1.0, -1.0)
    d = np.stack([np.zeros(len(y)), side], -1)
    return 1e-9 * eps * d @ rotation_matrix(rot)


def _physical(y: np.ndarray, eps: float, rot: float) -> np.ndarray:
    # Q^T applied to row vectors is y @ Q
    return eps * (y @ rotation_matrix(rot))


def _sample(f, x: np.ndarray, nudge: np.ndarray, locator=None) -> np.ndarray:
    if isinstance(f, Field):
        vals = evaluate(f, x, locator, nudge)
    else:
        vals = np.asarray(f(x), dtype=float)
    if np.any(~np.isfinite(vals)):
        raise ValueError("sample point outside the solved domain")
    return vals


def rescale_displacement(u: Field | Callable, eps: float, rot: float, y,
                         locator: PointLocator | None = None) -> np.ndarray:
    """Blow-up of a displacement at the points ``y`` (n, 2) of the rescaled plane.

    Raises:
        ValueError: A point falls outside the solved domain.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    vals = _sample(u, _physical(y, eps, rot), _side_hint(y, rot, eps), locator)
    return eps ** -0.5 * vals @ rotation_matrix(rot).T


def rescale_airy(w: Field | Callable, eps: float, rot: float, y,
                 locator: PointLocator | None = None) -> np.ndarray:
    """Blow-up of an Airy function at the points ``y`` (n, 2) of the rescaled plane."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return eps ** -1.5 * _sample(w, _physical(y, eps, rot), _side_hint(y, rot, eps), locator)


def annulus_grid(annulus=DEFAULT_ANNULUS, n_samples: int = 2048, n_theta: int = 64,
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform polar grid of an annulus avoiding the negative first axis.

    The angular cells adjacent to the crack faces (one on each side) are
    dropped.

    Returns:
        Points (n, 2), radii and angles.
    """
    r0, r1 = annulus
    n_r = max(1, n_samples // n_theta)
    dt = 2 * np.pi / n_theta
    th = -np.pi + (np.arange(n_theta) + 0.5) * dt
    th = th[np.abs(np.abs(th) - np.pi) > dt]
    r = r0 + (np.arange(n_r) + 0.5) * (r1 - r0) / n_r
    R, TH = np.meshgrid(r, th, indexing="ij")
    R, TH = R.ravel(), TH.ravel()
    return np.stack([R * np.cos(TH), R * np.sin(TH)], -1), R, TH


def _check_fit_inputs(annulus, n_samples, modes):
    if modes.convention != "theta-pm-pi":
        raise ValueError("blow-ups align the crack with the negative first axis; "
                         "use modes with angles in (-pi, pi]")
    r0, r1 = annulus
    if not (0 < r0 < r1):
        raise ValueError("annulus needs 0 < r_in < r_out")
    if n_samples < 64:
        raise ValueError("at least 64 samples are needed")


def _least_squares(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Normal equations with column scaling; returns coefficients and relative residual."""
    if A.shape[0] < A.shape[1]:
        raise ValueError("under-determined fit")
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0] = 1.0
    As = A / scale
    coef = cho_solve(cho_factor(As.T @ As), As.T @ b) / scale
    nb = np.linalg.norm(b)
    res = float(np.linalg.norm(A @ coef - b) / nb) if nb > 0 else 0.0
    return coef, res


@dataclass
class BlowUpFit:
    """Displacement mode fit at one blow-up radius.

    Attributes:
        eps: Blow-up radius.
        rot: Rotation angle used.
        kappa1: Coefficient of the opening mode.
        kappa2: Coefficient of the sliding mode.
        rigid: Rigid motion removed (in rescaled coordinates).
        residual: Relative L2 misfit on the samples.
        annulus: Fitting annulus in rescaled units.
    """

    eps: float
    rot: float
    kappa1: float
    kappa2: float
    rigid: RigidMotion
    residual: float
    annulus: tuple

    @property
    def kappa(self) -> np.ndarray:
        return np.array([self.kappa1, self.kappa2])

    def as_dict(self) -> dict:
        d = asdict(self)
        d["rigid"] = [self.rigid.a, self.rigid.b, self.rigid.c]
        d["annulus"] = list(self.annulus)
        return d


@dataclass
class AiryFit:
    """Airy mode fit at one blow-up radius; ``calibration`` is (a, b, c) of a + b y1 + c y2."""

    eps: float
    rot: float
    c1: float
    c2: float
    calibration: tuple
    residual: float
    annulus: tuple

    def as_dict(self) -> dict:
        d = asdict(self)
        d["calibration"] = list(self.calibration)
        d["annulus"] = list(self.annulus)
        return d


def displacement_design(modes: SingularModeSet, y: np.ndarray) -> np.ndarray:
    """Columns (kappa1, kappa2, a, b, c) of the displacement model, rows (x parts, y parts)."""
    r, th = modes.polar(y)
    f1, f2 = eval_displacement_modes(modes, th)
    sq = np.sqrt(r)[:, None]
    one, zero = np.ones(len(y)), np.zeros(len(y))
    cols = [sq * f1, sq * f2,
            np.stack([one, zero], -1), np.stack([zero, one], -1),
            np.stack([-y[:, 1], y[:, 0]], -1)]
    return np.stack([c.T.ravel() for c in cols], -1)


def airy_design(modes: SingularModeSet, y: np.ndarray) -> np.ndarray:
    """Columns (c1, c2, a, b, c) of the Airy model."""
    r, th = modes.polar(y)
    g1, g2 = eval_airy_modes(modes, th)
    r32 = r ** 1.5
    return np.stack([r32 * g1, r32 * g2, np.ones(len(y)), y[:, 0], y[:, 1]], -1)


def fit_modes(u: Field | Callable, eps: float, rot: float, annulus=DEFAULT_ANNULUS,
              n_samples: int = 2048, modes: SingularModeSet | None = None,
              locator: PointLocator | None = None) -> BlowUpFit:
    """Least-squares fit of the blown-up displacement by singular modes and a rigid motion.

    Args:
        u: Displacement field or vectorized function.
        eps: Blow-up radius.
        rot: Rotation angle aligning the crack.
        annulus: (r_in, r_out) in rescaled units.
        n_samples: Approximate number of sample points.
        modes: Mode set (default classical modes, angle in (-pi, pi]).
        locator: Optional cached point locator for ``u``.

    Raises:
        ValueError: Too few samples or an invalid annulus.
    """
    modes = modes or SingularModeSet()
    _check_fit_inputs(annulus, n_samples, modes)
    y, _, _ = annulus_grid(annulus, n_samples)
    vals = rescale_displacement(u, eps, rot, y, locator)
    b = vals.T.ravel()
    coef, res = _least_squares(displacement_design(modes, y), b)
    return BlowUpFit(float(eps), float(rot), float(coef[0]), float(coef[1]),
                     RigidMotion(float(coef[2]), float(coef[3]), float(coef[4])),
                     res, tuple(float(a) for a in annulus))


def fit_airy_modes(w: Field | Callable, eps: float, rot: float = 0.0, annulus=DEFAULT_ANNULUS,
                   n_samples: int = 2048, modes: SingularModeSet | None = None,
                   locator: PointLocator | None = None) -> AiryFit:
    """Least-squares fit of the blown-up Airy function by Airy modes and an affine function."""
    modes = modes or SingularModeSet()
    _check_fit_inputs(annulus, n_samples, modes)
    y, _, _ = annulus_grid(annulus, n_samples)
    vals = rescale_airy(w, eps, rot, y, locator)
    coef, res = _least_squares(airy_design(modes, y), vals)
    return AiryFit(float(eps), float(rot), float(coef[0]), float(coef[1]),
                   tuple(float(c) for c in coef[2:]), res, tuple(float(a) for a in annulus))


@dataclass
class ConvergenceTable:
    """Fits over a decreasing list of radii with successive coefficient changes."""

    fits: list
    kappa_steps: list

    def summary(self) -> dict:
        return {"fits": [f.as_dict() for f in self.fits],
                "kappa_steps": list(self.kappa_steps),
                "monotone_steps": bool(all(b <= a for a, b in
                                           zip(self.kappa_steps[:-1], self.kappa_steps[1:])))}


def convergence_table(u: Field, crack: CrackSet, eps_list, annulus=DEFAULT_ANNULUS,
                      n_samples: int = 2048, modes: SingularModeSet | None = None,
                      rotation_tol: float = 1e-3, jobs: int = 1) -> ConvergenceTable:
    """Fits the blow-ups of ``u`` for every radius, recomputing the rotation each time.

    Args:
        u: Solved displacement field.
        crack: The crack of the solved problem.
        eps_list: Strictly decreasing radii.
        annulus: Fitting annulus.
        n_samples: Samples per fit.
        modes: Mode set.
        rotation_tol: Accuracy of the blow-up rotation.
        jobs: Number of worker threads; results keep the order of ``eps_list``.

    Raises:
        ValueError: ``eps_list`` is not strictly decreasing.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list[:-1], eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    locator = PointLocator(u.mesh)

    def one(eps):
        rot = blowup_rotation(crack, eps, tol=rotation_tol)
        return fit_modes(u, eps, rot, annulus, n_samples, modes, locator)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            fits = list(ex.map(one, eps_list))
    else:
        fits = [one(e) for e in eps_list]
    steps = [float(np.linalg.norm(b.kappa - a.kappa)) for a, b in zip(fits[:-1], fits[1:])]
    return ConvergenceTable(fits, steps)


def write_table_csv(path: str | Path, fits) -> None:
    """Writes ``eps, rot, kappa1, kappa2, residual`` rows."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["eps", "rot", "kappa1", "kappa2", "residual"])
        for f in fits:
            wr.writerow([format(v, ".17g") for v in (f.eps, f.rot, f.kappa1, f.kappa2, f.residual)])


def write_summary_json(path: str | Path, table: ConvergenceTable) -> None:
    Path(path).write_text(json.dumps(table.summary(), indent=2, sort_keys=True) + "\n")
