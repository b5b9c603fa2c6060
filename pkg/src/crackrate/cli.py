"""Command-line driver: ``crackrate <subcommand> --config FILE [--jobs N] [--out DIR]``.

Subcommands solve, airy, blowup, err, limit and spectrum each write their
artifacts under the output directory; ``all`` runs them in sequence sharing
the primary solve, and ``validate`` only checks the configuration. Every run
ends with ``manifest.json`` listing each written file with its sha256.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 I/O failure. Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from .airy_dual import (arc_poincare_check, conjugate_misfit, crack_trace_norms, decay_profile,
                        dual_potentials, profile_spread, verify_hessian)
from .blowup import convergence_table, fit_airy_modes, write_table_csv
from .config import ConfigError, Diagnostic, ScenarioConfig, load_config, validate
from .core_model import CrackSet, ElasticMaterial, RigidMotion, blowup_rotation
from .err import (IncrementFamily, MeshSpec, g_eps, irwin_rate, limit_functional, limit_mesh_spec,
                  r_independence_check, sweep_window, write_sweep_csv)
from .fem_solver import (BoundaryData, Field, SingularSystemError, elastic_energy, solve_dirichlet,
                         stress_recovery, write_vtk)
from .mesh import build_disk_mesh
from .pencil_spectrum import (audit_json, audit_published_modes, audit_text, eigvecs_json,
                              spectrum_in_interval)
from .singular_fields import SingularDisplacement, SingularModeSet, kappa_to_airy_matrix

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
STEPS = ("solve", "airy", "blowup", "err", "limit", "spectrum")
VERSIONED = ("numpy", "scipy", "triangle", "cvxopt")


def _plain(obj):
    """Converts numpy containers and scalars to JSON-ready Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def module_versions() -> dict:
    out = {"crackrate": __version__}
    for name in VERSIONED:
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = "unknown"
    return out


class Scenario:
    """Runs the steps of one configuration, caching shared intermediate results.

    Args:
        cfg: Validated configuration.
        out: Output directory.
        jobs: Worker threads for independent sweeps.
    """

    def __init__(self, cfg: ScenarioConfig, out: Path, jobs: int = 1):
        self.cfg = cfg
        self.out = Path(out)
        self.jobs = max(1, int(jobs))
        self.mat = ElasticMaterial(cfg.material.lam, cfg.material.mu)
        self.crack = cfg.crack_set()
        self.written: list[Path] = []
        self.results: dict = {}
        self._u = None
        self._stress = None
        self._pp = None

    # -- helpers ------------------------------------------------------------

    def modes(self, convention: str | None = None) -> SingularModeSet:
        b = self.cfg.boundary
        return SingularModeSet(self.mat, convention or b.convention, b.variant)

    def boundary_data(self) -> BoundaryData:
        b = self.cfg.boundary
        if b.kind == "zero":
            return BoundaryData.zero()
        if b.kind == "rigid":
            return BoundaryData.rigid(RigidMotion(*map(float, b.rigid)))
        if b.kind == "table":
            return BoundaryData.table(b.angles, b.values)
        return BoundaryData.singular(SingularDisplacement(self.modes(), *map(float, b.kappa)))

    def _write_json(self, name: str, data) -> None:
        p = self.out / name
        p.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")
        self.written.append(p)

    def _write_csv(self, name: str, header, rows) -> None:
        p = self.out / name
        with open(p, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            for row in rows:
                wr.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
        self.written.append(p)

    def _track(self, name: str) -> Path:
        p = self.out / name
        self.written.append(p)
        return p

    def primary(self) -> tuple[Field, Field]:
        """Displacement and element stress of the configured problem (cached)."""
        if self._u is None:
            m = self.cfg.mesh
            mesh = build_disk_mesh(m.R, self.crack, m.h, m.grading, levels=m.levels)
            info: list = []
            self._u = solve_dirichlet(mesh, self.mat, self.boundary_data(), m.order, info)
            self._stress = stress_recovery(self._u, self.mat)
            self._info = info[0]
        return self._u, self._stress

    def potentials(self):
        if self._pp is None:
            _, stress = self.primary()
            self._pp = dual_potentials(stress, self.cfg.airy.order)
        return self._pp

    # -- steps --------------------------------------------------------------

    def solve(self) -> dict:
        u, stress = self.primary()
        energy = elastic_energy(u, self.mat)
        summary = dict(self._info.as_dict(), energy=energy, boundary=self.cfg.boundary.kind)
        self._write_json("solve.json", summary)
        write_vtk(self._track("solution.vtk"), u.mesh, point_vectors={"displacement": u.values},
                  cell_tensors={"stress": stress.values})
        self.results["solve"] = {"energy": energy}
        return summary

    def airy(self) -> dict:
        _, stress = self.primary()
        pp = self.potentials()
        a = self.cfg.airy
        hm = verify_hessian(pp.w0, stress)
        tn = crack_trace_norms(pp.w0)
        profile = decay_profile(stress, sorted(a.radii))
        pc = arc_poincare_check(pp.v0, a.poincare_radius, self.crack)
        summary = {
            "loop_residual": pp.loop_residual,
            "conjugate_misfit": conjugate_misfit(pp, stress),
            "hessian_misfit": {"absolute": hm.absolute, "relative": hm.relative,
                               "annuli": hm.annuli},
            "trace_norms": {"value": tn.value_norm, "gradient": tn.gradient_norm,
                            "value_ratio": tn.value_ratio, "gradient_ratio": tn.gradient_ratio},
            "decay_profile": profile,
            "decay_spread": profile_spread(profile),
            "poincare": {"radius": a.poincare_radius, "lhs_max": pc.lhs_max, "rhs": pc.rhs,
                         "holds": pc.holds()},
        }
        self._write_json("airy.json", summary)
        self._write_csv("decay_profile.csv", ["rho", "energy_over_rho"],
                        [(float(r), float(v)) for r, v in profile])
        self._write_csv("hessian_annuli.csv", ["r_in", "r_out", "relative_misfit"],
                        [tuple(float(x) for x in row) for row in hm.annuli])
        write_vtk(self._track("airy.vtk"), pp.w0.mesh,
                  point_scalars={"p1": pp.p1.values, "p2": pp.p2.values, "w0": pp.w0.values})
        self.results["airy"] = {"hessian_relative_misfit": hm.relative,
                                "decay_spread": summary["decay_spread"]}
        return summary

    def blowup(self) -> dict:
        u, _ = self.primary()
        b = self.cfg.blowup
        modes = SingularModeSet(self.mat, "theta-pm-pi", self.cfg.boundary.variant)
        table = convergence_table(u, self.crack, b.eps, tuple(b.annulus), b.n_samples, modes,
                                  jobs=self.jobs)
        summary = table.summary()
        airy_fits = []
        if b.airy_eps:
            w0 = self.potentials().w0
            for eps in b.airy_eps:
                rot = blowup_rotation(self.crack, eps)
                airy_fits.append(fit_airy_modes(w0, eps, rot, tuple(b.annulus), b.n_samples,
                                                modes).as_dict())
        summary["airy_fits"] = airy_fits
        if self.cfg.boundary.kind == "singular":
            k = np.array(self.cfg.boundary.kappa, dtype=float)
            summary["expected"] = {"kappa": k, "airy": kappa_to_airy_matrix(modes) @ k}
        write_table_csv(self._track("blowup.csv"), table.fits)
        self._write_json("blowup.json", summary)
        last = table.fits[-1]
        self.results["blowup"] = {"kappa": [last.kappa1, last.kappa2], "residual": last.residual}
        return summary

    def err(self) -> dict:
        e, m = self.cfg.err, self.cfg.mesh
        family = IncrementFamily(e.family, tuple(float(a) for a in e.angles), e.split,
                                 e.refine, e.include_circle)
        spec = MeshSpec(h=m.h, grading=m.grading, levels=m.levels)
        bd = self.boundary_data()
        results = [g_eps(self.crack, family, eps, m.R, spec, self.mat, bd, jobs=self.jobs)
                   for eps in e.eps]
        collinear = []
        for r in results:
            for c in r.candidates:
                if c.label == "segment" and c.params == (0.0,):
                    collinear.append({"eps": r.eps, "G_over_eps": c.G_over_eps})
        lo, hi = sweep_window(results)
        summary = {"results": [r.as_dict() for r in results], "collinear": collinear,
                   "window": {"G_lower": lo, "G_upper": hi},
                   "below_circle_bound": all(r.circle is None or r.g_eps <= r.circle.bound
                                             for r in results)}
        write_sweep_csv(self._track("err_sweep.csv"), results)
        self._write_json("err.json", summary)
        self.results["err"] = {"g_eps": [r.g_eps for r in results]}
        return summary

    def limit(self) -> dict:
        lim = self.cfg.limit
        inc = CrackSet(tuple(np.array(c, dtype=float) for c in lim.increment)) \
            if lim.increment else CrackSet.empty()
        kappa = np.array(lim.kappa, dtype=float)

        def value(k, R_out):
            spec = limit_mesh_spec(lim.R, R_out, lim.h)
            return limit_functional(inc, tuple(k), lim.R, R_out, spec, self.mat)

        base = value(kappa, lim.R_out)
        doubled = value(kappa, 2 * lim.R_out)
        scaled = [{"t": float(t), "value": value(t * kappa, lim.R_out).value}
                  for t in lim.scale_factors]
        spread, vals = r_independence_check(
            inc, tuple(kappa), lim.R_list, lim.R_out,
            limit_mesh_spec(min(lim.R_list), lim.R_out, lim.h), self.mat)
        summary = {
            "value": base.as_dict(),
            "doubled_R_out": doubled.as_dict(),
            "doubling_change": abs(doubled.value - base.value) / max(abs(base.value), 1e-300),
            "scaling": scaled,
            "r_independence": {"R": list(lim.R_list), "values": vals, "spread": spread},
            "irwin_collinear_unit_rate": -irwin_rate(kappa, self.mat),
        }
        self._write_json("limit.json", summary)
        self.results["limit"] = {"F": base.value}
        return summary

    def spectrum(self) -> dict:
        s = self.cfg.spectrum
        entries = spectrum_in_interval(s.interval[0], s.interval[1], s.convention, s.tol,
                                       rank_tol=s.rank_tol)
        self._write_csv("spectrum.csv", ["lambda", "multiplicity"],
                        [(float(e.lam), int(e.multiplicity)) for e in entries])
        self._write_json("eigvecs.json", eigvecs_json(entries))
        report = audit_published_modes()
        p = self._track("audit.txt")
        p.write_text(audit_text(report))
        p = self._track("audit.json")
        p.write_text(audit_json(report))
        self.results["spectrum"] = {"roots": [e.lam for e in entries],
                                    "multiplicities": [e.multiplicity for e in entries]}
        return {"entries": len(entries)}

    def run(self, steps) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        for step in steps:
            getattr(self, step)()
        self.write_manifest(steps)

    def write_manifest(self, steps) -> Path:
        files = sorted({p.resolve() for p in self.written})
        manifest = {
            "config_sha256": self.cfg.digest(),
            "steps": list(steps),
            "versions": module_versions(),
            "files": [{"path": p.relative_to(self.out.resolve()).as_posix(),
                       "sha256": _sha256(p), "bytes": p.stat().st_size} for p in files],
            "results": self.results,
        }
        path = self.out / "manifest.json"
        path.write_text(json.dumps(_plain(manifest), indent=2, sort_keys=True) + "\n")
        return path


def _fail(code: int, kind: str, message: str, diagnostics=()) -> int:
    err = {"status": "error", "kind": kind, "exit_code": code, "message": message,
           "diagnostics": [d.__dict__ for d in diagnostics]}
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crackrate", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=STEPS + ("all", "validate"))
    ap.add_argument("--config", required=True, help="TOML or JSON scenario file")
    ap.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps")
    ap.add_argument("--out", default=None, help="output directory (overrides the config)")
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "run":
        argv = argv[1:]
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc),
                     [Diagnostic("error", exc.field, exc.message)])
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    diags = validate(cfg)
    errors = [d for d in diags if d.severity == "error"]
    if args.subcommand == "validate":
        print(json.dumps({"valid": not errors, "diagnostics": [d.__dict__ for d in diags]},
                         indent=2, sort_keys=True))
        return EXIT_CONFIG if errors else EXIT_OK
    if errors:
        return _fail(EXIT_CONFIG, "config", f"{len(errors)} invalid field(s)", errors)
    if args.jobs < 1:
        return _fail(EXIT_CONFIG, "config", "--jobs must be at least 1")
    steps = STEPS if args.subcommand == "all" else (args.subcommand,)
    sc = Scenario(cfg, Path(args.out or cfg.out), args.jobs)
    try:
        sc.run(steps)
    except (SingularSystemError, FloatingPointError, np.linalg.LinAlgError, ValueError,
            ArithmeticError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", f"{type(exc).__name__}: {exc}")
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    print(json.dumps({"status": "ok", "manifest": str(sc.out / "manifest.json")}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
