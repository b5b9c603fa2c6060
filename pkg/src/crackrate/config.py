"""Scenario configuration: TOML (or JSON) files mapped onto dataclasses.

Every block has defaults, so an empty file is a valid scenario (a straight
crack in the unit disk loaded by the opening mode).
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .core_model import CrackSet
from .singular_fields import CONVENTIONS, VARIANTS


@dataclass
class MaterialBlock:
    lam: float = 1.0
    mu: float = 1.0


@dataclass
class CrackBlock:
    chains: list = field(default_factory=lambda: [[[0.0, 0.0], [-1.0, 0.0]]])


@dataclass
class BoundaryBlock:
    """Outer displacement: ``zero``, ``rigid`` (a, b, c), ``singular`` (kappa) or ``table``."""

    kind: str = "singular"
    kappa: list = field(default_factory=lambda: [1.0, 0.0])
    rigid: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    angles: list = field(default_factory=list)
    values: list = field(default_factory=list)
    convention: str = "theta-pm-pi"
    variant: str = "classical"


@dataclass
class MeshBlock:
    R: float = 1.0
    h: float = 0.02
    grading: float = 0.5
    levels: int = 8
    order: int = 1


@dataclass
class AiryBlock:
    radii: list = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4])
    poincare_radius: float = 0.3
    order: int = 2


@dataclass
class BlowupBlock:
    eps: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    annulus: list = field(default_factory=lambda: [0.5, 1.0])
    n_samples: int = 2048
    airy_eps: list = field(default_factory=lambda: [0.2, 0.1])


@dataclass
class ErrBlock:
    eps: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    family: str = "segment"
    angles: list = field(default_factory=lambda: [float(a) for a in
                                                  np.pi / 2 * np.arange(-3, 4) / 3])
    split: float = 0.5
    refine: bool = True
    include_circle: bool = True


@dataclass
class LimitBlock:
    increment: list = field(default_factory=lambda: [[[0.0, 0.0], [1.0, 0.0]]])
    kappa: list = field(default_factory=lambda: [1.0, 0.0])
    R: float = 2.0
    R_out: float = 256.0
    R_list: list = field(default_factory=lambda: [2.0, 3.0, 4.0])
    h: float = 0.05
    scale_factors: list = field(default_factory=lambda: [1.0, 2.0, 3.0])


@dataclass
class SpectrumBlock:
    interval: list = field(default_factory=lambda: [0.4, 3.6])
    convention: str = "theta-pm-pi"
    tol: float = 1e-10
    rank_tol: float = 1e-8


_BLOCKS = {"material": MaterialBlock, "crack": CrackBlock, "boundary": BoundaryBlock,
           "mesh": MeshBlock, "airy": AiryBlock, "blowup": BlowupBlock, "err": ErrBlock,
           "limit": LimitBlock, "spectrum": SpectrumBlock}


@dataclass
class ScenarioConfig:
    """Complete description of one scenario."""

    material: MaterialBlock = field(default_factory=MaterialBlock)
    crack: CrackBlock = field(default_factory=CrackBlock)
    boundary: BoundaryBlock = field(default_factory=BoundaryBlock)
    mesh: MeshBlock = field(default_factory=MeshBlock)
    airy: AiryBlock = field(default_factory=AiryBlock)
    blowup: BlowupBlock = field(default_factory=BlowupBlock)
    err: ErrBlock = field(default_factory=ErrBlock)
    limit: LimitBlock = field(default_factory=LimitBlock)
    spectrum: SpectrumBlock = field(default_factory=SpectrumBlock)
    out: str = "out"
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        """Builds a config; unknown keys raise ConfigError."""
        data = dict(data)
        kw = {}
        for name, block_cls in _BLOCKS.items():
            raw = data.pop(name, {})
            if not isinstance(raw, dict):
                raise ConfigError(name, "must be a table")
            known = {f.name for f in fields(block_cls)}
            extra = set(raw) - known
            if extra:
                raise ConfigError(f"{name}.{sorted(extra)[0]}", "unknown key")
            kw[name] = block_cls(**raw)
        for key in ("out", "seed"):
            if key in data:
                kw[key] = data.pop(key)
        if data:
            raise ConfigError(sorted(data)[0], "unknown key")
        return cls(**kw)

    def crack_set(self) -> CrackSet:
        return CrackSet(tuple(np.array(c, dtype=float) for c in self.crack.chains))

    def digest(self) -> str:
        """sha256 of the canonical JSON encoding."""
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def load_config(path: str | Path) -> ScenarioConfig:
    """Reads a TOML file (or JSON when the suffix is .json).

    Raises:
        ConfigError: Syntax errors or unknown keys.
        OSError: The file cannot be read.
    """
    p = Path(path)
    text = p.read_text()
    try:
        data = json.loads(text) if p.suffix.lower() == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("<file>", f"parse error: {exc}") from exc
    try:
        return ScenarioConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError("<file>", str(exc)) from exc


def dump_config(cfg: ScenarioConfig, path: str | Path) -> None:
    """Writes TOML (or JSON for a .json suffix)."""
    p = Path(path)
    d = cfg.to_dict()
    if p.suffix.lower() == ".json":
        p.write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
    else:
        p.write_text(tomli_w.dumps(d))


@dataclass
class Diagnostic:
    severity: str
    field: str
    message: str


def _positive(diags, name, value):
    if not (isinstance(value, (int, float)) and np.isfinite(value) and value > 0):
        diags.append(Diagnostic("error", name, "must be a positive number"))
        return False
    return True


def _chains_ok(diags, name, chains) -> CrackSet | None:
    try:
        c = CrackSet(tuple(np.array(x, dtype=float) for x in chains))
    except (ValueError, TypeError) as exc:
        diags.append(Diagnostic("error", name, str(exc)))
        return None
    try:
        c.check_admissible()
    except ValueError as exc:
        diags.append(Diagnostic("error", name, str(exc)))
        return None
    return c


def validate(cfg: ScenarioConfig) -> list[Diagnostic]:
    """Checks every constraint without running any solver.

    Returns:
        Diagnostics; an empty list means the config is valid.
    """
    d: list[Diagnostic] = []
    m = cfg.material
    _positive(d, "material.lam", m.lam)
    _positive(d, "material.mu", m.mu)

    mesh = cfg.mesh
    _positive(d, "mesh.R", mesh.R)
    _positive(d, "mesh.h", mesh.h)
    if not (0 < mesh.grading <= 1):
        d.append(Diagnostic("error", "mesh.grading", "must lie in (0, 1]"))
    if mesh.order not in (1, 2):
        d.append(Diagnostic("error", "mesh.order", "must be 1 or 2"))
    if not (isinstance(mesh.levels, int) and mesh.levels >= 0):
        d.append(Diagnostic("error", "mesh.levels", "must be a non-negative integer"))

    crack = _chains_ok(d, "crack.chains", cfg.crack.chains)
    if crack is not None and not crack.is_empty and mesh.R > 0:
        if np.linalg.norm(crack.segments(), axis=2).max() > mesh.R * (1 + 1e-12):
            d.append(Diagnostic("warning", "crack.chains", "parts outside B_R are clipped"))

    b = cfg.boundary
    if b.kind not in ("zero", "rigid", "singular", "table"):
        d.append(Diagnostic("error", "boundary.kind", "must be zero, rigid, singular or table"))
    if len(b.kappa) != 2:
        d.append(Diagnostic("error", "boundary.kappa", "needs two coefficients"))
    if len(b.rigid) != 3:
        d.append(Diagnostic("error", "boundary.rigid", "needs three coefficients (a, b, c)"))
    if b.convention not in CONVENTIONS:
        d.append(Diagnostic("error", "boundary.convention", f"must be one of {CONVENTIONS}"))
    if b.variant not in VARIANTS:
        d.append(Diagnostic("error", "boundary.variant", f"must be one of {VARIANTS}"))
    if b.kind == "table":
        if len(b.angles) < 2 or len(b.angles) != len(b.values) or any(len(v) != 2 for v in b.values):
            d.append(Diagnostic("error", "boundary.values",
                                "table needs matching angles and 2-vector values"))

    a = cfg.airy
    if a.order not in (1, 2):
        d.append(Diagnostic("error", "airy.order", "must be 1 or 2"))
    rs = sorted(a.radii)
    if not rs or rs[0] <= 0 or rs[-1] > mesh.R:
        d.append(Diagnostic("error", "airy.radii", "radii must lie in (0, R]"))
    elif any(y < 2 * x * (1 - 1e-12) for x, y in zip(rs[:-1], rs[1:])):
        d.append(Diagnostic("error", "airy.radii", "consecutive radii must differ by a factor 2"))
    if not (0 < a.poincare_radius < mesh.R):
        d.append(Diagnostic("error", "airy.poincare_radius", "must lie in (0, R)"))

    bl = cfg.blowup
    if len(bl.annulus) != 2 or not (0 < bl.annulus[0] < bl.annulus[1] <= 1):
        d.append(Diagnostic("error", "blowup.annulus", "annulus must satisfy 0 < r_in < r_out <= 1"))
    for name, eps in (("blowup.eps", bl.eps), ("blowup.airy_eps", bl.airy_eps)):
        if any(e <= 0 or e > mesh.R for e in eps):
            d.append(Diagnostic("error", name, "radii must lie in (0, R]"))
    if any(y >= x for x, y in zip(bl.eps[:-1], bl.eps[1:])):
        d.append(Diagnostic("error", "blowup.eps", "must be strictly decreasing"))
    if bl.n_samples < 64:
        d.append(Diagnostic("error", "blowup.n_samples", "at least 64 samples are needed"))

    e = cfg.err
    if e.family not in ("segment", "kink", "circle"):
        d.append(Diagnostic("error", "err.family", "must be segment, kink or circle"))
    if any(x <= 0 or 2 * x >= mesh.R for x in e.eps):
        d.append(Diagnostic("error", "err.eps", "B_{2 eps} must fit inside the disk"))
    if not (0 < e.split < 1):
        d.append(Diagnostic("error", "err.split", "must lie in (0, 1)"))

    lim = cfg.limit
    inc = _chains_ok(d, "limit.increment", lim.increment) if lim.increment else CrackSet.empty()
    radii = [lim.R] + list(lim.R_list)
    if any(r <= 0 for r in radii):
        d.append(Diagnostic("error", "limit.R", "radii must be positive"))
    elif lim.R_out < 8 * max(radii) * (1 - 1e-12):
        d.append(Diagnostic("error", "limit.R_out", "must be at least 8 times every forcing radius"))
    if inc is not None and not inc.is_empty and min(radii) > 0:
        reach = float(np.linalg.norm(inc.segments(), axis=2).max())
        if reach >= min(radii):
            d.append(Diagnostic("error", "limit.increment", "increment must lie inside B_R"))
    if len(lim.kappa) != 2:
        d.append(Diagnostic("error", "limit.kappa", "needs two coefficients"))
    _positive(d, "limit.h", lim.h)

    s = cfg.spectrum
    if len(s.interval) != 2 or not s.interval[0] < s.interval[1]:
        d.append(Diagnostic("error", "spectrum.interval", "needs a < b"))
    if s.convention not in CONVENTIONS:
        d.append(Diagnostic("error", "spectrum.convention", f"must be one of {CONVENTIONS}"))
    return d


def _type_name(value) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "string"
    return "array"


def schema() -> dict:
    """Field names, types and defaults of every block, derived from the dataclasses."""
    default = ScenarioConfig().to_dict()
    out = {}
    for key, value in default.items():
        if isinstance(value, dict):
            out[key] = {k: {"type": _type_name(v), "default": v} for k, v in value.items()}
        else:
            out[key] = {"type": _type_name(value), "default": value}
    return out
