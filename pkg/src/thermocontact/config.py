"""Run configuration: an INI file (stdlib ``configparser``) plus dotted overrides.

Schema (every key optional; unknown sections/keys are rejected)::

    [scenario]
    preset   = reference | decoupled | peel | manufactured
    n        = 32            # cells per side of the mesh
    sources  = true          # reference/decoupled only: body force on/off
    profile  = linear | exp  # manufactured only: time profile of the exact fields

    [solver]
    eps, mu, dt, t_end, fp_tol, fp_atol, fp_max_iter,
    newton_tol, newton_max_iter, active_set_max_iter, linear_tol

    [material]               # not allowed with the manufactured preset
    lame_lambda, lame_mu, visc_lambda, visc_mu,
    k0, k1, lam0, lam1, lam2, sigma_c, sigma_lo, sigma_hi,
    theta_eq, kappa_pen, law (logarithmic | power | linear), p_exp

    [initial]                # constant initial data, replacing the preset's
    w0, z0, chi0

    [output]
    dir = out
    emit_vtk = false
    vtk_every = 10

    [study]
    axis   = mu | eps | dt | h
    levels = 1e-1, 1e-2, 1e-3, 1e-4
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

_F, _I, _B, _S = float, int, "bool", str

SCHEMA = {
    "scenario": {"preset": _S, "n": _I, "sources": _B, "profile": _S},
    "solver": {
        "eps": _F, "mu": _F, "dt": _F, "t_end": _F, "fp_tol": _F, "fp_atol": _F,
        "fp_max_iter": _I, "newton_tol": _F, "newton_max_iter": _I,
        "active_set_max_iter": _I, "linear_tol": _F,
    },
    "material": {
        "lame_lambda": _F, "lame_mu": _F, "visc_lambda": _F, "visc_mu": _F,
        "k0": _F, "k1": _F, "lam0": _F, "lam1": _F, "lam2": _F,
        "sigma_c": _F, "sigma_lo": _F, "sigma_hi": _F, "theta_eq": _F,
        "kappa_pen": _F, "law": _S, "p_exp": _F,
    },
    "initial": {"w0": _F, "z0": _F, "chi0": _F},
    "output": {"dir": _S, "emit_vtk": _B, "vtk_every": _I},
    "study": {"axis": _S, "levels": "levels"},
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class Config:
    preset: str = "reference"
    n: int | None = None
    sources: bool = True
    profile: str = "linear"
    solver: dict = field(default_factory=dict)
    material: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    out_dir: str = "out"
    emit_vtk: bool = False
    vtk_every: int = 10
    study_axis: str | None = None
    study_levels: list = field(default_factory=list)


def _line_of(text: str, section: str, key: str | None):
    cur = None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if key is not None and cur == section and re.match(rf"^{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return i
    return None


def _convert(kind, raw: str, dotted: str, line):
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        if kind == "bool":
            v = raw.strip().lower()
            if v in _TRUE:
                return True
            if v in _FALSE:
                return False
            raise ValueError(raw)
        if kind == "levels":
            vals = [float(t) for t in re.split(r"[,\s]+", raw.strip()) if t]
            if not vals:
                raise ValueError(raw)
            return vals
        return raw.strip()
    except ValueError:
        raise ParseError(f"invalid value {raw!r}", key=dotted, line=line) from None


def _assign(cfg: Config, section: str, key: str, value) -> None:
    if section == "scenario":
        setattr(cfg, key, value)
    elif section in ("solver", "material", "initial"):
        getattr(cfg, section)[key] = value
    elif section == "output":
        setattr(cfg, {"dir": "out_dir"}.get(key, key), value)
    elif section == "study":
        setattr(cfg, f"study_{key}", value)


def parse_config(text: str, overrides=()) -> Config:
    """Parse INI text, apply ``section.key=value`` overrides, validate."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("missing section header", line=exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError("duplicate key", key=f"{exc.section}.{exc.option}", line=exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", line=exc.lineno) from None
    except configparser.Error as exc:
        raise ParseError(f"malformed configuration: {exc.message}") from None

    cfg = Config()
    for section in cp.sections():
        if section not in SCHEMA:
            raise ParseError(f"unknown section [{section}]", key=section, line=_line_of(text, section, None))
        for key, raw in cp.items(section):
            dotted = f"{section}.{key}"
            line = _line_of(text, section, key)
            if key not in SCHEMA[section]:
                raise ParseError(f"unknown key {key!r}", key=dotted, line=line)
            _assign(cfg, section, key, _convert(SCHEMA[section][key], raw, dotted, line))

    for item in overrides:
        if "=" not in item:
            raise ParseError(f"override {item!r} is not of the form section.key=value", key=item)
        dotted, raw = item.split("=", 1)
        dotted = dotted.strip()
        if "." not in dotted:
            raise ParseError("override keys are dotted (section.key)", key=dotted)
        section, key = dotted.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ParseError(f"unknown key {dotted!r}", key=dotted)
        _assign(cfg, section, key, _convert(SCHEMA[section][key], raw, dotted, None))

    validate(cfg)
    return cfg


def load_config(path, overrides=()) -> Config:
    with open(path) as fh:
        return parse_config(fh.read(), overrides)


def validate(cfg: Config) -> None:
    from .scenarios import PRESETS
    from .study import AXES

    if cfg.preset not in PRESETS:
        raise ValidationError(f"unknown preset {cfg.preset!r}; choose from {', '.join(PRESETS)}")
    if cfg.n is not None and cfg.n < 1:
        raise ValidationError("scenario.n must be a positive integer")
    if cfg.profile not in ("linear", "exp"):
        raise ValidationError("scenario.profile must be 'linear' or 'exp'")
    s = cfg.solver
    if "mu" in s and not s["mu"] > 0:
        raise ValidationError("solver.mu must be > 0")
    if "eps" in s and not s["eps"] >= 0:
        raise ValidationError("solver.eps must be >= 0")
    if "dt" in s and not s["dt"] > 0:
        raise ValidationError("solver.dt must be > 0")
    if "t_end" in s and not s["t_end"] >= 0:
        raise ValidationError("solver.t_end must be >= 0")
    for k in ("fp_tol", "newton_tol", "linear_tol"):
        if k in s and not s[k] > 0:
            raise ValidationError(f"solver.{k} must be > 0")
    for k in ("fp_max_iter", "newton_max_iter", "active_set_max_iter"):
        if k in s and s[k] < 1:
            raise ValidationError(f"solver.{k} must be >= 1")
    if cfg.material and cfg.preset == "manufactured":
        raise ValidationError("the manufactured preset has a fixed material; remove the [material] section")
    m = cfg.material
    if "law" in m and m["law"] not in ("logarithmic", "power", "linear"):
        raise ValidationError("material.law must be logarithmic, power or linear")
    if "chi0" in cfg.initial and not 0.0 <= cfg.initial["chi0"] <= 1.0:
        raise ValidationError("initial.chi0 must lie in [0, 1]")
    if cfg.vtk_every < 1:
        raise ValidationError("output.vtk_every must be >= 1")
    if cfg.study_axis is not None:
        if cfg.study_axis not in AXES:
            raise ValidationError(f"study.axis must be one of {', '.join(AXES)}")
        from .study import check_levels

        try:
            check_levels(cfg.study_axis, cfg.study_levels)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None


def build_scenario(cfg: Config):
    """Turn a validated :class:`Config` into a :class:`~thermocontact.stepper.Scenario`."""
    from dataclasses import replace

    from .assembly import ElasticityTensors
    from .constitutive import double_well_coeffs
    from .monotone import ThermalLaw
    from .scenarios import decoupled, manufactured_case, peel, reference

    kw = {}
    if cfg.n is not None:
        kw["n"] = cfg.n
    try:
        if cfg.preset == "manufactured":
            sc = manufactured_case(profile=cfg.profile, **kw, **cfg.solver)
        elif cfg.preset == "reference":
            sc = reference(sources=cfg.sources, **kw, **cfg.solver)
        elif cfg.preset == "decoupled":
            sc = decoupled(**kw, **cfg.solver)
            if not cfg.sources:
                sc = sc.with_(f=None)
        else:
            sc = peel(**kw, **cfg.solver)

        m = dict(cfg.material)
        if m:
            mat = sc.material
            K, Kv = mat.tensors.K, mat.tensors.K_v
            lame = {
                "lame_lambda": K[0, 0, 1, 1], "lame_mu": K[0, 1, 0, 1],
                "visc_lambda": Kv[0, 0, 1, 1], "visc_mu": Kv[0, 1, 0, 1],
            }
            changes = {}
            if any(k in m for k in lame):
                lame.update({k: m.pop(k) for k in list(m) if k in lame})
                changes["tensors"] = ElasticityTensors.isotropic(
                    lame["lame_lambda"], lame["lame_mu"], lame["visc_lambda"], lame["visc_mu"]
                )
            lam = list(mat.lam)
            for i, k in enumerate(("lam0", "lam1", "lam2")):
                if k in m:
                    lam[i] = m.pop(k)
            changes["lam"] = tuple(lam)
            if "sigma_c" in m:
                changes["sigma_coeffs"] = double_well_coeffs(m.pop("sigma_c"))
            lo, hi = mat.sigma_window
            changes["sigma_window"] = (m.pop("sigma_lo", lo), m.pop("sigma_hi", hi))
            if "law" in m or "p_exp" in m:
                law = m.pop("law", mat.thermal_law.kind)
                p_exp = m.pop("p_exp", mat.thermal_law.p_exp)
                changes["thermal_law"] = {
                    "logarithmic": ThermalLaw.logarithmic,
                    "linear": ThermalLaw.linear,
                }.get(law, lambda: ThermalLaw.power(p_exp))()
            changes.update(m)  # k0, k1, theta_eq, kappa_pen
            sc = sc.with_(material=replace(mat, **changes))
        if cfg.initial:
            sc = sc.with_(**cfg.initial)
        return sc
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
