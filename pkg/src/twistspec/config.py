"""Experiment configuration: a YAML document validated into dataclasses.

Schema (every block optional, defaults shown)::

    profile:
      name: linear            # linear | quadratic | sqrt | constant | vanishing | exponential
      params: {}              # e.g. {c: 1.0}
      derivatives: 3          # how many derivatives of theta are supplied (1..3)
    cross_section: {a1: -1.0, a2: 1.0}
    transverse:
      s: [0, 4, 16, 64, 256]
      cells: 2048
      quantities: []          # gauss_curvature | mean_curvature | v1 | v2
      t_probe: null           # t at which quantities are sampled; default (a1+a2)/2
    effective:
      m: [0, 0.5, 1, 2]
      k: 3
      cells: 2048
      refine: true
      tol: 1.0e-8
    spectrum2d:
      S: [6, 12, 24]
      density: 16             # s-cells per unit length; 2*S*density must be an integer
      nt: 64
      count: 4
      margin: 0.0
      tol: 1.0e-8
    gap:
      n: [4, 8, 16, 32, 64]
      s_panel: 1.0
    weyl:
      m: [0, 1]
      n: [2, 4, 8]
      nt: 64
    verify:
      tolerances: {}          # overrides, see twistspec.acceptance.DEFAULT_TOLERANCES
    output:
      path: results
      format: csv             # csv | json

Validation errors carry the line of the offending key.
"""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigurationError
from .geometry import PROFILES, CrossSection, make_profile

QUANTITIES = ("gauss_curvature", "mean_curvature", "v1", "v2")
FORMATS = ("csv", "json")


@dataclass
class ProfileSpec:
    name: str = "linear"
    params: dict = field(default_factory=dict)
    derivatives: int = 3

    def build(self):
        p = make_profile(self.name, **self.params)
        drop = {}
        if self.derivatives < 3:
            drop["d3theta"] = None
        if self.derivatives < 2:
            drop["d2theta"] = None
        return dataclasses.replace(p, **drop) if drop else p


@dataclass
class CrossSectionSpec:
    a1: float = -1.0
    a2: float = 1.0

    def build(self):
        return CrossSection(self.a1, self.a2)


@dataclass
class TransverseBlock:
    s: list = field(default_factory=lambda: [0.0, 4.0, 16.0, 64.0, 256.0])
    cells: int = 2048
    quantities: list = field(default_factory=list)
    t_probe: float | None = None


@dataclass
class EffectiveBlock:
    m: list = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0])
    k: int = 3
    cells: int = 2048
    refine: bool = True
    tol: float = 1e-8


@dataclass
class Spectrum2DBlock:
    S: list = field(default_factory=lambda: [6.0, 12.0, 24.0])
    density: float = 16.0
    nt: int = 64
    count: int = 4
    margin: float = 0.0
    tol: float = 1e-8


@dataclass
class GapBlock:
    n: list = field(default_factory=lambda: [4, 8, 16, 32, 64])
    s_panel: float = 1.0


@dataclass
class WeylBlock:
    m: list = field(default_factory=lambda: [0.0, 1.0])
    n: list = field(default_factory=lambda: [2, 4, 8])
    nt: int = 64


@dataclass
class VerifyBlock:
    tolerances: dict = field(default_factory=dict)


@dataclass
class OutputBlock:
    path: str = "results"
    format: str = "csv"


@dataclass
class ExperimentConfig:
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    cross_section: CrossSectionSpec = field(default_factory=CrossSectionSpec)
    transverse: TransverseBlock = field(default_factory=TransverseBlock)
    effective: EffectiveBlock = field(default_factory=EffectiveBlock)
    spectrum2d: Spectrum2DBlock = field(default_factory=Spectrum2DBlock)
    gap: GapBlock = field(default_factory=GapBlock)
    weyl: WeylBlock = field(default_factory=WeylBlock)
    verify: VerifyBlock = field(default_factory=VerifyBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    source: str = field(default="<defaults>", compare=False, repr=False)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("source")
        return d

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def build_profile(self):
        return self.profile.build()

    def build_cross_section(self):
        return self.cross_section.build()


# -- loading ---------------------------------------------------------------------------

class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e-8`` as a float (YAML 1.1 wants ``1.0e-8``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


class _Lines:
    """Maps key paths such as ("spectrum2d", "S") to 1-based source lines."""

    def __init__(self, node, source):
        self.source = source
        self.lines = {}
        self._walk(node, ())

    def _walk(self, node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = path + (k.value,)
                self.lines[key] = k.start_mark.line + 1
                self._walk(v, key)

    def error(self, path, message):
        line = None
        for i in range(len(path), 0, -1):
            line = self.lines.get(tuple(path[:i]))
            if line is not None:
                break
        where = f"{self.source}:{line}" if line else self.source
        return ConfigurationError(f"{where}: {'.'.join(path) or '<root>'}: {message}")


def _coerce(value, default, path, lines):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise lines.error(path, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise lines.error(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or (default is None and path[-1] == "t_probe"):
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise lines.error(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise lines.error(path, "must be finite")
        return float(value)
    if isinstance(default, list):
        # an empty default (quantities) means the list is optional
        if not isinstance(value, list) or (default and not value):
            raise lines.error(path, "expected a non-empty list")
        return list(value)
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise lines.error(path, "expected a mapping")
        return dict(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise lines.error(path, f"expected a string, got {value!r}")
        return value
    return value


def _block(cls, raw, path, lines):
    obj = cls()
    if raw is None:
        return obj
    if not isinstance(raw, dict):
        raise lines.error(path, "expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    for key, value in raw.items():
        if key not in names:
            raise lines.error(path + (str(key),), f"unknown key; expected one of {sorted(names)}")
        setattr(obj, key, _coerce(value, getattr(obj, key), path + (key,), lines))
    return obj


def _numbers(values, path, lines, integer=False, positive=False):
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise lines.error(path, f"expected numbers, got {v!r}")
        if integer and (int(v) != v):
            raise lines.error(path, f"expected integers, got {v!r}")
        if positive and v <= 0:
            raise lines.error(path, f"values must be positive, got {v!r}")
        out.append(int(v) if integer else float(v))
    return out


_BLOCKS = {
    "profile": ProfileSpec, "cross_section": CrossSectionSpec, "transverse": TransverseBlock,
    "effective": EffectiveBlock, "spectrum2d": Spectrum2DBlock, "gap": GapBlock,
    "weyl": WeylBlock, "verify": VerifyBlock, "output": OutputBlock,
}


def _validate(cfg, lines):
    from .acceptance import DEFAULT_TOLERANCES

    ps = cfg.profile
    if ps.name not in PROFILES:
        raise lines.error(("profile", "name"), f"unknown profile {ps.name!r}; choose from {sorted(PROFILES)}")
    if ps.derivatives not in (1, 2, 3):
        raise lines.error(("profile", "derivatives"), "must be 1, 2 or 3")
    try:
        ps.build()
    except ConfigurationError as exc:
        raise lines.error(("profile", "params"), str(exc)) from None

    cs = cfg.cross_section
    if not cs.a1 < cs.a2:
        raise lines.error(("cross_section", "a1"), f"need a1 < a2, got a1={cs.a1!r}, a2={cs.a2!r}")

    tr = cfg.transverse
    tr.s = _numbers(tr.s, ("transverse", "s"), lines)
    for q in tr.quantities:
        if q not in QUANTITIES:
            raise lines.error(("transverse", "quantities"), f"unknown quantity {q!r}; choose from {QUANTITIES}")
    need = {"mean_curvature": 2, "v1": 3}
    for q in tr.quantities:
        if ps.derivatives < need.get(q, 1):
            raise lines.error(("transverse", "quantities"),
                              f"{q} needs {need[q]} derivatives of theta but the profile supplies {ps.derivatives}")
    if tr.cells < 16:
        raise lines.error(("transverse", "cells"), "needs at least 16 cells")
    if tr.t_probe is not None and not cs.a1 <= tr.t_probe <= cs.a2:
        raise lines.error(("transverse", "t_probe"), "must lie in [a1, a2]")

    ef = cfg.effective
    ef.m = _numbers(ef.m, ("effective", "m"), lines)
    if ef.k < 1:
        raise lines.error(("effective", "k"), "must be >= 1")
    if ef.cells < 16:
        raise lines.error(("effective", "cells"), "needs at least 16 cells")
    if not ef.tol > 0:
        raise lines.error(("effective", "tol"), "tolerance must be positive")

    sp = cfg.spectrum2d
    sp.S = _numbers(sp.S, ("spectrum2d", "S"), lines, positive=True)
    if any(b <= a for a, b in zip(sp.S, sp.S[1:])):
        raise lines.error(("spectrum2d", "S"), "must be strictly increasing")
    if not sp.density > 0:
        raise lines.error(("spectrum2d", "density"), "must be positive")
    for S in sp.S:
        cells = 2 * S * sp.density
        if abs(cells - round(cells)) > 1e-9 or round(cells) < 16:
            raise lines.error(("spectrum2d", "density"),
                              f"2*S*density must be an integer >= 16 (S={S!r})")
    if sp.nt < 16:
        raise lines.error(("spectrum2d", "nt"), "needs at least 16 cells")
    if sp.count < 1:
        raise lines.error(("spectrum2d", "count"), "must be >= 1")
    if not sp.tol > 0:
        raise lines.error(("spectrum2d", "tol"), "tolerance must be positive")
    if sp.margin < 0:
        raise lines.error(("spectrum2d", "margin"), "must be >= 0")

    cfg.gap.n = _numbers(cfg.gap.n, ("gap", "n"), lines, integer=True, positive=True)
    if not cfg.gap.s_panel > 0:
        raise lines.error(("gap", "s_panel"), "must be positive")
    cfg.weyl.m = _numbers(cfg.weyl.m, ("weyl", "m"), lines)
    cfg.weyl.n = _numbers(cfg.weyl.n, ("weyl", "n"), lines, integer=True, positive=True)
    if cfg.weyl.nt < 16:
        raise lines.error(("weyl", "nt"), "needs at least 16 cells")

    for key, value in cfg.verify.tolerances.items():
        if key not in DEFAULT_TOLERANCES:
            raise lines.error(("verify", "tolerances", str(key)),
                              f"unknown tolerance; expected one of {sorted(DEFAULT_TOLERANCES)}")
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
            raise lines.error(("verify", "tolerances", str(key)), "tolerances must be positive numbers")
        cfg.verify.tolerances[key] = float(value)

    if cfg.output.format not in FORMATS:
        raise lines.error(("output", "format"), f"must be one of {FORMATS}")
    return cfg


def loads(text, source="<string>"):
    try:
        node = yaml.compose(text, Loader=_Loader)
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigurationError(f"{where}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    lines = _Lines(node, source)
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise lines.error((), "top level must be a mapping")
    cfg = ExperimentConfig(source=source)
    for key, value in raw.items():
        if key not in _BLOCKS:
            raise lines.error((str(key),), f"unknown section; expected one of {sorted(_BLOCKS)}")
        setattr(cfg, key, _block(_BLOCKS[key], value, (key,), lines))
    return _validate(cfg, lines)


def load(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text, str(path))


def default_config():
    return loads("", "<defaults>")
