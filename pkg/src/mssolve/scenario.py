"""
Scenario files.

A scenario is a YAML mapping with the sections ``geometry``, ``bc``,
``coefficients``, ``data`` and ``run``::

    geometry:
      R: 2.0
      delta: 0.1
      radius: [[0, 1.0, 0.0]]     # (k, re, im) modes of rho
      rotation: 0.0              # rho(theta - rotation * t)
    bc: {mu_outer: neumann, v_outer: B1, alpha2: 0.0, alpha3: 0.0}
    coefficients:
      sigma: 1.0
      b2: [[0, 0.5, 0.0]]
      a3: normal                 # the unit normal as a vector coefficient
    data:
      h0: [[1, 0.5, 0.0]]
    run: {K: 32, T: 1.0, dt: 0.01}

Scalar expansions list ``(k, re, im)`` for ``k >= 0`` of a real field;
vector expansions list ``(k, re, im)`` for every ``k`` of the complex field
``v_x + i v_y``.  A bare number is a constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ._bases import PolynomialForce
from .elliptic import BoundaryConfig
from .errors import ParseError, ValidationError
from .evolution import EvolutionProblem, InterfaceData
from .geometry import InterfaceGeometry, build_interface
from .sobolev import PeriodicField

SECTIONS = {
    "geometry": {"R", "delta", "radius", "rotation"},
    "bc": {"mu_outer", "v_outer", "alpha2", "alpha3"},
    "coefficients": {"sigma", "b", "b1", "b2", "a3", "a4", "a5"},
    "data": {"h0", "g", "mu_source", "mu_trace", "mu_outer", "force", "velocity_jump", "traction",
             "outer_velocity"},
    "run": {"K", "T", "dt", "backend", "form", "scheme", "seed", "out"},
}
SCALAR = {"b1", "b2", "a5", "h0", "g", "mu_trace", "mu_outer"}
VECTOR = {"b", "a3", "a4", "velocity_jump", "traction", "outer_velocity"}
REQUIRED = {"run": ("K", "T", "dt")}


def _plain(node):
    """Python value of a YAML node and a map ``path -> line``."""
    lines = {}

    def walk(n, path):
        lines[path] = n.start_mark.line + 1
        if isinstance(n, yaml.MappingNode):
            out = {}
            for k, v in n.value:
                key = str(k.value)
                sub = f"{path}.{key}" if path else key
                lines[sub] = k.start_mark.line + 1
                out[key] = walk(v, sub)
            return out
        if isinstance(n, yaml.SequenceNode):
            return [walk(v, f"{path}[{i}]") for i, v in enumerate(n.value)]
        return yaml.safe_load(yaml.serialize(n))

    return walk(node, ""), lines


@dataclass
class Scenario:
    """Validated scenario."""

    geometry: InterfaceGeometry
    bc: BoundaryConfig
    K: int
    T: float
    dt: float
    sigma: float = 1.0
    coefficients: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    backend: str = "spectral"
    form: str = "max_reg"
    scheme: str = "imex"
    seed: int = 0
    out: str = "out"
    raw: dict = field(default_factory=dict)

    @property
    def h0(self) -> PeriodicField:
        h0 = self.data.get("h0")
        return PeriodicField.zeros(self.K) if h0 is None else h0

    @property
    def stokes_coefficients(self) -> tuple:
        c = self.coefficients
        return (c.get("a3"), c.get("a4"), c.get("a5"))

    def interface_data(self) -> InterfaceData:
        d = self.data
        return InterfaceData(mu_source=d.get("mu_source"), mu_trace=d.get("mu_trace"),
                             mu_outer=d.get("mu_outer"), force=d.get("force"),
                             velocity_jump=d.get("velocity_jump"), traction=d.get("traction"),
                             outer_velocity=d.get("outer_velocity"))

    def problem(self) -> EvolutionProblem:
        c = self.coefficients
        return EvolutionProblem(self.geometry, self.h0.padded(self.K), self.T, self.dt, g=self.data.get("g"),
                                sigma=self.sigma, b=c.get("b"), b1=c.get("b1"), b2=c.get("b2"),
                                stokes_coefficients=self.stokes_coefficients, data=self.interface_data(),
                                bc=self.bc, form=self.form, scheme=self.scheme, backend=self.backend)

    def with_overrides(self, K=None, dt=None, backend=None, out=None) -> "Scenario":
        """Copy with command-line overrides applied and re-validated."""
        raw = {s: dict(v) for s, v in self.raw.items()}
        run = raw.setdefault("run", {})
        for key, val in (("K", K), ("dt", dt), ("backend", backend), ("out", out)):
            if val is not None:
                run[key] = val
        return build_scenario(raw)


def _modes(value, name: str, K: int, vector: bool, line) -> PeriodicField:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return PeriodicField.from_modes(K, {0: float(value)}, real=not vector)
    if not isinstance(value, list) or not all(isinstance(e, list) and len(e) in (2, 3) for e in value):
        raise ParseError("expected a number or a list of [k, re, im] triples", line, name)
    try:
        entries = [(int(e[0]), float(e[1]), float(e[2]) if len(e) > 2 else 0.0) for e in value]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"non-numeric mode entry ({exc})", line, name) from exc
    for k, _, _ in entries:
        if abs(k) > K:
            raise ValidationError(f"expansion '{name}' has mode {k} beyond the cutoff K={K}")
        if not vector and k < 0:
            raise ParseError("scalar expansions list k >= 0 only", line, name)
    return PeriodicField.from_modes(K, entries, real=not vector)


def _polynomial(value, name, line):
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, list):
        raise ParseError("expected a number or a list of [n, re, im]", line, name)
    return [(int(e[0]), complex(float(e[1]), float(e[2]) if len(e) > 2 else 0.0)) for e in value]


def _force(value, line):
    if value is None:
        return None
    if not isinstance(value, dict) or not set(value) <= {"z_terms", "zbar_terms"}:
        raise ParseError("force needs z_terms and/or zbar_terms", line, "data.force")
    terms = {}
    for key in ("z_terms", "zbar_terms"):
        terms[key] = tuple((int(e[0]), complex(float(e[1]), float(e[2]) if len(e) > 2 else 0.0))
                           for e in value.get(key, []))
    return PolynomialForce(**terms)


def _number(sec, key, default, line, kind=float):
    v = sec.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"expected a number, got {v!r}", line, key)
    return kind(v)


def _geometry(sec: dict, T: float, lines) -> InterfaceGeometry:
    R = _number(sec, "R", 2.0, lines.get("geometry.R"))
    delta = _number(sec, "delta", 0.1, lines.get("geometry.delta"))
    radius = sec.get("radius", [[0, 1.0, 0.0]])
    if isinstance(radius, (int, float)):
        radius = [[0, float(radius), 0.0]]
    Kr = max(abs(int(e[0])) for e in radius)
    rho = _modes(radius, "geometry.radius", Kr, False, lines.get("geometry.radius"))
    omega = _number(sec, "rotation", 0.0, lines.get("geometry.rotation"))
    if omega == 0.0:
        return build_interface(rho.modes, R, delta)
    # rotation of a fixed shape: rho(theta - omega t) sampled on a time grid
    times = np.linspace(0.0, T, max(9, int(np.ceil(16 * Kr * abs(omega) * T)) + 1))
    k = np.arange(-Kr, Kr + 1)
    modes = np.array([rho.modes * np.exp(-1j * k * omega * t) for t in times])
    return InterfaceGeometry(modes, R, delta, times)


def build_scenario(raw: dict, lines: dict | None = None) -> Scenario:
    """Validate a parsed mapping."""
    lines = lines or {}
    if not isinstance(raw, dict):
        raise ParseError("a scenario must be a mapping of sections", 1)
    for sec, body in raw.items():
        if sec not in SECTIONS:
            raise ParseError(f"unknown section '{sec}'", lines.get(sec), sec)
        if body is not None and not isinstance(body, dict):
            raise ParseError("section must be a mapping", lines.get(sec), sec)
        for key in (body or {}):
            if key not in SECTIONS[sec]:
                raise ParseError(f"unknown key '{key}'", lines.get(f"{sec}.{key}"), f"{sec}.{key}")
    run = raw.get("run") or {}
    for key in REQUIRED["run"]:
        if key not in run:
            raise ValidationError(f"missing required field run.{key}")
    K = _number(run, "K", None, lines.get("run.K"), int)
    T = _number(run, "T", None, lines.get("run.T"))
    dt = _number(run, "dt", None, lines.get("run.dt"))
    if K < 1:
        raise ValidationError("cutoff K must be at least 1")
    if not T > 0:
        raise ValidationError("horizon T must be positive")
    if not dt > 0:
        raise ValidationError("time step dt must be positive")
    coef = raw.get("coefficients") or {}
    sigma = _number(coef, "sigma", 1.0, lines.get("coefficients.sigma"))
    if not sigma > 0:
        raise ValidationError("surface tension must be positive")
    b = raw.get("bc") or {}
    bc = BoundaryConfig(mu_outer=b.get("mu_outer", "neumann"), v_outer=b.get("v_outer", "B1"),
                        alpha2=float(b.get("alpha2", 0.0)), alpha3=float(b.get("alpha3", 0.0)))
    geometry = _geometry(raw.get("geometry") or {}, T, lines)
    coefficients = {}
    for key, val in coef.items():
        if key == "sigma" or val is None:
            continue
        where = lines.get(f"coefficients.{key}")
        if val == "normal" and key in VECTOR:
            coefficients[key] = _normal_field(geometry)
        else:
            coefficients[key] = _modes(val, f"coefficients.{key}", K, key in VECTOR, where)
    data = {}
    for key, val in (raw.get("data") or {}).items():
        if val is None:
            continue
        where = lines.get(f"data.{key}")
        if key == "mu_source":
            data[key] = _polynomial(val, "data.mu_source", where)
        elif key == "force":
            data[key] = _force(val, where)
        else:
            data[key] = _modes(val, f"data.{key}", K, key in VECTOR, where)
    backend = str(run.get("backend", "spectral"))
    if backend not in ("spectral", "bie"):
        raise ValidationError(f"backend must be 'spectral' or 'bie', got {backend!r}")
    form = str(run.get("form", "max_reg"))
    if form not in ("max_reg", "coupled"):
        raise ValidationError(f"form must be 'max_reg' or 'coupled', got {form!r}")
    return Scenario(geometry, bc, K, T, dt, sigma, coefficients, data, backend, form,
                    str(run.get("scheme", "imex")), int(run.get("seed", 0)), str(run.get("out", "out")),
                    {s: dict(v or {}) for s, v in raw.items()})


class _Normal:
    """The interface normal as a vector coefficient ``c(theta, t)``."""

    def __init__(self, geometry: InterfaceGeometry):
        self.geometry = geometry

    def __call__(self, theta, t=0.0):
        return self.geometry.normal(theta, t)

    def __repr__(self):
        return "normal"


def _normal_field(geometry):
    return _Normal(geometry)


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file.

    Raises
    ------
    ParseError
        Malformed YAML, unknown keys or wrongly typed values, with the line.
    ValidationError
        A well-formed file violating an invariant.
    """
    text = Path(path).read_text()
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"malformed scenario: {getattr(exc, 'problem', exc)}",
                         mark.line + 1 if mark else None) from exc
    if node is None:
        raise ParseError("empty scenario", 1)
    raw, lines = _plain(node)
    return build_scenario(raw, lines)


DEFAULT_SCENARIO = Path(__file__).with_name("default_scenario.yaml")
