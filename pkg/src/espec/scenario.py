"""Scenario files: JSON with ``"schema": 1``.

A file holds either one scenario object or ``{"schema": 1, "scenarios": [...]}``.
Each scenario needs ``name``, ``mode``, ``params`` and ``grid``; further keys
depend on the mode::

    {"schema": 1, "name": "well", "mode": "verify-1d",
     "params": {"mu": 1, "lambda": 0},
     "grid": {"dim": 1, "half_width": 6, "points": 299},
     "damping": {"type": "box", "amplitude": -10, "half_width": 1},
     "z": [1.0, 2.0], "slack": 0.05}
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from .errors import ConfigParseError, EspecError
from .eigensolve import SolveOptions
from .model import Grid, LameParams, parse_complex, sample_field
from .study import FlagSettings

SCHEMA_VERSION = 1
MODES = ("pencil", "potential", "verify-1d", "alpha", "calibrate", "converge")
# modes whose field key is the damping; "potential" reads "potential" first
_FIELD_REQUIRED = {"pencil", "verify-1d", "alpha", "calibrate", "converge"}


@dataclass(frozen=True)
class Scenario:
    name: str
    mode: str
    params: LameParams
    grid: Grid
    field_spec: Any
    gamma: float = 0.5
    constant: Optional[float] = None
    solver: SolveOptions = SolveOptions()
    slack: float = 0.05
    flags: FlagSettings = FlagSettings()
    check_convergence: bool = True
    count: Optional[int] = None
    z_values: tuple = ()
    levels: int = 3
    track: Optional[int] = None
    scales: tuple = (1.0,)
    self_adjoint: bool = False
    problem: str = "pencil"
    source: Optional[str] = field(default=None, compare=False)

    def to_dict(self) -> Dict[str, Any]:
        """Normalized echo of the scenario (no file paths, so runs compare byte for byte)."""
        shift = complex(self.solver.shift)
        return {
            "name": self.name,
            "mode": self.mode,
            "params": self.params.to_dict(),
            "grid": self.grid.to_dict(),
            "field": self.field_spec,
            "gamma": self.gamma,
            "constant": self.constant,
            "solver": {"tol": self.solver.tol, "max_iter": self.solver.max_iter,
                       "backend": self.solver.backend, "seed": self.solver.seed,
                       "subspace_dim": self.solver.subspace_dim,
                       "shift": [shift.real, shift.imag], "count": self.count},
            "slack": self.slack,
            "convergence": dict(self.flags.to_dict(), check=self.check_convergence),
            "z": list(self.z_values),
            "levels": self.levels,
            "track": self.track,
            "scales": list(self.scales),
            "self_adjoint": self.self_adjoint,
            "problem": self.problem,
        }


def _line_of(text: Optional[str], key: str) -> Optional[int]:
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


class _Reader:
    """Typed access to one JSON object with errors naming the field and line."""

    def __init__(self, obj: Mapping, text: Optional[str], prefix: str = ""):
        if not isinstance(obj, Mapping):
            raise ConfigParseError("expected a JSON object", prefix.rstrip(".") or None)
        self.obj = obj
        self.text = text
        self.prefix = prefix

    def fail(self, key, msg):
        raise ConfigParseError(msg, self.prefix + key, _line_of(self.text, key))

    def has(self, key):
        return key in self.obj and self.obj[key] is not None

    def raw(self, key, default=None, required=False):
        if key not in self.obj or self.obj[key] is None:
            if required:
                raise ConfigParseError("missing required field", self.prefix + key, None)
            return default
        return self.obj[key]

    def number(self, key, default=None, required=False, positive=False, integer=False):
        v = self.raw(key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(key, f"expected a number, got {v!r}")
        if not math.isfinite(v):
            self.fail(key, "must be finite")
        if integer and int(v) != v:
            self.fail(key, f"expected an integer, got {v!r}")
        if positive and not v > 0:
            self.fail(key, f"must be positive, got {v!r}")
        return int(v) if integer else float(v)

    def boolean(self, key, default):
        v = self.raw(key, default)
        if not isinstance(v, bool):
            self.fail(key, f"expected true/false, got {v!r}")
        return v

    def string(self, key, default=None, required=False, choices=None):
        v = self.raw(key, default, required)
        if v is None:
            return None
        if not isinstance(v, str):
            self.fail(key, f"expected a string, got {v!r}")
        if choices and v not in choices:
            self.fail(key, f"must be one of {', '.join(choices)}; got {v!r}")
        return v

    def sub(self, key, required=False):
        v = self.raw(key, {} if not required else None, required)
        if not isinstance(v, Mapping):
            self.fail(key, "expected an object")
        return _Reader(v, self.text, self.prefix + key + ".")


def _solver(r: _Reader) -> tuple:
    s = r.sub("solver")
    shift = 0.0
    if s.has("shift"):
        try:
            shift = parse_complex(s.raw("shift"), "shift")
        except (EspecError, TypeError, ValueError) as exc:
            s.fail("shift", str(exc))
    count = s.number("count", integer=True, positive=True)
    try:
        opts = SolveOptions(tol=s.number("tol", 1e-10, positive=True),
                            max_iter=s.number("max_iter", 300, positive=True, integer=True),
                            shift=shift,
                            subspace_dim=s.number("subspace_dim", integer=True, positive=True),
                            count=count or 6,
                            backend=s.string("backend", "lapack", choices=("lapack", "builtin")),
                            seed=s.number("seed", 0, integer=True))
    except ValueError as exc:
        if isinstance(exc, ConfigParseError):
            raise
        raise ConfigParseError(str(exc), "solver", _line_of(r.text, "solver")) from None
    return opts, count


def scenario_from_dict(obj: Mapping, text: Optional[str] = None, source: Optional[str] = None,
                       inherited_schema: Optional[int] = None) -> Scenario:
    """Validate one scenario object (mode-specific requirements included)."""
    r = _Reader(obj, text)
    schema = r.raw("schema", inherited_schema)
    if schema is None:
        raise ConfigParseError("missing required field", "schema", None)
    if schema != SCHEMA_VERSION:
        r.fail("schema", f"unsupported schema version {schema!r}")
    name = r.string("name", required=True)
    if not name:
        r.fail("name", "must be non-empty")
    mode = r.string("mode", required=True, choices=MODES)

    p = r.sub("params", required=True)
    mu = p.number("mu", required=True)
    lam = p.number("lambda", default=p.raw("lam"), required=not p.has("lam"))
    try:
        params = LameParams(mu, lam)
    except EspecError as exc:
        raise ConfigParseError(str(exc), "params", _line_of(text, "params")) from None

    g = r.sub("grid", required=True)
    dim = g.number("dim", required=True, integer=True)
    pts_key = "points" if g.has("points") else "points_per_axis"
    try:
        grid = Grid(dim, g.number("half_width", required=True, positive=True),
                    g.number(pts_key, required=True, integer=True))
    except ConfigParseError:
        raise
    except (EspecError, ValueError) as exc:
        raise ConfigParseError(str(exc), "grid", _line_of(text, "grid")) from None

    problem = r.string("problem", "pencil", choices=("pencil", "potential"))
    if mode == "potential" or (mode == "converge" and problem == "potential"):
        key = "potential" if r.has("potential") else "damping"
    else:
        key = "damping"
    spec = r.raw(key)
    if spec is None:
        if mode in _FIELD_REQUIRED or mode == "potential":
            raise ConfigParseError(f"mode '{mode}' needs a field specification", key, None)
    else:
        try:
            sample_field(Grid(dim, grid.half_width, 3), spec)
        except (EspecError, KeyError, TypeError, ValueError) as exc:
            raise ConfigParseError(f"invalid field spec: {exc}", key, _line_of(text, key)) from None

    opts, count = _solver(r)
    c = r.sub("convergence")
    flags = FlagSettings(l_tol=c.number("l_tol", 1e-6, positive=True),
                         h_tol=c.number("h_tol", 0.05, positive=True),
                         threshold=c.number("threshold", 0.05, positive=True),
                         count=c.number("count", 3, positive=True, integer=True),
                         check_h=c.boolean("check_h", True))

    zs = r.raw("z", [])
    if isinstance(zs, (int, float)) and not isinstance(zs, bool):
        zs = [zs]
    if not isinstance(zs, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                           for v in zs):
        r.fail("z", "expected a number or a list of numbers")
    if mode == "alpha" and len(zs) != 1:
        if not r.has("z"):
            raise ConfigParseError("alpha mode needs a real z", "z", None)
        r.fail("z", "alpha mode needs exactly one real z")
    scales = r.raw("scales", [1.0])
    if not isinstance(scales, list) or not scales or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in scales):
        r.fail("scales", "expected a non-empty list of positive numbers")

    constant = r.number("constant", positive=True)
    levels = r.number("levels", 3, integer=True)
    if levels < 2:
        r.fail("levels", "must be >= 2")
    return Scenario(
        name=name, mode=mode, params=params, grid=grid, field_spec=spec,
        gamma=r.number("gamma", 0.5), constant=constant, solver=opts,
        slack=r.number("slack", 0.05), flags=flags,
        check_convergence=c.boolean("check", True), count=count,
        z_values=tuple(float(v) for v in zs), levels=levels,
        track=r.number("track", integer=True, positive=True),
        scales=tuple(float(v) for v in scales),
        self_adjoint=r.boolean("self_adjoint", False),
        problem=problem,
        source=source)


def parse_text(text: str, source: Optional[str] = None) -> List[Scenario]:
    """Parse a scenario file's text into one or more scenarios."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, None, exc.lineno) from None
    if isinstance(obj, Mapping) and "scenarios" in obj:
        r = _Reader(obj, text)
        schema = r.raw("schema", required=True)
        if schema != SCHEMA_VERSION:
            r.fail("schema", f"unsupported schema version {schema!r}")
        items = obj["scenarios"]
        if not isinstance(items, list):
            r.fail("scenarios", "expected a list")
        out = [scenario_from_dict(item, text, source, schema) for item in items]
    else:
        out = [scenario_from_dict(obj, text, source)]
    seen = set()
    for s in out:
        if s.name in seen:
            raise ConfigParseError(f"duplicate scenario name {s.name!r}", "name", _line_of(text, "name"))
        seen.add(s.name)
    return out


def load_scenarios(path) -> List[Scenario]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_text(text, str(path))
