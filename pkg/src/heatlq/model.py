"""Problem specification: parameter containers, JSON loading and validation.

A configuration file has five top-level sections::

    {
      "sde":            {"A": [[2.0]], "B": [[2.0]], "C": [[1.0]], "D": [[0.5]], "X0": [1.0]},
      "pde":            {"c": 0.5, "u0": 1.0},
      "cost":           {"Q": [[10.0]], "r": 1.0, "G": [[10.0]], "delta": 0.5, "T": 1.0},
      "control":        {"mu": 1.5, "u0_mode": "optimal"},
      "discretization": {"N": 3, "riccati_steps": 2000, "sim_dt": 0.001,
                         "mc_paths": 10000, "seed": 12345, "fd_grid_points": 256}
    }

Matrices are row-major nested arrays; when ``d == 1`` plain numbers are
accepted for every matrix and vector.  ``pde.u0`` is either a number
(constant profile) or ``{"x": [...], "values": [...]}`` tabulated on [0, 1].
``control.u0_mode`` is ``"optimal"`` or ``"fixed"`` (then ``u0_value`` is
read).  Omitted ``control.mu`` defaults to ``c + 1`` and omitted ``cost.T``
to 1.0.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ParseError, ValidationError
from .spectral import GridFunction

SYM_TOL = 1e-12
PSD_TOL = 1e-12

DEFAULT_RICCATI_STEPS = 2000
DEFAULT_SIM_DT = 1e-3
DEFAULT_MC_PATHS = 10_000
DEFAULT_SEED = 20250101
DEFAULT_FD_POINTS = 256
DEFAULT_T = 1.0

_SECTIONS = ("sde", "pde", "cost", "control", "discretization")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _coerce(obj, *names) -> None:
    for name in names:
        try:
            arr = np.asarray(getattr(obj, name), dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{name} must be numeric") from exc
        object.__setattr__(obj, name, arr)


@dataclass(frozen=True)
class SdeParams:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    X0: np.ndarray

    def __post_init__(self):
        _coerce(self, "A", "B", "C", "D", "X0")

    @property
    def d(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class PdeParams:
    c: float
    u0: float | GridFunction


@dataclass(frozen=True)
class CostParams:
    Q: np.ndarray
    r: float
    G: np.ndarray
    delta: float
    T: float = DEFAULT_T

    def __post_init__(self):
        _coerce(self, "Q", "G")


@dataclass(frozen=True)
class ControlParams:
    mu: float
    u0_mode: str = "optimal"
    u0_value: float = 0.0


@dataclass(frozen=True)
class DiscretizationParams:
    N: int = 3
    riccati_steps: int = DEFAULT_RICCATI_STEPS
    sim_dt: float = DEFAULT_SIM_DT
    mc_paths: int = DEFAULT_MC_PATHS
    seed: int = DEFAULT_SEED
    fd_grid_points: int = DEFAULT_FD_POINTS


@dataclass(frozen=True)
class ProblemSpec:
    sde: SdeParams
    pde: PdeParams
    cost: CostParams
    control: ControlParams
    disc: DiscretizationParams = field(default_factory=DiscretizationParams)

    def __post_init__(self):
        validate(self)

    def replace(self, **overrides) -> "ProblemSpec":
        """Return a copy with fields of the named sections replaced.

        Keys are ``section__field``, e.g. ``disc__N=8`` or ``cost__delta=0.1``.
        """
        parts: dict[str, dict[str, Any]] = {}
        for key, val in overrides.items():
            section, _, name = key.partition("__")
            parts.setdefault(section, {})[name] = val
        new = {}
        for section, kw in parts.items():
            new[section] = dataclasses.replace(getattr(self, section), **kw)
        return dataclasses.replace(self, **new)


# -- validation -------------------------------------------------------------


def _check_psd(name: str, M: np.ndarray) -> None:
    if np.max(np.abs(M - M.T), initial=0.0) > SYM_TOL:
        raise ValidationError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(M).min() < -PSD_TOL:
        raise ValidationError(f"{name} must be positive semidefinite")


def _check_finite(name: str, a) -> None:
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} must have finite entries")


def validate(spec: ProblemSpec) -> None:
    """Check every invariant of ``spec``; raise ValidationError naming the first violation."""
    sde, pde, cost, ctl, disc = spec.sde, spec.pde, spec.cost, spec.control, spec.disc
    d = sde.A.shape[0] if sde.A.ndim == 2 else 0
    if d < 1 or sde.A.shape != (d, d):
        raise ValidationError("A must be a square d x d matrix with d >= 1")
    shapes = {"B": (d, 1), "C": (d, d), "D": (d, 1), "X0": (d,)}
    for name, shape in shapes.items():
        if getattr(sde, name).shape != shape:
            raise ValidationError(f"{name} must have shape {shape}")
    for name in ("A", "B", "C", "D", "X0"):
        _check_finite(name, getattr(sde, name))

    if not math.isfinite(pde.c):
        raise ValidationError("c must be finite")
    if isinstance(pde.u0, GridFunction):
        xs = pde.u0.xs
        if len(xs) < 3:
            raise ValidationError("u0 table needs at least 3 points")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise ValidationError("u0 grid must start at 0 and end at 1")
        if np.any(np.diff(xs) <= 0):
            raise ValidationError("u0 grid must be strictly increasing")
        _check_finite("u0", pde.u0.values)
    elif not math.isfinite(pde.u0):
        raise ValidationError("u0 must be finite")

    for name in ("Q", "G"):
        M = getattr(cost, name)
        if M.shape != (d, d):
            raise ValidationError(f"{name} must have shape {(d, d)}")
        _check_finite(name, M)
        _check_psd(name, M)
    for name in ("r", "delta", "T"):
        val = getattr(cost, name)
        if not (math.isfinite(val) and val > 0):
            raise ValidationError(f"{name} must be positive")

    if not math.isfinite(ctl.mu):
        raise ValidationError("mu must be finite")
    if not ctl.mu > pde.c:
        raise ValidationError("mu must exceed c")
    if ctl.u0_mode not in ("optimal", "fixed"):
        raise ValidationError("u0_mode must be 'optimal' or 'fixed'")
    if not math.isfinite(ctl.u0_value):
        raise ValidationError("u0_value must be finite")

    if disc.N < 1:
        raise ValidationError("N must be a positive integer")
    if disc.riccati_steps < 2:
        raise ValidationError("riccati_steps must be >= 2")
    if not (disc.sim_dt > 0 and disc.sim_dt <= cost.T):
        raise ValidationError("sim_dt must lie in (0, T]")
    if disc.mc_paths < 1:
        raise ValidationError("mc_paths must be >= 1")
    if not 0 <= disc.seed < 2**64:
        raise ValidationError("seed must be a 64-bit unsigned integer")
    if disc.fd_grid_points < 8:
        raise ValidationError("fd_grid_points must be >= 8")


# -- JSON (de)serialization -------------------------------------------------


def _get(section: dict, name: str, where: str, default=...):
    if name in section:
        return section[name]
    if default is ...:
        raise ParseError(f"missing field '{where}.{name}'")
    return default


def _number(val, where: str) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ParseError(f"field '{where}' must be a number, got {type(val).__name__}")
    return float(val)


def _integer(val, where: str) -> int:
    if isinstance(val, bool) or not isinstance(val, int):
        if isinstance(val, float) and val.is_integer():
            return int(val)
        raise ParseError(f"field '{where}' must be an integer")
    return val


def _matrix(val, where: str, ndim: int) -> np.ndarray:
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return _frozen(np.full((1,) * ndim, float(val)))
    try:
        arr = np.array(val, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"field '{where}' must be a numeric array") from None
    if arr.ndim == 1 and ndim == 2 and where.endswith((".B", ".D")):
        arr = arr.reshape(-1, 1)
    if arr.ndim != ndim:
        raise ParseError(f"field '{where}' must be a {ndim}-d array")
    return _frozen(arr)


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    if not isinstance(section, dict):
        raise ParseError(f"section '{where}' must be an object")
    extra = set(section) - allowed
    if extra:
        raise ParseError(f"unknown field(s) in '{where}': {', '.join(sorted(extra))}")


def spec_from_dict(data: dict) -> ProblemSpec:
    """Build a validated ProblemSpec from already-parsed JSON data."""
    if not isinstance(data, dict):
        raise ParseError("top level must be an object")
    _check_keys(data, set(_SECTIONS), "<root>")
    for name in ("sde", "pde", "cost"):
        if name not in data:
            raise ParseError(f"missing section '{name}'")

    s = data["sde"]
    _check_keys(s, {"A", "B", "C", "D", "X0"}, "sde")
    sde = SdeParams(
        A=_matrix(_get(s, "A", "sde"), "sde.A", 2),
        B=_matrix(_get(s, "B", "sde"), "sde.B", 2),
        C=_matrix(_get(s, "C", "sde"), "sde.C", 2),
        D=_matrix(_get(s, "D", "sde"), "sde.D", 2),
        X0=_matrix(_get(s, "X0", "sde"), "sde.X0", 1),
    )

    p = data["pde"]
    _check_keys(p, {"c", "u0"}, "pde")
    c = _number(_get(p, "c", "pde"), "pde.c")
    raw_u0 = _get(p, "u0", "pde")
    if isinstance(raw_u0, dict):
        _check_keys(raw_u0, {"x", "values"}, "pde.u0")
        try:
            u0: float | GridFunction = GridFunction(
                np.asarray(_get(raw_u0, "x", "pde.u0"), dtype=float),
                np.asarray(_get(raw_u0, "values", "pde.u0"), dtype=float),
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"field 'pde.u0': {exc}") from None
    else:
        u0 = _number(raw_u0, "pde.u0")
    pde = PdeParams(c=c, u0=u0)

    k = data["cost"]
    _check_keys(k, {"Q", "r", "G", "delta", "T"}, "cost")
    cost = CostParams(
        Q=_matrix(_get(k, "Q", "cost"), "cost.Q", 2),
        r=_number(_get(k, "r", "cost"), "cost.r"),
        G=_matrix(_get(k, "G", "cost"), "cost.G", 2),
        delta=_number(_get(k, "delta", "cost"), "cost.delta"),
        T=_number(_get(k, "T", "cost", DEFAULT_T), "cost.T"),
    )

    ct = data.get("control", {})
    _check_keys(ct, {"mu", "u0_mode", "u0_value"}, "control")
    mode = _get(ct, "u0_mode", "control", "optimal")
    if mode not in ("optimal", "fixed"):
        raise ParseError("field 'control.u0_mode' must be 'optimal' or 'fixed'")
    control = ControlParams(
        mu=_number(_get(ct, "mu", "control", c + 1.0), "control.mu"),
        u0_mode=mode,
        u0_value=_number(
            _get(ct, "u0_value", "control", ... if mode == "fixed" else 0.0),
            "control.u0_value",
        ),
    )

    dd = data.get("discretization", {})
    _check_keys(
        dd,
        {"N", "riccati_steps", "sim_dt", "mc_paths", "seed", "fd_grid_points"},
        "discretization",
    )
    disc = DiscretizationParams(
        N=_integer(_get(dd, "N", "discretization", 3), "discretization.N"),
        riccati_steps=_integer(
            _get(dd, "riccati_steps", "discretization", DEFAULT_RICCATI_STEPS),
            "discretization.riccati_steps",
        ),
        sim_dt=_number(_get(dd, "sim_dt", "discretization", DEFAULT_SIM_DT),
                       "discretization.sim_dt"),
        mc_paths=_integer(_get(dd, "mc_paths", "discretization", DEFAULT_MC_PATHS),
                          "discretization.mc_paths"),
        seed=_integer(_get(dd, "seed", "discretization", DEFAULT_SEED),
                      "discretization.seed"),
        fd_grid_points=_integer(
            _get(dd, "fd_grid_points", "discretization", DEFAULT_FD_POINTS),
            "discretization.fd_grid_points",
        ),
    )
    return ProblemSpec(sde=sde, pde=pde, cost=cost, control=control, disc=disc)


def load_spec(path) -> ProblemSpec:
    """Read and validate a JSON configuration file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return spec_from_dict(data)


def spec_to_dict(spec: ProblemSpec) -> dict:
    """Inverse of :func:`spec_from_dict`; every field written explicitly."""
    u0 = spec.pde.u0
    if isinstance(u0, GridFunction):
        u0_json: Any = {"x": u0.xs.tolist(), "values": u0.values.tolist()}
    else:
        u0_json = u0
    return {
        "sde": {
            "A": spec.sde.A.tolist(),
            "B": spec.sde.B.tolist(),
            "C": spec.sde.C.tolist(),
            "D": spec.sde.D.tolist(),
            "X0": spec.sde.X0.tolist(),
        },
        "pde": {"c": spec.pde.c, "u0": u0_json},
        "cost": {
            "Q": spec.cost.Q.tolist(),
            "r": spec.cost.r,
            "G": spec.cost.G.tolist(),
            "delta": spec.cost.delta,
            "T": spec.cost.T,
        },
        "control": {
            "mu": spec.control.mu,
            "u0_mode": spec.control.u0_mode,
            "u0_value": spec.control.u0_value,
        },
        "discretization": dataclasses.asdict(spec.disc),
    }


def dump_spec(spec: ProblemSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n")


def uncontrolled_second_moment(a: float, c_noise: float, x0: float, t: float) -> float:
    """E[X_t^2] for the scalar SDE dX = a X dt + c_noise X dW, X_0 = x0."""
    return x0 * x0 * math.exp((2.0 * a + c_noise * c_noise) * t)
