"""Run configuration: strict parsing, defaults, validation, round-trip serialization.

One flat JSON document describes a run.  Unknown keys are hard errors so a
typo in an experiment definition cannot silently fall back to a default,
and every output file later echoes the fully resolved document.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

from .environment import ENV_KINDS, Environment
from .grids import TorusGrid, TraitGrid
from .sim_solver import SimParams, max_stable_dt

TRAIT_MARGIN_SIGMAS = 8.0
DIAGNOSTIC_NAMES = ("gauss_dev", "v_max", "mass_leak", "holder")


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class SpatialProfile:
    """Named function family for initial fields on the torus."""

    kind: str
    value: float = 0.0
    offset: float = 0.0
    amplitude: float = 0.0
    wavenumber: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "sinusoidal"):
            raise ConfigError(f"unknown profile kind {self.kind!r}")

    def evaluate(self, x, period: float):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.value)
        return self.offset + self.amplitude * np.sin(
            2.0 * np.pi * self.wavenumber * x / period
        )

    def bounds(self):
        if self.kind == "constant":
            return self.value, self.value
        return self.offset - abs(self.amplitude), self.offset + abs(self.amplitude)

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {
            "kind": "sinusoidal",
            "offset": self.offset,
            "amplitude": self.amplitude,
            "wavenumber": self.wavenumber,
        }


def _require_keys(doc: dict, allowed: set, path: str):
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {path}")


def _get_number(doc: dict, key: str, path: str, default=None, positive=False):
    if key not in doc:
        if default is None:
            raise ConfigError(f"missing required key {path}.{key}")
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number, got {v!r}")
    v = float(v)
    if positive and not v > 0:
        raise ConfigError(f"{path}.{key} must be positive, got {v:g}")
    return v


def _get_int(doc: dict, key: str, path: str, default=None, minimum=None):
    if key not in doc:
        if default is None:
            raise ConfigError(f"missing required key {path}.{key}")
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key} must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key} must be >= {minimum}, got {v}")
    return v


def _parse_profile(doc, path: str, default: SpatialProfile) -> SpatialProfile:
    if doc is None:
        return default
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must be an object")
    kind = doc.get("kind")
    if kind == "constant":
        _require_keys(doc, {"kind", "value"}, path)
        return SpatialProfile(kind="constant", value=_get_number(doc, "value", path))
    if kind == "sinusoidal":
        _require_keys(doc, {"kind", "offset", "amplitude", "wavenumber"}, path)
        return SpatialProfile(
            kind="sinusoidal",
            offset=_get_number(doc, "offset", path, default=0.0),
            amplitude=_get_number(doc, "amplitude", path),
            wavenumber=_get_int(doc, "wavenumber", path, default=1, minimum=1),
        )
    raise ConfigError(f"{path}.kind must be 'constant' or 'sinusoidal', got {kind!r}")


def _parse_env(doc, path: str, period: float) -> Environment:
    if doc is None:
        return Environment(kind="constant", offset=0.0, period=period)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must be an object")
    kind = doc.get("kind")
    if kind not in ENV_KINDS:
        raise ConfigError(f"{path}.kind must be one of {ENV_KINDS}, got {kind!r}")
    keys = {"kind"}
    kwargs = {"kind": kind, "period": period}
    if kind == "constant":
        keys |= {"value"}
        kwargs["offset"] = _get_number(doc, "value", path, default=0.0)
    if kind == "affine_in_t":
        keys |= {"value", "rate"}
        kwargs["offset"] = _get_number(doc, "value", path, default=0.0)
        kwargs["rate"] = _get_number(doc, "rate", path)
    if kind in ("sinusoidal_in_x", "sinusoidal_plus_drift"):
        keys |= {"offset", "amplitude", "wavenumber"}
        kwargs["offset"] = _get_number(doc, "offset", path, default=0.0)
        kwargs["amplitude"] = _get_number(doc, "amplitude", path)
        kwargs["wavenumber"] = _get_int(doc, "wavenumber", path, default=1, minimum=1)
    if kind == "sinusoidal_plus_drift":
        keys |= {"rate"}
        kwargs["rate"] = _get_number(doc, "rate", path)
    _require_keys(doc, keys, path)
    return Environment(**kwargs)


def _env_to_dict(env: Environment) -> dict:
    out = {"kind": env.kind}
    if env.kind == "constant":
        out["value"] = env.offset
    elif env.kind == "affine_in_t":
        out["value"] = env.offset
        out["rate"] = env.rate
    else:
        out["offset"] = env.offset
        out["amplitude"] = env.amplitude
        out["wavenumber"] = env.wavenumber
        if env.kind == "sinusoidal_plus_drift":
            out["rate"] = env.rate
    return out


@dataclasses.dataclass(frozen=True)
class RunConfig:
    A: float
    gamma: float | None
    gamma_list: tuple | None
    env: Environment
    n0: SpatialProfile
    z0: SpatialProfile
    v0: float
    dim: int
    space_points: int
    period: float
    trait_bounds: tuple
    trait_points: int
    dt: float
    t_end: float
    snapshot_dt: float
    seed: int
    out_dir: str
    text: bool
    diagnostics: tuple
    test_hooks: tuple = ()

    def space_grid(self) -> TorusGrid:
        return TorusGrid(self.dim, self.space_points, self.period)

    def trait_grid(self) -> TraitGrid:
        return TraitGrid(self.trait_bounds[0], self.trait_bounds[1], self.trait_points)

    def environment(self) -> Environment:
        return self.env

    def n0_values(self, x):
        return self.n0.evaluate(x, self.period)

    def z0_values(self, x):
        return self.z0.evaluate(x, self.period)

    def v0_value(self) -> float:
        return self.v0

    def sim_params(self, gamma: float | None = None) -> SimParams:
        g = self.gamma if gamma is None else gamma
        if g is None:
            raise ConfigError("this run needs a single gamma")
        return SimParams(A=self.A, gamma=g, dt=self.dt, snapshot_dt=self.snapshot_dt)

    def hooks(self) -> dict:
        return dict(self.test_hooks)

    def to_dict(self) -> dict:
        physical = {
            "A": self.A,
            "env": _env_to_dict(self.env),
            "initial": {
                "N0": self.n0.to_dict(),
                "Z0": self.z0.to_dict(),
                "V0": self.v0,
            },
        }
        if self.gamma is not None:
            physical["gamma"] = self.gamma
        if self.gamma_list is not None:
            physical["gamma_list"] = list(self.gamma_list)
        doc = {
            "physical": physical,
            "numerical": {
                "dim": self.dim,
                "space_points": self.space_points,
                "period": self.period,
                "trait_bounds": list(self.trait_bounds),
                "trait_points": self.trait_points,
                "dt": self.dt,
                "t_end": self.t_end,
                "snapshot_dt": self.snapshot_dt,
                "seed": self.seed,
            },
            "output": {
                "directory": self.out_dir,
                "text": self.text,
                "diagnostics": list(self.diagnostics),
            },
        }
        if self.test_hooks:
            doc["test_hooks"] = dict(self.test_hooks)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _near_multiple(total: float, step: float) -> bool:
    k = round(total / step)
    return k >= 1 and abs(total - k * step) <= 1e-9 * max(1.0, step)


def parse_config(source) -> RunConfig:
    """Validate a JSON document (text or dict) into a RunConfig with defaults applied."""
    if isinstance(source, (str, bytes)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(doc, {"physical", "numerical", "output", "test_hooks"}, "config")

    phys = doc.get("physical")
    if not isinstance(phys, dict):
        raise ConfigError("missing required section 'physical'")
    _require_keys(phys, {"A", "gamma", "gamma_list", "env", "initial"}, "physical")
    A = _get_number(phys, "A", "physical", positive=True)

    gamma = None
    gamma_list = None
    if "gamma" in phys and "gamma_list" in phys:
        raise ConfigError("give exactly one of physical.gamma and physical.gamma_list")
    if "gamma" in phys:
        gamma = _get_number(phys, "gamma", "physical", positive=True)
    elif "gamma_list" in phys:
        raw = phys["gamma_list"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError("physical.gamma_list must be a non-empty list")
        vals = []
        for v in raw:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"physical.gamma_list entries must be positive numbers, got {v!r}")
            vals.append(float(v))
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("physical.gamma_list must be strictly increasing")
        gamma_list = tuple(vals)
    else:
        raise ConfigError("missing required key physical.gamma (or physical.gamma_list)")

    num = doc.get("numerical", {})
    if not isinstance(num, dict):
        raise ConfigError("'numerical' must be an object")
    _require_keys(
        num,
        {
            "dim",
            "space_points",
            "period",
            "trait_bounds",
            "trait_points",
            "dt",
            "t_end",
            "snapshot_dt",
            "seed",
        },
        "numerical",
    )
    dim = _get_int(num, "dim", "numerical", default=1)
    if dim != 1:
        raise ConfigError("numerical.dim must be 1 (the integrators are one-dimensional)")
    space_points = _get_int(num, "space_points", "numerical", default=64, minimum=4)
    period = _get_number(num, "period", "numerical", default=1.0, positive=True)
    trait_points = _get_int(num, "trait_points", "numerical", default=512, minimum=16)
    t_end = _get_number(num, "t_end", "numerical", positive=True)
    seed = _get_int(num, "seed", "numerical", default=0, minimum=0)
    if seed >= 2**64:
        raise ConfigError("numerical.seed must fit in 64 bits")

    env = _parse_env(phys.get("env"), "physical.env", period)

    init = phys.get("initial")
    if init is None:
        init = {}
    if not isinstance(init, dict):
        raise ConfigError("physical.initial must be an object")
    _require_keys(init, {"N0", "Z0", "V0"}, "physical.initial")
    n0 = _parse_profile(init.get("N0"), "physical.initial.N0", SpatialProfile("constant", value=1.0))
    z0 = _parse_profile(init.get("Z0"), "physical.initial.Z0", SpatialProfile("constant", value=0.0))
    n0_lo, _ = n0.bounds()
    if n0_lo <= 0:
        raise ConfigError(f"physical.initial.N0 must be positive everywhere (min = {n0_lo:g})")
    v0 = init.get("V0", "auto")
    if v0 == "auto":
        v0 = A
    else:
        v0 = _get_number(init, "V0", "physical.initial", positive=True)

    # Trait truncation: cover the optimal-trait envelope and the initial means
    # with 8 standard deviations of headroom; Gaussian tails beyond that are
    # below 1e-14, so truncation error is dominated by scheme error.
    bounds = num.get("trait_bounds", "auto")
    if bounds == "auto":
        env_lo, env_hi = env.value_range(t_end)
        z_lo, z_hi = z0.bounds()
        width = TRAIT_MARGIN_SIGMAS * math.sqrt(max(A, v0))
        bounds = (min(env_lo, z_lo) - width, max(env_hi, z_hi) + width)
    else:
        if (
            not isinstance(bounds, list)
            or len(bounds) != 2
            or any(isinstance(b, bool) or not isinstance(b, (int, float)) for b in bounds)
        ):
            raise ConfigError("numerical.trait_bounds must be 'auto' or a [low, high] pair")
        bounds = (float(bounds[0]), float(bounds[1]))
        if not bounds[0] < bounds[1]:
            raise ConfigError("numerical.trait_bounds must be increasing")

    trait = TraitGrid(bounds[0], bounds[1], trait_points)
    _, n0_hi = n0.bounds()
    dt_cap = max_stable_dt(A, trait, env, n0_hi, t_end)

    dt = num.get("dt", "auto")
    if dt == "auto":
        n_steps = max(1, math.ceil(t_end / (0.5 * dt_cap)))
        dt = t_end / n_steps
    else:
        dt = _get_number(num, "dt", "numerical", positive=True)
        if dt > dt_cap * (1 + 1e-12):
            raise ConfigError(
                f"numerical.dt = {dt:g} exceeds the stability bound {dt_cap:.6g} "
                "for this trait grid and environment"
            )
        if not _near_multiple(t_end, dt):
            raise ConfigError("numerical.t_end must be an integer multiple of dt")

    snapshot_dt = num.get("snapshot_dt", "auto")
    if snapshot_dt == "auto":
        snapshot_dt = dt * max(1, round(t_end / (100.0 * dt)))
    else:
        snapshot_dt = _get_number(num, "snapshot_dt", "numerical", positive=True)
        if not _near_multiple(snapshot_dt, dt):
            raise ConfigError("numerical.snapshot_dt must be an integer multiple of dt")

    out = doc.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("'output' must be an object")
    _require_keys(out, {"directory", "text", "diagnostics"}, "output")
    out_dir = out.get("directory", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output.directory must be a non-empty string")
    text = out.get("text", False)
    if not isinstance(text, bool):
        raise ConfigError("output.text must be a boolean")
    diagnostics = out.get("diagnostics", list(DIAGNOSTIC_NAMES))
    if not isinstance(diagnostics, list) or any(d not in DIAGNOSTIC_NAMES for d in diagnostics):
        raise ConfigError(f"output.diagnostics entries must be among {DIAGNOSTIC_NAMES}")

    hooks_doc = doc.get("test_hooks", {})
    if not isinstance(hooks_doc, dict):
        raise ConfigError("'test_hooks' must be an object")
    _require_keys(
        hooks_doc, {"planted_theta", "planted_c", "break_kernel_normalization"}, "test_hooks"
    )
    hooks = {}
    if "planted_c" in hooks_doc and "planted_theta" not in hooks_doc:
        raise ConfigError("test_hooks.planted_c needs test_hooks.planted_theta")
    if "planted_theta" in hooks_doc:
        hooks["planted_theta"] = _get_number(hooks_doc, "planted_theta", "test_hooks")
        hooks["planted_c"] = _get_number(
            hooks_doc, "planted_c", "test_hooks", default=1.0, positive=True
        )
    if "break_kernel_normalization" in hooks_doc:
        flag = hooks_doc["break_kernel_normalization"]
        if not isinstance(flag, bool):
            raise ConfigError("test_hooks.break_kernel_normalization must be a boolean")
        hooks["break_kernel_normalization"] = flag

    return RunConfig(
        A=A,
        gamma=gamma,
        gamma_list=gamma_list,
        env=env,
        n0=n0,
        z0=z0,
        v0=v0,
        dim=dim,
        space_points=space_points,
        period=period,
        trait_bounds=bounds,
        trait_points=trait_points,
        dt=dt,
        t_end=t_end,
        snapshot_dt=snapshot_dt,
        seed=seed,
        out_dir=out_dir,
        text=text,
        diagnostics=tuple(diagnostics),
        test_hooks=tuple(sorted(hooks.items())),
    )
