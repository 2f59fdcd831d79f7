"""Run configuration: TOML files, environment overrides, unit handling.

Configuration keys carry their unit as a suffix (``equilibrium_gap_nm``,
``loop_duration_ms``, ``plasma_frequency_ev``) and are converted to SI on
load.  Precedence, lowest to highest: packaged defaults (``presets/reference.toml``),
user file, ``CASDYN_*`` environment variables, explicit overrides from CLI
flags.  Unknown keys anywhere are rejected by name rather than silently
ignored.

Environment override syntax: ``CASDYN_<SECTION>__<KEY>=<value>`` with ``__``
separating nesting levels, e.g. ``CASDYN_SYSTEM__TEMPERATURE_K=350`` or
``CASDYN_EXPERIMENT__DIRECTION=acw``.  Values are parsed as TOML literals
when possible and fall back to bare strings.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from importlib import resources

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .constants import EV_TO_RAD_S
from .lifshitz import QuadratureSpec
from .materials import (
    GOLD,
    SILICON,
    Dielectric,
    DielectricModel,
    Drude,
    MirrorStack,
    PerfectConductor,
)
from .mechanics import Cantilever, SystemConfig

__all__ = ["ConfigError", "FieldSpec", "ExperimentSpec", "RunConfig", "parse_config", "config_digest"]

TAU = 2.0 * math.pi


class ConfigError(ValueError):
    """Malformed, unknown, or inconsistent configuration input."""


_MATERIAL = object()  # schema sentinel: validated by the material parser

_CANTILEVER_SCHEMA = {
    "mass_kg": float,
    "frequency_hz": float,
    "damping_hz": float,
}

_SCHEMA = {
    "seed": int,
    "materials": {"mirror1": _MATERIAL, "mirror2": _MATERIAL},
    "system": {
        "sphere_radius_um": float,
        "equilibrium_gap_nm": float,
        "temperature_K": float,
        "extra_damping2_hz": float,
        "cantilever1": _CANTILEVER_SCHEMA,
        "cantilever2": _CANTILEVER_SCHEMA,
    },
    "field": {
        "x_min_nm": float,
        "x_max_nm": float,
        "n_points": int,
        "verify_derivatives": bool,
    },
    "quadrature": {
        "relative_tolerance": float,
        "max_subdivisions": int,
    },
    "experiment": {
        "excited": int,
        "direction": str,
        "f_min_hz": float,
        "f_max_hz": float,
        "delta_min_nm": float,
        "delta_max_nm": float,
        "loop_duration_ms": float,
        "drive_amplitude_nm": float,
        "drive_duration_ms": float,
        "duration_ms": float,
        "dt_us": float,
        "record_every": int,
        "f_mod_hz": float,
        "delta_d_nm": float,
        "sweep_start_hz": float,
        "sweep_stop_hz": float,
        "sweep_points": int,
        "depth_min_nm": float,
        "depth_max_nm": float,
        "depth_points": int,
        "fmax_start_hz": float,
        "fmax_stop_hz": float,
        "fmax_points": int,
        "n_seeds": int,
        "psd_duration_ms": float,
    },
}

_NAMED_MATERIALS: dict[str, DielectricModel] = {
    "gold": GOLD,
    "silicon": SILICON,
    "vacuum": Dielectric(1.0),
    "perfect": PerfectConductor(),
}

_DRUDE_KEYS = {
    "model",
    "plasma_frequency_ev",
    "plasma_frequency_rad_s",
    "relaxation_ev",
    "relaxation_rad_s",
}
_MIRROR_EXTRA_KEYS = {"film_thickness_nm", "substrate"}


@dataclass(frozen=True)
class FieldSpec:
    x_min: float  # m
    x_max: float  # m
    n_points: int
    verify_derivatives: bool


@dataclass(frozen=True)
class ExperimentSpec:
    excited: int
    direction: str
    f_min: float  # Hz
    f_max: float
    delta_min: float  # m
    delta_max: float
    loop_duration: float  # s
    drive_amplitude: float  # m
    drive_duration: float  # s
    duration: float  # s
    dt: float  # s
    record_every: int
    f_mod: float  # Hz
    delta_d: float  # m
    sweep_start: float  # Hz, modulation axis of sweeps
    sweep_stop: float
    sweep_points: int
    depth_min: float  # m, modulation-depth axis
    depth_max: float
    depth_points: int
    fmax_start: float  # Hz, efficiency-curve axis
    fmax_stop: float
    fmax_points: int
    n_seeds: int
    psd_duration: float  # s


@dataclass(frozen=True)
class RunConfig:
    seed: int | None
    system: SystemConfig
    mirrors: tuple[MirrorStack, MirrorStack]
    field_spec: FieldSpec
    quad: QuadratureSpec
    experiment: ExperimentSpec
    resolved: dict  # merged configuration as written (unit-suffixed keys)

    def build_field(self, **kwargs):
        """Tabulate the sphere-plate force over the configured grid.

        Keyword arguments override the configured field parameters.
        """
        from .lifshitz import build_field

        fs = self.field_spec
        params = dict(
            sphere_radius=self.system.sphere_radius,
            temperature=self.system.temperature,
            x_min=fs.x_min,
            x_max=fs.x_max,
            n_points=fs.n_points,
            quad=self.quad,
            verify_derivatives=fs.verify_derivatives,
        )
        params.update(kwargs)
        return build_field(self.mirrors, **params)

    def loop(self):
        """The configured control loop."""
        from .protocol import ControlLoop

        e = self.experiment
        return ControlLoop(
            direction=e.direction,
            f_min=e.f_min,
            f_max=e.f_max,
            delta_min=e.delta_min,
            delta_max=e.delta_max,
            duration=e.loop_duration,
        )


def _load_packaged_defaults() -> dict:
    text = resources.files(__package__).joinpath("presets/reference.toml").read_text()
    return tomllib.loads(text)


def _deep_merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def _check_type(value, expected, path: str):
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
    elif expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
    elif expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
    elif expected is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")


def _check_keys(data: dict, schema: dict, path: str = ""):
    for key, value in data.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown configuration key: {here}")
        node = schema[key]
        if node is _MATERIAL:
            continue  # validated by the material parser
        if isinstance(node, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected a table")
            _check_keys(value, node, here)
        else:
            _check_type(value, node, here)


def _material_model(node, path: str) -> DielectricModel:
    if isinstance(node, str):
        try:
            return _NAMED_MATERIALS[node]
        except KeyError:
            known = ", ".join(sorted(_NAMED_MATERIALS))
            raise ConfigError(f"{path}: unknown material {node!r} (known: {known})") from None
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a material name or table")
    model = node.get("model")
    if model == "drude":
        for k in node:
            if k not in _DRUDE_KEYS:
                raise ConfigError(f"unknown configuration key: {path}.{k}")
        wp_keys = [k for k in ("plasma_frequency_ev", "plasma_frequency_rad_s") if k in node]
        if len(wp_keys) != 1:
            raise ConfigError(f"{path}: give exactly one of plasma_frequency_ev / plasma_frequency_rad_s")
        wp = node[wp_keys[0]] * (EV_TO_RAD_S if wp_keys[0].endswith("_ev") else 1.0)
        g_keys = [k for k in ("relaxation_ev", "relaxation_rad_s") if k in node]
        if len(g_keys) > 1:
            raise ConfigError(f"{path}: give at most one of relaxation_ev / relaxation_rad_s")
        gamma = node[g_keys[0]] * (EV_TO_RAD_S if g_keys[0].endswith("_ev") else 1.0) if g_keys else 0.0
        try:
            return Drude(plasma_frequency=wp, relaxation_rate=gamma)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if model == "dielectric":
        for k in node:
            if k not in ("model", "epsilon"):
                raise ConfigError(f"unknown configuration key: {path}.{k}")
        if "epsilon" not in node:
            raise ConfigError(f"{path}: dielectric needs an epsilon value")
        try:
            return Dielectric(epsilon_static=float(node["epsilon"]))
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if model == "perfect":
        if set(node) - {"model"}:
            raise ConfigError(f"{path}: perfect conductor takes no parameters")
        return PerfectConductor()
    raise ConfigError(f"{path}: model must be one of drude / dielectric / perfect")


def _mirror_stack(node, path: str) -> MirrorStack:
    if isinstance(node, str):
        return MirrorStack.bulk(_material_model(node, path))
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a material name or table")
    film_tbl = {k: v for k, v in node.items() if k not in _MIRROR_EXTRA_KEYS}
    if "material" in film_tbl:
        # named film, e.g. { material = "gold", film_thickness_nm = 70, ... }
        if set(film_tbl) - {"material"}:
            raise ConfigError(f"{path}: 'material' cannot be mixed with inline model keys")
        film = _material_model(film_tbl["material"], f"{path}.material")
    else:
        film = _material_model(film_tbl, path)
    if "film_thickness_nm" not in node:
        if "substrate" in node:
            raise ConfigError(f"{path}: substrate requires film_thickness_nm")
        return MirrorStack.bulk(film)
    thickness = node["film_thickness_nm"]
    if isinstance(thickness, bool) or not isinstance(thickness, (int, float)) or thickness <= 0:
        raise ConfigError(f"{path}.film_thickness_nm: expected a positive number")
    substrate = None
    if "substrate" in node:
        substrate = _material_model(node["substrate"], f"{path}.substrate")
    return MirrorStack(film=film, film_thickness=thickness * 1e-9, substrate=substrate)


def _parse_env_value(raw: str):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def _env_overrides(env) -> dict:
    out: dict = {}
    for name in sorted(env):
        if not name.startswith("CASDYN_"):
            continue
        parts = name[len("CASDYN_") :].split("__")
        node, schema = out, _SCHEMA
        for depth, part in enumerate(parts):
            if not isinstance(schema, dict):
                raise ConfigError(f"environment variable {name}: no such setting")
            match = next((k for k in schema if k.casefold() == part.casefold()), None)
            if match is None:
                raise ConfigError(f"environment variable {name}: no such setting")
            if depth == len(parts) - 1:
                node[match] = _parse_env_value(env[name])
            else:
                node = node.setdefault(match, {})
                schema = schema[match]
    return out


def config_digest(resolved: dict) -> str:
    """Stable content hash of a resolved configuration."""
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _cantilever(node: dict, path: str) -> Cantilever:
    for key in _CANTILEVER_SCHEMA:
        if key not in node:
            raise ConfigError(f"{path}.{key} is required")
    try:
        return Cantilever(
            mass=node["mass_kg"],
            omega=TAU * node["frequency_hz"],
            gamma=TAU * node["damping_hz"],
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_config(path=None, env=None, overrides: dict | None = None) -> RunConfig:
    """Load, merge, validate, and convert a run configuration.

    path: optional TOML file layered over the packaged defaults.
    env: environment mapping (defaults to os.environ) scanned for CASDYN_*.
    overrides: nested dict with the same shape as the file, highest precedence.
    """
    merged = _load_packaged_defaults()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from None
        merged = _deep_merge(merged, user)
    merged = _deep_merge(merged, _env_overrides(os.environ if env is None else env))
    if overrides:
        merged = _deep_merge(merged, overrides)
    _check_keys(merged, _SCHEMA)

    sys_tbl = merged["system"]
    for key in ("sphere_radius_um", "equilibrium_gap_nm", "temperature_K"):
        if key not in sys_tbl:
            raise ConfigError(f"system.{key} is required")
    try:
        system = SystemConfig(
            cantilever1=_cantilever(sys_tbl["cantilever1"], "system.cantilever1"),
            cantilever2=_cantilever(sys_tbl["cantilever2"], "system.cantilever2"),
            sphere_radius=sys_tbl["sphere_radius_um"] * 1e-6,
            equilibrium_gap=sys_tbl["equilibrium_gap_nm"] * 1e-9,
            temperature=float(sys_tbl["temperature_K"]),
            extra_damping_2=TAU * sys_tbl.get("extra_damping2_hz", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"system: {exc}") from None

    mat = merged["materials"]
    mirrors = (
        _mirror_stack(mat["mirror1"], "materials.mirror1"),
        _mirror_stack(mat["mirror2"], "materials.mirror2"),
    )

    fld = merged["field"]
    field_spec = FieldSpec(
        x_min=fld["x_min_nm"] * 1e-9,
        x_max=fld["x_max_nm"] * 1e-9,
        n_points=fld["n_points"],
        verify_derivatives=fld.get("verify_derivatives", True),
    )
    if not 0 < field_spec.x_min < field_spec.x_max:
        raise ConfigError("field: need 0 < x_min_nm < x_max_nm")

    q = merged["quadrature"]
    try:
        quad = QuadratureSpec(
            relative_tolerance=q["relative_tolerance"],
            max_subdivisions=q["max_subdivisions"],
        )
    except ValueError as exc:
        raise ConfigError(f"quadrature: {exc}") from None

    e = merged["experiment"]
    experiment = ExperimentSpec(
        excited=e["excited"],
        direction=e["direction"],
        f_min=float(e["f_min_hz"]),
        f_max=float(e["f_max_hz"]),
        delta_min=e["delta_min_nm"] * 1e-9,
        delta_max=e["delta_max_nm"] * 1e-9,
        loop_duration=e["loop_duration_ms"] * 1e-3,
        drive_amplitude=e["drive_amplitude_nm"] * 1e-9,
        drive_duration=e["drive_duration_ms"] * 1e-3,
        duration=e["duration_ms"] * 1e-3,
        dt=e["dt_us"] * 1e-6,
        record_every=e["record_every"],
        f_mod=float(e["f_mod_hz"]),
        delta_d=e["delta_d_nm"] * 1e-9,
        sweep_start=float(e["sweep_start_hz"]),
        sweep_stop=float(e["sweep_stop_hz"]),
        sweep_points=e["sweep_points"],
        depth_min=e["depth_min_nm"] * 1e-9,
        depth_max=e["depth_max_nm"] * 1e-9,
        depth_points=e["depth_points"],
        fmax_start=float(e["fmax_start_hz"]),
        fmax_stop=float(e["fmax_stop_hz"]),
        fmax_points=e["fmax_points"],
        n_seeds=e["n_seeds"],
        psd_duration=e["psd_duration_ms"] * 1e-3,
    )
    if experiment.excited not in (1, 2):
        raise ConfigError("experiment.excited must be 1 or 2")
    if experiment.direction not in ("cw", "acw"):
        raise ConfigError("experiment.direction must be 'cw' or 'acw'")
    for name, lo, hi in (
        ("f_min_hz/f_max_hz", experiment.f_min, experiment.f_max),
        ("delta_min_nm/delta_max_nm", experiment.delta_min, experiment.delta_max),
    ):
        if not lo < hi:
            raise ConfigError(f"experiment: need {name} increasing")

    seed = merged.get("seed")
    return RunConfig(
        seed=seed,
        system=system,
        mirrors=mirrors,
        field_spec=field_spec,
        quad=quad,
        experiment=experiment,
        resolved=merged,
    )
