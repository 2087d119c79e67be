"""Run configuration: TOML file, environment and command-line overrides.

Precedence (lowest to highest): built-in defaults, --config file, environment
variables (CAVITYMODES_<SECTION>__<KEY>), repeated --set section.key=value
flags, then dedicated flags (--out, --workers, --seed). Values are parsed
with TOML syntax, so strings need quotes only when ambiguous.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

import tomli

from .exceptions import ConfigError
from .model import ModelParams
from .trajectory import EvolutionSchedule

ENV_PREFIX = "CAVITYMODES_"

# dotted key -> (RunConfig attribute, caster)
_tuple_f = lambda v: tuple(float(x) for x in v)
KEY_MAP = {
    "params.delta_c": ("delta_c", float),
    "params.u0": ("u0", float),
    "params.ut": ("ut", float),
    "params.kappa": ("kappa", float),
    "params.k_max": ("k_max", int),
    "params.n_max": ("n_max", int),
    "schedule.dt": ("dt", float),
    "schedule.integrator": ("integrator", str),
    "schedule.p_c_limit": ("p_c_limit", float),
    "schedule.edge_threshold": ("edge_threshold", float),
    "schedule.nmax_threshold": ("nmax_threshold", float),
    "schedule.master_seed": ("master_seed", int),
    "steady.horizon": ("steady_horizon", float),
    "steady.t_rel": ("steady_t_rel", float),
    "steady.sample_every": ("steady_sample_every", float),
    "steady.n_traj": ("steady_n_traj", int),
    "dynamics.horizon": ("dynamics_horizon", float),
    "dynamics.n_traj": ("dynamics_n_traj", int),
    "dynamics.sample_every": ("dynamics_sample_every", float),
    "dynamics.frames": ("frames", _tuple_f),
    "analysis.n_x": ("n_x", int),
    "sweep.ut_values": ("sweep_ut", _tuple_f),
    "oracle.k_max": ("oracle_k_max", int),
    "oracle.n_max": ("oracle_n_max", int),
    "oracle.horizon": ("oracle_horizon", float),
    "oracle.n_traj": ("oracle_n_traj", int),
    "oracle.checkpoints": ("oracle_checkpoints", _tuple_f),
    "oracle.trace_tol": ("oracle_trace_tol", float),
    "output.directory": ("out_dir", str),
    "output.workers": ("workers", int),
    "output.plots": ("plots", bool),
    "output.save_rho": ("save_rho", bool),
    "output.event_log": ("event_log", bool),
}


@dataclass(frozen=True)
class RunConfig:
    # physical parameters
    delta_c: float = -390.0
    u0: float = -390.0
    ut: float = -38.0
    kappa: float = 31.25
    k_max: int = 32
    n_max: int = 10
    # stepping
    dt: float = 5e-4
    integrator: str = "rk4"
    p_c_limit: float = 0.01
    edge_threshold: float = 1e-6
    nmax_threshold: float = 1e-4
    master_seed: int = 7041
    # steady-state run
    steady_horizon: float = 25000.0
    steady_t_rel: float = 20.0
    steady_sample_every: float = 0.05
    steady_n_traj: int = 1
    # ensemble dynamics run
    dynamics_horizon: float = 50.0
    dynamics_n_traj: int = 200
    dynamics_sample_every: float = 0.5
    frames: tuple = (2.5, 5.0, 50.0)
    # analysis / sweep / oracle validation
    n_x: int = 256
    sweep_ut: tuple = (-22.0, -38.0, -49.0)
    oracle_k_max: int = 8
    oracle_n_max: int = 3
    oracle_horizon: float = 5.0
    oracle_n_traj: int = 500
    oracle_checkpoints: tuple = (1.0, 2.0, 3.0, 4.0, 5.0)
    oracle_trace_tol: float = 0.05
    # output
    out_dir: str = "out"
    workers: int = 1
    plots: bool = True
    save_rho: bool = True
    event_log: bool = False

    @property
    def params(self) -> ModelParams:
        return ModelParams(
            delta_c=self.delta_c, u0=self.u0, ut=self.ut, kappa=self.kappa,
            k_max=self.k_max, n_max=self.n_max,
        )

    @property
    def oracle_params(self) -> ModelParams:
        return ModelParams(
            delta_c=self.delta_c, u0=self.u0, ut=self.ut, kappa=self.kappa,
            k_max=self.oracle_k_max, n_max=self.oracle_n_max,
        )

    def steady_schedule(self) -> EvolutionSchedule:
        return EvolutionSchedule(
            dt=self.dt, horizon=self.steady_horizon, t_rel=self.steady_t_rel,
            sample_every=self.steady_sample_every, n_traj=self.steady_n_traj,
            master_seed=self.master_seed, integrator=self.integrator,
            p_c_limit=self.p_c_limit, accumulate_steady=True,
            edge_threshold=self.edge_threshold, nmax_threshold=self.nmax_threshold,
        )

    def dynamics_schedule(self) -> EvolutionSchedule:
        return EvolutionSchedule(
            dt=self.dt, horizon=self.dynamics_horizon, t_rel=0.0,
            sample_every=self.dynamics_sample_every, store_states=True,
            n_traj=self.dynamics_n_traj, master_seed=self.master_seed,
            integrator=self.integrator, p_c_limit=self.p_c_limit,
            edge_threshold=self.edge_threshold, nmax_threshold=self.nmax_threshold,
        )

    def resolved(self) -> dict:
        """Flat dotted-key view of every result-defining setting, for output
        headers. Runtime/IO knobs (directory, workers, plotting, logging) are
        excluded: results are independent of them, and the headers of files
        produced with a fixed seed list must be byte-identical across
        directories and worker counts."""
        attr_to_key = {attr: key for key, (attr, _) in KEY_MAP.items()}
        skip = {"out_dir", "workers", "plots", "save_rho", "event_log"}
        out = {}
        for f in fields(self):
            if f.name in skip:
                continue
            key = attr_to_key.get(f.name, f.name)
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[key] = value
        return dict(sorted(out.items()))


def _parse_value(text: str):
    """TOML-typed scalar/array parse with plain-string fallback."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def _apply(updates: dict, key: str, value, origin: str) -> None:
    if key not in KEY_MAP:
        raise ConfigError(f"unknown configuration key {key!r} (from {origin})")
    attr, caster = KEY_MAP[key]
    try:
        if caster is bool and isinstance(value, str):
            value = {"true": True, "false": False}[value.lower()]
        updates[attr] = caster(value)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad value {value!r} for {key} (from {origin}): {exc}") from exc


def load_config(
    path: str | None = None,
    set_overrides: list | None = None,
    environ: dict | None = None,
) -> RunConfig:
    updates: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            try:
                data = tomli.load(fh)
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from exc
        for section, entries in data.items():
            if not isinstance(entries, dict):
                raise ConfigError(f"top-level key {section!r} in {path} is not a section")
            for key, value in entries.items():
                _apply(updates, f"{section}.{key}", value, path)
    env = os.environ if environ is None else environ
    for name, value in sorted(env.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        dotted = name[len(ENV_PREFIX):].lower().replace("__", ".")
        if dotted in KEY_MAP:
            _apply(updates, dotted, _parse_value(value), f"${name}")
    for item in set_overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        _apply(updates, key.strip(), _parse_value(value.strip()), "--set")
    cfg = RunConfig(**updates)
    cfg.params  # construct once to surface parameter validation errors early
    return cfg


def override(cfg: RunConfig, **kwargs) -> RunConfig:
    return replace(cfg, **kwargs)
