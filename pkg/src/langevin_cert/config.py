"""File-backed run configuration (INI sections, parsed with configparser).

Schema::

    [potential]       family = SingleWell | DoubleWell | SingularPair
                      N, k (ints), A, B, b (floats), a (int), ordered (bool)
    [model]           gamma, T (positive floats)
    [certificate]     route = auto | general | villani
                      rho_K = <float> | estimate   (local constant on K)
                      rho   = <float>              (global constant, villani route)
                      M     = <float>              (global Hessian bound, villani route)
    [simulation]      dt, t_max, ensemble_size, seed, substep_force_threshold,
                      energy_cap, scheme, record_stride
    [sampler]         n_samples, n_chains, burn_in, thin
    [checks]          n_points, n_stress, n_growth
    [rate]            observable, snr, t_min, t_max
    [run]             tasks = comma separated subcommand names

Only ``[potential]`` and ``[model]`` are required; every other key has a
default.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .certificate import ModelParams
from .dynamics import SamplerConfig, SimConfig
from .potential import potential_from_config

TASKS = ("certify", "check-potential", "gamma-verify", "lyapunov-verify",
         "poincare", "simulate", "rate", "report")
ROUTES = ("auto", "general", "villani")


class ConfigError(ValueError):
    """The configuration file is missing, malformed or inconsistent."""


def _positive(name, value):
    value = float(value)
    if not (value > 0 and not math.isnan(value)):
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def _optional_float(name, value):
    if value is None or str(value).strip().lower() in ("", "none"):
        return None
    return _positive(name, value)


@dataclass
class RunConfig:
    potential: dict
    gamma: float
    T: float
    route: str = "auto"
    rho_K: float | str | None = None
    rho: float | None = None
    M: float | None = None
    simulation: SimConfig = field(default_factory=SimConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    n_samples: int = 10000
    n_points: int = 100
    n_stress: int = 1000
    n_growth: int = 10000
    observable: str = "x_1"
    snr: float = 5.0
    t_min: float | None = None
    t_max: float | None = None
    tasks: tuple = ("certify",)

    def __post_init__(self):
        try:
            self.model = potential_from_config(self.potential)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad [potential] table: {exc}") from exc
        self.gamma = _positive("gamma", self.gamma)
        self.T = _positive("T", self.T)
        if self.route not in ROUTES:
            raise ConfigError(f"route must be one of {ROUTES}, got {self.route!r}")
        if isinstance(self.rho_K, str):
            if self.rho_K.strip().lower() == "estimate":
                self.rho_K = "estimate"
            else:
                self.rho_K = _optional_float("rho_K", self.rho_K)
        elif self.rho_K is not None:
            self.rho_K = _positive("rho_K", self.rho_K)
        self.rho = _optional_float("rho", self.rho)
        if self.M is not None:
            self.M = float(self.M)
            if not self.M >= 0:
                raise ConfigError("M must be non-negative")
        for name in ("n_samples", "n_points", "n_stress", "n_growth"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        bad = [t for t in self.tasks if t not in TASKS]
        if bad:
            raise ConfigError(f"unknown tasks {bad}; expected a subset of {TASKS}")

    @property
    def mp(self):
        return ModelParams(self.gamma, self.T, N=self.model.N, k=self.model.k)

    def with_seed(self, seed):
        """Copy with the simulation and sampler seeds replaced."""
        return replace(self, simulation=replace(self.simulation, seed=seed),
                       sampler=replace(self.sampler, seed=seed))

    @classmethod
    def from_string(cls, text):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse configuration: {exc}") from exc
        return cls.from_parser(cp)

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"configuration file not found: {path}")
        return cls.from_string(path.read_text())

    @classmethod
    def from_parser(cls, cp):
        for sec in ("potential", "model"):
            if not cp.has_section(sec):
                raise ConfigError(f"missing required section [{sec}]")
        if "family" not in cp["potential"]:
            raise ConfigError("[potential] needs a 'family' key")
        model = cp["model"]
        for key in ("gamma", "T"):
            if key not in model:
                raise ConfigError(f"[model] needs a '{key}' key")

        def get(sec, key, default=None):
            return cp.get(sec, key, fallback=default) if cp.has_section(sec) else default

        try:
            sim_kwargs = {}
            conv = {"dt": float, "t_max": float, "ensemble_size": int, "seed": int,
                    "substep_force_threshold": float, "energy_cap": float,
                    "scheme": str, "record_stride": int}
            for key, fn in conv.items():
                val = get("simulation", key)
                if val is not None:
                    sim_kwargs[key] = fn(val)
            simulation = SimConfig(**sim_kwargs)
            samp_kwargs = {"seed": simulation.seed}
            for key in ("n_chains", "burn_in", "thin"):
                val = get("sampler", key)
                if val is not None:
                    samp_kwargs[key] = int(val)
            sampler = SamplerConfig(**samp_kwargs)
            tasks = get("run", "tasks", "certify")
            return cls(
                potential=dict(cp["potential"]),
                gamma=model["gamma"], T=model["T"],
                route=get("certificate", "route", "auto"),
                rho_K=get("certificate", "rho_K"),
                rho=get("certificate", "rho"),
                M=get("certificate", "M"),
                simulation=simulation, sampler=sampler,
                n_samples=int(get("sampler", "n_samples", 10000)),
                n_points=int(get("checks", "n_points", 100)),
                n_stress=int(get("checks", "n_stress", 1000)),
                n_growth=int(get("checks", "n_growth", 10000)),
                observable=get("rate", "observable", "x_1"),
                snr=float(get("rate", "snr", 5.0)),
                t_min=_optional_float("t_min", get("rate", "t_min")),
                t_max=_optional_float("t_max", get("rate", "t_max")),
                tasks=tuple(t.strip() for t in tasks.split(",") if t.strip()),
            )
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_ini(self):
        """Serialise back to the INI schema (round-trips through from_string)."""
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["potential"] = {k: str(v) for k, v in self.model.to_config().items()}
        cp["model"] = {"gamma": repr(self.gamma), "T": repr(self.T)}
        cert = {"route": self.route}
        for key in ("rho_K", "rho", "M"):
            val = getattr(self, key)
            if val is not None:
                cert[key] = val if isinstance(val, str) else repr(val)
        cp["certificate"] = cert
        s = self.simulation
        cp["simulation"] = {"dt": repr(s.dt), "t_max": repr(s.t_max),
                            "ensemble_size": str(s.ensemble_size), "seed": str(s.seed),
                            "substep_force_threshold": repr(s.substep_force_threshold),
                            "energy_cap": repr(s.energy_cap), "scheme": s.scheme,
                            "record_stride": str(s.record_stride)}
        cp["sampler"] = {"n_samples": str(self.n_samples), "n_chains": str(self.sampler.n_chains),
                         "burn_in": str(self.sampler.burn_in), "thin": str(self.sampler.thin)}
        cp["checks"] = {"n_points": str(self.n_points), "n_stress": str(self.n_stress),
                        "n_growth": str(self.n_growth)}
        rate = {"observable": self.observable, "snr": repr(self.snr)}
        if self.t_min is not None:
            rate["t_min"] = repr(self.t_min)
        if self.t_max is not None:
            rate["t_max"] = repr(self.t_max)
        cp["rate"] = rate
        cp["run"] = {"tasks": ", ".join(self.tasks)}
        import io
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()
