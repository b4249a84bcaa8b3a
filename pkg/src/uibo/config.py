"""Run configuration: INI parsing, validation, defaults, and effective dumps.

The experiment matrix has roughly twenty parameters, so runs are described by
a flat, human-editable INI file instead of positional flags: a ``[run]``
section for shared settings plus one optional ``[method:<name>]`` section per
entry of ``methods``. Every key has a default, so the empty string parses to
the shipped benchmark configuration. ``dump_config`` writes the fully
resolved ("effective") configuration with 17-significant-digit floats, and
``parse_config(dump_config(cfg))`` returns an equal ``RunConfig``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields

import numpy as np

from .acquisition import AcqConfig, QueryPolicy, SearchRegion, UtParams
from .driver import PLANNERS, MethodSpec, SimSetup
from .gp import Hyperparams
from .simulate import NoiseModel

ACQ_KIND_NAMES = ("ducb", "entropy")

# canonical method-name table: prefix encodes the planner, suffix the
# acquisition family
_NAME_PLANNER = {"bo": "standard", "ubo": "unscented", "uibo": "uncertain_inputs"}
_NAME_ACQ = {"ducb": "ducb", "es": "entropy"}

DEFAULT_METHOD_NAMES = ("bo-ducb", "ubo-ducb", "uibo-ducb",
                        "bo-es", "ubo-es", "uibo-es")


class ConfigError(ValueError):
    """A configuration file that cannot be parsed or validated."""


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, tuple):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def _finite(value, key):
    value = float(value)
    if not np.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {value!r}")
    return value


def _positive(value, key):
    value = _finite(value, key)
    if value <= 0.0:
        raise ConfigError(f"{key} must be positive, got {value!r}")
    return value


def _nonnegative(value, key):
    value = _finite(value, key)
    if value < 0.0:
        raise ConfigError(f"{key} must be nonnegative, got {value!r}")
    return value


def _int_at_least(value, key, minimum):
    value = int(value)
    if value < minimum:
        raise ConfigError(f"{key} must be at least {minimum}, got {value}")
    return value


def _pair(value, key):
    items = tuple(float(v) for v in value) if not isinstance(value, str) else \
        tuple(float(v) for v in value.split())
    if len(items) != 2:
        raise ConfigError(f"{key} must hold exactly two values, got {len(items)}")
    return tuple(_finite(v, key) for v in items)


def split_method_name(name: str) -> tuple[str, str] | None:
    """(planner, acq_kind) for a canonical name like 'uibo-es', else None."""
    head, sep, tail = name.partition("-")
    if sep and head in _NAME_PLANNER and tail in _NAME_ACQ:
        return _NAME_PLANNER[head], _NAME_ACQ[tail]
    return None


@dataclass(frozen=True)
class MethodConfig:
    """Fully resolved settings for one benchmark method."""

    name: str
    planner: str
    acq_kind: str
    kappa: float
    gamma: float
    budget: int
    query_sd: float

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise ConfigError(f"method name must be nonempty without spaces, "
                              f"got {self.name!r}")
        if self.planner not in PLANNERS:
            raise ConfigError(f"planner for {self.name} must be one of "
                              f"{PLANNERS}, got {self.planner!r}")
        if self.acq_kind not in ACQ_KIND_NAMES:
            raise ConfigError(f"acq for {self.name} must be one of "
                              f"{ACQ_KIND_NAMES}, got {self.acq_kind!r}")
        object.__setattr__(self, "kappa", _nonnegative(self.kappa, f"kappa for {self.name}"))
        object.__setattr__(self, "gamma", _nonnegative(self.gamma, f"gamma for {self.name}"))
        object.__setattr__(self, "budget", _int_at_least(self.budget, f"budget for {self.name}", 1))
        object.__setattr__(self, "query_sd", _nonnegative(self.query_sd, f"query_sd for {self.name}"))


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one benchmark run.

    All lengths are in region units; all noise fields are standard
    deviations. The model hyperparameters (``signal_var`` .. ``mean_const``)
    are shared by every method; the terrain field has its own kernel.
    """

    region_low: tuple = (0.0, 0.0)
    region_high: tuple = (10.0, 10.0)
    signal_var: float = 0.25
    length_scales: tuple = (0.7, 0.7)
    noise_var: float = 1e-4
    mean_const: float = 4.45
    terrain_signal_var: float = 1.0
    terrain_length_scales: tuple = (1.0, 1.0)
    terrain_centers: int = 80
    terrain_floor: float = 0.5
    exec_sd: float = 0.07
    loc_sd: float = 0.07
    obs_sd: float = 0.1
    query_sd: float = 0.1
    kappa: float = 10.0
    gamma: float = 1.0
    methods: tuple = ()
    trials: int = 30
    budget: int = 50
    seed: int = 0
    acq_grid: int = 50
    eval_grid: int = 100
    out_dir: str = "results"

    def __post_init__(self):
        set_attr = lambda k, v: object.__setattr__(self, k, v)
        set_attr("region_low", _pair(self.region_low, "region_low"))
        set_attr("region_high", _pair(self.region_high, "region_high"))
        if not all(lo < hi for lo, hi in zip(self.region_low, self.region_high)):
            raise ConfigError("region_high must exceed region_low in every axis")
        set_attr("signal_var", _positive(self.signal_var, "signal_var"))
        set_attr("length_scales", _pair(self.length_scales, "length_scales"))
        if any(v <= 0.0 for v in self.length_scales):
            raise ConfigError("length_scales must be positive")
        set_attr("noise_var", _positive(self.noise_var, "noise_var"))
        set_attr("mean_const", _finite(self.mean_const, "mean_const"))
        set_attr("terrain_signal_var", _positive(self.terrain_signal_var,
                                                 "terrain_signal_var"))
        set_attr("terrain_length_scales", _pair(self.terrain_length_scales,
                                                "terrain_length_scales"))
        if any(v <= 0.0 for v in self.terrain_length_scales):
            raise ConfigError("terrain_length_scales must be positive")
        set_attr("terrain_centers", _int_at_least(self.terrain_centers,
                                                  "terrain_centers", 0))
        set_attr("terrain_floor", _nonnegative(self.terrain_floor, "terrain_floor"))
        for key in ("exec_sd", "loc_sd", "obs_sd", "query_sd", "kappa", "gamma"):
            set_attr(key, _nonnegative(getattr(self, key), key))
        set_attr("trials", _int_at_least(self.trials, "trials", 1))
        set_attr("budget", _int_at_least(self.budget, "budget", 1))
        set_attr("seed", _int_at_least(self.seed, "seed", 0))
        set_attr("acq_grid", _int_at_least(self.acq_grid, "acq_grid", 2))
        set_attr("eval_grid", _int_at_least(self.eval_grid, "eval_grid", 2))
        if not isinstance(self.out_dir, str) or not self.out_dir:
            raise ConfigError("out_dir must be a nonempty path")
        if not self.methods:
            set_attr("methods", tuple(
                _resolve_method(name, {}, self) for name in DEFAULT_METHOD_NAMES))
        set_attr("methods", tuple(self.methods))
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ConfigError("methods must have unique names")


_RUN_KEYS = tuple(f.name for f in fields(RunConfig) if f.name != "methods") + ("methods",)
_METHOD_KEYS = ("planner", "acq", "kappa", "gamma", "budget", "query_sd")


def _resolve_method(name: str, section: dict, run: RunConfig) -> MethodConfig:
    """Merge a method section with run-level defaults.

    An unlisted planner/acquisition is inferred from a canonical name; the
    distance penalty defaults to zero for variance-only acquisition, which
    has no travel term.
    """
    canonical = split_method_name(name)
    planner = section.get("planner", canonical[0] if canonical else None)
    acq = section.get("acq", canonical[1] if canonical else None)
    if planner is None or acq is None:
        raise ConfigError(
            f"method {name!r} is not canonical; its section must set "
            f"planner and acq")
    default_gamma = run.gamma if acq == "ducb" else 0.0
    return MethodConfig(
        name=name,
        planner=planner,
        acq_kind=acq,
        kappa=float(section.get("kappa", run.kappa)),
        gamma=float(section.get("gamma", default_gamma)),
        budget=int(section.get("budget", run.budget)),
        query_sd=float(section.get("query_sd", run.query_sd)),
    )


def default_config(**overrides) -> RunConfig:
    """The shipped benchmark configuration, optionally overridden by field."""
    return RunConfig(**overrides)


def parse_config(text: str) -> RunConfig:
    """Parse INI text into a validated RunConfig.

    Unknown keys and orphan sections are errors so that typos fail loudly
    instead of silently running defaults.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    run_raw = dict(parser["run"]) if parser.has_section("run") else {}
    for key in run_raw:
        if key not in _RUN_KEYS:
            raise ConfigError(f"unknown key {key!r} in [run]")
    method_sections: dict[str, dict] = {}
    for section in parser.sections():
        if section == "run":
            continue
        prefix, sep, name = section.partition(":")
        if prefix != "method" or not sep or not name:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _METHOD_KEYS:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
        method_sections[name] = dict(parser[section])

    kwargs = {}
    int_keys = {"terrain_centers", "trials", "budget", "seed", "acq_grid", "eval_grid"}
    pair_keys = {"region_low", "region_high", "length_scales", "terrain_length_scales"}
    for key, raw in run_raw.items():
        if key == "methods":
            continue
        try:
            if key == "out_dir":
                kwargs[key] = raw
            elif key in int_keys:
                kwargs[key] = int(raw)
            elif key in pair_keys:
                kwargs[key] = raw
            else:
                kwargs[key] = float(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r} in [run]: {exc}") from exc
    base = RunConfig(**kwargs)

    names = tuple(run_raw["methods"].split()) if "methods" in run_raw \
        else DEFAULT_METHOD_NAMES
    if not names:
        raise ConfigError("methods must list at least one name")
    for name in method_sections:
        if name not in names:
            raise ConfigError(f"section [method:{name}] does not match any "
                              f"name in methods")
    try:
        resolved = tuple(_resolve_method(nm, method_sections.get(nm, {}), base)
                         for nm in names)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"method section value: {exc}") from exc
    return RunConfig(**{**kwargs, "methods": resolved})


def load_config(path) -> RunConfig:
    """Read and parse a config file; errors carry the offending path."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    """The effective configuration as INI text (17-significant-digit floats)."""
    lines = ["[run]"]
    for f in fields(RunConfig):
        if f.name == "methods":
            lines.append(f"methods = {' '.join(m.name for m in cfg.methods)}")
        else:
            lines.append(f"{f.name} = {_fmt(getattr(cfg, f.name))}")
    for m in cfg.methods:
        lines += [
            "",
            f"[method:{m.name}]",
            f"planner = {m.planner}",
            f"acq = {m.acq_kind}",
            f"kappa = {_fmt(m.kappa)}",
            f"gamma = {_fmt(m.gamma)}",
            f"budget = {m.budget}",
            f"query_sd = {_fmt(m.query_sd)}",
        ]
    return "\n".join(lines) + "\n"


def build_setup(cfg: RunConfig) -> SimSetup:
    """The simulation environment described by a RunConfig."""
    region = SearchRegion(np.array(cfg.region_low), np.array(cfg.region_high))
    # the terrain sampler reads only the kernel's signal variance and length
    # scales; noise and mean are placeholders
    terrain_kernel = Hyperparams(cfg.terrain_signal_var,
                                 np.array(cfg.terrain_length_scales), 0.1, 0.0)
    return SimSetup(region=region, terrain_kernel=terrain_kernel,
                    n_centers=cfg.terrain_centers, floor=cfg.terrain_floor,
                    noise=NoiseModel(cfg.exec_sd, cfg.loc_sd, cfg.obs_sd),
                    eval_grid=cfg.eval_grid, acq_grid=cfg.acq_grid)


def model_hyper(cfg: RunConfig) -> Hyperparams:
    """The shared surrogate hyperparameters described by a RunConfig."""
    return Hyperparams(cfg.signal_var, np.array(cfg.length_scales),
                       cfg.noise_var, cfg.mean_const)


def build_methods(cfg: RunConfig) -> list[MethodSpec]:
    """MethodSpecs for every configured method, sharing one surrogate model."""
    hyper = model_hyper(cfg)
    specs = []
    for m in cfg.methods:
        qcov = m.query_sd**2 * np.eye(2)
        policy = {
            "standard": QueryPolicy("deterministic", np.zeros((2, 2))),
            "unscented": QueryPolicy("unscented", qcov, UtParams()),
            "uncertain_inputs": QueryPolicy("distributional", qcov),
        }[m.planner]
        acq_cfg = AcqConfig(kappa=m.kappa, gamma=m.gamma, kind=m.acq_kind)
        specs.append(MethodSpec(m.planner, m.acq_kind, acq_cfg, policy, hyper,
                                budget=m.budget, name=m.name))
    return specs
