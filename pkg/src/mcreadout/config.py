"""Experiment configuration: strict YAML with ordinary frequencies in Hz.

Every frequency in a config file is an ordinary frequency (Hz); the library
works in angular units (rad/s) and conversion happens here only.  Unknown keys
are rejected, and errors name the offending field and its line.

Example::

    system:
      g_hz: 130.0e6
    protocol:
      name: multichannel
      duration_s: 280.0e-9
    noise:
      noise_factor: 3.0
    run:
      seed: 7
"""
import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from .engine import FRAMES
from .protocols import PRESETS, ResetTail, preset
from .singleshot import NoiseModel
from .system import MAX_HILBERT_DIM, DEVICE, TWO_PI, SystemParams

DEFAULT_TAUS = tuple(round(100e-9 + k * (320e-9 / 7), 15) for k in range(8))


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-9`` and ``1.5e6`` as floats (YAML 1.1
    requires a decimal point)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:\d+\.?\d*|\.\d+)[eE][-+]?\d+$"),
    list("-+0123456789."),
)


class ConfigError(ValueError):
    def __init__(self, message, path="", line=None):
        self.path = path
        self.line = line
        where = path or "<config>"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class SystemConfig:
    g_hz: float = DEVICE["g_hz"]
    omega_r_hz: float = DEVICE["omega_r_hz"]
    omega_q_hz: float = DEVICE["omega_q_hz"]
    anharmonicity_hz: float = DEVICE["anharmonicity_hz"]
    kappa_i_hz: float = DEVICE["kappa_i_hz"]
    kappa_x_hz: float = DEVICE["kappa_x_hz"]
    omega_d_hz: float | None = None
    gamma_1_per_s: float = 0.0
    n_transmon: int = 4
    n_fock: int = 30
    coupling_model: str = "transmon"
    chi_measured_hz: float = DEVICE["chi_measured_hz"]

    def to_params(self):
        return SystemParams(
            g=TWO_PI * self.g_hz,
            omega_r=TWO_PI * self.omega_r_hz,
            omega_q=TWO_PI * self.omega_q_hz,
            anharmonicity=TWO_PI * self.anharmonicity_hz,
            kappa_i=TWO_PI * self.kappa_i_hz,
            kappa_x=TWO_PI * self.kappa_x_hz,
            omega_d=None if self.omega_d_hz is None else TWO_PI * self.omega_d_hz,
            gamma_1=self.gamma_1_per_s,
            n_transmon=self.n_transmon,
            n_fock=self.n_fock,
            coupling_model=self.coupling_model,
            chi_measured=TWO_PI * self.chi_measured_hz,
        )


@dataclass(frozen=True)
class ProtocolConfig:
    name: str = "multichannel"
    duration_s: float = 280e-9
    omega_q_hz: float | None = None
    omega_r_hz: float | None = None
    phi_q_rad: float | None = None
    phi_r_rad: float | None = None
    rise_time_s: float = 0.0
    compensate_offset: bool = True
    frame: str = "rotating"
    reset_hold_s: float | None = None
    reset_displacement: list | None = None
    displacement_duration_s: float = 4e-9

    def to_spec(self, params):
        """Preset at reference amplitudes, then explicit overrides."""
        spec = preset(self.name, params, duration=self.duration_s)
        changes = {"rise_time": self.rise_time_s, "compensate_offset": self.compensate_offset}
        if self.omega_q_hz is not None:
            changes["omega_q_mag"] = TWO_PI * self.omega_q_hz
        if self.omega_r_hz is not None:
            changes["omega_r_mag"] = TWO_PI * self.omega_r_hz
        if self.phi_q_rad is not None:
            changes["phi_q"] = self.phi_q_rad
        if self.phi_r_rad is not None:
            changes["phi_r"] = self.phi_r_rad
        if spec.kind == "unconditional_reset":
            disp = None if self.reset_displacement is None else complex(*self.reset_displacement)
            changes["reset_tail"] = ResetTail(self.reset_hold_s, disp, self.displacement_duration_s)
        return spec.with_(**changes)


@dataclass(frozen=True)
class NoiseConfig:
    noise_factor: float | None = 3.0
    sigma_quadrature: float | None = None
    thermal_eps: float = 0.0
    eps_prep: float = 0.0

    def to_model(self, params, sample_interval, seed):
        if self.sigma_quadrature is not None:
            return NoiseModel(self.sigma_quadrature, sample_interval, seed)
        return NoiseModel.from_noise_factor(self.noise_factor, params.kappa_x, sample_interval, seed)


@dataclass(frozen=True)
class RunConfig:
    dt_s: float | None = None
    sample_interval_s: float = 2e-9
    n_shots: int = 10000
    tau_grid_s: list = field(default_factory=lambda: list(DEFAULT_TAUS))
    seed: int = 0
    output_dir: str = "out"
    phase_points: int = 32


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def to_dict(self):
        return asdict(self)

    def params(self):
        return self.system.to_params()

    def spec(self, params=None):
        return self.protocol.to_spec(params or self.params())

    def noise_model(self, params=None):
        return self.noise.to_model(params or self.params(), self.run.sample_interval_s, self.run.seed)

    def with_seed(self, seed):
        return replace(self, run=replace(self.run, seed=seed))


SECTIONS = {"system": SystemConfig, "protocol": ProtocolConfig, "noise": NoiseConfig, "run": RunConfig}


def _compose(text):
    try:
        return yaml.compose(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"parse error: {getattr(exc, 'problem', exc)}", line=None if mark is None else mark.line + 1) from None


def _line_index(node, prefix="", out=None):
    """Map dotted key paths to 1-based line numbers."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, val in node.value:
            path = f"{prefix}.{key.value}" if prefix else str(key.value)
            out[path] = key.start_mark.line + 1
            _line_index(val, path, out)
    return out


def _type_check(path, name, value, default, line):
    """Coerce ``value`` to the type implied by the field default."""
    if value is None:
        return None
    numeric_names = name.endswith(("_hz", "_s", "_rad", "_per_s")) or name in ("noise_factor", "sigma_quadrature", "thermal_eps", "eps_prep")
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", path, line)
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path, line)
        return value
    if isinstance(default, float) or (default is None and numeric_names and name not in ("reset_displacement",)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path, line)
        if not math.isfinite(value):
            raise ConfigError("value must be finite", path, line)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path, line)
        return value
    if isinstance(default, list) or name in ("tau_grid_s", "reset_displacement"):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"expected a list of numbers, got {value!r}", path, line)
        return [float(v) for v in value]
    return value


def _validate(cfg, lines):
    def fail(path, msg):
        raise ConfigError(msg, path, lines.get(path))

    s, p, n, r = cfg.system, cfg.protocol, cfg.noise, cfg.run
    for name in ("kappa_i_hz", "kappa_x_hz", "gamma_1_per_s"):
        if getattr(s, name) < 0:
            fail(f"system.{name}", "must be non-negative")
    if s.n_transmon < 2:
        fail("system.n_transmon", "must be >= 2")
    if s.n_fock < 2:
        fail("system.n_fock", "must be >= 2")
    if s.n_transmon * s.n_fock > MAX_HILBERT_DIM:
        fail("system.n_fock", f"n_transmon * n_fock exceeds {MAX_HILBERT_DIM}")
    if s.coupling_model not in ("transmon", "two_level"):
        fail("system.coupling_model", "must be 'transmon' or 'two_level'")
    if p.name not in PRESETS:
        fail("protocol.name", f"unknown protocol; expected one of {', '.join(PRESETS)}")
    if not p.duration_s > 0:
        fail("protocol.duration_s", "must be positive")
    for name in ("omega_q_hz", "omega_r_hz", "reset_hold_s"):
        v = getattr(p, name)
        if v is not None and v < 0:
            fail(f"protocol.{name}", "must be non-negative")
    if p.rise_time_s < 0:
        fail("protocol.rise_time_s", "must be non-negative")
    if not p.displacement_duration_s > 0:
        fail("protocol.displacement_duration_s", "must be positive")
    if p.frame not in FRAMES:
        fail("protocol.frame", f"must be one of {FRAMES}")
    if p.reset_displacement is not None and len(p.reset_displacement) != 2:
        fail("protocol.reset_displacement", "must be [re, im]")
    if (n.noise_factor is None) == (n.sigma_quadrature is None):
        fail("noise.noise_factor", "give exactly one of noise_factor and sigma_quadrature")
    if n.noise_factor is not None and n.noise_factor < 1:
        fail("noise.noise_factor", "must be >= 1")
    if n.sigma_quadrature is not None and not n.sigma_quadrature > 0:
        fail("noise.sigma_quadrature", "must be positive")
    if not 0 <= n.thermal_eps < 1:
        fail("noise.thermal_eps", "must lie in [0, 1)")
    if r.dt_s is not None and not r.dt_s > 0:
        fail("run.dt_s", "must be positive")
    if not r.sample_interval_s > 0:
        fail("run.sample_interval_s", "must be positive")
    if r.n_shots < 1:
        fail("run.n_shots", "must be >= 1")
    if not r.tau_grid_s or any(t <= 0 for t in r.tau_grid_s):
        fail("run.tau_grid_s", "must be a non-empty list of positive times")
    if r.seed < 0:
        fail("run.seed", "must be non-negative")
    if r.phase_points < 1:
        fail("run.phase_points", "must be >= 1")


def _set_dotted(data, dotted, value):
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        if node.get(k) is None:
            node[k] = {}
        node = node[k]
        if not isinstance(node, dict):
            raise ConfigError("cannot descend into a scalar", dotted)
    node[keys[-1]] = value


def parse_overrides(items):
    """``["run.seed=3", ...]`` -> ``[(path, value), ...]`` with YAML scalars."""
    out = []
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", "override")
        key, raw = item.split("=", 1)
        try:
            value = yaml.load(raw, Loader=_Loader)
        except yaml.YAMLError:
            raise ConfigError(f"cannot parse override value {raw!r}", key) from None
        out.append((key.strip(), value))
    return out


def parse_config(source=None, overrides=()):
    """Build an :class:`ExperimentConfig` from YAML text or a file path.

    ``source=None`` gives the all-defaults configuration.  ``overrides`` is a
    list of ``(dotted_key, value)`` pairs applied before validation.
    """
    text = ""
    if source is not None:
        if "\n" in source or ":" in source:
            text = source
        else:
            try:
                with open(source) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc.strerror}", str(source)) from None
    node = _compose(text) if text.strip() else None
    lines = _line_index(node) if node is not None else {}
    data = yaml.load(text, Loader=_Loader) if text.strip() else {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping with system/protocol/noise/run sections", line=1)
    for key, value in overrides:
        _set_dotted(data, key, value)
    built = {}
    for sec, val in data.items():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section; expected one of {', '.join(SECTIONS)}", str(sec), lines.get(str(sec)))
        if val is None:
            val = {}
        if not isinstance(val, dict):
            raise ConfigError("section must be a mapping", sec, lines.get(sec))
        cls = SECTIONS[sec]
        known = {f.name: f for f in fields(cls)}
        defaults = cls()
        kwargs = {}
        for k, v in val.items():
            path = f"{sec}.{k}"
            if k not in known:
                raise ConfigError(f"unknown key; allowed: {', '.join(known)}", path, lines.get(path))
            kwargs[k] = _type_check(path, k, v, getattr(defaults, k), lines.get(path))
        built[sec] = cls(**kwargs)
    cfg = ExperimentConfig(**built)
    _validate(cfg, lines)
    return cfg


def dump_config(cfg):
    """YAML text that parses back to an equal config."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)


def config_hash(cfg):
    """SHA-256 of the canonical JSON form of every field."""
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()
