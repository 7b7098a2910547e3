"""
Experiment configuration: a flat key = value text file plus per-key overrides.

Lists are comma separated. Modulation indices accept plain numbers or the
``0.6/(2pi)`` / ``0.6/2pi`` shorthand. Targets are ``range_m:velocity_mps``
pairs, e.g. ``targets = 100:10, 150:-5``.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass

SCENARIOS = (
    "ber_flat",
    "ber_doubly_dispersive",
    "ber_single_tap_mobility",
    "rmse_sweep",
    "rdm_export",
    "mainlobe_vs_m",
)
WAVEFORMS = ("fm_ofdm", "ce_ofdm", "cp_ofdm")
PROFILES = ("identity", "flat", "five_tap")
TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "ber_flat"
    waveforms: tuple = ("fm_ofdm", "ce_ofdm", "cp_ofdm")
    snr_grid: tuple = (20.0, 25.0, 30.0)
    n_fft: int = 512
    n_cp: int = 64
    sample_rate: float = 15.36e6
    carrier: float = 2.4e9
    cutoff: tuple = (64,)
    mod_index: tuple = (0.6 / TWO_PI,)
    eta: float = 1.5
    speed: float = 0.0
    doppler_factor: float = 1.0
    profile: str = "flat"
    targets: tuple = ()
    n_symbols: int = 64
    blocks_per_trial: int = 10
    trials: int = 100
    seed: int = 0
    workers: int = 1
    beta_mode: str = "genie"
    normalization: str = "empirical"
    qam_order: int = 4
    window: str = "none"
    out: str = "results"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        bad = [w for w in self.waveforms if w not in WAVEFORMS]
        if bad or not self.waveforms:
            raise ConfigError(f"waveforms must be a nonempty subset of {WAVEFORMS}, got {self.waveforms}")
        if not self.snr_grid:
            raise ConfigError("snr_grid is empty")
        if any(math.isnan(s) for s in self.snr_grid):
            raise ConfigError("snr_grid contains NaN")
        positive = {
            "n_fft": self.n_fft,
            "sample_rate": self.sample_rate,
            "carrier": self.carrier,
            "n_symbols": self.n_symbols,
            "blocks_per_trial": self.blocks_per_trial,
            "trials": self.trials,
            "workers": self.workers,
            "doppler_factor": self.doppler_factor,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.n_cp < 0 or self.n_cp >= self.n_fft:
            raise ConfigError(f"n_cp must lie in [0, n_fft), got {self.n_cp}")
        if self.speed < 0:
            raise ConfigError("speed must be nonnegative")
        if not 1.0 <= self.eta <= 2.0:
            raise ConfigError(f"eta must lie in [1, 2], got {self.eta}")
        if not self.mod_index or any(m <= 0 for m in self.mod_index):
            raise ConfigError("mod_index values must be positive")
        if not self.cutoff or any(not 1 <= k < self.n_fft // 2 for k in self.cutoff):
            raise ConfigError(f"cutoff values must lie in [1, {self.n_fft // 2 - 1}]")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}")
        if self.beta_mode not in ("genie", "proxy"):
            raise ConfigError("beta_mode must be 'genie' or 'proxy'")
        if self.normalization not in ("empirical", "ensemble"):
            raise ConfigError("normalization must be 'empirical' or 'ensemble'")
        if self.window not in ("none", "hann"):
            raise ConfigError("window must be 'none' or 'hann'")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


# Per-scenario defaults layered under the config file and flags.
SCENARIO_DEFAULTS = {
    "ber_flat": dict(profile="flat", speed=0.0, snr_grid=(20.0, 25.0, 30.0), trials=400, blocks_per_trial=10),
    "ber_doubly_dispersive": dict(
        profile="five_tap",
        speed=27.78,
        carrier=2.4e9,
        waveforms=("fm_ofdm",),
        mod_index=(0.3 / TWO_PI, 0.6 / TWO_PI),
        cutoff=(32, 64),
        snr_grid=(10.0, 20.0, 30.0),
        trials=50,
        blocks_per_trial=14,
    ),
    "ber_single_tap_mobility": dict(
        profile="flat",
        speed=27.78,
        carrier=77e9,
        snr_grid=(20.0, 25.0, 30.0),
        trials=60,
        blocks_per_trial=14,
    ),
    "rmse_sweep": dict(
        waveforms=("fm_ofdm", "cp_ofdm"),
        mod_index=(0.9 / TWO_PI,),
        snr_grid=(0.0, 10.0, 20.0),
        trials=30,
        n_symbols=64,
    ),
    "rdm_export": dict(
        waveforms=("fm_ofdm",),
        mod_index=(0.9 / TWO_PI,),
        sample_rate=200e6,
        carrier=77e9,
        cutoff=(200,),
        snr_grid=(10.0, -30.0),
        targets=((30.0, 15.0),),
        trials=1,
        n_symbols=64,
    ),
    "mainlobe_vs_m": dict(
        waveforms=("fm_ofdm",),
        mod_index=(0.3 / TWO_PI, 0.6 / TWO_PI, 0.9 / TWO_PI),
        snr_grid=(math.inf,),
        trials=50,
        n_symbols=8,
    ),
}


_MOD_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*/\s*\(?\s*2\s*\*?\s*pi\s*\)?\s*$", re.IGNORECASE)


def parse_mod_index(text: str) -> float:
    """``0.1``, ``0.6/(2pi)``, ``0.6/2pi`` or ``0.6/(2*pi)``."""
    m = _MOD_RE.match(text)
    try:
        return float(m.group(1)) / TWO_PI if m else float(text)
    except ValueError:
        raise ConfigError(f"cannot read modulation index {text!r}") from None


def _split(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _float(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(t)


def _parse_targets(text: str) -> tuple:
    out = []
    for item in _split(text):
        parts = item.split(":")
        if len(parts) != 2:
            raise ConfigError(f"target {item!r} is not range:velocity")
        out.append((float(parts[0]), float(parts[1])))
    return tuple(out)


def _converter(name: str):
    if name == "mod_index":
        return lambda s: tuple(parse_mod_index(t) for t in _split(s))
    if name == "targets":
        return _parse_targets
    if name in ("waveforms",):
        return lambda s: tuple(_split(s))
    if name == "snr_grid":
        return lambda s: tuple(_float(t) for t in _split(s))
    if name == "cutoff":
        return lambda s: tuple(int(t) for t in _split(s))
    default = FIELD_DEFAULTS[name]
    if isinstance(default, bool):
        return lambda s: s.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return lambda s: int(s)
    if isinstance(default, float):
        return _float
    return lambda s: s.strip()


FIELD_DEFAULTS = {f.name: f.default for f in dataclasses.fields(ExperimentConfig)}


def parse_value(name: str, text: str):
    """Convert the text form of one config key to its typed value."""
    if name not in FIELD_DEFAULTS:
        raise ConfigError(f"unknown config key {name!r}")
    try:
        return _converter(name)(text)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {text!r} ({exc})") from None


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Raises OSError on I/O failure."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            values[key] = parse_value(key, value)
    return values


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Scenario defaults, then file values, then overrides (later wins)."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    scenario = merged.get("scenario", FIELD_DEFAULTS["scenario"])
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    values = dict(SCENARIO_DEFAULTS[scenario])
    values.update(merged)
    unknown = set(values) - set(FIELD_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def format_value(value) -> str:
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join(":".join(repr(float(v)) for v in t) for t in value)
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Text form readable by :func:`read_config_file`."""
    return "".join(f"{f.name} = {format_value(getattr(cfg, f.name))}\n" for f in dataclasses.fields(cfg))

