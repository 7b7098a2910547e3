"""Time-varying multipath, monostatic target echoes and AWGN."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .waveform import SPEED_OF_LIGHT, ComplexSignal


@dataclass(frozen=True)
class ChannelPath:
    """One propagation path: complex gain, Doppler shift (Hz), integer delay (samples)."""

    gain: complex
    doppler: float = 0.0
    delay: int = 0

    def __post_init__(self):
        if int(self.delay) != self.delay or self.delay < 0:
            raise ValueError(f"delay must be a nonnegative integer, got {self.delay}")
        object.__setattr__(self, "delay", int(self.delay))
        object.__setattr__(self, "gain", complex(self.gain))


@dataclass(frozen=True)
class Target:
    range_m: float
    velocity: float = 0.0
    reflectivity: complex = 1.0

    def __post_init__(self):
        if self.range_m < 0:
            raise ValueError("target range must be nonnegative")


@dataclass(frozen=True)
class TargetScene:
    targets: tuple
    carrier: float

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.carrier <= 0:
            raise ValueError("carrier must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier

    def delays(self, sample_rate: float) -> np.ndarray:
        """Round-trip delays floor(2 R F_s / c) in samples."""
        # the small guard keeps ranges built from c*tau/(2 F_s) on their own bin
        return np.array(
            [math.floor(2.0 * t.range_m * sample_rate / SPEED_OF_LIGHT + 1e-9) for t in self.targets],
            dtype=int,
        )

    def dopplers(self) -> np.ndarray:
        """Two-way Doppler 2 v f_c / c of every target."""
        return np.array([2.0 * t.velocity * self.carrier / SPEED_OF_LIGHT for t in self.targets])


@dataclass(frozen=True)
class NoiseSpec:
    """Per-sample complex SNR in dB (``math.inf`` disables noise) and RNG seed."""

    snr_db: float
    rng_seed: int | None = None


def range_for_delay(tau: int, sample_rate: float) -> float:
    """Range whose round-trip delay lands exactly on lag ``tau``."""
    return SPEED_OF_LIGHT * tau / (2.0 * sample_rate)


def velocity_for_doppler(nu: float, carrier: float) -> float:
    return nu * SPEED_OF_LIGHT / (2.0 * carrier)


def apply_multipath(
    sig: ComplexSignal,
    paths,
    mode: str = "circular",
    time_offset: int = 0,
) -> ComplexSignal:
    """
    r[n] = sum_p a_p exp(j 2 pi nu_p (n + n0) T_s) s[n - l_p].

    ``circular`` indexes s modulo the block length; ``linear`` assumes zero
    samples before the start. ``time_offset`` (n0) places the block on an
    absolute time axis so Doppler phase stays continuous across blocks.
    """
    s = sig.samples
    n = np.arange(s.size)
    t = (n + time_offset) * sig.sample_interval
    out = np.zeros(s.size, dtype=complex)
    for path in paths:
        if mode == "circular":
            if path.delay >= s.size:
                raise ValueError(f"delay {path.delay} >= block length {s.size}")
            delayed = np.roll(s, path.delay)
        elif mode == "linear":
            delayed = np.zeros_like(s)
            if path.delay < s.size:
                delayed[path.delay :] = s[: s.size - path.delay]
        else:
            raise ValueError(f"mode must be 'circular' or 'linear', got {mode!r}")
        out += path.gain * np.exp(2j * np.pi * path.doppler * t) * delayed
    return sig.with_samples(out)


def add_awgn(sig: ComplexSignal, noise: NoiseSpec, reference_power: float | None = None) -> ComplexSignal:
    """
    Add circular complex Gaussian noise at the requested per-sample SNR.

    The noise power is ``P / 10**(snr_db/10)`` with ``P`` the signal's mean
    power, or ``reference_power`` when given (e.g. the unit-target echo power
    in radar scenes).
    """
    if math.isinf(noise.snr_db) and noise.snr_db > 0:
        return sig
    s = sig.samples
    power = float(np.mean(np.abs(s) ** 2)) if reference_power is None else float(reference_power)
    if power <= 0.0:
        raise ValueError("cannot set an SNR against a zero-power signal")
    sigma2 = power / 10.0 ** (noise.snr_db / 10.0)
    rng = np.random.default_rng(noise.rng_seed)
    w = rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size)
    return sig.with_samples(s + np.sqrt(sigma2 / 2.0) * w)


def sample_rayleigh_paths(
    profile: str,
    speed: float,
    carrier: float,
    seed,
    doppler_factor: float = 1.0,
    n_taps: int = 5,
) -> list[ChannelPath]:
    """
    Draw a Rayleigh channel realization.

    ``flat`` gives one path at delay 0; ``five_tap`` gives ``n_taps``
    equal-power paths at delays 0, 1, ... with unit total average power.
    Each path gets its own Doppler ``nu_max * cos(theta)``, theta uniform,
    where ``nu_max = doppler_factor * speed * f_c / c`` (one-way by default).
    """
    if speed < 0:
        raise ValueError("speed must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if profile == "flat":
        delays = [0]
    elif profile == "five_tap":
        delays = list(range(n_taps))
    else:
        raise ValueError(f"unknown profile {profile!r}")
    power = 1.0 / len(delays)
    nu_max = doppler_factor * speed * carrier / SPEED_OF_LIGHT
    gains = np.sqrt(power / 2.0) * (rng.standard_normal(len(delays)) + 1j * rng.standard_normal(len(delays)))
    thetas = rng.uniform(0.0, 2.0 * np.pi, len(delays))
    dopplers = nu_max * np.cos(thetas) if nu_max > 0 else np.zeros(len(delays))
    return [ChannelPath(g, float(nu), d) for g, nu, d in zip(gains, dopplers, delays)]


def radar_echoes(
    s_tx: ComplexSignal,
    scene: TargetScene,
    u: int,
    t_sym_eff: float,
    n_cp: int,
) -> ComplexSignal:
    """
    CP-removed echo of slow-time symbol ``u`` (noiseless):

        r_u[n] = sum_l alpha_l s_tx[(n - tau_l) mod N] exp(j 2 pi nu_l (n T_s + u T_sym_eff))
    """
    fs = 1.0 / s_tx.sample_interval
    taus = scene.delays(fs)
    if np.any(taus > n_cp):
        raise ValueError(f"target delay {taus.max()} exceeds the {n_cp}-sample prefix")
    s = s_tx.samples
    t = np.arange(s.size) * s_tx.sample_interval + u * t_sym_eff
    out = np.zeros(s.size, dtype=complex)
    for target, tau, nu in zip(scene.targets, taus, scene.dopplers()):
        out += target.reflectivity * np.roll(s, tau) * np.exp(2j * np.pi * nu * t)
    return s_tx.with_samples(out)
