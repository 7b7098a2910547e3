"""
Transmit waveforms: FM-OFDM, CE-OFDM and CP-OFDM.

The FM-OFDM chain is

    bits -> Hermitian QAM frame -> real baseband x[n] (unit variance)
         -> instantaneous frequency m * f_delta * x[n]
         -> phase by inclusive cumulative sum -> A * exp(j * phase)

Modulation-index convention: ``mod_index`` is the dimensionless m and
``deviation_scale`` is f_delta in Hz. With the default f_delta = F_s the
per-sample phase step is ``2*pi*m*x[n]``, so m = 0.6/(2*pi) gives a peak
phase step of 0.6 rad per unit of x. Only the product m * f_delta matters
physically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qam import qam

SPEED_OF_LIGHT = 299_792_458.0

# relative imaginary residue tolerated before a frame is declared non-Hermitian
HERMITIAN_TOL = 1e-9


class AliasingError(ValueError):
    """Per-sample FM phase step reaches pi."""


class HermitianError(ValueError):
    """Frame does not yield a real time-domain sequence."""


@dataclass(frozen=True)
class OfdmConfig:
    """
    Block numerology shared by transmitter, channel and receivers.

    Parameters
    ----------
    n_fft : int
        Samples per block N (even).
    n_cp : int
        Cyclic-prefix length in samples, ``n_cp < n_fft``.
    sample_rate : float
        F_s in Hz.
    active_band : tuple of int
        Data-bearing lower-half subcarriers q. Their mirrors N - q carry the
        conjugates for the real FM/CE baseband. 0 and N/2 are never active.
    qam_order : int
        Square QAM size (4, 16, 64, ...).
    normalization : {"empirical", "ensemble"}
        How the real baseband is scaled to unit variance: by the block's own
        standard deviation, or by the fixed constellation-energy factor.
    """

    n_fft: int = 512
    n_cp: int = 64
    sample_rate: float = 15.36e6
    active_band: tuple = tuple(range(1, 65))
    qam_order: int = 4
    normalization: str = "empirical"

    def __post_init__(self):
        band = tuple(sorted(int(q) for q in self.active_band))
        object.__setattr__(self, "active_band", band)
        if self.n_fft <= 0 or self.n_fft % 2:
            raise ValueError(f"n_fft must be a positive even integer, got {self.n_fft}")
        if not 0 <= self.n_cp < self.n_fft:
            raise ValueError(f"n_cp must satisfy 0 <= n_cp < n_fft, got {self.n_cp}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if len(set(band)) != len(band):
            raise ValueError("active_band has duplicate tones")
        if band and (band[0] < 1 or band[-1] >= self.n_fft // 2):
            raise ValueError("active tones must lie in 1 .. N/2-1 (0 and N/2 are reserved)")
        if self.normalization not in ("empirical", "ensemble"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        qam(self.qam_order)  # validates the order

    @classmethod
    def with_cutoff(cls, cutoff: int, **kwargs) -> "OfdmConfig":
        """Active tones q = 1..cutoff (plus mirrors)."""
        return cls(active_band=tuple(range(1, int(cutoff) + 1)), **kwargs)

    @property
    def sample_interval(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def bits_per_symbol(self) -> int:
        return qam(self.qam_order).bits_per_symbol

    @property
    def n_active(self) -> int:
        return len(self.active_band)

    @property
    def mirror_band(self) -> tuple:
        return tuple(self.n_fft - q for q in self.active_band)

    def bits_per_block(self, hermitian: bool = True) -> int:
        tones = self.n_active if hermitian else 2 * self.n_active
        return tones * self.bits_per_symbol

    @property
    def t_sym_eff(self) -> float:
        """Symbol duration including the cyclic prefix."""
        return (self.n_fft + self.n_cp) / self.sample_rate

    @property
    def subcarrier_spacing(self) -> float:
        return self.sample_rate / self.n_fft


@dataclass(frozen=True)
class FmParams:
    """FM-OFDM modulator/discriminator constants (see module docstring)."""

    mod_index: float
    deviation_scale: float
    amplitude: float = 1.0
    initial_phase: float = 0.0
    discriminator_gain: float = 1.0

    def __post_init__(self):
        if self.mod_index <= 0 or self.deviation_scale <= 0 or self.amplitude <= 0:
            raise ValueError("mod_index, deviation_scale and amplitude must be positive")

    @property
    def peak_frequency(self) -> float:
        """m * f_delta, Hz per unit of x."""
        return self.mod_index * self.deviation_scale

    def phase_step(self, sample_interval: float) -> float:
        """Per-sample phase increment per unit of x, 2*pi*T_s*m*f_delta."""
        return 2.0 * np.pi * sample_interval * self.peak_frequency

    @classmethod
    def from_phase_index(cls, phase_index: float, sample_rate: float, **kwargs) -> "FmParams":
        """Build params whose per-sample phase step is ``phase_index`` rad per unit x."""
        return cls(mod_index=phase_index / (2.0 * np.pi), deviation_scale=sample_rate, **kwargs)


@dataclass(frozen=True)
class SubcarrierFrame:
    values: np.ndarray
    config: OfdmConfig
    hermitian: bool = True

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.config.n_fft,):
            raise ValueError(f"frame must have length {self.config.n_fft}, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ComplexSignal:
    samples: np.ndarray
    sample_interval: float

    def __post_init__(self):
        samples = np.array(self.samples, dtype=complex).reshape(-1)
        if samples.size == 0:
            raise ValueError("signal must be nonempty")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    def with_samples(self, samples) -> "ComplexSignal":
        return ComplexSignal(samples, self.sample_interval)


def map_subcarriers(bits, cfg: OfdmConfig, hermitian: bool = True) -> SubcarrierFrame:
    """
    Place Gray-coded QAM symbols on the active tones.

    With ``hermitian=True`` data ride on the lower-half active tones and the
    mirrors hold conjugates, so the inverse DFT is real. With
    ``hermitian=False`` (CP-OFDM) the mirrors carry independent data.
    """
    bits = np.asarray(bits).reshape(-1)
    expected = cfg.bits_per_block(hermitian)
    if bits.size != expected:
        raise ValueError(f"expected {expected} bits for this frame, got {bits.size}")
    values = np.zeros(cfg.n_fft, dtype=complex)
    if expected == 0:
        return SubcarrierFrame(values, cfg, hermitian)
    symbols = qam(cfg.qam_order).modulate(bits)
    lower = np.asarray(cfg.active_band)
    upper = np.asarray(cfg.mirror_band)
    if hermitian:
        values[lower] = symbols
        values[upper] = np.conj(symbols)
    else:
        values[lower] = symbols[: lower.size]
        values[upper] = symbols[lower.size :]
    return SubcarrierFrame(values, cfg, hermitian)


def demap_subcarriers(values, cfg: OfdmConfig, hermitian: bool = True) -> np.ndarray:
    """Hard-decision inverse of :func:`map_subcarriers`."""
    values = np.asarray(values)
    symbols = values[list(cfg.active_band)]
    if not hermitian:
        symbols = np.concatenate([symbols, values[list(cfg.mirror_band)]])
    if symbols.size == 0:
        return np.zeros(0, dtype=np.int8)
    return qam(cfg.qam_order).demodulate(symbols)


def ensemble_scale(cfg: OfdmConfig) -> float:
    """Fixed gain giving Var{x} = 1 for unit-energy symbols on all active tones."""
    if cfg.n_active == 0:
        return 1.0
    return cfg.n_fft / np.sqrt(2.0 * cfg.n_active)


def ofdm_real_baseband(frame: SubcarrierFrame, normalize: bool = True) -> np.ndarray:
    """
    Real OFDM sequence x[n] = (1/N) sum_q X[q] exp(j 2 pi q n / N).

    The block is rescaled to unit variance according to
    ``frame.config.normalization`` unless ``normalize`` is False or the frame
    is all zeros.
    """
    values = frame.values
    x = np.fft.ifft(values)
    peak = np.max(np.abs(x))
    if peak == 0.0:
        return np.zeros(values.size)
    residue = np.max(np.abs(x.imag)) / peak
    if residue > HERMITIAN_TOL:
        raise HermitianError(f"imaginary residue {residue:.3e} exceeds {HERMITIAN_TOL:g}")
    x = x.real
    if not normalize:
        return x
    if frame.config.normalization == "empirical":
        return x / np.std(x)
    return x * ensemble_scale(frame.config)


def aliasing_margin(x, p: FmParams, sample_interval: float) -> float:
    """pi minus the largest per-sample phase step; positive means no aliasing."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return float(np.pi)
    return float(np.pi - np.max(np.abs(p.phase_step(sample_interval) * x)))


def fm_phase(x, p: FmParams, sample_interval: float) -> np.ndarray:
    """phi[n] = phi_0 + 2 pi T_s sum_{u<=n} m f_delta x[u] (inclusive sum)."""
    x = np.asarray(x, dtype=float)
    return p.initial_phase + p.phase_step(sample_interval) * np.cumsum(x)


def fm_modulate(x, p: FmParams, sample_interval: float) -> ComplexSignal:
    """
    Constant-envelope FM-OFDM block ``A * exp(j * phi[n])``.

    Raises
    ------
    AliasingError
        If any per-sample phase step reaches pi in magnitude.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("x must be nonempty")
    margin = aliasing_margin(x, p, sample_interval)
    if margin <= 0:
        raise AliasingError(
            f"peak phase step exceeds pi by {-margin:.4f} rad; lower m*f_delta"
        )
    phase = fm_phase(x, p, sample_interval)
    return ComplexSignal(p.amplitude * np.exp(1j * phase), sample_interval)


def ce_ofdm_modulate(x, p: FmParams, sample_interval: float) -> ComplexSignal:
    """Direct phase modulation ``A * exp(j (phi_0 + 2 pi m x[n]))``."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("x must be nonempty")
    phase = p.initial_phase + 2.0 * np.pi * p.mod_index * x
    return ComplexSignal(p.amplitude * np.exp(1j * phase), sample_interval)


def cyclic_prefix(sig: ComplexSignal, n_cp: int, mode: str = "add", n_fft: int | None = None) -> ComplexSignal:
    """Prepend the last ``n_cp`` samples (``add``) or drop the first ``n_cp`` (``remove``)."""
    s = sig.samples
    if n_cp < 0:
        raise ValueError("n_cp must be nonnegative")
    if mode == "add":
        if (n_fft is not None and s.size != n_fft) or n_cp > s.size:
            raise ValueError(f"cannot add a {n_cp}-sample prefix to a {s.size}-sample block")
        if n_cp == 0:
            return sig
        return sig.with_samples(np.concatenate([s[-n_cp:], s]))
    if mode == "remove":
        if (n_fft is not None and s.size != n_fft + n_cp) or s.size <= n_cp:
            raise ValueError(f"cannot strip a {n_cp}-sample prefix from {s.size} samples")
        return sig.with_samples(s[n_cp:])
    raise ValueError(f"mode must be 'add' or 'remove', got {mode!r}")


def cp_ofdm_modulate(frame: SubcarrierFrame) -> ComplexSignal:
    """Complex CP-OFDM symbol: inverse DFT of the frame followed by the prefix."""
    cfg = frame.config
    block = ComplexSignal(np.fft.ifft(frame.values), cfg.sample_interval)
    return cyclic_prefix(block, cfg.n_cp, "add", n_fft=cfg.n_fft)


def papr_db(sig) -> float:
    s = sig.samples if isinstance(sig, ComplexSignal) else np.asarray(sig)
    power = np.abs(s) ** 2
    mean = np.mean(power)
    if mean == 0.0:
        raise ValueError("PAPR of an all-zero signal is undefined")
    return float(10.0 * np.log10(np.max(power) / mean))


def baseband_bandwidth(x, sample_interval: float, fraction: float = 0.99) -> float:
    """One-sided bandwidth (Hz) holding ``fraction`` of the energy of real x."""
    x = np.asarray(x, dtype=float)
    spectrum = np.abs(np.fft.rfft(x)) ** 2
    # interior bins stand for both +f and -f
    if x.size % 2 == 0:
        spectrum[1:-1] *= 2.0
    else:
        spectrum[1:] *= 2.0
    total = spectrum.sum()
    if total == 0.0:
        return 0.0
    k = int(np.searchsorted(np.cumsum(spectrum), fraction * total * (1 - 1e-12)))
    return k / (x.size * sample_interval)


def occupied_bandwidth(x, p: FmParams, sample_interval: float, eta: float = 1.5) -> float:
    """Carson-style estimate 2 (B_x + eta m f_delta) of the FM-OFDM RF bandwidth."""
    if not 1.0 <= eta <= 2.0:
        raise ValueError(f"eta must lie in [1, 2], got {eta}")
    return 2.0 * (baseband_bandwidth(x, sample_interval) + eta * p.peak_frequency)
