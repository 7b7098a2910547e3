"""
Limiter-discriminator FM-OFDM receiver and the CE-OFDM / CP-OFDM baselines.

Processing per useful block of N samples:

    limiter -> one-sample phase-difference discriminator -> align to the
    reference delay and remove the block mean -> N-point DFT -> one-tap
    equalization with the effective channel diagonal -> QAM decisions.

The effective channel is built from per-path phasor weights. In analysis
mode the weights come from the true channel state (:func:`genie_beta_weights`);
in proxy mode they are constant and proportional to ``|a_p|``
(:func:`proxy_beta_weights`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qam import qam
from .waveform import (
    ComplexSignal,
    FmParams,
    OfdmConfig,
    demap_subcarriers,
    ensemble_scale,
    fm_phase,
)


@dataclass(frozen=True)
class DiscriminatorOutput:
    values: np.ndarray
    sample_interval: float

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class EffectiveChannel:
    """Subcarrier-domain channel split into its diagonal and ICI parts."""

    diag: np.ndarray
    ici: np.ndarray
    ref_delay: int

    @property
    def full(self) -> np.ndarray:
        return np.diag(self.diag) + self.ici


@dataclass(frozen=True)
class BetaWeights:
    """
    Phasor-sum weights.

    ``per_path`` has shape (P, N); samples where the phasor sum vanishes are
    flagged in ``undefined`` and hold NaN.
    """

    per_path: np.ndarray
    undefined: np.ndarray

    @property
    def means(self) -> np.ndarray:
        if np.all(self.undefined):
            return np.full(self.per_path.shape[0], np.nan)
        return np.mean(self.per_path[:, ~self.undefined], axis=1)

    @property
    def deviations(self) -> np.ndarray:
        """delta beta_p[n] = beta_p[n] - beta_p, zero on undefined samples."""
        dev = self.per_path - self.means[:, None]
        dev[:, self.undefined] = 0.0
        return dev

    @classmethod
    def constant(cls, weights, n: int) -> "BetaWeights":
        w = np.asarray(weights, dtype=float)
        return cls(np.repeat(w[:, None], n, axis=1), np.zeros(n, dtype=bool))


def limiter(r: ComplexSignal, diagnostics: dict | None = None) -> ComplexSignal:
    """
    Hard limiter z[n] = r[n] / |r[n]|.

    An exactly-zero sample keeps the previous output phasor (1 at the start);
    the number of such samples is added to ``diagnostics["zero_samples"]``.
    """
    s = r.samples
    mag = np.abs(s)
    zero = mag == 0.0
    z = np.divide(s, mag, out=np.zeros_like(s), where=~zero)
    if np.any(zero):
        for n in np.flatnonzero(zero):
            z[n] = z[n - 1] if n > 0 else 1.0 + 0.0j
        if diagnostics is not None:
            diagnostics["zero_samples"] = diagnostics.get("zero_samples", 0) + int(zero.sum())
    return r.with_samples(z)


def discriminate(z: ComplexSignal, k_v: float = 1.0) -> DiscriminatorOutput:
    """y[n] = K_V angle(z[n] z*[n-1]) / (2 pi T_s); y[0] repeats y[1]."""
    s = z.samples
    if s.size < 2:
        return DiscriminatorOutput(np.zeros(s.size), z.sample_interval)
    d = k_v * np.angle(s[1:] * np.conj(s[:-1])) / (2.0 * np.pi * z.sample_interval)
    return DiscriminatorOutput(np.concatenate([d[:1], d]), z.sample_interval)


def demean_align(y, ref_delay: int = 0, n_fft: int | None = None) -> np.ndarray:
    """
    Shift by the reference delay and subtract the block mean.

    With ``n_fft`` omitted the input is one circular block and the shift
    wraps around. Otherwise the input must hold at least ``n_fft + ref_delay``
    samples and the block ``y[ref_delay : ref_delay + n_fft]`` is used.
    """
    values = y.values if isinstance(y, DiscriminatorOutput) else np.asarray(y, dtype=float)
    if n_fft is None:
        block = np.roll(values, -int(ref_delay))
    else:
        if values.size < n_fft + ref_delay:
            raise ValueError(
                f"need {n_fft + ref_delay} samples after alignment, have {values.size}"
            )
        block = values[ref_delay : ref_delay + n_fft]
    return block - block.mean()


def block_dft(ybar, n_fft: int | None = None) -> np.ndarray:
    ybar = np.asarray(ybar)
    if n_fft is not None and ybar.size != n_fft:
        raise ValueError(f"block has {ybar.size} samples, expected {n_fft}")
    return np.fft.fft(ybar)


def beta_weights(phases, amplitudes=None, tol: float = 1e-12) -> BetaWeights:
    """
    Weights beta_p = S_p / S of a sum of phasors.

    For ``z = sum_p A_p exp(j theta_p)``, ``S_p = A_p sum_q A_q cos(theta_p - theta_q)``
    and ``S = |z|**2``; the instantaneous frequency of z is then
    ``sum_p beta_p dtheta_p/dt``. Unit amplitudes reproduce the plain
    unit-phasor identity. Samples with ``S <= tol * (sum A)**2`` are undefined.
    """
    theta = np.atleast_2d(np.asarray(phases, dtype=float))
    n_paths = theta.shape[0]
    if n_paths < 1:
        raise ValueError("need at least one path")
    amp = np.ones(n_paths) if amplitudes is None else np.asarray(amplitudes, dtype=float)
    phasors = amp[:, None] * np.exp(1j * theta)
    z = phasors.sum(axis=0)
    s_total = np.abs(z) ** 2
    s_path = np.real(phasors * np.conj(z)[None, :])
    undefined = s_total <= tol * amp.sum() ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = s_path / s_total[None, :]
    beta[:, undefined] = np.nan
    return BetaWeights(beta, undefined)


def path_phases(paths, x, p: FmParams, cfg: OfdmConfig, time_offset: int = 0) -> np.ndarray:
    """theta_p[n] = arg a_p + 2 pi nu_p (n + n0) T_s + phi[(n - l_p) mod N] for one block."""
    phi = fm_phase(x, p, cfg.sample_interval)
    t = (np.arange(cfg.n_fft) + time_offset) * cfg.sample_interval
    return np.array(
        [np.angle(q.gain) + 2.0 * np.pi * q.doppler * t + np.roll(phi, q.delay) for q in paths]
    )


def genie_beta_weights(paths, x, p: FmParams, cfg: OfdmConfig, time_offset: int = 0) -> BetaWeights:
    """Analysis-mode weights from the true post-channel phasor geometry."""
    amps = np.array([abs(q.gain) for q in paths])
    return beta_weights(path_phases(paths, x, p, cfg, time_offset), amps)


def proxy_beta_weights(paths, n_fft: int) -> BetaWeights:
    """Proxy-mode constant weights proportional to |a_p|."""
    amps = np.array([abs(q.gain) for q in paths])
    return BetaWeights.constant(amps / amps.sum(), n_fft)


def strongest_path(paths) -> int:
    """Delay of the path with the largest |a_p|."""
    return max(paths, key=lambda q: abs(q.gain)).delay


def effective_channel(
    paths,
    betas: BetaWeights,
    p: FmParams,
    cfg: OfdmConfig,
    ref_delay: int | None = None,
    with_ici: bool = True,
) -> EffectiveChannel:
    """
    Diagonal gain and ICI matrix seen after de-meaning and the block DFT.

    ``diag[k] = K_V m f_d sum_p beta_p exp(-j 2 pi k (l_p - l_0) / N)``

    ``ici[k, r] = K_V m f_d sum_p c_p[k - r] exp(-j 2 pi r (l_p - l_0) / N)``
    where ``c_p`` is the N-point DFT of ``delta beta_p[n]`` divided by N.
    """
    n = cfg.n_fft
    means = betas.means
    if not np.isclose(np.sum(means), 1.0, atol=1e-9):
        raise ValueError(f"block-mean weights sum to {np.sum(means):.12f}, not 1")
    if len(paths) != means.size:
        raise ValueError("one weight sequence per path is required")
    l0 = strongest_path(paths) if ref_delay is None else int(ref_delay)
    gain = p.discriminator_gain * p.peak_frequency
    k = np.arange(n)
    shifts = np.array([q.delay - l0 for q in paths])
    steering = np.exp(-2j * np.pi * np.outer(shifts, k) / n)  # (P, N)
    diag = gain * (means @ steering)
    ici = np.zeros((n, n), dtype=complex)
    if with_ici:
        dev = betas.deviations
        if np.any(dev):
            coeffs = np.fft.fft(dev, axis=1) / n  # (P, N) indexed by k - r
            lag = (k[:, None] - k[None, :]) % n
            for c_p, steer_p in zip(coeffs, steering):
                ici += c_p[lag] * steer_p[None, :]
            ici *= gain
            np.fill_diagonal(ici, 0.0)
    return EffectiveChannel(diag, ici, l0)


def ici_bound_ratio(h: EffectiveChannel, betas: BetaWeights, p: FmParams) -> float:
    """Empirical constant c in ||H_ICI||_F <= c K_V m f_d max_p ||delta beta_p||_2 / N."""
    dev_norm = np.max(np.linalg.norm(betas.deviations, axis=1))
    if dev_norm == 0.0:
        return 0.0
    n = h.diag.size
    return float(np.linalg.norm(h.ici) * n / (p.discriminator_gain * p.peak_frequency * dev_norm))


def equalize(Y, h: EffectiveChannel, cfg: OfdmConfig, scale: float | None = None) -> np.ndarray:
    """One-tap estimates of the lower-half active symbols, Y[k] / (diag[k] * scale)."""
    Y = np.asarray(Y)
    tones = list(cfg.active_band)
    gains = h.diag[tones]
    if np.any(gains == 0):
        raise ValueError("effective channel has a zero gain on an active tone")
    scale = ensemble_scale(cfg) if scale is None else scale
    return Y[tones] / (gains * scale)


def equalize_detect(Y, h: EffectiveChannel, cfg: OfdmConfig, scale: float | None = None) -> np.ndarray:
    """
    One-tap equalization followed by Gray-coded hard decisions.

    ``scale`` is the transmitter's baseband gain (x = scale * IDFT(X)). It
    defaults to the ensemble unit-variance factor, which equals the
    per-block factor exactly for QPSK.
    """
    xhat = equalize(Y, h, cfg, scale)
    if xhat.size == 0:
        return np.zeros(0, dtype=np.int8)
    return qam(cfg.qam_order).demodulate(xhat)


def _strip_to_block(r: ComplexSignal, cfg: OfdmConfig) -> np.ndarray:
    s = r.samples
    if s.size == cfg.n_fft + cfg.n_cp:
        return s[cfg.n_cp :]
    if s.size == cfg.n_fft:
        return s
    raise ValueError(f"expected {cfg.n_fft} or {cfg.n_fft + cfg.n_cp} samples, got {s.size}")


def fm_ofdm_discriminate(r: ComplexSignal, p: FmParams, cfg: OfdmConfig, diagnostics: dict | None = None) -> np.ndarray:
    """
    Discriminator output over the N useful samples of one received block.

    With the prefix present, the first useful sample is differenced against
    the last prefix sample. A bare N-sample block is treated as circular,
    which is the same thing under the block model.
    """
    s = r.samples
    if s.size == cfg.n_fft + cfg.n_cp and cfg.n_cp > 0:
        ext = s[cfg.n_cp - 1 :]
    elif s.size in (cfg.n_fft, cfg.n_fft + cfg.n_cp):
        block = _strip_to_block(r, cfg)
        ext = np.concatenate([block[-1:], block])
    else:
        raise ValueError(f"expected {cfg.n_fft} or {cfg.n_fft + cfg.n_cp} samples, got {s.size}")
    z = limiter(r.with_samples(ext), diagnostics)
    return discriminate(z, p.discriminator_gain).values[1:]


def fm_ofdm_demodulate(
    r: ComplexSignal,
    h: EffectiveChannel,
    p: FmParams,
    cfg: OfdmConfig,
    scale: float | None = None,
) -> np.ndarray:
    """Full limiter-discriminator chain for one block; returns detected bits."""
    y = fm_ofdm_discriminate(r, p, cfg)
    Y = block_dft(demean_align(y, h.ref_delay), cfg.n_fft)
    return equalize_detect(Y, h, cfg, scale)


def ce_ofdm_demodulate(r: ComplexSignal, p: FmParams, cfg: OfdmConfig, scale: float | None = None) -> np.ndarray:
    """
    Arctangent + unwrap phase demodulator.

    The unwrapped phase divided by 2 pi m estimates x[n]; a constant channel
    phase only lands in the unused DC bin. Residual phase ramps and 2 pi
    unwrap slips are not corrected and show up as bit errors.
    """
    block = _strip_to_block(r, cfg)
    xhat = np.unwrap(np.angle(block)) / (2.0 * np.pi * p.mod_index)
    X = np.fft.fft(xhat)
    scale = ensemble_scale(cfg) if scale is None else scale
    return demap_subcarriers(X / scale, cfg, hermitian=True)


def cp_ofdm_demodulate(r: ComplexSignal, channel_freq_response, cfg: OfdmConfig) -> np.ndarray:
    """Strip the prefix, DFT, divide by the known response and decide (all active tones)."""
    block = _strip_to_block(r, cfg)
    H = np.asarray(channel_freq_response, dtype=complex)
    if H.shape != (cfg.n_fft,):
        raise ValueError("channel response must have one entry per subcarrier")
    tones = list(cfg.active_band) + list(cfg.mirror_band)
    if np.any(H[tones] == 0):
        raise ValueError("zero channel response on an active tone")
    R = np.fft.fft(block)
    Xhat = np.zeros(cfg.n_fft, dtype=complex)
    Xhat[tones] = R[tones] / H[tones]
    return demap_subcarriers(Xhat, cfg, hermitian=False)


def static_frequency_response(paths, n_fft: int) -> np.ndarray:
    """H[k] = sum_p a_p exp(-j 2 pi k l_p / N), Doppler ignored."""
    k = np.arange(n_fft)
    return sum(q.gain * np.exp(-2j * np.pi * k * q.delay / n_fft) for q in paths)


def block_average_response(paths, cfg: OfdmConfig, time_offset: int) -> np.ndarray:
    """
    Diagonal of the time-varying channel for the useful block starting at
    absolute sample ``time_offset``: the best one-tap CSI a CP-OFDM
    receiver can have when Doppler spreads energy into ICI.
    """
    n = cfg.n_fft
    k = np.arange(n)
    t = (np.arange(n) + time_offset) * cfg.sample_interval
    H = np.zeros(n, dtype=complex)
    for q in paths:
        H += q.gain * np.mean(np.exp(2j * np.pi * q.doppler * t)) * np.exp(-2j * np.pi * k * q.delay / n)
    return H
