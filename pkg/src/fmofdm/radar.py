"""
Monostatic sensing with FM-OFDM echoes.

Per slow-time symbol u the echo is range-compressed against the transmitted
block (circular cross-correlation via FFT). Magnitudes are averaged over
symbols, peaks give target lags, and the slow-time phase progression at each
detected lag gives the Doppler shift. A conventional CP-OFDM 2D-FFT
processor is included as the sensing baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .waveform import SPEED_OF_LIGHT, ComplexSignal, FmParams, OfdmConfig, baseband_bandwidth


@dataclass(frozen=True)
class RangeProfile:
    """Matched-filter output over circular lags 0..N-1 (complex per symbol, or real averaged)."""

    values: np.ndarray

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class RangeDopplerMap:
    """Magnitude grid of shape (N range bins, U Doppler bins), zero Doppler centred."""

    grid: np.ndarray
    range_axis: np.ndarray
    velocity_axis: np.ndarray

    def to_db(self, floor_db: float = -60.0) -> np.ndarray:
        peak = self.grid.max()
        if peak == 0:
            return np.full(self.grid.shape, floor_db)
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(self.grid / peak)
        return np.maximum(db, floor_db)

    def peak_cell(self) -> tuple:
        return tuple(int(i) for i in np.unravel_index(np.argmax(self.grid), self.grid.shape))

    def peak_to_median_db(self) -> float:
        return float(20.0 * np.log10(self.grid.max() / np.median(self.grid)))


@dataclass(frozen=True)
class SensingEstimate:
    range: float
    velocity: float
    doppler: float
    peak_lag: int
    post_compression_snr: float = float("nan")


@dataclass(frozen=True)
class SensingLimits:
    delta_r: float
    v_max: float
    delta_v: float
    var_approx: float
    crb: float


def _samples(sig) -> np.ndarray:
    if isinstance(sig, ComplexSignal):
        return sig.samples
    if isinstance(sig, RangeProfile):
        return sig.values
    return np.asarray(sig)


def range_compress(r_u, s_tx, method: str = "fft") -> RangeProfile:
    """C_u[p] = sum_n r_u[n] s_tx*[(n - p) mod N]."""
    r = _samples(r_u).astype(complex)
    s = _samples(s_tx).astype(complex)
    if r.shape != s.shape:
        raise ValueError(f"received block {r.shape} and reference {s.shape} differ in length")
    if method == "fft":
        return RangeProfile(np.fft.ifft(np.fft.fft(r) * np.conj(np.fft.fft(s))))
    if method == "direct":
        n = s.size
        idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n  # [p, n] -> n - p
        return RangeProfile(np.conj(s)[idx] @ r)
    raise ValueError(f"method must be 'fft' or 'direct', got {method!r}")


def compress_symbols(rx, tx) -> np.ndarray:
    """Range-compress a (U, N) stack of echoes against matching references."""
    rx = np.atleast_2d(rx)
    tx = np.broadcast_to(np.atleast_2d(tx), rx.shape)
    return np.fft.ifft(np.fft.fft(rx, axis=1) * np.conj(np.fft.fft(tx, axis=1)), axis=1)


def noncoherent_average(profiles) -> RangeProfile:
    """(1/U) sum_u |C_u[p]|."""
    stack = [_samples(p) for p in profiles] if not isinstance(profiles, np.ndarray) else profiles
    if len(stack) == 0:
        raise ValueError("need at least one profile")
    stack = np.atleast_2d(np.asarray(stack))
    return RangeProfile(np.mean(np.abs(stack), axis=0))


def mainlobe_width(profile, peak: int | None = None) -> float:
    """
    Full -3 dB width (samples) of the lobe around ``peak`` (default: the
    global maximum), with linear interpolation between lags. Lags wrap.
    """
    v = np.abs(_samples(profile)).astype(float)
    n = v.size
    peak = int(np.argmax(v)) if peak is None else int(peak)
    level = v[peak] / np.sqrt(2.0)

    def side(step):
        for d in range(1, n):
            cur = v[(peak + step * d) % n]
            if cur < level:
                prev = v[(peak + step * (d - 1)) % n]
                return d - 1 + (prev - level) / (prev - cur)
        return float(n)

    return side(+1) + side(-1)


def reference_mainlobe_width(tx) -> float:
    """-3 dB width of the transmit waveform's own (symbol-averaged) autocorrelation."""
    tx = np.atleast_2d(tx)
    return mainlobe_width(noncoherent_average(compress_symbols(tx, tx)), 0)


def _local_maxima(v: np.ndarray, max_lag: int | None) -> np.ndarray:
    left = np.roll(v, 1)
    right = np.roll(v, -1)
    # plateaus resolve to their first sample despite rounding noise
    tol = 1e-12 * (np.max(v) if v.size else 0.0)
    idx = np.flatnonzero((v > left + tol) & (v >= right - tol))
    if max_lag is not None:
        idx = idx[idx <= max_lag]
    return idx


def detect_peaks(
    cbar,
    count: int | None = None,
    threshold: float | None = None,
    guard: float | None = None,
    max_lag: int | None = None,
    strict: bool = True,
) -> list[int]:
    """
    Pick target lags from an averaged range profile.

    count policy
        The ``count`` largest local maxima, greedily skipping any maximum
        closer than ``guard`` lags (default: the -3 dB width of the strongest
        lobe) to one already taken. Raises if fewer are available and
        ``strict`` is set; otherwise returns what was found.
    threshold policy
        Every local maximum above ``threshold`` times the median level.

    ``max_lag`` restricts the search to lags 0..max_lag (range gate).
    Returned lags are sorted ascending.
    """
    v = np.abs(_samples(cbar)).astype(float)
    if v.size == 0:
        raise ValueError("empty profile")
    if (count is None) == (threshold is None):
        raise ValueError("give exactly one of count or threshold")
    maxima = _local_maxima(v, max_lag)
    if threshold is not None:
        level = threshold * np.median(v)
        return sorted(int(p) for p in maxima if v[p] > level)
    order = maxima[np.argsort(v[maxima])[::-1]]
    if guard is None:
        guard = mainlobe_width(v, int(order[0])) if order.size else 1.0
    n = v.size
    chosen: list[int] = []
    for p in order:
        if all(min(abs(p - c), n - abs(p - c)) >= guard for c in chosen):
            chosen.append(int(p))
        if len(chosen) == count:
            break
    if len(chosen) < count and strict:
        raise ValueError(f"found {len(chosen)} separable peaks, {count} requested")
    return sorted(chosen)


def parabolic_offset(profile, lag: int) -> float:
    """Sub-lag peak offset in (-0.5, 0.5) from a parabola through three lags."""
    v = np.abs(_samples(profile)).astype(float)
    n = v.size
    a, b, c = v[(lag - 1) % n], v[lag % n], v[(lag + 1) % n]
    den = a - 2.0 * b + c
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / den, -0.5, 0.5))


def lag_to_range(tau_hat, sample_rate: float):
    """R = c tau / (2 F_s)."""
    return SPEED_OF_LIGHT * np.asarray(tau_hat, dtype=float) / (2.0 * sample_rate)


def estimate_doppler(slow_time, t_sym_eff: float) -> float:
    """
    Mean of unwrapped slow-time phase increments, divided by 2 pi T_sym_eff.

    Increments are ``angle(y[u] y*[u-1])``; unwrapping keeps successive
    increments within pi of each other before averaging.
    """
    y = np.asarray(slow_time, dtype=complex)
    if y.size < 2:
        raise ValueError("need at least two slow-time samples")
    dphi = np.unwrap(np.angle(y[1:] * np.conj(y[:-1])))
    return float(np.mean(dphi) / (2.0 * np.pi * t_sym_eff))


def doppler_to_velocity(nu_hat, carrier: float):
    """Monostatic v = (lambda / 2) nu."""
    if carrier <= 0:
        raise ValueError("carrier must be positive")
    return (SPEED_OF_LIGHT / carrier) / 2.0 * nu_hat


def doppler_axis(n_symbols: int, t_sym_eff: float) -> np.ndarray:
    """Doppler frequency of each column of a centred RDM."""
    return np.fft.fftshift(np.fft.fftfreq(n_symbols, d=t_sym_eff))


def build_rdm(
    profiles,
    sample_rate: float,
    t_sym_eff: float,
    carrier: float,
    window: str = "none",
) -> RangeDopplerMap:
    """Slow-time DFT of every range bin, magnitude, zero Doppler in the centre column."""
    stack = np.atleast_2d(np.asarray([_samples(p) for p in profiles]))  # (U, N)
    n_sym, n_lag = stack.shape
    if n_sym < 2:
        raise ValueError("need at least two symbols for Doppler processing")
    if window == "hann":
        w = np.hanning(n_sym)
    elif window == "none":
        w = np.ones(n_sym)
    else:
        raise ValueError(f"unknown window {window!r}")
    spec = np.fft.fftshift(np.fft.fft(stack * w[:, None], axis=0), axes=0)
    grid = np.abs(spec).T
    return RangeDopplerMap(
        grid=grid,
        range_axis=lag_to_range(np.arange(n_lag), sample_rate),
        velocity_axis=doppler_to_velocity(doppler_axis(n_sym, t_sym_eff), carrier),
    )


def sensing_limits(
    cfg: OfdmConfig,
    p: FmParams,
    n_symbols: int,
    gamma: float,
    carrier: float,
    eta: float = 1.5,
    x=None,
) -> SensingLimits:
    """
    Closed-form resolution, ambiguity and accuracy figures.

    B_x is measured from ``x`` (99 % energy) when a baseband block is given,
    otherwise taken as the highest active tone frequency.
    """
    if gamma <= 0 or n_symbols < 2:
        raise ValueError("need gamma > 0 and at least two symbols")
    if x is not None:
        b_x = baseband_bandwidth(x, cfg.sample_interval)
    else:
        b_x = (max(cfg.active_band) if cfg.active_band else 0) * cfg.subcarrier_spacing
    b_eff = b_x + eta * p.peak_frequency
    lam = SPEED_OF_LIGHT / carrier
    t = cfg.t_sym_eff
    u = n_symbols
    return SensingLimits(
        delta_r=SPEED_OF_LIGHT / (2.0 * b_eff),
        v_max=lam / (4.0 * t),
        delta_v=lam / (2.0 * u * t),
        var_approx=lam**2 / (8.0 * np.pi**2 * t**2 * (u - 1) * gamma),
        crb=3.0 * lam**2 / (8.0 * np.pi**2 * u * (u**2 - 1) * t**2 * gamma),
    )


def post_compression_snr(profiles, lag: int, exclude: int = 3) -> float:
    """
    Post-compression SNR at ``lag``: mean peak power over the noise power.

    Noise power is the median of |C_u[p]|^2 away from the peak divided by
    ln 2 (median of an exponential variable), then removed from the peak.
    """
    stack = np.atleast_2d(np.asarray([_samples(p) for p in profiles]))
    power = np.abs(stack) ** 2
    n = stack.shape[1]
    dist = np.minimum(np.abs(np.arange(n) - lag), n - np.abs(np.arange(n) - lag))
    noise = np.median(power[:, dist > exclude]) / np.log(2.0)
    if noise == 0:
        return float("inf")
    return float(max(power[:, lag].mean() - noise, 0.0) / noise)


def fm_radar_process(
    rx,
    tx,
    n_targets: int,
    sample_rate: float,
    t_sym_eff: float,
    carrier: float,
    max_lag: int | None = None,
    guard: float | None = None,
    strict: bool = False,
    interpolate: bool = False,
) -> list[SensingEstimate]:
    """
    Range and velocity estimates from U CP-removed echoes.

    ``rx`` is (U, N); ``tx`` is the matching (U, N) reference stack, or one
    N-sample block reused for every symbol. The peak guard defaults to the
    -3 dB width of the reference autocorrelation. Ranges sit on the integer
    lag grid unless ``interpolate`` adds a parabolic sub-lag correction.
    """
    profiles = compress_symbols(rx, tx)
    cbar = noncoherent_average(profiles)
    if guard is None:
        guard = reference_mainlobe_width(tx)
    lags = detect_peaks(cbar, count=n_targets, guard=guard, max_lag=max_lag, strict=strict)
    out = []
    for tau in lags:
        nu = estimate_doppler(profiles[:, tau], t_sym_eff)
        frac = parabolic_offset(cbar, tau) if interpolate else 0.0
        out.append(
            SensingEstimate(
                range=float(lag_to_range(tau + frac, sample_rate)),
                velocity=float(doppler_to_velocity(nu, carrier)),
                doppler=nu,
                peak_lag=tau,
                post_compression_snr=post_compression_snr(profiles, tau),
            )
        )
    return out


def ofdm_channel_profiles(rx, tx_freq, tones) -> np.ndarray:
    """
    Reciprocal-filtered CP-OFDM range profiles: IDFT over k of R_u[k] / S_u[k]
    on the occupied tones (zeros elsewhere). Shapes: rx (U, N), tx_freq (U, N).
    """
    rx = np.atleast_2d(rx)
    R = np.fft.fft(rx, axis=1)
    S = np.broadcast_to(np.atleast_2d(tx_freq), R.shape)
    F = np.zeros_like(R)
    tones = np.asarray(tones)
    F[:, tones] = R[:, tones] / S[:, tones]
    return np.fft.ifft(F, axis=1)


def ofdm_radar_process(
    rx,
    tx_freq,
    tones,
    n_targets: int,
    sample_rate: float,
    t_sym_eff: float,
    carrier: float,
    max_lag: int | None = None,
    guard: float | None = None,
    strict: bool = False,
) -> list[SensingEstimate]:
    """
    CP-OFDM 2D-FFT processing: reciprocal filter per symbol, range IDFT,
    Doppler DFT across symbols. Range peaks are picked on the maximum over
    Doppler of the map; velocity is the Doppler bin of that maximum.
    """
    profiles = ofdm_channel_profiles(rx, tx_freq, tones)
    n_sym, n_lag = profiles.shape
    if guard is None:
        psf = np.zeros(n_lag)
        psf[np.asarray(tones)] = 1.0
        guard = mainlobe_width(np.fft.ifft(psf), 0)
    rd = np.fft.fftshift(np.fft.fft(profiles, axis=0), axes=0)  # (U, N)
    mag = np.abs(rd)
    best = mag.max(axis=0)
    lags = detect_peaks(best, count=n_targets, guard=guard, max_lag=max_lag, strict=strict)
    freqs = doppler_axis(n_sym, t_sym_eff)
    out = []
    for tau in lags:
        nu = float(freqs[np.argmax(mag[:, tau])])
        out.append(
            SensingEstimate(
                range=float(lag_to_range(tau, sample_rate)),
                velocity=float(doppler_to_velocity(nu, carrier)),
                doppler=nu,
                peak_lag=tau,
            )
        )
    return out


def assign_estimates(true_values, estimates) -> np.ndarray:
    """
    Index of the estimate paired with each target: optimal one-to-one
    assignment on absolute error, then nearest estimate for targets left
    over. -1 when there are no estimates.
    """
    truth = np.asarray(true_values, dtype=float)
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        return np.full(truth.size, -1, dtype=int)
    cost = np.abs(truth[:, None] - est[None, :])
    rows, cols = linear_sum_assignment(cost)
    idx = np.argmin(cost, axis=1)
    idx[rows] = cols
    return idx


def match_estimates(true_values, estimates) -> np.ndarray:
    """Per-target errors (estimate - truth) under :func:`assign_estimates`; NaN without estimates."""
    truth = np.asarray(true_values, dtype=float)
    est = np.asarray(estimates, dtype=float)
    idx = assign_estimates(truth, est)
    if est.size == 0:
        return np.full(truth.size, np.nan)
    return est[idx] - truth
