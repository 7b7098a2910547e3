"""
Per-trial work units for every scenario.

A work unit is ``(cfg, snr_index, trial)``; it draws everything it needs
from ``default_rng((seed, snr_index, trial))`` and returns one record per
waveform variant. All waveforms inside a unit see the same channel and
noise realizations, which makes per-trial comparisons paired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..channel import (
    ChannelPath,
    NoiseSpec,
    Target,
    TargetScene,
    add_awgn,
    apply_multipath,
    radar_echoes,
    range_for_delay,
    sample_rayleigh_paths,
)
from ..fm_rx import (
    BetaWeights,
    block_average_response,
    ce_ofdm_demodulate,
    cp_ofdm_demodulate,
    effective_channel,
    fm_ofdm_demodulate,
    genie_beta_weights,
    proxy_beta_weights,
)
from ..metrics import TrialRecord
from ..radar import (
    assign_estimates,
    build_rdm,
    compress_symbols,
    fm_radar_process,
    mainlobe_width,
    noncoherent_average,
    ofdm_channel_profiles,
    ofdm_radar_process,
)
from ..waveform import (
    ComplexSignal,
    FmParams,
    OfdmConfig,
    aliasing_margin,
    ce_ofdm_modulate,
    cyclic_prefix,
    fm_modulate,
    map_subcarriers,
    ofdm_real_baseband,
)
from .config import TWO_PI, ExperimentConfig

MAX_REDRAWS = 1000
SEED_SPACE = 2**63


@dataclass(frozen=True)
class Variant:
    """One waveform at one (modulation index, cutoff) setting."""

    waveform: str
    mod_index: float
    cutoff: int
    label: str


def variants(cfg: ExperimentConfig) -> list[Variant]:
    """
    Waveform variants of a run. With a single (m, k) pair the labels are
    the bare waveform names; otherwise they carry the setting, e.g.
    ``fm_ofdm[m=0.6/2pi,k=64]``. CP-OFDM ignores m.
    """
    combos = [(m, k) for m in cfg.mod_index for k in cfg.cutoff]
    tagged = len(combos) > 1
    out = []
    for wf in cfg.waveforms:
        if wf == "cp_ofdm":
            for k in cfg.cutoff:
                label = f"{wf}[k={k}]" if len(cfg.cutoff) > 1 else wf
                out.append(Variant(wf, cfg.mod_index[0], k, label))
            continue
        for m, k in combos:
            label = f"{wf}[m={m * TWO_PI:.4g}/2pi,k={k}]" if tagged else wf
            out.append(Variant(wf, m, k, label))
    return out


def trial_rng(cfg: ExperimentConfig, snr_index: int, trial: int) -> np.random.Generator:
    return np.random.default_rng((cfg.seed, snr_index, trial))


def ofdm_config(cfg: ExperimentConfig, cutoff: int) -> OfdmConfig:
    return OfdmConfig.with_cutoff(
        cutoff,
        n_fft=cfg.n_fft,
        n_cp=cfg.n_cp,
        sample_rate=cfg.sample_rate,
        qam_order=cfg.qam_order,
        normalization=cfg.normalization,
    )


def draw_fm_block(ocfg: OfdmConfig, p: FmParams, rng: np.random.Generator):
    """
    Random bits and their real baseband block, redrawn until the aliasing
    margin is positive (the transmitter only emits admissible blocks).
    """
    for _ in range(MAX_REDRAWS):
        bits = rng.integers(0, 2, ocfg.bits_per_block())
        x = ofdm_real_baseband(map_subcarriers(bits, ocfg))
        if aliasing_margin(x, p, ocfg.sample_interval) > 0:
            return bits, x
    raise RuntimeError("no admissible FM-OFDM block found; lower the modulation index")


def cp_ofdm_block(ocfg: OfdmConfig, rng: np.random.Generator):
    """Complex CP-OFDM block scaled to unit mean power, plus its frequency-domain values."""
    bits = rng.integers(0, 2, ocfg.bits_per_block(hermitian=False))
    frame = map_subcarriers(bits, ocfg, hermitian=False)
    gain = ocfg.n_fft / math.sqrt(2.0 * ocfg.n_active)
    return bits, frame.values * gain, np.fft.ifft(frame.values) * gain, gain


def _channel_paths(cfg: ExperimentConfig, rng: np.random.Generator) -> list[ChannelPath]:
    if cfg.profile == "identity":
        return [ChannelPath(1.0)]
    return sample_rayleigh_paths(cfg.profile, cfg.speed, cfg.carrier, rng, doppler_factor=cfg.doppler_factor)


def ber_trial(cfg: ExperimentConfig, snr_index: int, trial: int) -> list[TrialRecord]:
    """
    One frame of ``blocks_per_trial`` consecutive blocks.

    With ``speed`` zero the fade is redrawn every block (block fading);
    otherwise one time-varying channel spans the frame and Doppler phase
    runs continuously across blocks.
    """
    snr = cfg.snr_grid[snr_index]
    rng = trial_rng(cfg, snr_index, trial)
    block_len = cfg.n_fft + cfg.n_cp
    static = cfg.speed == 0.0
    frame_paths = None if static else _channel_paths(cfg, rng)
    blocks = []
    for b in range(cfg.blocks_per_trial):
        paths = _channel_paths(cfg, rng) if static else frame_paths
        offset = 0 if static else b * block_len
        blocks.append((paths, offset, int(rng.integers(SEED_SPACE))))
    data_seeds = rng.integers(SEED_SPACE, size=len(variants(cfg)))

    records = []
    for var, data_seed in zip(variants(cfg), data_seeds):
        ocfg = ofdm_config(cfg, var.cutoff)
        p = FmParams.from_phase_index(var.mod_index * TWO_PI, cfg.sample_rate)
        drng = np.random.default_rng(int(data_seed))
        errors = total = 0
        for paths, offset, noise_seed in blocks:
            if var.waveform == "cp_ofdm":
                bits, _, s, gain = cp_ofdm_block(ocfg, drng)
                tx = cyclic_prefix(ComplexSignal(s, ocfg.sample_interval), cfg.n_cp)
            else:
                bits, x = draw_fm_block(ocfg, p, drng)
                mod = fm_modulate if var.waveform == "fm_ofdm" else ce_ofdm_modulate
                tx = cyclic_prefix(mod(x, p, ocfg.sample_interval), cfg.n_cp)
            rx = apply_multipath(tx, paths, "linear", time_offset=offset)
            rx = add_awgn(rx, NoiseSpec(snr, noise_seed), reference_power=1.0)
            if var.waveform == "fm_ofdm":
                if cfg.beta_mode == "genie" and len(paths) > 1:
                    betas = genie_beta_weights(paths, x, p, ocfg, offset + cfg.n_cp)
                elif len(paths) > 1:
                    betas = proxy_beta_weights(paths, ocfg.n_fft)
                else:
                    betas = BetaWeights.constant([1.0], ocfg.n_fft)
                h = effective_channel(paths, betas, p, ocfg, with_ici=False)
                rb = fm_ofdm_demodulate(rx, h, p, ocfg)
            elif var.waveform == "ce_ofdm":
                rb = ce_ofdm_demodulate(rx, p, ocfg)
            else:
                H = block_average_response(paths, ocfg, offset + cfg.n_cp) * gain
                rb = cp_ofdm_demodulate(rx, H, ocfg)
            errors += int(np.count_nonzero(rb != bits))
            total += bits.size
        records.append(TrialRecord(var.label, cfg.scenario, snr, trial, errors, total))
    return records


def radar_scene(cfg: ExperimentConfig, rng: np.random.Generator, sep: int = 3) -> TargetScene:
    """
    Configured targets with random reflection phase, or, when none are
    configured, a random three-target scene: a pair ``sep`` lags apart plus
    one more target, all inside the prefix, velocities uniform in +-30 m/s.
    """
    fs = cfg.sample_rate
    phases = np.exp(2j * np.pi * rng.uniform(size=max(len(cfg.targets), 3)))
    if cfg.targets:
        targets = [Target(r, v, a) for (r, v), a in zip(cfg.targets, phases)]
        return TargetScene(targets, cfg.carrier)
    first = int(rng.integers(2, cfg.n_cp - sep - 12))
    lags = [first, first + sep, int(rng.integers(first + sep + 8, cfg.n_cp + 1))]
    vels = rng.uniform(-30.0, 30.0, 3)
    return TargetScene([Target(range_for_delay(l, fs), v, a) for l, v, a in zip(lags, vels, phases)], cfg.carrier)


def radar_stack(var: Variant, cfg: ExperimentConfig, scene: TargetScene, snr: float, rng, noise_seed: int):
    """
    U echoes of one waveform. Returns (rx, tx_time, tx_freq); tx_freq is
    None for constant-envelope waveforms. The noise reference is the echo
    power of a unit reflector.
    """
    ocfg = ofdm_config(cfg, var.cutoff)
    p = FmParams.from_phase_index(var.mod_index * TWO_PI, cfg.sample_rate)
    nrng = np.random.default_rng(noise_seed)
    rx, tx, txf = [], [], []
    for u in range(cfg.n_symbols):
        if var.waveform == "cp_ofdm":
            _, values, s, _ = cp_ofdm_block(ocfg, rng)
            txf.append(values)
        else:
            _, x = draw_fm_block(ocfg, p, rng)
            mod = fm_modulate if var.waveform == "fm_ofdm" else ce_ofdm_modulate
            s = mod(x, p, ocfg.sample_interval).samples
        sig = ComplexSignal(s, ocfg.sample_interval)
        echo = radar_echoes(sig, scene, u, ocfg.t_sym_eff, cfg.n_cp)
        echo = add_awgn(echo, NoiseSpec(snr, int(nrng.integers(SEED_SPACE))), reference_power=1.0)
        rx.append(echo.samples)
        tx.append(s)
    return np.array(rx), np.array(tx), (np.array(txf) if txf else None)


def estimate_scene(var: Variant, cfg: ExperimentConfig, rx, tx, txf, n_targets: int):
    ocfg = ofdm_config(cfg, var.cutoff)
    args = (n_targets, cfg.sample_rate, ocfg.t_sym_eff, cfg.carrier)
    if var.waveform == "cp_ofdm":
        tones = list(ocfg.active_band) + list(ocfg.mirror_band)
        return ofdm_radar_process(rx, txf, tones, *args, max_lag=cfg.n_cp)
    return fm_radar_process(rx, tx, *args, max_lag=cfg.n_cp)


def scene_errors(scene: TargetScene, estimates):
    """Range and velocity errors per target, paired by range."""
    true_r = np.array([t.range_m for t in scene.targets])
    true_v = np.array([t.velocity for t in scene.targets])
    idx = assign_estimates(true_r, [e.range for e in estimates])
    if not estimates:
        return np.full(true_r.size, np.nan), np.full(true_v.size, np.nan)
    est_r = np.array([estimates[j].range for j in idx])
    est_v = np.array([estimates[j].velocity for j in idx])
    return est_r - true_r, est_v - true_v


def rmse_trial(cfg: ExperimentConfig, snr_index: int, trial: int) -> list[TrialRecord]:
    """One scene, U symbols per waveform; per-target errors after assignment."""
    snr = cfg.snr_grid[snr_index]
    rng = trial_rng(cfg, snr_index, trial)
    scene = radar_scene(cfg, rng)
    noise_seed = int(rng.integers(SEED_SPACE))
    data_seeds = rng.integers(SEED_SPACE, size=len(variants(cfg)))
    records = []
    for var, data_seed in zip(variants(cfg), data_seeds):
        rx, tx, txf = radar_stack(var, cfg, scene, snr, np.random.default_rng(int(data_seed)), noise_seed)
        est = estimate_scene(var, cfg, rx, tx, txf, len(scene.targets))
        r_err, v_err = scene_errors(scene, est)
        records.append(TrialRecord(var.label, cfg.scenario, snr, trial, range_error=r_err, velocity_error=v_err))
    return records


def rdm_trial(cfg: ExperimentConfig, snr_index: int, trial: int) -> list[TrialRecord]:
    """Like :func:`rmse_trial`, and keeps the FM range-Doppler map in ``extra``."""
    snr = cfg.snr_grid[snr_index]
    rng = trial_rng(cfg, snr_index, trial)
    scene = radar_scene(cfg, rng)
    noise_seed = int(rng.integers(SEED_SPACE))
    data_seeds = rng.integers(SEED_SPACE, size=len(variants(cfg)))
    true_v = np.array([t.velocity for t in scene.targets])
    records = []
    for var, data_seed in zip(variants(cfg), data_seeds):
        rx, tx, txf = radar_stack(var, cfg, scene, snr, np.random.default_rng(int(data_seed)), noise_seed)
        est = estimate_scene(var, cfg, rx, tx, txf, len(scene.targets))
        r_err, v_err = scene_errors(scene, est)
        ocfg = ofdm_config(cfg, var.cutoff)
        if var.waveform == "cp_ofdm":
            tones = list(ocfg.active_band) + list(ocfg.mirror_band)
            profiles = ofdm_channel_profiles(rx, txf, tones)
        else:
            profiles = compress_symbols(rx, tx)
        rdm = build_rdm(profiles, cfg.sample_rate, ocfg.t_sym_eff, cfg.carrier, cfg.window)
        extra = {"rdm": rdm, "true_lags": scene.delays(cfg.sample_rate), "true_velocity": true_v}
        records.append(
            TrialRecord(var.label, cfg.scenario, snr, trial, range_error=r_err, velocity_error=v_err, extra=extra)
        )
    return records


def mainlobe_trial(cfg: ExperimentConfig, snr_index: int, trial: int) -> list[TrialRecord]:
    """
    -3 dB width of the averaged range profile of one random single target,
    and whether a random close three-target scene resolves exactly.
    """
    snr = cfg.snr_grid[snr_index]
    rng = trial_rng(cfg, snr_index, trial)
    lag = int(rng.integers(1, cfg.n_cp + 1))
    velocity = float(rng.uniform(-30.0, 30.0))
    single = TargetScene([Target(range_for_delay(lag, cfg.sample_rate), velocity)], cfg.carrier)
    triple = radar_scene(cfg.replace(targets=()), rng)
    noise_seed = int(rng.integers(SEED_SPACE))
    data_seeds = rng.integers(SEED_SPACE, size=len(variants(cfg)))
    records = []
    for var, data_seed in zip(variants(cfg), data_seeds):
        drng = np.random.default_rng(int(data_seed))
        rx, tx, _ = radar_stack(var, cfg, single, snr, drng, noise_seed)
        width = mainlobe_width(noncoherent_average(compress_symbols(rx, tx)), lag)
        rx3, tx3, txf3 = radar_stack(var, cfg, triple, snr, drng, noise_seed)
        found = sorted(e.peak_lag for e in estimate_scene(var, cfg, rx3, tx3, txf3, 3))
        resolved = found == sorted(int(t) for t in triple.delays(cfg.sample_rate))
        records.append(
            TrialRecord(
                var.label,
                cfg.scenario,
                snr,
                trial,
                extra={"mainlobe_width": float(width), "resolved": bool(resolved)},
            )
        )
    return records


TRIALS = {
    "ber_flat": ber_trial,
    "ber_doubly_dispersive": ber_trial,
    "ber_single_tap_mobility": ber_trial,
    "rmse_sweep": rmse_trial,
    "rdm_export": rdm_trial,
    "mainlobe_vs_m": mainlobe_trial,
}
