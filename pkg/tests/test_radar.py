import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fmofdm.channel import NoiseSpec, Target, TargetScene, add_awgn, radar_echoes, range_for_delay
from fmofdm.radar import (
    RangeDopplerMap,
    assign_estimates,
    build_rdm,
    compress_symbols,
    detect_peaks,
    doppler_axis,
    doppler_to_velocity,
    estimate_doppler,
    fm_radar_process,
    lag_to_range,
    mainlobe_width,
    match_estimates,
    noncoherent_average,
    ofdm_radar_process,
    parabolic_offset,
    post_compression_snr,
    range_compress,
    reference_mainlobe_width,
    sensing_limits,
)
from fmofdm.waveform import SPEED_OF_LIGHT, ComplexSignal, FmParams, OfdmConfig, aliasing_margin, fm_modulate, map_subcarriers, ofdm_real_baseband

FS = 200e6
FC = 77e9
WIDE = OfdmConfig.with_cutoff(200, sample_rate=FS)


def fm_signal(cfg, kappa, rng):
    p = FmParams.from_phase_index(kappa, cfg.sample_rate)
    while True:
        x = ofdm_real_baseband(map_subcarriers(rng.integers(0, 2, cfg.bits_per_block()), cfg))
        if aliasing_margin(x, p, cfg.sample_interval) > 0:
            return fm_modulate(x, p, cfg.sample_interval)


def echo_stack(cfg, scene, rng, kappa=0.9, n_symbols=16, snr_db=np.inf):
    rx, tx = [], []
    for u in range(n_symbols):
        s = fm_signal(cfg, kappa, rng)
        r = radar_echoes(s, scene, u, cfg.t_sym_eff, cfg.n_cp)
        r = add_awgn(r, NoiseSpec(snr_db, int(rng.integers(2**62))), reference_power=1.0)
        rx.append(r.samples)
        tx.append(s.samples)
    return np.array(rx), np.array(tx)


class TestRangeCompress:
    def test_autocorrelation_peak(self, rng):
        s = fm_signal(WIDE, 0.9, rng)
        c = np.abs(range_compress(s, s).values)
        assert np.argmax(c) == 0
        assert c[0] == pytest.approx(WIDE.n_fft)

    def test_shift(self, rng):
        s = fm_signal(WIDE, 0.9, rng)
        r = ComplexSignal(np.roll(s.samples, 17), s.sample_interval)
        assert np.argmax(np.abs(range_compress(r, s).values)) == 17

    @pytest.mark.parametrize("n", [64, 256, 512])
    def test_fft_matches_direct(self, rng, n):
        for _ in range(5):
            r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            s = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            a = range_compress(r, s, "fft").values
            b = range_compress(r, s, "direct").values
            assert np.max(np.abs(a - b)) <= 1e-9 * np.max(np.abs(b))

    def test_errors(self):
        with pytest.raises(ValueError):
            range_compress(np.ones(4), np.ones(5))
        with pytest.raises(ValueError):
            range_compress(np.ones(4), np.ones(4), "fast")

    @given(st.floats(0.05, 0.9), st.integers(0, 2**32 - 1))
    def test_peak_dominance(self, kappa, seed):
        cfg = OfdmConfig.with_cutoff(32, n_fft=128, n_cp=16)
        s = fm_signal(cfg, kappa, np.random.default_rng(seed))
        c = np.abs(range_compress(s, s).values)
        assert c[0] == pytest.approx(128.0)
        assert np.all(c[1:] < c[0] - 1e-9)

    def test_doppler_peak_phase_and_location(self, rng):
        # single target: peak sits on the true lag and carries the phase of
        # the slow-time ramp plus the within-symbol mean rotation
        tau, v = 12, 150.0
        scene = TargetScene([Target(range_for_delay(tau, FS), v)], FC)
        nu = scene.dopplers()[0]
        s = fm_signal(WIDE, 0.9, rng)
        for u in (0, 3):
            c = range_compress(radar_echoes(s, scene, u, WIDE.t_sym_eff, WIDE.n_cp), s).values
            assert np.argmax(np.abs(c)) == tau
            n = np.arange(WIDE.n_fft)
            expected = np.exp(2j * np.pi * nu * u * WIDE.t_sym_eff) * np.sum(np.exp(2j * np.pi * nu * n / FS))
            assert c[tau] == pytest.approx(expected, rel=1e-9)

    def test_doppler_mainlobe_loss(self, rng):
        s = fm_signal(WIDE, 0.9, rng)
        n = WIDE.n_fft
        for frac in np.linspace(0.0, 0.3, 7):
            nu = frac / WIDE.t_sym_eff
            v = doppler_to_velocity(nu, FC)
            scene = TargetScene([Target(0.0, v)], FC)
            c = np.abs(range_compress(radar_echoes(s, scene, 0, WIDE.t_sym_eff, WIDE.n_cp), s).values)
            assert c[0] == pytest.approx(n * np.sinc(nu * WIDE.t_sym_eff), rel=0.05)


class TestAveraging:
    def test_single_profile(self, rng):
        c = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert np.allclose(noncoherent_average([c]).values, np.abs(c))

    def test_identical_profiles(self, rng):
        c = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert np.allclose(noncoherent_average([c, c, c]).values, np.abs(c))

    def test_empty(self):
        with pytest.raises(ValueError):
            noncoherent_average([])

    def test_noise_variance_reduction(self, rng):
        n = 512

        def profile():
            w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            return w

        one = np.var(noncoherent_average([profile()]).values)
        many = np.var(noncoherent_average([profile() for _ in range(64)]).values)
        assert many / one == pytest.approx(1 / 64, rel=0.25)


class TestPeaks:
    def test_single_target(self, rng):
        scene = TargetScene([Target(range_for_delay(23, FS), 5.0)], FC)
        rx, tx = echo_stack(WIDE, scene, rng, n_symbols=4)
        cbar = noncoherent_average(compress_symbols(rx, tx))
        assert detect_peaks(cbar, count=1) == [23]

    def test_three_targets(self, rng):
        lags = [8, 30, 55]
        scene = TargetScene([Target(range_for_delay(l, FS), v) for l, v in zip(lags, [3.0, -20.0, 11.0])], FC)
        rx, tx = echo_stack(WIDE, scene, rng, n_symbols=8, snr_db=20.0)
        cbar = noncoherent_average(compress_symbols(rx, tx))
        assert detect_peaks(cbar, count=3, max_lag=64) == lags

    def test_merged_pair_small_index(self, rng):
        cfg = OfdmConfig.with_cutoff(64)
        scene = TargetScene([Target(range_for_delay(l, cfg.sample_rate)) for l in (20, 21)], FC)
        rx, tx = echo_stack(cfg, scene, rng, kappa=0.3, n_symbols=16)
        cbar = noncoherent_average(compress_symbols(rx, tx))
        assert reference_mainlobe_width(tx) > 2
        found = detect_peaks(cbar, threshold=5.0, max_lag=64)
        assert len(found) == 1 and found[0] in (20, 21)

    def test_policy_arguments(self):
        v = np.array([0.0, 3.0, 0.0, 1.0, 0.0])
        with pytest.raises(ValueError):
            detect_peaks(v)
        with pytest.raises(ValueError):
            detect_peaks(v, count=1, threshold=2.0)
        with pytest.raises(ValueError):
            detect_peaks(v, count=3, guard=1)
        assert detect_peaks(v, count=3, guard=1, strict=False) == [1, 3]
        with pytest.raises(ValueError):
            detect_peaks(np.array([]), count=1)

    def test_guard_from_reference_keeps_close_pair(self, rng):
        cfg = OfdmConfig.with_cutoff(64)
        lags = [10, 13, 40]
        scene = TargetScene([Target(range_for_delay(l, cfg.sample_rate), 0.0, a) for l, a in zip(lags, [1, 1j, -1])], FC)
        rx, tx = echo_stack(cfg, scene, rng, n_symbols=16)
        est = fm_radar_process(rx, tx, 3, cfg.sample_rate, cfg.t_sym_eff, FC, max_lag=64)
        assert sorted(e.peak_lag for e in est) == lags

    def test_mainlobe_width_triangle(self):
        v = np.zeros(16)
        v[5:8] = [0.5, 1.0, 0.5]
        level = 1 / np.sqrt(2)
        expected = 2 * (1 - level) / 0.5
        assert mainlobe_width(v, 6) == pytest.approx(expected)

    def test_parabolic_offset(self):
        n = np.arange(16)
        for true in (5.0, 5.2, 4.8):
            v = 10 - (n - true) ** 2
            assert 5 + parabolic_offset(v, 5) == pytest.approx(true)


class TestConversions:
    def test_lag_to_range(self):
        assert lag_to_range(0, 15.36e6) == 0.0
        assert lag_to_range(1, 15.36e6) == pytest.approx(9.7656, rel=1e-3)
        assert lag_to_range(10, 200e6) == pytest.approx(7.4948, rel=1e-4)

    def test_doppler_exact(self):
        t = WIDE.t_sym_eff
        u = np.arange(32)
        for nu in (-0.45 / t, 0.0, 0.1 / t, 0.49 / t):
            assert estimate_doppler(np.exp(2j * np.pi * nu * u * t), t) == pytest.approx(nu, abs=1e-9 / t)

    def test_doppler_constant(self):
        assert estimate_doppler(np.full(10, 2 - 1j), 1e-3) == 0.0

    def test_doppler_alias(self):
        t = WIDE.t_sym_eff
        nu = 1.2 / (2 * t)
        y = np.exp(2j * np.pi * nu * np.arange(16) * t)
        assert estimate_doppler(y, t) == pytest.approx(nu - 1 / t)

    def test_doppler_needs_two(self):
        with pytest.raises(ValueError):
            estimate_doppler([1.0], 1e-3)

    def test_velocity(self):
        assert doppler_to_velocity(0.0, FC) == 0.0
        assert doppler_to_velocity(1e3, FC) == pytest.approx(1.9467, rel=1e-4)
        v = 33.3
        assert doppler_to_velocity(2 * v * FC / SPEED_OF_LIGHT, FC) == pytest.approx(v)
        with pytest.raises(ValueError):
            doppler_to_velocity(1.0, 0.0)

    def test_estimate_invariant(self, rng):
        scene = TargetScene([Target(range_for_delay(9, FS), -70.0)], FC)
        rx, tx = echo_stack(WIDE, scene, rng, n_symbols=8)
        (e,) = fm_radar_process(rx, tx, 1, FS, WIDE.t_sym_eff, FC)
        assert e.velocity == (SPEED_OF_LIGHT / FC) / 2 * e.doppler
        assert e.velocity == pytest.approx(-70.0, abs=1e-6)
        assert e.range == lag_to_range(9, FS)


class TestRdm:
    def test_static_target(self, rng):
        scene = TargetScene([Target(range_for_delay(14, FS))], FC)
        rx, tx = echo_stack(WIDE, scene, rng, n_symbols=8)
        rdm = build_rdm(compress_symbols(rx, tx), FS, WIDE.t_sym_eff, FC)
        assert rdm.grid.shape == (512, 8)
        assert rdm.peak_cell() == (14, 4)
        assert rdm.velocity_axis[4] == 0.0

    def test_moving_target_bin(self, rng):
        u_count = 16
        nu = 3 / (u_count * WIDE.t_sym_eff)
        scene = TargetScene([Target(range_for_delay(5, FS), doppler_to_velocity(nu, FC))], FC)
        rx, tx = echo_stack(WIDE, scene, rng, n_symbols=u_count)
        rdm = build_rdm(compress_symbols(rx, tx), FS, WIDE.t_sym_eff, FC, window="hann")
        assert rdm.peak_cell() == (5, u_count // 2 + round(nu * u_count * WIDE.t_sym_eff))

    def test_two_targets(self, rng):
        lim = sensing_limits(WIDE, FmParams.from_phase_index(0.9, FS), 32, 100.0, FC)
        pts = [(10, 2 * lim.delta_v), (40, -5 * lim.delta_v)]
        scene = TargetScene([Target(range_for_delay(l, FS), v) for l, v in pts], FC)
        rx, tx = echo_stack(WIDE, scene, rng, n_symbols=32)
        rdm = build_rdm(compress_symbols(rx, tx), FS, WIDE.t_sym_eff, FC)
        g = rdm.grid.copy()
        for lag, v in pts:
            col = int(np.argmin(np.abs(rdm.velocity_axis - v)))
            assert g[lag, col] == pytest.approx(g.max(), rel=0.1)
        assert rdm.range_axis[1] == pytest.approx(SPEED_OF_LIGHT / (2 * FS))
        assert rdm.velocity_axis[1] - rdm.velocity_axis[0] == pytest.approx(lim.delta_v)

    def test_needs_two_symbols(self):
        with pytest.raises(ValueError):
            build_rdm([np.ones(8)], FS, 1e-6, FC)

    def test_db_view(self):
        rdm = RangeDopplerMap(np.array([[1.0, 0.0], [0.1, 0.01]]), np.arange(2.0), np.arange(2.0))
        db = rdm.to_db()
        assert db[0, 0] == 0.0 and db[0, 1] == -60.0 and db[1, 0] == pytest.approx(-20.0)


class TestSensingLimits:
    def test_table_constants(self):
        lim = sensing_limits(WIDE, FmParams.from_phase_index(0.9, FS), 64, 100.0, FC)
        assert lim.v_max == pytest.approx(338.1, rel=1e-3)
        assert lim.delta_v == pytest.approx(10.57, rel=1e-3)

    def test_range_resolution(self, rng):
        p = FmParams.from_phase_index(0.9, FS)
        x = ofdm_real_baseband(map_subcarriers(rng.integers(0, 2, WIDE.bits_per_block()), WIDE))
        lim = sensing_limits(WIDE, p, 16, 10.0, FC, eta=1.0, x=x)
        from fmofdm.waveform import baseband_bandwidth

        b = baseband_bandwidth(x, WIDE.sample_interval) + p.peak_frequency
        assert lim.delta_r == pytest.approx(SPEED_OF_LIGHT / (2 * b))

    @given(st.integers(2, 4096), st.floats(1e-3, 1e6))
    def test_crb_below_approximation(self, u, gamma):
        lim = sensing_limits(WIDE, FmParams.from_phase_index(0.9, FS), u, gamma, FC)
        assert lim.crb <= lim.var_approx

    def test_high_snr_limit(self):
        lim = sensing_limits(WIDE, FmParams.from_phase_index(0.9, FS), 8, 1e300, FC)
        assert lim.var_approx < 1e-290 and lim.crb < 1e-290

    def test_errors(self):
        with pytest.raises(ValueError):
            sensing_limits(WIDE, FmParams.from_phase_index(0.9, FS), 1, 10.0, FC)
        with pytest.raises(ValueError):
            sensing_limits(WIDE, FmParams.from_phase_index(0.9, FS), 8, 0.0, FC)

    def test_doppler_axis(self):
        ax = doppler_axis(4, 1e-3)
        assert np.allclose(ax, [-500, -250, 0, 250])


class TestProcessors:
    def test_post_compression_snr(self, rng):
        scene = TargetScene([Target(range_for_delay(20, FS))], FC)
        gamma_db = 20.0
        rx, tx = echo_stack(WIDE, scene, rng, n_symbols=32, snr_db=gamma_db - 10 * np.log10(512))
        g = post_compression_snr(compress_symbols(rx, tx), 20)
        assert 10 * np.log10(g) == pytest.approx(gamma_db, abs=2.5)

    def test_ofdm_baseline_noiseless(self, rng):
        cfg = WIDE
        tones = list(cfg.active_band) + list(cfg.mirror_band)
        lags, vels = [12, 44], [20.0, -35.0]
        scene = TargetScene([Target(range_for_delay(l, FS), v) for l, v in zip(lags, vels)], FC)
        rx, txf = [], []
        for u in range(32):
            values = map_subcarriers(rng.integers(0, 2, cfg.bits_per_block(False)), cfg, hermitian=False).values
            s = ComplexSignal(np.fft.ifft(values), cfg.sample_interval)
            rx.append(radar_echoes(s, scene, u, cfg.t_sym_eff, cfg.n_cp).samples)
            txf.append(values)
        est = ofdm_radar_process(np.array(rx), np.array(txf), tones, 2, FS, cfg.t_sym_eff, FC, max_lag=64)
        assert [e.peak_lag for e in est] == lags
        lim = sensing_limits(cfg, FmParams.from_phase_index(0.9, FS), 32, 1.0, FC)
        for e, v in zip(est, vels):
            assert abs(e.velocity - v) <= lim.delta_v / 2

    def test_assignment(self):
        assert assign_estimates([10.0, 20.0], [19.0, 11.0]).tolist() == [1, 0]
        assert assign_estimates([10.0, 20.0, 21.0], [19.0]).tolist() == [0, 0, 0]
        assert np.allclose(match_estimates([10.0, 20.0], [19.0, 11.0]), [1.0, -1.0])
        assert np.all(np.isnan(match_estimates([1.0, 2.0], [])))
