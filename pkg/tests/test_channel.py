import math

import numpy as np
import pytest
from scipy import stats

from mzikey import channel, optics
from mzikey.channel import ChannelConfig

PI = math.pi
BASIS = [(0.0, 0.0), (0.0, PI), (PI, 0.0), (PI, PI)]


def staged(phi, psi, cfg=ChannelConfig(), rng=None, trim=0.0):
    rng = rng or np.random.default_rng(0)
    s = channel.propagate_outbound(phi, cfg, rng, trim)
    return channel.propagate_inbound(s, psi, cfg)


class TestConfig:
    def test_defaults_noiseless(self):
        assert ChannelConfig().noiseless

    @pytest.mark.parametrize("kw", [{"phase_jitter_sd": -1}, {"detector_error_sd": -0.1},
                                    {"static_offset": math.nan}])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ValueError):
            ChannelConfig(**kw)

    def test_digest_stable_and_sensitive(self):
        a = ChannelConfig(0.3, 0.01, 0.0, 5)
        assert a.digest() == ChannelConfig(0.3, 0.01, 0.0, 5).digest()
        assert a.digest() != a.with_(seed=6).digest()


class TestPropagation:
    @pytest.mark.parametrize("phi,psi", BASIS)
    def test_stages_match_symbolic_oracle(self, oracle, phi, psi):
        s = staged(phi, psi)
        for name in ("e34", "e56", "e78", "e910"):
            exp = np.asarray(oracle[name](phi, psi), dtype=complex).ravel()
            got = getattr(s, name).as_array()
            assert np.allclose(got, exp, atol=1e-12), name

    def test_random_phases_match_oracle(self, oracle, rng):
        for phi, psi in rng.uniform(0, 2 * PI, (30, 2)):
            s = staged(phi, psi)
            exp = np.asarray(oracle["e910"](phi, psi), dtype=complex).ravel()
            assert np.allclose(s.e910.as_array(), exp, atol=1e-12)

    def test_outbound_ignores_alice(self):
        # psi never enters the outbound pass
        a = staged(0.4, 0.0)
        b = staged(0.4, 2.2)
        assert a.e34 == b.e34 and a.e56 == b.e56

    def test_inbound_ignores_bob_shifter(self):
        # Rebuild the inbound pass from e56 alone: phi is not reapplied.
        s = staged(0.9, 1.3)
        manual = optics.apply(
            optics.beam_splitter(),
            optics.apply(optics.phase_shifter(1.3) @ optics.beam_splitter(), s.e56),
        )
        assert np.allclose(manual.as_array(), s.e910.as_array(), atol=1e-12)

    def test_batched_matches_scalar(self, rng):
        phi = rng.integers(0, 2, 50) * PI
        psi = rng.integers(0, 2, 50) * PI
        cfg = ChannelConfig(static_offset=0.3)
        link = channel.simulate_link(phi, psi, cfg, np.random.default_rng(1))
        for k in range(50):
            s = staged(phi[k], psi[k], cfg)
            assert np.allclose(link.e78[k], s.e78.as_array(), atol=1e-12)
            assert link.v_b[k] == pytest.approx(optics.observe(s.e910).visibility, abs=1e-12)

    def test_static_offset_shifts_outbound_only_in_phase(self):
        cfg = ChannelConfig(static_offset=0.7)
        phi = np.linspace(0, 2 * PI, 33)
        link = channel.simulate_link(phi, phi, cfg, np.random.default_rng(0))
        assert np.allclose(link.v_a, np.cos(phi + 0.7), atol=1e-12)
        # Offset is common to both passes and cancels in Bob's reading.
        assert np.allclose(link.v_b, -1.0, atol=1e-12)

    def test_trim_cancels_offset(self):
        cfg = ChannelConfig(static_offset=1.1)
        link = channel.simulate_link([0.0, PI], [0.0, PI], cfg, np.random.default_rng(0), trim=-1.1)
        assert np.allclose(link.v_a, [1, -1], atol=1e-12)


class TestTap:
    def test_only_mid_points(self):
        s = staged(0.0, 0.0)
        for bad in ("E56", "E910", "alice", ""):
            with pytest.raises(ValueError):
                channel.tap(bad, s)

    def test_inbound_needs_return_pass(self):
        s = channel.propagate_outbound(0.0, ChannelConfig(), np.random.default_rng(0))
        with pytest.raises(ValueError):
            channel.tap(channel.MID_INBOUND, s)

    def test_observation_is_real_only(self):
        o = channel.tap(channel.MID_OUTBOUND, staged(PI, 0.0))
        assert all(isinstance(v, float) for v in o.as_tuple())

    def test_outbound_basis_indistinguishable(self):
        a = channel.tap(channel.MID_OUTBOUND, staged(0.0, 0.0)).as_tuple()
        b = channel.tap(channel.MID_OUTBOUND, staged(PI, 0.0)).as_tuple()
        assert np.allclose(a, b, atol=1e-12)
        assert np.allclose(a, (0.5, 0.5, 1.0), atol=1e-12)

    def test_inbound_basis_indistinguishable(self):
        obs = [channel.tap(channel.MID_INBOUND, staged(p, q)).as_tuple() for p, q in BASIS]
        for o in obs:
            assert np.allclose(o, (0.5, 0.5, 1.0), atol=1e-12)

    def test_outbound_interference_law(self):
        # |E3 + E4|^2 for e34 = (1, i e^{i phi})/sqrt2 is 1 - sin(phi)
        phi = np.linspace(0, 2 * PI, 721)
        obs = np.array([channel.tap(channel.MID_OUTBOUND, staged(p, 0.0)).interference for p in phi])
        assert np.allclose(obs, 1 - np.sin(phi), atol=1e-12)
        assert channel.tap(channel.MID_OUTBOUND, staged(PI / 2, 0)).interference == pytest.approx(0, abs=1e-12)
        assert channel.tap(channel.MID_OUTBOUND, staged(3 * PI / 2, 0)).interference == pytest.approx(2, abs=1e-12)

    def test_inbound_interference_law(self, rng):
        for phi, psi in rng.uniform(0, 2 * PI, (100, 2)):
            o = channel.tap(channel.MID_INBOUND, staged(phi, psi))
            assert o.interference == pytest.approx(1 - math.sin(phi - psi), abs=1e-12)

    def test_batch_matches_scalar(self):
        link = channel.simulate_link([0.0, PI, 0.3], [PI, 0.0, 1.0], ChannelConfig(), np.random.default_rng(0))
        for point in channel.TAP_POINTS:
            arr = channel.tap_batch(point, link)
            for k, (p, q) in enumerate([(0.0, PI), (PI, 0.0), (0.3, 1.0)]):
                assert np.allclose(arr[k], channel.tap(point, staged(p, q)).as_tuple(), atol=1e-12)
        with pytest.raises(ValueError):
            channel.tap_batch("E34", link)


class TestNoise:
    def test_jitter_is_shared_by_both_passes(self):
        cfg = ChannelConfig(phase_jitter_sd=0.2)
        link = channel.simulate_link(np.zeros(2000), np.zeros(2000), cfg, np.random.default_rng(3))
        eps = np.arccos(np.clip(link.v_a, -1, 1))
        # V_B = -cos(eps) when phi = psi; the same eps as V_A = cos(eps)
        assert np.allclose(link.v_b, -link.v_a, atol=1e-12)
        assert np.std(eps) > 0

    def test_jitter_visibility_moments(self):
        # E[cos eps] = exp(-s^2/2) for eps ~ N(0, s^2)
        sd = 0.3
        cfg = ChannelConfig(phase_jitter_sd=sd)
        link = channel.simulate_link(np.zeros(200_000), np.zeros(200_000), cfg, np.random.default_rng(4))
        assert link.v_a.mean() == pytest.approx(math.exp(-sd**2 / 2), abs=3e-3)

    def test_detector_noise_mean_and_clip(self):
        cfg = ChannelConfig(detector_error_sd=0.05)
        link = channel.simulate_link(np.full(100_000, PI / 2), np.zeros(100_000), cfg, np.random.default_rng(5))
        assert np.nanmean(link.v_a) == pytest.approx(0.0, abs=2e-3)
        # For balanced ports V ~ (n1 - n0)/(1 + n0 + n1); sd ~ 0.05 * sqrt2
        assert np.nanstd(link.v_a) == pytest.approx(0.05 * math.sqrt(2), rel=0.05)
        assert np.all(np.abs(link.v_a) <= 1)

    def test_detect_single(self):
        f = optics.FieldPair(0, 1j)
        assert channel.detect(f, ChannelConfig(), np.random.default_rng(0)).visibility == 1.0
        m = channel.detect(f, ChannelConfig(detector_error_sd=0.01), np.random.default_rng(0))
        assert m.visibility == pytest.approx(1.0, abs=0.05)

    def test_dark_pair_is_nan(self):
        link = channel.simulate_link([0.0], [0.0], ChannelConfig(detector_error_sd=1.0), np.random.default_rng(0))
        # Total intensity 1 is well under ten noise sigmas: unreadable.
        assert np.isnan(link.v_a[0]) and np.isnan(link.v_b[0])
        m = channel.detect(optics.FieldPair(1, 0), ChannelConfig(detector_error_sd=1.0), np.random.default_rng(0))
        assert m.visibility is None

    def test_same_seed_same_draws(self):
        cfg = ChannelConfig(phase_jitter_sd=0.1, detector_error_sd=0.02)
        a = channel.simulate_link(np.zeros(10), np.zeros(10), cfg, np.random.default_rng(9))
        b = channel.simulate_link(np.zeros(10), np.zeros(10), cfg, np.random.default_rng(9))
        assert np.array_equal(a.v_a, b.v_a) and np.array_equal(a.v_b, b.v_b)

    def test_noisy_taps_equal_in_distribution(self):
        cfg = ChannelConfig(phase_jitter_sd=0.1)
        n = 20_000
        a = channel.tap_batch(channel.MID_OUTBOUND,
                              channel.simulate_link(np.zeros(n), 0.0, cfg, np.random.default_rng(1)))
        b = channel.tap_batch(channel.MID_OUTBOUND,
                              channel.simulate_link(np.full(n, PI), 0.0, cfg, np.random.default_rng(2)))
        for col in range(3):
            assert stats.ks_2samp(a[:, col], b[:, col]).pvalue > 0.01


def test_replica_readings():
    r = channel.replica_readings([0.0, PI, 0.0], [0.0, 0.0, PI])
    assert np.allclose(r, [1, -1, -1], atol=1e-12)
    assert r.dtype == float
