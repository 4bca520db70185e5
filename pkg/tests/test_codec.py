import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from groomkit import codec
from groomkit.codec import AMP, COS, SIN, CodecConfig, ParameterError
from groomkit.strand import DimensionError, to_gradients

from helpers import curly_strands, random_strands
from oracles import naive_decode, naive_dft, naive_encode

CFG = codec.DEFAULT
K, F = CFG.k, CFG.f


def code_parts(code):
    return codec.split(code)


class TestConfig:
    def test_default_dimensions(self):
        assert (CFG.k, CFG.f, CFG.dim) == (33, 17, 459)

    def test_rejects_indivisible(self):
        with pytest.raises(ParameterError):
            CodecConfig(n_s=101, n_g=3)

    def test_other_valid_config(self):
        c = CodecConfig(n_s=21, n_g=4)
        assert (c.k, c.f, c.dim) == (5, 3, 4 * 9 * 3)


class TestOracle:
    def test_naive_dft_matches_numpy(self):
        x = np.random.default_rng(0).normal(size=K)
        assert np.allclose(naive_dft(list(x)), np.fft.rfft(x), atol=1e-12)

    def test_encode_matches_naive_oracle(self):
        s = random_strands(20, seed=1)
        _, grads = to_gradients(s)
        fast = codec.encode(grads)
        for i in range(len(s)):
            slow = naive_encode(grads[i])
            assert np.allclose(fast[i], slow, atol=1e-9)

    def test_decode_matches_naive_oracle(self):
        s = curly_strands(10, seed=2)
        root, grads = to_gradients(s)
        code = codec.encode(grads)
        for i in range(len(s)):
            assert np.allclose(codec.decode(code[i], root[i]), naive_decode(code[i], root[i]), atol=1e-9)


class TestEncode:
    def test_pure_dc_segment(self):
        grads = np.tile([0.5, -1.0, 2.0], (99, 1))
        p = code_parts(codec.encode(grads))
        assert np.allclose(p[:, :, AMP, 0], K * np.abs([0.5, -1.0, 2.0]))
        assert np.allclose(p[:, :, AMP, 1:], 0.0, atol=1e-12)

    def test_pure_sinusoid_band(self):
        t = np.arange(K)
        grads = np.zeros((99, 3))
        grads[:, 0] = np.tile(np.cos(2 * np.pi * 3 * t / K), 3)
        p = code_parts(codec.encode(grads))
        amp = p[:, 0, AMP]
        assert np.allclose(amp[:, 3], K / 2)
        others = np.delete(amp, 3, axis=-1)
        assert np.allclose(others, 0.0, atol=1e-10)

    def test_complex_value_modulus(self):
        # F = 3 + 4i at band 0 of a one-sample segment is just the sample; build
        # it through the spectrum helper instead.
        code = np.zeros(CFG.dim)
        p = code_parts(code).copy()
        p[..., COS, :] = 1.0
        p[0, 0, AMP, 2] = 5.0
        p[0, 0, COS, 2], p[0, 0, SIN, 2] = 0.6, 0.8
        spec = codec.spectrum(codec.join(p))
        assert spec[0, 0, 2] == pytest.approx(3 + 4j)
        # and the encoder recovers the triple from gradients with that spectrum
        g = codec.decode_gradients(codec.join(p))
        back = code_parts(codec.encode(g))
        assert back[0, 0, AMP, 2] == pytest.approx(5.0)
        assert (back[0, 0, COS, 2], back[0, 0, SIN, 2]) == pytest.approx((0.6, 0.8))

    def test_zero_amplitude_phase_convention(self):
        p = code_parts(codec.encode(np.zeros((99, 3))))
        assert np.all(p[..., AMP, :] == 0)
        assert np.all(p[..., COS, :] == 1) and np.all(p[..., SIN, :] == 0)

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            codec.encode(np.zeros((98, 3)))
        with pytest.raises(DimensionError):
            codec.decode(np.zeros(458), np.zeros(3))


class TestDecode:
    def test_dc_only_straight_strand(self):
        p = code_parts(np.zeros(CFG.dim)).copy()
        p[..., COS, :] = 1.0
        p[..., AMP, 0] = K
        pts = codec.decode(codec.join(p), np.zeros(3))
        assert np.allclose(np.diff(pts, axis=0), 1.0)

    def test_zero_amplitudes(self):
        p = code_parts(np.zeros(CFG.dim)).copy()
        p[..., COS, :] = 1.0
        root = np.array([1.0, 2.0, 3.0])
        assert np.allclose(codec.decode(codec.join(p), root), root)

    def test_non_unit_phase_renormalized(self):
        s = curly_strands(1, seed=4)[0]
        root, g = to_gradients(s)
        code = codec.encode(g)
        p = code_parts(code).copy()
        p[..., COS, :] *= 3.0
        p[..., SIN, :] *= 3.0
        assert np.allclose(codec.decode(codec.join(p), root), codec.decode(code, root), atol=1e-10)
        p[..., COS, 5] = 0.0
        p[..., SIN, 5] = 0.0
        assert np.all(np.isfinite(codec.decode(codec.join(p), root)))

    def test_curly_round_trip(self):
        s = curly_strands(100, seed=5)
        root, g = to_gradients(s)
        err = np.abs(codec.decode(codec.encode(g), root) - s).max()
        assert err < 1e-6

    def test_round_trip_1000_random_fast(self):
        s = random_strands(1000, seed=6)
        root, g = to_gradients(s)
        t0 = time.perf_counter()
        out = codec.decode(codec.encode(g), root)
        assert time.perf_counter() - t0 < 1.0
        assert np.linalg.norm(out - s, axis=-1).max() < 1e-6

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (99, 3), elements=st.floats(-20, 20)))
    def test_round_trip_property(self, grads):
        out = codec.decode_gradients(codec.encode(grads))
        assert np.allclose(out, grads, atol=1e-9)


class TestTruncate:
    def test_full_band_identity(self):
        code = codec.encode(to_gradients(curly_strands(3))[1])
        assert np.array_equal(codec.truncate_low_freq(code, F), code)

    def test_dc_only_piecewise_straight(self):
        root, g = to_gradients(curly_strands(1, seed=7)[0])
        out = codec.truncate_low_freq(codec.encode(g), 1)
        grads = codec.decode_gradients(out)
        for s in range(3):
            seg = grads[s * K:(s + 1) * K]
            assert np.allclose(seg, seg[0], atol=1e-10)

    def test_high_bands_zeroed(self):
        s = curly_strands(5, seed=8)
        root, g = to_gradients(s)
        trunc = codec.truncate_low_freq(codec.encode(g), 8)
        dec = codec.decode(trunc, root)
        re = codec.encode(to_gradients(dec)[1])
        assert np.all(codec.high_band_energy(trunc, 8) == 0.0)
        assert np.all(codec.high_band_energy(re, 8) < 1e-18)

    def test_idempotent(self):
        code = codec.encode(to_gradients(curly_strands(3))[1])
        once = codec.truncate_low_freq(code, 6)
        assert np.array_equal(codec.truncate_low_freq(once, 6), once)

    @pytest.mark.parametrize("f_l", [0, 18])
    def test_range(self, f_l):
        with pytest.raises(ParameterError):
            codec.truncate_low_freq(np.zeros(CFG.dim), f_l)


class TestInterpFrequency:
    def setup_method(self):
        s = curly_strands(2, seed=9)
        self.a, self.b = codec.encode(to_gradients(s)[1])

    def test_endpoints(self):
        assert np.array_equal(codec.interp_frequency(self.a, self.b, 0.0), self.a)
        assert np.array_equal(codec.interp_frequency(self.a, self.b, 1.0), self.b)

    @pytest.mark.parametrize("t", [0.1, 0.37, 0.5, 0.9])
    def test_amplitude_linear(self, t):
        out = code_parts(codec.interp_frequency(self.a, self.b, t))
        pa, pb = code_parts(self.a), code_parts(self.b)
        assert np.allclose(out[..., AMP, :], (1 - t) * pa[..., AMP, :] + t * pb[..., AMP, :],
                           atol=1e-12, rtol=0)
        assert np.allclose(np.hypot(out[..., COS, :], out[..., SIN, :]), 1.0, atol=1e-9)

    def test_opposite_phases_keep_amplitude(self):
        pa = code_parts(self.a)
        pb = pa.copy()
        pb[..., COS, :] *= -1
        pb[..., SIN, :] *= -1
        out = code_parts(codec.interp_frequency(self.a, codec.join(pb), 0.5))
        assert np.array_equal(out[..., AMP, :], pa[..., AMP, :])
        assert np.all(out[..., COS, :] == 1.0) and np.all(out[..., SIN, :] == 0.0)


class TestPerturb:
    def setup_method(self):
        self.code = codec.encode(to_gradients(curly_strands(4, seed=10))[1])

    def test_zero_sigma_identity(self):
        assert np.array_equal(codec.perturb(self.code, 0, 0, seed=1), self.code)

    def test_dc_untouched(self):
        out = code_parts(codec.perturb(self.code, 0.3, 0.5, seed=2))
        assert np.array_equal(out[..., 0], code_parts(self.code)[..., 0])
        assert not np.array_equal(out, code_parts(self.code))
        assert codec.check_code(codec.join(out)) == 0

    def test_deterministic(self):
        a = codec.perturb(self.code, 0.1, 0.1, seed=3)
        b = codec.perturb(self.code, 0.1, 0.1, seed=3)
        assert np.array_equal(a, b)

    def test_negative_sigma(self):
        with pytest.raises(ParameterError):
            codec.perturb(self.code, -0.1, 0, seed=0)


class TestPhaseWeightedDistance:
    def test_identity(self):
        code = codec.encode(to_gradients(curly_strands(1))[1])[0]
        assert codec.phase_weighted_distance(code, code) == (0.0, 0.0)

    def test_zero_amplitude_band_ignored(self):
        code = codec.encode(np.tile([1.0, 0.0, 0.0], (99, 1)))
        p = code_parts(code).copy()
        assert p[0, 0, AMP, 4] == pytest.approx(0.0, abs=1e-12)
        p[0, 0, AMP, 4] = 0.0
        q = p.copy()
        q[0, 0, COS, 4], q[0, 0, SIN, 4] = -1.0, 0.0
        _, ph = codec.phase_weighted_distance(codec.join(q), codec.join(p))
        assert ph == 0.0

    def test_hand_case(self):
        cfg = CodecConfig(n_s=34, n_g=1)
        truth = codec.split(np.zeros(cfg.dim), cfg).copy()
        truth[..., COS, :] = 1.0
        truth[0, 0, AMP, :2] = (1.0, 3.0)
        est = truth.copy()
        est[0, 0, COS, 0], est[0, 0, SIN, 0] = 0.0, 1.0
        est[0, 0, COS, 1], est[0, 0, SIN, 1] = 0.5, np.sqrt(3) / 2
        est[0, 0, AMP, 1] = 2.0
        amp, ph = codec.phase_weighted_distance(codec.join(est, cfg), codec.join(truth, cfg), cfg)
        assert amp == pytest.approx(1.0)
        assert ph == pytest.approx(0.25 * 2.0 + 0.75 * (np.sqrt(3) / 2 + 0.5))
