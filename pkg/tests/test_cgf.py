import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ldpdetect import (
    ContractError,
    DetectorModel,
    DomainError,
    NoiseModel,
    ResourceLimitError,
    Spectrum,
    cgf_banded,
    cgf_optimal,
    cgf_simple_quadratic,
    detector_cgf,
    finite_cgf,
    g_m,
)

SPECTRA = [Spectrum.gauss_markov(0.5), Spectrum.gauss_markov(0.9), Spectrum.triangular(4)]


def simple_b0(noise):
    return noise.theta2 / (noise.sigma2 * (noise.sigma2 + noise.theta2))


def all_pairs(noise, spectrum):
    return {
        "simple": cgf_simple_quadratic(noise, spectrum),
        "optimal": cgf_optimal(noise, spectrum),
        "banded": cgf_banded(noise, spectrum, [0.8, 0.1]),
    }


class TestSymbol:
    def test_examples(self):
        assert g_m([1.0], 2.3) == 1.0
        assert g_m([1.0, 0.25], 0.0) == pytest.approx(1.5)
        assert g_m([1.0, 0.25], math.pi) == pytest.approx(0.5)

    def test_vectorized(self):
        w = np.linspace(0, math.pi, 5)
        np.testing.assert_allclose(g_m([1.0, 0.2, -0.1], w), 1 + 0.4 * np.cos(w) - 0.2 * np.cos(2 * w))

    def test_nonpositive_symbol_rejected(self, noise10, gm05):
        with pytest.raises(ContractError):
            cgf_banded(noise10, gm05, [1.0, 0.6])


class TestClosedForms:
    def test_simple_h0(self, noise10, gm05):
        pair = cgf_simple_quadratic(noise10, gm05)
        r = 10 / 11
        for t in (-2.0, -0.3, 0.4, 1.05):
            expected = 0.5 * t * math.log(1 / 11) - 0.5 * math.log(1 - t * r)
            np.testing.assert_allclose(pair.lambda0(t), expected, rtol=1e-13)

    def test_simple_white_h1(self, noise10):
        pair = cgf_simple_quadratic(noise10, Spectrum.white())
        for t in (-1.0, 0.05, 0.09):
            expected = 0.5 * t * math.log(1 / 11) - 0.5 * math.log(1 - 10 * t)
            np.testing.assert_allclose(pair.lambda1(t), expected, rtol=1e-12, atol=1e-14)

    def test_domain_bounds(self, noise10, gm05):
        s = cgf_simple_quadratic(noise10, gm05)
        np.testing.assert_allclose(s.t0_sup, 1.1)
        np.testing.assert_allclose(s.t1_sup, 11 / (10 * 31))
        o = cgf_optimal(noise10, gm05)
        np.testing.assert_allclose(o.t0_sup, 31 / 30)
        np.testing.assert_allclose(o.t1_sup, 1 / 30)
        b = cgf_banded(noise10, gm05, [0.8, 0.1])
        np.testing.assert_allclose(b.t0_sup, 1 / 1.0)
        np.testing.assert_allclose(b.t1_sup, 1 / (31 * 1.0), rtol=1e-6)

    def test_infinity_signal_at_boundary(self, noise10, gm05):
        for pair in all_pairs(noise10, gm05).values():
            for lam in (pair.lambda0, pair.lambda1):
                assert lam(lam.t_sup) == math.inf
                assert lam(lam.t_sup * (1 + 1e-12)) == math.inf
                assert lam(lam.t_sup + 5.0) == math.inf
                assert math.isfinite(lam(lam.t_sup * (1 - 1e-6)))

    def test_white_optimal_equals_simple(self, noise10):
        w = Spectrum.white()
        o, s = cgf_optimal(noise10, w), cgf_simple_quadratic(noise10, w)
        for t in np.linspace(-3, 0.09, 23):
            np.testing.assert_allclose(o.lambda0(t), s.lambda0(t), rtol=1e-12, atol=1e-15)
            np.testing.assert_allclose(o.lambda1(t), s.lambda1(t), rtol=1e-12, atol=1e-15)

    def test_banded_m0_white_equals_simple(self, noise10):
        w = Spectrum.white()
        b = cgf_banded(noise10, w, [simple_b0(noise10)])
        s = cgf_simple_quadratic(noise10, w)
        for t in np.linspace(-3, 0.09, 23):
            np.testing.assert_allclose(b.lambda0(t), s.lambda0(t), rtol=1e-12, atol=1e-15)
            np.testing.assert_allclose(b.lambda1(t), s.lambda1(t), rtol=1e-12, atol=1e-15)

    def test_banded_m0_colored_differs_by_offset(self, noise10, gm05):
        # same quadratic form; only the deterministic offset differs
        b = cgf_banded(noise10, gm05, [simple_b0(noise10)])
        s = cgf_simple_quadratic(noise10, gm05)
        shift = b.lambda0.offset - s.lambda0.offset
        assert shift > 0
        for t in (-1.0, 0.02):
            for j in (0, 1):
                np.testing.assert_allclose(b[j](t) - s[j](t), t * shift, rtol=1e-10)

    @pytest.mark.parametrize("a", [0.5, 0.9])
    def test_banded_truncated_optimal_symbol_converges(self, noise10, a):
        spectrum = Spectrum.gauss_markov(a)
        o = cgf_optimal(noise10, spectrum)
        w = np.linspace(0, 2 * math.pi, 4096, endpoint=False)
        f = spectrum.eval(w)
        q = 10 * f / (1 + 10 * f)
        coeffs = np.fft.rfft(q).real / q.size
        t0, t1 = 0.5 * o.t0_sup, 0.5 * o.lambda1.t_sup * -20
        errors = []
        for m in (1, 2, 4, 8, 16):
            bp = cgf_banded(noise10, spectrum, coeffs[: m + 1])
            errors.append(abs(bp.lambda0(t0) - o.lambda0(t0)) + abs(bp.lambda1(t1) - o.lambda1(t1)))
        assert errors[-1] < 1e-6
        assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errors, errors[1:]))


class TestInvariants:
    @pytest.mark.parametrize("spectrum", SPECTRA, ids=lambda s: s.label())
    def test_zero_at_origin(self, noise10, spectrum):
        for pair in all_pairs(noise10, spectrum).values():
            assert abs(pair.lambda0(0.0)) <= 1e-12
            assert abs(pair.lambda1(0.0)) <= 1e-12

    @pytest.mark.parametrize("spectrum", SPECTRA, ids=lambda s: s.label())
    def test_means_ordered(self, spectrum):
        for snr_db in (-10, 0, 10, 30):
            noise = NoiseModel.from_snr_db(snr_db)
            for pair in all_pairs(noise, spectrum).values():
                assert pair.lambda0.mean < pair.lambda1.mean

    @pytest.mark.parametrize("spectrum", SPECTRA, ids=lambda s: s.label())
    def test_convexity_random_triples(self, noise10, spectrum):
        rng = np.random.default_rng(7)
        for name, pair in all_pairs(noise10, spectrum).items():
            for lam in (pair.lambda0, pair.lambda1):
                lo = -20 * lam.t_sup
                t = np.sort(rng.uniform(lo, lam.t_sup * (1 - 1e-6), size=(1000, 3)), axis=1)
                for t1, t2, t3 in t:
                    if not t1 < t2 < t3:
                        continue
                    weight = (t3 - t2) / (t3 - t1)
                    chord = weight * lam(t1) + (1 - weight) * lam(t3)
                    assert lam(t2) <= chord + 1e-10, (name, t1, t2, t3)

    def test_detector_dispatch(self, noise10, gm05):
        d = DetectorModel.banded(noise10, gm05, [0.8, 0.1])
        assert d.m == 1
        np.testing.assert_allclose(detector_cgf(d).lambda1(0.01), cgf_banded(noise10, gm05, [0.8, 0.1]).lambda1(0.01))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.0, 0.95), snr_db=st.floats(-10, 30), u=st.floats(-5.0, 0.999))
def test_simple_cgf_finite_and_convex_property(a, snr_db, u):
    pair = cgf_simple_quadratic(NoiseModel.from_snr_db(snr_db), Spectrum.gauss_markov(a))
    for lam in (pair.lambda0, pair.lambda1):
        t = u * lam.t_sup
        if t >= lam.t_sup * (1 - 1e-8):
            continue
        assert math.isfinite(lam(t))
        h = 1e-3 * lam.t_sup
        if t + h < lam.t_sup * (1 - 1e-6):
            assert lam(t) <= 0.5 * (lam(t - h) + lam(t + h)) + 1e-10


class TestFiniteCgf:
    def test_n1_zero_t(self, noise10, gm05):
        d = DetectorModel.simple_quadratic(noise10, gm05)
        assert finite_cgf(d, 1, 0.0, 0) == 0.0
        assert finite_cgf(d, 1, 0.0, 1) == 0.0

    def test_n1_offset_term(self, noise10):
        # the t-proportional part at n=1 is exactly the deterministic offset
        d = DetectorModel.simple_quadratic(noise10, Spectrum.white())
        t = 0.01
        expected = t * 0.5 * math.log(1 / 11) - 0.5 * math.log(1 - t * 10 / 11)
        np.testing.assert_allclose(finite_cgf(d, 1, t, 0), expected, rtol=1e-13)

    @pytest.mark.parametrize("family", ["simple_quadratic", "optimal", "banded"])
    def test_white_equals_limit(self, noise10, family):
        w = Spectrum.white()
        b = [simple_b0(noise10) * 0.9] if family == "banded" else ()
        d = DetectorModel.banded(noise10, w, b) if family == "banded" else DetectorModel(family, noise10, w)
        pair = detector_cgf(d)
        for n in (1, 7, 32):
            for j in (0, 1):
                for t in (-1.0, 0.3 * pair[j].t_sup):
                    np.testing.assert_allclose(finite_cgf(d, n, t, j), pair[j](t), rtol=1e-10, atol=1e-14)

    def test_outside_domain_is_infinite(self, noise10, gm05):
        d = DetectorModel.optimal(noise10, gm05)
        assert finite_cgf(d, 16, 10.0, 1) == math.inf

    def test_cap(self, noise10, gm05):
        d = DetectorModel.optimal(noise10, gm05)
        with pytest.raises(ResourceLimitError):
            finite_cgf(d, 9000, 0.01, 1)
        with pytest.raises(DomainError):
            finite_cgf(d, 8, 0.01, 2)

    def test_simple_h1_n4096(self, noise10, gm05):
        d = DetectorModel.simple_quadratic(noise10, gm05)
        lam = cgf_simple_quadratic(noise10, gm05).lambda1
        # t = 0.05 lies beyond t1_sup = 11/310, so both sides signal infinity
        assert lam.t_sup < 0.05
        assert lam(0.05) == math.inf
        assert finite_cgf(d, 4096, 0.05, 1) == math.inf
        for t in (0.03, -0.5):
            assert abs(finite_cgf(d, 4096, t, 1) - lam(t)) < 1e-3

    def test_optimal_h1_n4096(self, noise10, gm05):
        d = DetectorModel.optimal(noise10, gm05)
        limit = cgf_optimal(noise10, gm05).lambda1(0.03)
        assert abs(finite_cgf(d, 4096, 0.03, 1) - limit) < 1e-3

    def test_error_shrinks_with_n(self, noise10, gm05):
        d = DetectorModel.optimal(noise10, gm05)
        lam = cgf_optimal(noise10, gm05).lambda1
        t = 0.3 * lam.t_sup
        errors = [abs(finite_cgf(d, n, t, 1) - lam(t)) for n in (64, 128, 256, 512)]
        assert all(e2 < e1 for e1, e2 in zip(errors, errors[1:]))
        # 1/n convergence: halving per doubling, within 20%
        ratios = np.array(errors[:-1]) / np.array(errors[1:])
        np.testing.assert_allclose(ratios, 2.0, rtol=0.2)



class TestFiniteOracleShortcut:
    def test_optimal_matches_dense_product(self, noise10, gm05):
        from ldpdetect.finite_sim import quadratic_matrix, statistic_offset, toeplitz_covariances

        d = DetectorModel.optimal(noise10, gm05)
        n = 48
        W = quadratic_matrix(d, n)
        for j, sigma in enumerate(toeplitz_covariances(gm05, noise10, n)):
            dense = np.linalg.eigvals(W @ sigma).real
            t = 0.2 * detector_cgf(d)[j].t_sup
            expected = t * statistic_offset(d, n) - 0.5 * np.mean(np.log(1 - t * dense))
            np.testing.assert_allclose(finite_cgf(d, n, t, j), expected, rtol=1e-10)
