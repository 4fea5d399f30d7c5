import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noisygt.channel import (
    NoiseChannel,
    d_shannon,
    entropy,
    kl_div,
    marginal_output_rates,
    mutual_info_rate,
    parse_channel,
    phi,
    shannon_constant,
    transmit,
    transmit_vec,
)

LOG2 = math.log(2.0)

# frozen from a 50-digit mpmath evaluation
H_01 = 0.32508297339144823951
PHI_Z09 = -0.36120330376827582167
CSH_BSC01 = 2.7169172674869941951
CSH_BSC001 = 1.569499856047197672
I_BSC01_LOG2 = 0.36806420716849706991
DSH_Z09 = 0.60935420373333513661


def mp_entropy(z):
    from mpmath import mp, mpf, log

    mp.dps = 50
    z = mpf(z)
    if z in (0, 1):
        return mpf(0)
    return -z * log(z) - (1 - z) * log(1 - z)


def mp_kl(y, z):
    from mpmath import mp, mpf, log

    mp.dps = 50
    y, z = mpf(y), mpf(z)
    t = mpf(0)
    if y > 0:
        t += y * log(y / z)
    if y < 1:
        t += (1 - y) * log((1 - y) / (1 - z))
    return t


class TestEntropy:
    def test_conventions(self):
        assert entropy(0.0) == 0.0
        assert entropy(1.0) == 0.0
        assert entropy(0.5) == pytest.approx(LOG2, abs=1e-15)

    def test_against_high_precision(self):
        assert entropy(0.1) == pytest.approx(H_01, abs=1e-15)
        for z in np.linspace(0.0, 1.0, 100):
            assert entropy(float(z)) == pytest.approx(float(mp_entropy(z)), abs=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            entropy(-0.1)
        with pytest.raises(ValueError):
            entropy(1.1)


class TestKl:
    def test_identity_and_edges(self):
        for p in (0.0, 0.3, 0.5, 1.0):
            assert kl_div(p, p) == 0.0
        assert kl_div(0.0, 0.5) == pytest.approx(LOG2, abs=1e-15)
        assert kl_div(0.3, 0.0) == math.inf
        assert kl_div(0.7, 1.0) == math.inf
        assert kl_div(0.0, 0.0) == 0.0
        assert kl_div(1.0, 1.0) == 0.0

    def test_against_high_precision(self):
        for y in np.linspace(0.0, 1.0, 10):
            for z in np.linspace(0.05, 0.95, 10):
                assert kl_div(float(y), float(z)) == pytest.approx(
                    float(mp_kl(y, z)), abs=1e-12
                )

    def test_nonnegative_grid(self):
        grid = np.round(np.arange(0.0, 1.0001, 0.01), 10)
        for y in grid:
            for z in grid:
                v = kl_div(float(y), float(z))
                assert v >= 0.0
                if y == z:
                    assert v == 0.0
                elif math.isfinite(v):
                    assert v > 0.0

    def test_domain(self):
        with pytest.raises(ValueError):
            kl_div(1.2, 0.5)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_never_nan(self, y, z):
        assert not math.isnan(kl_div(y, z))


class TestChannelConstruction:
    def test_row_normalization(self):
        ch = NoiseChannel(0.95, 0.05 + 1e-13, 0.1, 0.9)
        assert ch.p01 == 1.0 - ch.p00
        assert ch.p10 == 1.0 - ch.p11

    def test_rejects_bad_rows(self):
        with pytest.raises(ValueError):
            NoiseChannel(0.9, 0.2, 0.1, 0.9)

    def test_rejects_uninformative(self):
        with pytest.raises(ValueError):
            NoiseChannel(0.4, 0.6, 0.5, 0.5)  # p11 <= p01

    def test_parse_forms(self):
        assert parse_channel("bsc:0.1") == NoiseChannel(0.9, 0.1, 0.1, 0.9)
        assert parse_channel("z:0.9") == NoiseChannel(1.0, 0.0, 0.1, 0.9)
        assert parse_channel("0.95,0.05,0.1,0.9") == NoiseChannel(0.95, 0.05, 0.1, 0.9)
        assert parse_channel("noiseless").is_noiseless
        with pytest.raises(ValueError):
            parse_channel("0.9,0.1")


class TestPhi:
    def test_symmetric_is_zero(self):
        assert phi(NoiseChannel.bsc(0.2)) == pytest.approx(0.0, abs=1e-15)
        assert phi(NoiseChannel.noiseless()) == 0.0

    def test_z_channel(self):
        assert phi(NoiseChannel.z_channel(0.9)) == pytest.approx(PHI_Z09, abs=1e-14)


class TestShannonConstant:
    def test_noiseless(self):
        assert shannon_constant(NoiseChannel.noiseless()) == pytest.approx(
            1.0 / LOG2, abs=1e-12
        )

    def test_bsc_reduction(self):
        assert shannon_constant(NoiseChannel.bsc(0.1)) == pytest.approx(
            CSH_BSC01, abs=1e-12
        )
        assert shannon_constant(NoiseChannel.bsc(0.01)) == pytest.approx(
            CSH_BSC001, abs=1e-12
        )


class TestDShannon:
    def test_noiseless_and_bsc(self):
        assert d_shannon(NoiseChannel.noiseless()) == pytest.approx(LOG2, abs=1e-12)
        for p in (0.01, 0.1, 0.3):
            assert d_shannon(NoiseChannel.bsc(p)) == pytest.approx(LOG2, abs=1e-12)

    def test_z_channel_negtest_fraction(self):
        ch = NoiseChannel.z_channel(0.9)
        assert d_shannon(ch) == pytest.approx(DSH_Z09, abs=1e-13)
        # perfect-specificity channels keep more than half the tests negative
        for p11 in np.arange(0.1, 0.95, 0.1):
            assert math.exp(-d_shannon(NoiseChannel.z_channel(p11))) > 0.5


class TestRatesAndIdentity:
    def test_marginal_output_rates(self):
        assert marginal_output_rates(NoiseChannel.noiseless(), LOG2) == pytest.approx(
            (0.5, 0.5), abs=1e-12
        )
        q0m, q0p = marginal_output_rates(NoiseChannel(0.95, 0.05, 0.1, 0.9), 1e-12)
        assert (q0m, q0p) == pytest.approx((0.95, 0.05), abs=1e-9)
        assert marginal_output_rates(NoiseChannel.bsc(0.1), LOG2) == pytest.approx(
            (0.5, 0.5), abs=1e-12
        )

    def test_mutual_info_examples(self):
        assert mutual_info_rate(NoiseChannel.noiseless(), LOG2) == pytest.approx(
            LOG2, abs=1e-12
        )
        assert mutual_info_rate(NoiseChannel.bsc(0.1), LOG2) == pytest.approx(
            I_BSC01_LOG2, abs=1e-12
        )
        assert mutual_info_rate(NoiseChannel.bsc(0.3), 1e-9) == pytest.approx(
            0.0, abs=1e-7
        )

    def test_capacity_identity_random_channels(self):
        rng = np.random.default_rng(123)
        for _ in range(20):
            p00 = rng.uniform(0.55, 0.999)
            p11 = rng.uniform(0.55, 0.999)
            ch = NoiseChannel(p00, 1 - p00, 1 - p11, p11)
            dsh = d_shannon(ch)
            assert shannon_constant(ch) * mutual_info_rate(ch, dsh) == pytest.approx(
                1.0, abs=1e-9
            )

    def test_info_maximized_at_d_shannon(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            p00 = rng.uniform(0.6, 0.99)
            p11 = rng.uniform(0.6, 0.99)
            ch = NoiseChannel(p00, 1 - p00, 1 - p11, p11)
            dsh = d_shannon(ch)
            best = mutual_info_rate(ch, dsh)
            for d in np.linspace(0.05, 5.0, 1000):
                assert mutual_info_rate(ch, float(d)) <= best + 1e-9


class TestTransmit:
    def test_deterministic_cases(self):
        nl = NoiseChannel.noiseless()
        for r in (0.0, 0.5, 0.999):
            assert transmit(nl, 1, r) == 1
            assert transmit(nl, 0, r) == 0
        z = NoiseChannel.z_channel(0.9)
        for r in (0.0, 0.5, 0.999):
            assert transmit(z, 0, r) == 0

    def test_monte_carlo_mean(self):
        ch = NoiseChannel(0.95, 0.05, 0.1, 0.9)
        rng = np.random.default_rng(99)
        shown = transmit_vec(ch, np.ones(10**6, dtype=np.uint8), rng)
        assert shown.mean() == pytest.approx(0.9, abs=1e-3)
