import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimo_ofdma.channel_model import (ChannelTaps, ConfigurationError, build_H,
                                      dft_selector, freq_channel, freq_channels,
                                      generate_taps, make_pdp)

from conftest import kron_selector, random_channel


class TestPdp:
    def test_single_tap(self):
        pdp = make_pdp(1)
        assert pdp.tap_powers.tolist() == [1.0]
        assert pdp.normalizer == 1.0

    @pytest.mark.parametrize("L", [2, 8])
    def test_normalizer_matches_geometric_sum(self, L):
        expected = (1 - math.exp(-1)) / (1 - math.exp(-L))
        pdp = make_pdp(L)
        assert pdp.normalizer == pytest.approx(expected, abs=1e-12)
        np.testing.assert_allclose(
            pdp.tap_powers, [expected * math.exp(-l) for l in range(L)], atol=1e-15)

    def test_frozen_values(self):
        assert make_pdp(8).normalizer == pytest.approx(0.6323326828120425, abs=1e-12)
        assert make_pdp(2).normalizer == pytest.approx(0.7310585786300049, abs=1e-12)
        # rounded value quoted for L=8
        assert make_pdp(8).normalizer == pytest.approx(0.632334, abs=2e-6)

    @given(st.integers(1, 64))
    def test_sums_to_one(self, L):
        assert abs(make_pdp(L).tap_powers.sum() - 1.0) <= 1e-12

    def test_rejects_zero(self):
        with pytest.raises(ConfigurationError):
            make_pdp(0)


class TestTaps:
    def test_deterministic(self):
        pdp = make_pdp(8)
        a = generate_taps(pdp, 2, 2, np.random.default_rng(5))
        b = generate_taps(pdp, 2, 2, np.random.default_rng(5))
        assert a.taps.tobytes() == b.taps.tobytes()

    def test_shape(self, rng):
        t = generate_taps(make_pdp(8), 2, 3, rng)
        assert t.taps.shape == (2, 3, 8)
        assert (t.num_tx, t.num_rx, t.length) == (2, 3, 8)

    def test_rejects_more_tx_than_rx(self, rng):
        with pytest.raises(ConfigurationError):
            generate_taps(make_pdp(8), 3, 2, rng)

    def test_energy_statistics(self):
        pdp = make_pdp(8)
        # 10^5 independent receive antennas = 10^5 independent tap vectors
        h = generate_taps(pdp, 1, 100_000, np.random.default_rng(77)).taps[0]
        energy = np.sum(np.abs(h) ** 2, axis=1)
        assert abs(energy.mean() - 1.0) <= 0.01
        assert abs(np.var(h[:, 0]) / 0.6323326828120425 - 1) <= 0.02

    def test_energy_per_antenna_pair(self):
        pdp = make_pdp(8)
        rng = np.random.default_rng(3)
        n = 100_000
        taps = np.stack([generate_taps(pdp, 2, 2, rng).taps for _ in range(n)])
        mean = np.sum(np.abs(taps) ** 2, axis=3).mean(axis=0)
        assert np.all((mean >= 0.99) & (mean <= 1.01))


class TestDftSelector:
    def test_zero_column(self):
        np.testing.assert_array_equal(dft_selector(0, 16, 3), [1, 1, 1])

    def test_quarter_turn(self):
        np.testing.assert_allclose(dft_selector(1, 4, 2), [1, -1j], atol=1e-15)

    def test_half_turn(self):
        np.testing.assert_allclose(dft_selector(2, 4, 2), [1, -1], atol=1e-15)

    @given(st.integers(1, 256).flatmap(
        lambda Q: st.tuples(st.just(Q), st.integers(0, Q - 1), st.integers(1, Q))))
    def test_norm(self, args):
        Q, q, L = args
        assert abs(np.linalg.norm(dft_selector(q, Q, L)) ** 2 - L) <= 1e-12 * L

    @pytest.mark.parametrize("q,Q,L", [(-1, 8, 2), (8, 8, 2), (0, 8, 9)])
    def test_rejects(self, q, Q, L):
        with pytest.raises((IndexError, ConfigurationError)):
            dft_selector(q, Q, L)


class TestBuildH:
    def test_scalar(self):
        c = 0.3 - 0.4j
        H = build_H(ChannelTaps(np.array([[[c]]])))
        assert H.H.shape == (1, 1) and H.H[0, 0] == c

    def test_layout(self):
        h = np.array([[[1 + 1j, 2], [3, 4j]]])  # M=1, N=2, L=2
        H = build_H(ChannelTaps(h)).H
        np.testing.assert_array_equal(H[:, 0], [1 + 1j, 2, 3, 4j])

    def test_block_placement(self, rng):
        taps = generate_taps(make_pdp(3), 2, 3, rng)
        H = build_H(taps).H
        assert H.shape == (9, 2)
        for m in range(2):
            for n in range(3):
                np.testing.assert_array_equal(H[3 * n:3 * n + 3, m], taps.taps[m, n])


class TestFreqChannel:
    def test_matches_per_entry_dft(self, rng):
        taps = generate_taps(make_pdp(8), 2, 2, rng)
        H = build_H(taps)
        Q = 32
        for q in range(Q):
            G = freq_channel(H, q, Q).G
            for n in range(2):
                for m in range(2):
                    direct = sum(taps.taps[m, n, l] * np.exp(-2j * np.pi * l * q / Q)
                                 for l in range(8))
                    assert abs(G[n, m] - direct) <= 1e-12

    def test_flat_channel_constant(self, rng):
        H = random_channel(rng, L=1)
        G = freq_channels(H, 16)
        assert np.array_equal(G, np.broadcast_to(G[0], G.shape))
        np.testing.assert_array_equal(G[0], H.H)

    def test_dc_is_tap_sum(self, rng):
        taps = generate_taps(make_pdp(4), 1, 2, rng)
        G = freq_channel(build_H(taps), 0, 8).G
        np.testing.assert_allclose(G[:, 0], taps.taps[0].sum(axis=1), atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31), st.sampled_from([(1, 1, 1), (2, 2, 8), (1, 3, 4), (2, 4, 5)]),
           st.sampled_from([8, 16, 128]))
    def test_matches_explicit_kronecker(self, seed, dims, Q):
        M, N, L = dims
        H = random_channel(np.random.default_rng(seed), M, N, L)
        G = freq_channels(H, Q)
        scale = np.linalg.norm(H.H)
        for q in range(Q):
            ref = kron_selector(q, Q, N, L) @ H.H
            assert np.linalg.norm(G[q] - ref) <= 1e-12 * scale
            assert np.linalg.norm(freq_channel(H, q, Q).G - ref) <= 1e-12 * scale

    def test_index_out_of_range(self, rng):
        with pytest.raises(IndexError):
            freq_channel(random_channel(rng), 16, 16)
