import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimo_ofdma import codebook as cb

from conftest import random_unitary

seeds = st.integers(0, 2 ** 32 - 1)


def naive_score(V, Vd):
    """Element-by-element evaluation of the selection criterion."""
    M = V.shape[0]
    P = np.conj(V).T @ Vd
    g = [[abs(P[i, j]) ** 2 for j in range(M)] for i in range(M)]
    total = 0.0
    for m in range(M):
        off = sum(g[m][j] for j in range(M) if j != m)
        total += g[m][m] / max(off, 1e-12)
    return total


def brute_select(V, book):
    best, best_val = None, None
    for d in range(len(book)):
        s = cb.alignment_score(V, book.entries[d]).score
        if best is None or s > best_val:
            best, best_val = d, s
    return best


class TestGenerate:
    def test_zero_bits(self):
        assert len(cb.generate_codebook(0, 2, 1)) == 1

    def test_unitary_entries(self):
        book = cb.generate_codebook(3, 2, 11)
        assert len(book) == 8
        for E in book.entries:
            assert np.linalg.norm(np.conj(E).T @ E - np.eye(2)) <= 1e-10

    def test_deterministic(self):
        a, b = cb.generate_codebook(5, 3, 9), cb.generate_codebook(5, 3, 9)
        assert a.entries.tobytes() == b.entries.tobytes()

    def test_nested_prefix(self):
        small, big = cb.generate_codebook(3, 2, 4), cb.generate_codebook(6, 2, 4)
        assert small.entries.tobytes() == big.entries[:8].tobytes()
        assert big.prefix(3).entries.tobytes() == small.entries.tobytes()

    def test_cap(self):
        with pytest.raises(ValueError):
            cb.generate_codebook(21, 2, 0)
        with pytest.raises(ValueError):
            cb.generate_codebook(4, 2, 0, max_entries=8)

    def test_exact_mode(self):
        book = cb.generate_codebook(None, 2, 0)
        assert book.exact_mode and len(book) == 0

    def test_haar_first_moment(self):
        # |U_11|^2 is uniform on [0, 1] for Haar U(2)
        U = cb.haar_unitaries(20_000, 2, np.random.default_rng(0))
        x = np.abs(U[:, 0, 0]) ** 2
        assert abs(x.mean() - 0.5) < 0.01
        assert abs(np.mean(x ** 2) - 1 / 3) < 0.01


class TestAlignment:
    def test_exact_match_is_perfect(self, rng):
        V = random_unitary(rng, 3)
        a = cb.alignment_score(V, V)
        np.testing.assert_allclose(a.gamma, np.eye(3), atol=1e-12)
        assert a.score is cb.PERFECT

    def test_swap_is_worst(self):
        a = cb.alignment_score(np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_array_equal(np.diag(a.gamma), [0, 0])
        assert a.score == 0.0

    @given(seeds, st.integers(2, 4))
    def test_matches_naive(self, seed, M):
        rng = np.random.default_rng(seed)
        V, Vd = random_unitary(rng, M), random_unitary(rng, M)
        a = cb.alignment_score(V, Vd)
        assert a.score == pytest.approx(naive_score(V, Vd), rel=1e-12)
        assert np.all(np.abs(a.gamma.sum(axis=1) - 1) <= 1e-10)
        assert np.all((a.gamma >= 0) & (a.gamma <= 1 + 1e-12))

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            cb.alignment_score(np.eye(2), 2 * np.eye(2))

    def test_perfect_outranks_floats(self):
        assert cb.PERFECT > 1e300 and not cb.PERFECT < 5.0
        assert max([3.0, cb.PERFECT, 1e20]) is cb.PERFECT

    def test_batch_matches_scalar(self, rng):
        V = random_unitary(rng, 2)
        book = cb.generate_codebook(4, 2, 1)
        scores, perfect = cb.batch_scores(cb.batch_gamma(V, book.entries))
        for d in range(16):
            assert scores[d] == pytest.approx(cb.alignment_score(V, book.entries[d]).score, rel=1e-12)
        assert not perfect.any()


class TestSelect:
    def test_contains_target(self, rng):
        book = cb.generate_codebook(3, 2, 5)
        assert cb.select_bfm(book.entries[6], book) == 6

    def test_single_entry(self, rng):
        assert cb.select_bfm(random_unitary(rng, 2), cb.generate_codebook(0, 2, 5)) == 0

    @given(seeds)
    def test_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        book = cb.generate_codebook(4, 2, seed % 1000)
        V = random_unitary(rng, 2)
        assert cb.select_bfm(V, book) == brute_select(V, book)

    def test_exact_mode(self, rng):
        book = cb.Codebook.exact(2)
        V = random_unitary(rng, 2)
        assert cb.select_bfm(V, book) == cb.EXACT_INDEX
        assert book.matrix(cb.select_bfm(V, book), V) is V

    @settings(max_examples=25)
    @given(seeds)
    def test_nested_books_monotone(self, seed):
        rng = np.random.default_rng(seed)
        V = random_unitary(rng, 2)
        big = cb.generate_codebook(8, 2, 3)
        prev = -1.0
        for B in range(9):
            book = big.prefix(B)
            s = cb.alignment_score(V, book.entries[cb.select_bfm(V, book)]).score
            assert s >= prev
            prev = s

    @given(seeds)
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        book = cb.generate_codebook(4, 2, 8)
        perm = rng.permutation(16)
        shuffled = cb.Codebook(4, 2, 8, book.entries[perm])
        V = random_unitary(rng, 2)
        a = book.entries[cb.select_bfm(V, book)]
        b = shuffled.entries[cb.select_bfm(V, shuffled)]
        assert np.array_equal(a, b)

    def test_many(self, rng):
        book = cb.generate_codebook(5, 2, 2)
        V = np.stack([random_unitary(rng, 2) for _ in range(6)])
        np.testing.assert_array_equal(cb.select_bfm_many(V, book),
                                      [cb.select_bfm(v, book) for v in V])


class TestSelectCluster:
    def test_identical_members(self, rng):
        book = cb.generate_codebook(6, 2, 2)
        V = random_unitary(rng, 2)
        assert cb.select_bfm_cluster([V, V, V], book) == cb.select_bfm(V, book)

    def test_single_member(self, rng):
        book = cb.generate_codebook(6, 2, 2)
        V = random_unitary(rng, 2)
        assert cb.select_bfm_cluster([V], book) == cb.select_bfm(V, book)

    @given(seeds)
    def test_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        book = cb.generate_codebook(3, 2, 17)
        Vs = [random_unitary(rng, 2) for _ in range(4)]
        totals = [sum(naive_score(V, E) for V in Vs) for E in book.entries]
        assert cb.select_bfm_cluster(Vs, book) == int(np.argmax(totals))

    def test_perfect_counts_large(self, rng):
        book = cb.generate_codebook(3, 2, 17)
        Vs = [book.entries[5], random_unitary(rng, 2)]
        assert cb.select_bfm_cluster(Vs, book) == 5


def test_file_round_trip(tmp_path):
    book = cb.generate_codebook(5, 3, 123)
    path = tmp_path / "book.json"
    cb.save_codebook(book, path)
    back = cb.load_codebook(path)
    assert (back.bits, back.num_tx, back.seed) == (5, 3, 123)
    assert back.entries.tobytes() == book.entries.tobytes()
