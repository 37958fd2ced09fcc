"""
Shared beamforming codebook and the alignment-based selection rule.

The codebook holds 2^B Haar-random M x M unitaries. Entries are drawn in
sequence from one seeded generator, so the B-bit book is a prefix of the
(B+1)-bit book built from the same seed.

For a true BFM ``V`` and candidate ``Vd`` the alignment matrix is
``gamma[i, j] = |[V^H Vd]_{i,j}|^2`` and the score is

    sum_m gamma[m, m] / max(sum_{j != m} gamma[m, j], eps)

with a :data:`PERFECT` sentinel when every row has off-diagonal mass below
``eps``. Perfect alignment outranks every finite score.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

EPS = 1e-12
PERFECT_SUM_VALUE = 1e12
DEFAULT_MAX_ENTRIES = 2 ** 20
# Index reported when the codebook emulates B = infinity.
EXACT_INDEX = -1


class _PerfectAlignment:
    """Singleton score for exact alignment; ranks above any float."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "PERFECT"

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("PerfectAlignment")

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self


PERFECT = _PerfectAlignment()


@dataclass(frozen=True)
class Codebook:
    """Immutable set of candidate BFMs.

    ``bits`` is None in exact mode, where the book has no stored entries
    and selection returns the true BFM itself.
    """

    bits: int | None
    num_tx: int
    seed: int
    entries: np.ndarray

    @property
    def exact_mode(self) -> bool:
        return self.bits is None

    def __len__(self):
        return 0 if self.exact_mode else self.entries.shape[0]

    def matrix(self, index: int, V: np.ndarray | None = None) -> np.ndarray:
        """Entry ``index``; in exact mode returns ``V``."""
        if self.exact_mode:
            if V is None:
                raise ValueError("exact-mode codebook needs the true BFM")
            return V
        return self.entries[index]

    def prefix(self, bits: int) -> "Codebook":
        """Nested sub-book made of the first 2^bits entries."""
        if self.exact_mode or bits > self.bits:
            raise ValueError(f"cannot take a {bits}-bit prefix of this book")
        return Codebook(bits=bits, num_tx=self.num_tx, seed=self.seed,
                        entries=self.entries[: 2 ** bits])

    @classmethod
    def exact(cls, num_tx: int) -> "Codebook":
        return cls(bits=None, num_tx=num_tx, seed=0,
                   entries=np.zeros((0, num_tx, num_tx), dtype=complex))


@dataclass(frozen=True)
class AlignmentScore:
    gamma: np.ndarray
    score: float | _PerfectAlignment


def haar_unitaries(count: int, size: int,
                   rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar-distributed ``size`` x ``size`` unitaries.

    Drawn entry by entry in order, so a longer draw from the same state
    extends a shorter one.
    """
    draws = rng.standard_normal((count, size, size, 2))
    Z = (draws[..., 0] + 1j * draws[..., 1]) / np.sqrt(2.0)
    Qm, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    return Qm * (d / np.abs(d))[..., None, :]


def generate_codebook(bits: int | None, num_tx: int, seed: int,
                      max_entries: int = DEFAULT_MAX_ENTRIES) -> Codebook:
    """Seeded random codebook with 2^bits unitary entries.

    ``bits=None`` returns the exact-mode book.
    """
    if num_tx < 1:
        raise ValueError("num_tx must be >= 1")
    if bits is None:
        return Codebook.exact(num_tx)
    if bits < 0:
        raise ValueError(f"codebook bits must be >= 0, got {bits}")
    if 2 ** bits > max_entries:
        raise ValueError(
            f"2^{bits} entries exceeds the cap of {max_entries}")
    rng = np.random.default_rng(seed)
    entries = haar_unitaries(2 ** bits, num_tx, rng)
    entries.setflags(write=False)
    return Codebook(bits=bits, num_tx=num_tx, seed=seed, entries=entries)


def alignment_gamma(V: np.ndarray, Vd: np.ndarray) -> np.ndarray:
    return np.abs(np.conj(V).T @ Vd) ** 2


def alignment_score(V: np.ndarray, Vd: np.ndarray) -> AlignmentScore:
    """Alignment matrix and selection score of ``Vd`` against ``V``."""
    gamma = alignment_gamma(V, Vd)
    if np.max(np.abs(gamma.sum(axis=1) - 1.0)) > 1e-6:
        raise ValueError("alignment inputs are not unitary")
    diag = np.diag(gamma)
    off = gamma.sum(axis=1) - diag
    if np.all(off < EPS):
        return AlignmentScore(gamma=gamma, score=PERFECT)
    return AlignmentScore(gamma=gamma,
                          score=float(np.sum(diag / np.maximum(off, EPS))))


def batch_gamma(V: np.ndarray, entries: np.ndarray) -> np.ndarray:
    """Alignment matrices for every (V, entry) pair.

    ``V`` has shape (..., M, M) and ``entries`` (D, M, M); the result has
    shape (..., D, M, M).
    """
    W = np.einsum("...ji,djk->...dik", np.conj(V), entries)
    return W.real ** 2 + W.imag ** 2


def batch_scores(gamma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scores and perfect-alignment mask from stacked alignment matrices."""
    diag = np.diagonal(gamma, axis1=-2, axis2=-1)
    off = gamma.sum(axis=-1) - diag
    perfect = np.all(off < EPS, axis=-1)
    scores = np.sum(diag / np.maximum(off, EPS), axis=-1)
    return scores, perfect


def argmax_ranked(scores: np.ndarray, perfect: np.ndarray) -> np.ndarray:
    """Argmax along the last axis; perfect entries win, lowest index on ties."""
    best = np.argmax(scores, axis=-1)
    any_perfect = perfect.any(axis=-1)
    return np.where(any_perfect, np.argmax(perfect, axis=-1), best)


def select_bfm(V: np.ndarray, codebook: Codebook) -> int:
    """Index of the best-aligned codebook entry for ``V``."""
    if codebook.exact_mode:
        return EXACT_INDEX
    if len(codebook) == 0:
        raise ValueError("empty codebook")
    scores, perfect = batch_scores(batch_gamma(V, codebook.entries))
    return int(argmax_ranked(scores, perfect))


def select_bfm_many(V: np.ndarray, codebook: Codebook) -> np.ndarray:
    """:func:`select_bfm` applied to a (Q, M, M) stack of BFMs."""
    if codebook.exact_mode:
        return np.full(V.shape[0], EXACT_INDEX)
    scores, perfect = batch_scores(batch_gamma(V, codebook.entries))
    return argmax_ranked(scores, perfect)


def cluster_sum_scores(scores: np.ndarray, perfect: np.ndarray,
                       cluster_size: int) -> np.ndarray:
    """Sum per-subcarrier scores over clusters of adjacent subcarriers.

    ``scores`` has shape (Q, D); returns (G, D). Perfect alignment counts
    as :data:`PERFECT_SUM_VALUE`.
    """
    values = np.where(perfect, PERFECT_SUM_VALUE, scores)
    Q, D = values.shape
    return values.reshape(Q // cluster_size, cluster_size, D).sum(axis=1)


def select_bfm_cluster(V_list, codebook: Codebook) -> int:
    """Entry maximizing the summed score across one cluster's BFMs."""
    V = np.asarray(V_list)
    if V.ndim == 2:
        V = V[None]
    if V.shape[0] == 0:
        raise ValueError("empty cluster")
    if codebook.exact_mode:
        return EXACT_INDEX
    scores, perfect = batch_scores(batch_gamma(V, codebook.entries))
    total = cluster_sum_scores(scores, perfect, V.shape[0])[0]
    return int(np.argmax(total))


def save_codebook(codebook: Codebook, path):
    """Write the codebook as JSON; entries are row-major [re, im] pairs."""
    if codebook.exact_mode:
        raise ValueError("exact-mode codebook has no entries to save")
    entries = [[[float(z.real), float(z.imag)] for z in E.ravel()]
               for E in codebook.entries]
    payload = {"B": codebook.bits, "M": codebook.num_tx,
               "seed": codebook.seed, "entries": entries}
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def load_codebook(path) -> Codebook:
    with open(path) as fh:
        payload = json.load(fh)
    M = int(payload["M"])
    raw = np.asarray(payload["entries"], dtype=float)
    entries = np.empty(raw.shape[:-1], dtype=complex)
    entries.real = raw[..., 0]
    entries.imag = raw[..., 1]
    entries = entries.reshape(-1, M, M)
    if entries.shape[0] != 2 ** int(payload["B"]):
        raise ValueError("entry count does not match B")
    entries.setflags(write=False)
    return Codebook(bits=int(payload["B"]), num_tx=M,
                    seed=int(payload["seed"]), entries=entries)
