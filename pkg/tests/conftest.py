import numpy as np
import pytest

from mimo_ofdma.channel_model import build_H, generate_taps, make_pdp


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_unitary(rng, M):
    Q, R = np.linalg.qr(crandn(rng, M, M))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_channel(rng, M=2, N=2, L=8):
    return build_H(generate_taps(make_pdp(L), M, N, rng))


def kron_selector(q, Q, N, L):
    """Explicit [I_N kron e_q^T], built straight from the DFT definition."""
    e = np.array([np.exp(-2j * np.pi * ell * q / Q) for ell in range(L)])
    return np.kron(np.eye(N), e[None, :])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
