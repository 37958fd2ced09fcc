"""
Frequency-selective MIMO channel generation.

Each mobile terminal sees an M-transmit, N-receive channel whose antenna
pairs are independent L-tap impulse responses with an exponential power
delay profile. The time-domain view stacks the taps into an (N*L) x M
matrix ``H``; the per-subcarrier view is the N x M matrix
``G_q = [I_N kron e_q^T] H`` where ``e_q`` holds the first L entries of
column q of the Q-point DFT matrix.

Subcarrier indices are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a parameter combination violates a model constraint."""


@dataclass(frozen=True)
class PowerDelayProfile:
    """Exponential power delay profile ``lam * exp(-l)``, l = 0..L-1."""

    length: int
    tap_powers: np.ndarray
    normalizer: float


@dataclass(frozen=True)
class ChannelTaps:
    """Impulse responses of one MT.

    ``taps[m, n]`` is the length-L response from transmit antenna m to
    receive antenna n.
    """

    taps: np.ndarray
    mt_id: int = 0
    trial_id: int = 0

    def __post_init__(self):
        if self.taps.ndim != 3:
            raise ValueError("taps must have shape (M, N, L)")

    @property
    def num_tx(self) -> int:
        return self.taps.shape[0]

    @property
    def num_rx(self) -> int:
        return self.taps.shape[1]

    @property
    def length(self) -> int:
        return self.taps.shape[2]


@dataclass(frozen=True)
class TimeDomainChannel:
    """The stacked (N*L) x M channel matrix ``H``."""

    H: np.ndarray
    num_rx: int
    length: int

    def __post_init__(self):
        if self.H.ndim != 2 or self.H.shape[0] != self.num_rx * self.length:
            raise ValueError(
                f"H must have shape ({self.num_rx * self.length}, M), "
                f"got {self.H.shape}")

    @property
    def num_tx(self) -> int:
        return self.H.shape[1]


@dataclass(frozen=True)
class SubcarrierChannel:
    q: int
    G: np.ndarray


def make_pdp(length: int) -> PowerDelayProfile:
    """Build the unit-energy exponential power delay profile.

    Parameters
    ----------
    length : int
        Number of taps L (>= 1).

    Returns
    -------
    PowerDelayProfile
        Tap powers ``lam * exp(-l)`` with ``lam`` chosen so they sum to one.
    """
    if int(length) != length or length < 1:
        raise ConfigurationError(f"channel length must be >= 1, got {length}")
    shape = np.exp(-np.arange(length, dtype=float))
    lam = 1.0 / shape.sum()
    powers = lam * shape
    powers.setflags(write=False)
    return PowerDelayProfile(length=int(length), tap_powers=powers,
                             normalizer=float(lam))


def generate_taps(pdp: PowerDelayProfile, num_tx: int, num_rx: int,
                  rng: np.random.Generator, mt_id: int = 0,
                  trial_id: int = 0) -> ChannelTaps:
    """Draw independent circularly symmetric Gaussian taps.

    Real and imaginary parts are i.i.d. N(0, p_l / 2) so that
    ``E|h(l)|^2 = p_l``.
    """
    if num_tx < 1 or num_rx < 1:
        raise ConfigurationError("antenna counts must be positive")
    if num_tx > num_rx:
        raise ConfigurationError(
            f"need M <= N (transmit antennas {num_tx} > receive {num_rx})")
    shape = (num_tx, num_rx, pdp.length, 2)
    draws = rng.standard_normal(shape)
    scale = np.sqrt(pdp.tap_powers / 2.0)
    taps = (draws[..., 0] + 1j * draws[..., 1]) * scale
    taps.setflags(write=False)
    return ChannelTaps(taps=taps, mt_id=mt_id, trial_id=trial_id)


def dft_selector(q: int, Q: int, L: int) -> np.ndarray:
    """First L entries of column q of the Q-point DFT matrix."""
    if not 1 <= L <= Q:
        raise ConfigurationError(f"need 1 <= L <= Q, got L={L}, Q={Q}")
    if not 0 <= q < Q:
        raise IndexError(f"subcarrier index {q} outside [0, {Q - 1}]")
    ell = np.arange(L)
    return np.exp(-2j * np.pi * ell * q / Q)


def dft_selectors(Q: int, L: int) -> np.ndarray:
    """All selectors stacked as a (Q, L) array, row q equal to ``e_q``."""
    if not 1 <= L <= Q:
        raise ConfigurationError(f"need 1 <= L <= Q, got L={L}, Q={Q}")
    q = np.arange(Q)[:, None]
    ell = np.arange(L)[None, :]
    return np.exp(-2j * np.pi * ell * q / Q)


def build_H(taps: ChannelTaps) -> TimeDomainChannel:
    """Stack taps so block row n, column m of ``H`` holds ``h^{m,n}``."""
    M, N, L = taps.taps.shape
    # (M, N, L) -> (N, L, M) -> (N*L, M)
    H = np.transpose(taps.taps, (1, 2, 0)).reshape(N * L, M)
    return TimeDomainChannel(H=H, num_rx=N, length=L)


def freq_channel(channel: TimeDomainChannel, q: int,
                 Q: int) -> SubcarrierChannel:
    """Frequency response ``G_q`` of a single subcarrier."""
    e_q = dft_selector(q, Q, channel.length)
    blocks = channel.H.reshape(channel.num_rx, channel.length, channel.num_tx)
    G = np.einsum("l,nlm->nm", e_q, blocks)
    return SubcarrierChannel(q=q, G=G)


def freq_channels(channel: TimeDomainChannel, Q: int) -> np.ndarray:
    """Frequency responses of all subcarriers as a (Q, N, M) array."""
    return selector_blocks(channel.H, channel.num_rx, channel.length, Q)


def selector_blocks(stacked: np.ndarray, num_rx: int, L: int,
                    Q: int) -> np.ndarray:
    """Apply ``[I_N kron e_q^T]`` to an (N*L) x k matrix for every q.

    Returns a (Q, N, k) array without forming the Kronecker product.
    """
    E = dft_selectors(Q, L)
    blocks = stacked.reshape(num_rx, L, stacked.shape[1])
    return np.einsum("ql,nlk->qnk", E, blocks)
