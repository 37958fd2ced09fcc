"""
MT-side receive processing: precoding, receive rotation and V-BLAST
back-substitution on the triangular effective channel.

This path exists to check the parallel-channel model behind the
throughput formulas; simulated throughput never comes from symbol counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularStreamError(ValueError):
    """A diagonal entry of the triangular channel is zero."""


@dataclass(frozen=True)
class Constellation:
    name: str
    points: np.ndarray

    def slice(self, z: complex) -> int:
        """Index of the nearest constellation point."""
        return int(np.argmin(np.abs(self.points - z)))


QPSK = Constellation(
    "QPSK", np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0))


@dataclass(frozen=True)
class DetectionResult:
    indices: np.ndarray
    observation: np.ndarray

    def symbols(self, constellation: Constellation = QPSK) -> np.ndarray:
        return constellation.points[self.indices]


def precode(s: np.ndarray, Vd: np.ndarray) -> np.ndarray:
    """Transmit vector ``x = Vd s``."""
    return Vd @ s


def rf_receive(y: np.ndarray, Qf: np.ndarray) -> np.ndarray:
    """Rotate the received vector onto the triangular channel: ``Qf^H y``."""
    return np.conj(Qf).T @ y


def eb_receive(y: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Rotate the received vector onto the diagonal channel: ``U_q^H y``."""
    return np.conj(U).T @ y


def vblast_detect(r: np.ndarray, R: np.ndarray,
                  constellation: Constellation = QPSK) -> DetectionResult:
    """Detect streams M, M-1, ..., 1 by successive cancellation.

    Hard decisions are fed back without any error-propagation mitigation.
    """
    R = np.asarray(R)
    M = R.shape[0]
    diag = np.diagonal(R)
    if np.any(diag == 0):
        raise SingularStreamError("triangular channel has a zero diagonal entry")
    idx = np.zeros(M, dtype=int)
    s_hat = np.zeros(M, dtype=complex)
    for m in range(M - 1, -1, -1):
        z = (r[m] - R[m, m + 1:] @ s_hat[m + 1:]) / R[m, m]
        idx[m] = constellation.slice(z)
        s_hat[m] = constellation.points[idx[m]]
    return DetectionResult(indices=idx, observation=np.asarray(r))
