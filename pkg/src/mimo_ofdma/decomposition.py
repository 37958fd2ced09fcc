"""
Channel factorizations.

Two ways of splitting the per-subcarrier channel ``G_q``:

* joint: ``H = U S V^H`` once, then ``[I_N kron e_q^T] U S = Q_q R_q`` so that
  ``G_q = Q_q R_q V^H`` with a subcarrier-independent ``V``;
* eigen-beamforming: a separate SVD ``G_q = U_q S_q V_q^H`` per subcarrier.

``Q_q`` is the thin N x M factor and ``R_q`` is M x M upper triangular with a
real nonnegative diagonal. All kernels accept stacked inputs of shape
(..., rows, cols).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_model import TimeDomainChannel, selector_blocks


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``A = U diag(S) V^H`` (possibly stacked)."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S[..., None, :]) @ np.conj(np.swapaxes(self.V, -1, -2))


@dataclass(frozen=True)
class QrFactors:
    """Thin QR ``A = Qf R`` (possibly stacked)."""

    Qf: np.ndarray
    R: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.Qf @ self.R


@dataclass(frozen=True)
class JointFactors:
    """Subcarrier-independent BFM ``V`` plus per-subcarrier QR factors.

    ``qr.Qf`` has shape (Q, N, M) and ``qr.R`` has shape (Q, M, M).
    """

    V: np.ndarray
    qr: QrFactors

    @property
    def num_subcarriers(self) -> int:
        return self.qr.R.shape[0]

    def r_diagonals(self) -> np.ndarray:
        """``|[R_q]_{m,m}|`` as a (Q, M) array."""
        return np.abs(np.diagonal(self.qr.R, axis1=-2, axis2=-1))

    def subcarrier(self, q: int) -> QrFactors:
        return QrFactors(Qf=self.qr.Qf[q], R=self.qr.R[q])


@dataclass(frozen=True)
class EbFactors:
    """Per-subcarrier SVDs, stacked along the first axis."""

    svd: SvdFactors

    @property
    def num_subcarriers(self) -> int:
        return self.svd.S.shape[0]

    @property
    def singular_values(self) -> np.ndarray:
        """``lambda_{q,m}`` as a (Q, M) array, descending in m."""
        return self.svd.S

    def subcarrier(self, q: int) -> SvdFactors:
        return SvdFactors(U=self.svd.U[q], S=self.svd.S[q], V=self.svd.V[q])


def _check_finite(A: np.ndarray):
    if A.size == 0:
        raise ValueError("empty matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")


def svd(A: np.ndarray) -> SvdFactors:
    """Thin SVD with singular values in descending order.

    Returns ``V`` (not ``V^H``) so that ``A = U diag(S) V^H``.
    """
    A = np.asarray(A)
    _check_finite(A)
    U, S, Vh = np.linalg.svd(A, full_matrices=False)
    return SvdFactors(U=U, S=S, V=np.conj(np.swapaxes(Vh, -1, -2)))


def thin_qr(A: np.ndarray) -> QrFactors:
    """Thin QR with the phases of ``diag(R)`` absorbed into ``Qf``.

    Parameters
    ----------
    A : array_like, shape (..., N, M)
        Tall (N >= M) matrix or stack of matrices.

    Returns
    -------
    QrFactors
        ``Qf`` of shape (..., N, M) with orthonormal columns and upper
        triangular ``R`` of shape (..., M, M) whose diagonal is real and
        nonnegative.
    """
    A = np.asarray(A)
    _check_finite(A)
    rows, cols = A.shape[-2:]
    if rows < cols:
        raise ValueError(f"thin QR needs rows >= cols, got {rows} x {cols}")
    Qf, R = np.linalg.qr(A, mode="reduced")
    d = np.diagonal(R, axis1=-2, axis2=-1)
    mag = np.abs(d)
    phase = np.where(mag > 0, d / np.where(mag > 0, mag, 1.0), 1.0)
    Qf = Qf * phase[..., None, :]
    R = np.conj(phase)[..., :, None] * R
    # Force an exactly real diagonal; rounding leaves ~1e-17 imaginary parts.
    idx = np.arange(cols)
    R[..., idx, idx] = mag
    R = np.triu(R)
    return QrFactors(Qf=Qf, R=R)


def joint_decompose(channel: TimeDomainChannel, Q: int) -> JointFactors:
    """Split ``G_q = Q_q R_q V^H`` for every subcarrier.

    The SVD of the stacked time-domain matrix is computed once; each
    subcarrier then only needs a QR of an N x M matrix.
    """
    if channel.num_tx > channel.num_rx:
        raise ValueError("joint decomposition requires M <= N")
    f = svd(channel.H)
    US = f.U * f.S[None, :]
    A = selector_blocks(US, channel.num_rx, channel.length, Q)
    return JointFactors(V=f.V, qr=thin_qr(A))


def eb_decompose(channel: TimeDomainChannel, Q: int) -> EbFactors:
    """Per-subcarrier SVD of ``G_q`` for all q."""
    if channel.num_tx > channel.num_rx:
        raise ValueError("eigen-beamforming decomposition requires M <= N")
    G = selector_blocks(channel.H, channel.num_rx, channel.length, Q)
    return EbFactors(svd=svd(G))


def eb_decompose_matrices(G: np.ndarray) -> EbFactors:
    """Per-subcarrier SVD for an explicit (Q, N, M) stack of channels."""
    return EbFactors(svd=svd(G))
