"""
MT-side feedback for the four scheduling schemes.

* PS-RF-OS: one BFM index for all subcarriers, Q throughputs
  ``C_q = sum_m log2(1 + rho |R_q[m,m]|^2 gamma[m,m])``.
* PC-RF-OS: same BFM index, G cluster-averaged throughputs.
* PS-EB-OS: one BFM index and throughput per subcarrier,
  ``T_q = sum_m log2(1 + rho lambda_{q,m}^2 gamma'_q[m,m])``.
* PC-EB-OS: one BFM index per cluster chosen by summed alignment score,
  throughputs recomputed with that common BFM and then averaged.

Throughputs are in bits/s/Hz; ``rho`` is the linear SNR against unit
noise variance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import codebook as cb
from .channel_model import TimeDomainChannel
from .decomposition import EbFactors, JointFactors, eb_decompose, joint_decompose


class SchemeId(str, enum.Enum):
    PS_RF_OS = "PS_RF_OS"
    PC_RF_OS = "PC_RF_OS"
    PS_EB_OS = "PS_EB_OS"
    PC_EB_OS = "PC_EB_OS"

    @property
    def clustered(self) -> bool:
        return self in (SchemeId.PC_RF_OS, SchemeId.PC_EB_OS)

    @property
    def reduced_feedback(self) -> bool:
        return self in (SchemeId.PS_RF_OS, SchemeId.PC_RF_OS)

    def __str__(self):
        return self.value


ALL_SCHEMES = tuple(SchemeId)


@dataclass(frozen=True)
class ClusterPlan:
    """Partition of Q subcarriers into G runs of U adjacent subcarriers."""

    num_subcarriers: int
    num_clusters: int

    def __post_init__(self):
        Q, G = self.num_subcarriers, self.num_clusters
        if G < 1 or Q < 1:
            raise ValueError("subcarrier and cluster counts must be positive")
        if Q % G:
            raise ValueError(
                f"Q={Q} subcarriers is not divisible by G={G} clusters")

    @property
    def cluster_size(self) -> int:
        return self.num_subcarriers // self.num_clusters

    @property
    def index_sets(self) -> list[np.ndarray]:
        U = self.cluster_size
        return [np.arange(g * U, (g + 1) * U) for g in range(self.num_clusters)]


@dataclass(frozen=True)
class FeedbackReport:
    """What one MT sends back to the BS in one slot."""

    mt_id: int
    scheme: SchemeId
    bfm_indices: np.ndarray
    throughputs: np.ndarray
    snr: float

    def __post_init__(self):
        t = self.throughputs
        if t.ndim != 1 or not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValueError("throughputs must be a finite nonnegative vector")
        n_idx = len(self.bfm_indices)
        if self.scheme.reduced_feedback and n_idx != 1:
            raise ValueError(f"{self.scheme} reports exactly one BFM index")
        if not self.scheme.reduced_feedback and n_idx != len(t):
            raise ValueError(
                f"{self.scheme} reports one BFM index per throughput")


def stream_throughput(gains: np.ndarray, rho: float) -> np.ndarray:
    """``sum_m log2(1 + rho * gain_m)`` over the last axis."""
    return np.sum(np.log1p(rho * gains), axis=-1) / np.log(2.0)


def _diag(gamma: np.ndarray) -> np.ndarray:
    return np.diagonal(gamma, axis1=-2, axis2=-1)


def rf_throughputs(joint: JointFactors, codebook: cb.Codebook, rho: float,
                   mt_id: int = 0) -> FeedbackReport:
    """PS-RF-OS report: single BFM index and Q throughputs."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    r2 = joint.r_diagonals() ** 2
    d = cb.select_bfm(joint.V, codebook)
    if codebook.exact_mode:
        gamma_diag = np.ones(joint.V.shape[0])
    else:
        gamma_diag = _diag(cb.alignment_gamma(joint.V, codebook.entries[d]))
    C = stream_throughput(r2 * gamma_diag, rho)
    return FeedbackReport(mt_id=mt_id, scheme=SchemeId.PS_RF_OS,
                          bfm_indices=np.array([d]), throughputs=C, snr=rho)


@dataclass(frozen=True)
class EbAlignment:
    """Alignment of every per-subcarrier BFM against every codebook entry.

    Shared by the PS and PC eigen-beamforming reports so the (Q, D)
    score table is built once per MT.
    """

    eb: EbFactors
    codebook: cb.Codebook
    gamma_diag: np.ndarray | None
    scores: np.ndarray | None
    perfect: np.ndarray | None

    @classmethod
    def build(cls, eb: EbFactors, codebook: cb.Codebook) -> "EbAlignment":
        if codebook.exact_mode:
            return cls(eb, codebook, None, None, None)
        gamma = cb.batch_gamma(eb.svd.V, codebook.entries)
        scores, perfect = cb.batch_scores(gamma)
        return cls(eb, codebook, _diag(gamma), scores, perfect)

    def per_subcarrier(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-subcarrier indices and the (Q, M) gamma diagonals they yield."""
        Q, M = self.eb.singular_values.shape
        if self.codebook.exact_mode:
            return np.full(Q, cb.EXACT_INDEX), np.ones((Q, M))
        idx = cb.argmax_ranked(self.scores, self.perfect)
        return idx, self.gamma_diag[np.arange(Q), idx]

    def per_cluster(self, plan: ClusterPlan) -> tuple[np.ndarray, np.ndarray]:
        """Per-cluster indices and the (Q, M) gamma diagonals they yield."""
        U = plan.cluster_size
        if self.codebook.exact_mode:
            return self._exact_per_cluster(plan)
        total = cb.cluster_sum_scores(self.scores, self.perfect, U)
        idx = np.argmax(total, axis=-1)
        per_q = np.repeat(idx, U)
        Q = per_q.shape[0]
        return idx, self.gamma_diag[np.arange(Q), per_q]

    def _exact_per_cluster(self, plan):
        # B = infinity: candidates are the cluster's own eigen-BFMs.
        V = self.eb.svd.V
        U = plan.cluster_size
        Q, M = self.eb.singular_values.shape
        gamma_diag = np.empty((Q, M))
        for rows in plan.index_sets:
            Vc = V[rows]
            gamma = cb.batch_gamma(Vc, Vc)
            scores, perfect = cb.batch_scores(gamma)
            best = int(np.argmax(cb.cluster_sum_scores(scores, perfect, U)[0]))
            gamma_diag[rows] = _diag(gamma[:, best])
        return np.full(plan.num_clusters, cb.EXACT_INDEX), gamma_diag


def eb_throughputs(eb: EbFactors, codebook: cb.Codebook, rho: float,
                   mt_id: int = 0,
                   alignment: EbAlignment | None = None) -> FeedbackReport:
    """PS-EB-OS report: Q BFM indices and Q throughputs."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    alignment = alignment or EbAlignment.build(eb, codebook)
    idx, gamma_diag = alignment.per_subcarrier()
    T = stream_throughput(eb.singular_values ** 2 * gamma_diag, rho)
    return FeedbackReport(mt_id=mt_id, scheme=SchemeId.PS_EB_OS,
                          bfm_indices=idx, throughputs=T, snr=rho)


def cluster_means(values: np.ndarray, plan: ClusterPlan) -> np.ndarray:
    if values.shape[0] != plan.num_subcarriers:
        raise ValueError(
            f"{values.shape[0]} values for a {plan.num_subcarriers}-subcarrier plan")
    return values.reshape(plan.num_clusters, plan.cluster_size).mean(axis=1)


def clusterize(report: FeedbackReport, plan: ClusterPlan,
               eb: EbFactors | None = None,
               codebook: cb.Codebook | None = None,
               alignment: EbAlignment | None = None) -> FeedbackReport:
    """Turn a per-subcarrier report into its per-cluster counterpart.

    PS-RF-OS reports are averaged directly. PS-EB-OS reports need the
    eigen factors and codebook (or a prebuilt ``alignment``) because the
    cluster-common BFM changes the per-subcarrier throughputs.
    """
    if report.scheme is SchemeId.PS_RF_OS:
        return FeedbackReport(mt_id=report.mt_id, scheme=SchemeId.PC_RF_OS,
                              bfm_indices=report.bfm_indices,
                              throughputs=cluster_means(report.throughputs, plan),
                              snr=report.snr)
    if report.scheme is not SchemeId.PS_EB_OS:
        raise ValueError(f"cannot clusterize a {report.scheme} report")
    if alignment is None:
        if eb is None or codebook is None:
            raise ValueError("PC-EB-OS clustering needs eb factors and codebook")
        alignment = EbAlignment.build(eb, codebook)
    eb = alignment.eb
    idx, gamma_diag = alignment.per_cluster(plan)
    T = stream_throughput(eb.singular_values ** 2 * gamma_diag, report.snr)
    return FeedbackReport(mt_id=report.mt_id, scheme=SchemeId.PC_EB_OS,
                          bfm_indices=idx, throughputs=cluster_means(T, plan),
                          snr=report.snr)


@dataclass(frozen=True)
class MtFactors:
    """Both factorizations of one MT's channel."""

    joint: JointFactors
    eb: EbFactors

    @classmethod
    def from_channel(cls, channel: TimeDomainChannel, Q: int) -> "MtFactors":
        return cls(joint=joint_decompose(channel, Q), eb=eb_decompose(channel, Q))


def feedback_all(factors: MtFactors, codebook: cb.Codebook, plan: ClusterPlan,
                 rho: float, schemes=ALL_SCHEMES,
                 mt_id: int = 0) -> dict[SchemeId, FeedbackReport]:
    """Reports for several schemes from one set of factors."""
    schemes = [SchemeId(s) for s in schemes]
    out = {}
    if SchemeId.PS_RF_OS in schemes or SchemeId.PC_RF_OS in schemes:
        rf = rf_throughputs(factors.joint, codebook, rho, mt_id)
        if SchemeId.PS_RF_OS in schemes:
            out[SchemeId.PS_RF_OS] = rf
        if SchemeId.PC_RF_OS in schemes:
            out[SchemeId.PC_RF_OS] = clusterize(rf, plan)
    if SchemeId.PS_EB_OS in schemes or SchemeId.PC_EB_OS in schemes:
        align = EbAlignment.build(factors.eb, codebook)
        ebr = eb_throughputs(factors.eb, codebook, rho, mt_id, alignment=align)
        if SchemeId.PS_EB_OS in schemes:
            out[SchemeId.PS_EB_OS] = ebr
        if SchemeId.PC_EB_OS in schemes:
            out[SchemeId.PC_EB_OS] = clusterize(ebr, plan, alignment=align)
    return out


def compute_feedback(channel: TimeDomainChannel, codebook: cb.Codebook,
                     scheme: SchemeId, plan: ClusterPlan, rho: float,
                     mt_id: int = 0) -> FeedbackReport:
    """Single-scheme feedback of one MT, straight from its channel."""
    scheme = SchemeId(scheme)
    factors = MtFactors.from_channel(channel, plan.num_subcarriers)
    return feedback_all(factors, codebook, plan, rho, (scheme,), mt_id)[scheme]
