"""BS-side resource allocation and feedback-overhead accounting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .feedback import FeedbackReport, SchemeId


@dataclass(frozen=True)
class AllocationMap:
    """Winner and scheduled throughput per resource (subcarrier or cluster)."""

    winners: np.ndarray
    scheduled: np.ndarray
    cluster_size: int = 1

    @property
    def subcarrier_winners(self) -> np.ndarray:
        """Winner of every subcarrier; a cluster's winner takes all U of them."""
        return np.repeat(self.winners, self.cluster_size)


@dataclass(frozen=True)
class FeedbackBudget:
    index_bits: int
    real_scalars: int


def allocate(reports: Sequence[FeedbackReport],
             cluster_size: int = 1) -> AllocationMap:
    """Give every resource to the MT reporting the highest throughput.

    Ties go to the lowest ``mt_id``.
    """
    if not reports:
        raise ValueError("need at least one report")
    scheme = reports[0].scheme
    n = len(reports[0].throughputs)
    for r in reports:
        if r.scheme is not scheme:
            raise ValueError(f"mixed schemes: {scheme} and {r.scheme}")
        if len(r.throughputs) != n:
            raise ValueError("reports cover different resource counts")
    ordered = sorted(reports, key=lambda r: r.mt_id)
    table = np.stack([r.throughputs for r in ordered])
    ids = np.array([r.mt_id for r in ordered])
    best = np.argmax(table, axis=0)
    return AllocationMap(winners=ids[best],
                         scheduled=table[best, np.arange(n)],
                         cluster_size=cluster_size)


def system_throughput(alloc: AllocationMap) -> float:
    """Mean scheduled throughput per resource, in bits/s/Hz."""
    return float(np.mean(alloc.scheduled))


def feedback_budget(scheme: SchemeId, Q: int, G: int, B: int) -> FeedbackBudget:
    """Per-MT, per-slot feedback: B-bit indices and real-valued throughputs."""
    scheme = SchemeId(scheme)
    if scheme is SchemeId.PS_RF_OS:
        return FeedbackBudget(B, Q)
    if scheme is SchemeId.PS_EB_OS:
        return FeedbackBudget(Q * B, Q)
    if scheme is SchemeId.PC_RF_OS:
        return FeedbackBudget(B, G)
    return FeedbackBudget(G * B, G)


def scalar_count(scheme: SchemeId, Q: int, G: int) -> int:
    """Feedback size counting each BFM index as one scalar."""
    scheme = SchemeId(scheme)
    resources = G if scheme.clustered else Q
    indices = 1 if scheme.reduced_feedback else resources
    return indices + resources
