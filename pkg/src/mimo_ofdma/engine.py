"""
Seeded Monte Carlo campaigns over the four scheduling schemes.

Randomness is organised so results do not depend on execution order:

* the channel of MT ``k`` in trial ``p`` comes from its own substream keyed
  by ``(seed, p, k)``, so sweeping K reuses nested MT sets;
* the codebook is drawn from a stream keyed by ``seed`` alone, and smaller
  books are prefixes of larger ones;
* within a trial every scheme sees the same channels and codebook.
"""

from __future__ import annotations

import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Sequence

import numpy as np

from . import codebook as cb
from .channel_model import (ChannelTaps, ConfigurationError, build_H,
                            generate_taps, make_pdp)
from .feedback import (ALL_SCHEMES, ClusterPlan, EbAlignment, MtFactors,
                       SchemeId, clusterize, eb_throughputs, rf_throughputs,
                       stream_throughput)
from .scheduler import allocate, system_throughput

logger = logging.getLogger(__name__)

_STREAM_CHANNEL = 0
_STREAM_CODEBOOK = 1
SWEEP_PARAMS = ("K", "B", "G", "snr_db")
Z95 = 1.96


@dataclass(frozen=True)
class SimConfig:
    """Campaign parameters; ``B=None`` selects the exact (B = infinity) mode.

    ``N_g`` is carried for completeness only; the frequency-domain model
    assumes a sufficient cyclic prefix.
    """

    Q: int = 128
    M: int = 2
    N: int = 2
    L: int = 8
    N_g: int = 8
    K: int = 10
    B: int | None = 8
    G: int = 8
    snr_db: float = 10.0
    trials: int = 200
    seed: int = 0
    schemes: tuple[SchemeId, ...] = ALL_SCHEMES

    def __post_init__(self):
        object.__setattr__(self, "schemes",
                           tuple(SchemeId(s) for s in self.schemes))

    @property
    def rho(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def cluster_plan(self) -> ClusterPlan:
        return ClusterPlan(self.Q, self.G)

    def validate(self) -> "SimConfig":
        """Raise :class:`ConfigurationError` naming the first violated rule."""
        for name in ("Q", "M", "N", "L", "K", "G", "trials"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.N_g < 0:
            raise ConfigurationError("N_g must be >= 0")
        if self.M > self.N:
            raise ConfigurationError(
                f"M <= N required (M={self.M}, N={self.N})")
        if self.Q % self.G:
            raise ConfigurationError(
                f"Q must be divisible by G (Q={self.Q}, G={self.G})")
        if self.L > self.Q:
            raise ConfigurationError(
                f"L <= Q required (L={self.L}, Q={self.Q})")
        if self.B is not None and not 0 <= self.B <= 20:
            raise ConfigurationError(
                f"B must be in [0, 20] or exact (B={self.B})")
        if not math.isfinite(self.snr_db):
            raise ConfigurationError("snr_db must be finite")
        if not self.schemes:
            raise ConfigurationError("at least one scheme is required")
        return self

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["schemes"] = [s.value for s in self.schemes]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(
                f"unknown config fields: {', '.join(sorted(unknown))}")
        data = dict(data)
        if "schemes" in data:
            data["schemes"] = tuple(data["schemes"])
        return cls(**data)


def channel_rng(seed: int, trial_id: int, mt_id: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(_STREAM_CHANNEL, trial_id, mt_id))
    return np.random.default_rng(ss)


def codebook_seed(seed: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(_STREAM_CODEBOOK,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@functools.lru_cache(maxsize=32)
def campaign_codebook(bits: int | None, num_tx: int, seed: int) -> cb.Codebook:
    """Codebook shared by every MT and trial of a campaign."""
    return cb.generate_codebook(bits, num_tx, codebook_seed(seed))


def random_channel(config: SimConfig, trial_id: int, mt_id: int) -> ChannelTaps:
    return generate_taps(make_pdp(config.L), config.M, config.N,
                         channel_rng(config.seed, trial_id, mt_id),
                         mt_id=mt_id, trial_id=trial_id)


ChannelSource = Callable[[SimConfig, int, int], ChannelTaps]


class _TrialState:
    """Per-trial caches of channel factors and feedback reports."""

    def __init__(self, config: SimConfig, trial_id: int,
                 channel_source: ChannelSource | None = None):
        self.config = config
        self.trial_id = trial_id
        self.source = channel_source or random_channel
        self._factors: dict[int, MtFactors] = {}
        self._reports: dict[tuple, dict] = {}
        self._base: dict[tuple, dict] = {}

    def factors(self, mt_id: int) -> MtFactors:
        if mt_id not in self._factors:
            taps = self.source(self.config, self.trial_id, mt_id)
            self._factors[mt_id] = MtFactors.from_channel(
                build_H(taps), self.config.Q)
        return self._factors[mt_id]

    def reports(self, cfg: SimConfig, mt_id: int) -> dict:
        key = (mt_id, cfg.B, cfg.G, cfg.snr_db)
        if key not in self._reports:
            base = self._per_subcarrier(cfg, mt_id)
            plan = cfg.cluster_plan
            out = {}
            for scheme in cfg.schemes:
                if scheme is SchemeId.PC_RF_OS:
                    out[scheme] = clusterize(base[SchemeId.PS_RF_OS], plan)
                elif scheme is SchemeId.PC_EB_OS:
                    out[scheme] = clusterize(base[SchemeId.PS_EB_OS], plan,
                                             alignment=base["alignment"])
                else:
                    out[scheme] = base[scheme]
            self._reports[key] = out
        return self._reports[key]

    def _per_subcarrier(self, cfg: SimConfig, mt_id: int) -> dict:
        # Independent of G, so a cluster sweep reuses it.
        key = (mt_id, cfg.B, cfg.snr_db)
        if key not in self._base:
            book = campaign_codebook(cfg.B, cfg.M, cfg.seed)
            f = self.factors(mt_id)
            align = EbAlignment.build(f.eb, book)
            self._base[key] = {
                SchemeId.PS_RF_OS: rf_throughputs(f.joint, book, cfg.rho, mt_id),
                SchemeId.PS_EB_OS: eb_throughputs(f.eb, book, cfg.rho, mt_id,
                                                  alignment=align),
                "alignment": align,
            }
        return self._base[key]

    def throughputs(self, cfg: SimConfig) -> dict[SchemeId, float]:
        per_mt = [self.reports(cfg, k) for k in range(cfg.K)]
        U = cfg.cluster_plan.cluster_size
        out = {}
        for scheme in cfg.schemes:
            alloc = allocate([r[scheme] for r in per_mt],
                             cluster_size=U if scheme.clustered else 1)
            out[scheme] = system_throughput(alloc)
        return out


def run_trial(config: SimConfig, trial_id: int,
              channel_source: ChannelSource | None = None
              ) -> dict[SchemeId, float]:
    """System throughput of every configured scheme in one slot.

    ``channel_source(config, trial_id, mt_id)`` replaces the random channel
    generator, e.g. to force a synthetic channel.
    """
    config.validate()
    return _TrialState(config, trial_id, channel_source).throughputs(config)


_ONLY = object()


@dataclass(frozen=True)
class SummaryRow:
    scheme: SchemeId
    sweep_value: float | int | None
    mean: float
    std: float
    ci95: float
    trials: int
    minimum: float
    maximum: float
    config: SimConfig


@dataclass(frozen=True)
class ThroughputSummary:
    """Aggregated campaign results.

    ``samples`` has shape (trials, sweep points, schemes) and holds the
    per-trial system throughput in trial order.
    """

    base: SimConfig
    sweep_param: str
    sweep_values: tuple
    schemes: tuple[SchemeId, ...]
    samples: np.ndarray = field(repr=False)

    def rows(self) -> list[SummaryRow]:
        out = []
        n = self.samples.shape[0]
        for j, value in enumerate(self.sweep_values):
            cfg = replace(self.base, **{self.sweep_param: value})
            for s, scheme in enumerate(self.schemes):
                x = self.samples[:, j, s]
                std = float(np.std(x, ddof=1)) if n > 1 else 0.0
                out.append(SummaryRow(
                    scheme=scheme, sweep_value=value, mean=float(np.mean(x)),
                    std=std, ci95=Z95 * std / math.sqrt(n), trials=n,
                    minimum=float(x.min()), maximum=float(x.max()), config=cfg))
        return out

    def mean(self, scheme, value=_ONLY) -> float:
        return self._point(scheme, value).mean

    def ci95(self, scheme, value=_ONLY) -> float:
        return self._point(scheme, value).ci95

    def _point(self, scheme, value) -> SummaryRow:
        # ``None`` is a real sweep value (exact-mode B), so omission is
        # marked by a sentinel and only allowed for single-point sweeps.
        scheme = SchemeId(scheme)
        if value is _ONLY:
            if len(self.sweep_values) != 1:
                raise ValueError("sweep has several points; pass a value")
            value = self.sweep_values[0]
        for row in self.rows():
            if row.scheme is scheme and row.sweep_value == value:
                return row
        raise KeyError((scheme, value))


def _sweep_trial(config: SimConfig, sweep_param: str, values: tuple,
                 trial_id: int) -> np.ndarray:
    state = _TrialState(config, trial_id)
    out = np.empty((len(values), len(config.schemes)))
    for j, value in enumerate(values):
        cfg = replace(config, **{sweep_param: value})
        tput = state.throughputs(cfg)
        out[j] = [tput[s] for s in config.schemes]
    return out


def run_campaign(config: SimConfig, sweep_param: str = "snr_db",
                 values: Sequence | None = None,
                 workers: int = 1) -> ThroughputSummary:
    """Average system throughput over ``config.trials`` slots per sweep point.

    Parameters
    ----------
    config : SimConfig
        Base configuration; the swept field is overridden per point.
    sweep_param : {"K", "B", "G", "snr_db"}
        Parameter to sweep. ``B=None`` in ``values`` denotes exact mode.
    values : sequence, optional
        Sweep points; defaults to the single value already in ``config``.
    workers : int
        Worker processes. Trials are aggregated in trial order, so the
        result is identical for any worker count.
    """
    if sweep_param not in SWEEP_PARAMS:
        raise ValueError(f"cannot sweep {sweep_param!r}; choose from {SWEEP_PARAMS}")
    config.validate()
    if values is None:
        values = (getattr(config, sweep_param),)
    values = tuple(values)
    if not values:
        raise ValueError("empty sweep")
    for v in values:
        replace(config, **{sweep_param: v}).validate()
    task = functools.partial(_sweep_trial, config, sweep_param, values)
    trial_ids = range(config.trials)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(task, trial_ids, chunksize=8))
    else:
        per_trial = [task(p) for p in trial_ids]
    logger.info("campaign over %s=%s done (%d trials)", sweep_param, values,
                config.trials)
    return ThroughputSummary(base=config, sweep_param=sweep_param,
                             sweep_values=values, schemes=config.schemes,
                             samples=np.stack(per_trial))


def exact_throughputs(factors: MtFactors, rho: float):
    """Unquantized reduced-feedback and eigen-beamforming throughputs, each (Q,)."""
    C = stream_throughput(factors.joint.r_diagonals() ** 2, rho)
    T = stream_throughput(factors.eb.singular_values ** 2, rho)
    return C, T


@dataclass(frozen=True)
class AsymptoticResult:
    """Ratio of reduced-feedback to eigen-beamforming throughput per rho."""

    rhos: np.ndarray
    ratios: np.ndarray = field(repr=False)
    quantile_levels: tuple = (0.05, 0.25, 0.5, 0.75, 0.95)

    @property
    def num_samples(self) -> int:
        return self.ratios.shape[1]

    def median_abs_deviation(self) -> np.ndarray:
        """Median of ``|ratio - 1|`` for each rho."""
        return np.median(np.abs(self.ratios - 1.0), axis=1)

    def quantiles(self) -> np.ndarray:
        """(len(rhos), len(quantile_levels)) quantiles of the ratio."""
        return np.quantile(self.ratios, self.quantile_levels, axis=1).T


def asymptotic_experiment(config: SimConfig, rhos: Sequence[float],
                          num_channels: int | None = None,
                          min_singular: float = 0.1) -> AsymptoticResult:
    """Sample channels and compare exact-mode throughputs as rho grows.

    Only subcarriers whose smallest singular value is at least
    ``min_singular`` are kept, since the high-SNR argument needs every
    stream gain to be large compared with 1/rho.
    """
    config.validate()
    n = config.trials if num_channels is None else num_channels
    rhos = np.asarray(rhos, dtype=float)
    if np.any(rhos <= 0):
        raise ValueError("rho values must be positive")
    r2_all, lam2_all = [], []
    for p in range(n):
        factors = MtFactors.from_channel(build_H(random_channel(config, p, 0)),
                                         config.Q)
        keep = factors.eb.singular_values[:, -1] >= min_singular
        r2_all.append(factors.joint.r_diagonals()[keep] ** 2)
        lam2_all.append(factors.eb.singular_values[keep] ** 2)
    r2 = np.concatenate(r2_all)
    lam2 = np.concatenate(lam2_all)
    ratios = np.stack([stream_throughput(r2, rho) / stream_throughput(lam2, rho)
                       for rho in rhos])
    return AsymptoticResult(rhos=rhos, ratios=ratios)
