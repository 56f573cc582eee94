"""Host-side placement policies over 2 MB GPA regions.

Three variants of the same skeleton: pick promotion candidates among
far-tier regions, maybe demote from the near tier, then promote while
frames last. Whole regions move; nothing is ever split. The host is blind
to base-page hotness — it ranks regions only by its own huge-granularity
access counts, which is exactly why sparse-hot regions are so expensive.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError
from .memmodel import FAR, NEAR, REGION_BYTES, FrameAllocator, HostTable, migrate
from .telemetry import HostHotnessTracker


class PolicyVariant(Enum):
    MEMTIERD = "memtierd"
    TPP = "tpp"
    AUTONUMA = "autonuma"


@dataclass(frozen=True)
class PolicyParams:
    variant: PolicyVariant
    watermark_fraction: float = 0.1  # near free-frame floor (TPP/AutoNUMA)
    scan_period: int = 1  # epochs between Memtierd scans
    demotion_age: int = 4  # idle epochs before Memtierd demotes
    sample_fraction: float = 0.125  # regions probed per epoch (AutoNUMA)
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.watermark_fraction <= 1.0:
            raise ConfigError("watermark_fraction must be in (0, 1]")
        if self.scan_period < 1:
            raise ConfigError("scan_period must be >= 1")
        if self.demotion_age < 1:
            raise ConfigError("demotion_age must be >= 1")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ConfigError("sample_fraction must be in (0, 1]")


@dataclass
class StepDelta:
    promoted: list = field(default_factory=list)  # region ids, migration order
    demoted: list = field(default_factory=list)

    @property
    def promoted_bytes(self) -> int:
        return len(self.promoted) * REGION_BYTES

    @property
    def demoted_bytes(self) -> int:
        return len(self.demoted) * REGION_BYTES


def _promotion_order(candidates: np.ndarray, window_counts: np.ndarray) -> np.ndarray:
    """Hotter (window access count) first, lower region index on ties."""
    return candidates[np.lexsort((candidates, -window_counts[candidates]))]


def _demotion_order(residents: np.ndarray, idle_age: np.ndarray) -> np.ndarray:
    """Least-recently-accessed first, higher region index on ties."""
    return residents[np.lexsort((-residents, -idle_age[residents]))]


class TieringEngine:
    """Owns policy state and the migration ledger for one run."""

    def __init__(self, params: PolicyParams, host: HostTable,
                 alloc: FrameAllocator):
        self.params = params
        self.host = host
        self.alloc = alloc
        self.promoted_bytes = 0
        self.demoted_bytes = 0
        # (epoch, region, from_tier, to_tier) — replayable
        self.events: list[tuple] = []

    def step(self, tracker: HostHotnessTracker, epoch: int) -> StepDelta:
        p = self.params
        if p.variant is PolicyVariant.MEMTIERD:
            delta = self._memtierd(tracker, epoch)
        elif p.variant is PolicyVariant.TPP:
            delta = self._tpp_like(tracker, epoch, tracker.accessed_now())
        else:
            sampled = self._sample_mask(tracker.n_regions, epoch)
            delta = self._tpp_like(tracker, epoch, tracker.accessed_now() & sampled)
        self.promoted_bytes += delta.promoted_bytes
        self.demoted_bytes += delta.demoted_bytes
        return delta

    # -- variants ----------------------------------------------------------

    def _memtierd(self, tracker, epoch) -> StepDelta:
        delta = StepDelta()
        if epoch % self.params.scan_period != 0:
            return delta
        far_at_start = self.host.tier_of_regions(np.arange(tracker.n_regions)) == FAR
        idle = tracker.idle_age()
        # age out cold near residents first; no pressure needed
        near_regions = self.host.regions_in(NEAR)
        aged = near_regions[idle[near_regions] >= self.params.demotion_age]
        for region in _demotion_order(aged, idle).tolist():
            if self.alloc.free_frames(FAR) == 0:
                break
            self._move(epoch, region, FAR, delta)
        # then fill near with whatever the window says is hot
        candidates = np.nonzero(tracker.hot_mask() & far_at_start)[0]
        self._promote_while_free(tracker, epoch, candidates, delta)
        return delta

    def _tpp_like(self, tracker, epoch, candidate_mask) -> StepDelta:
        delta = StepDelta()
        far_at_start = self.host.tier_of_regions(np.arange(tracker.n_regions)) == FAR
        self._demote_to_watermark(tracker, epoch, delta)
        # promote on access: regions seen this epoch while still far
        candidates = np.nonzero(candidate_mask & far_at_start)[0]
        self._promote_while_free(tracker, epoch, candidates, delta)
        return delta

    def _sample_mask(self, n_regions: int, epoch: int) -> np.ndarray:
        rng = np.random.default_rng([self.params.rng_seed, 2, epoch])
        n = max(1, round(self.params.sample_fraction * n_regions))
        mask = np.zeros(n_regions, dtype=bool)
        mask[rng.choice(n_regions, size=n, replace=False)] = True
        return mask

    # -- shared mechanics ---------------------------------------------------

    def _demote_to_watermark(self, tracker, epoch, delta):
        capacity = self.alloc.tiers.near.capacity_frames
        floor = max(1, round(self.params.watermark_fraction * capacity))
        if self.alloc.free_frames(NEAR) >= floor:
            return  # no pressure
        idle = tracker.idle_age()
        victims = _demotion_order(self.host.regions_in(NEAR), idle)
        for region in victims.tolist():
            if self.alloc.free_frames(NEAR) >= floor:
                break
            if self.alloc.free_frames(FAR) == 0:
                break
            self._move(epoch, region, FAR, delta)

    def _promote_while_free(self, tracker, epoch, candidates, delta):
        ranked = _promotion_order(candidates, tracker.window_counts())
        for region in ranked.tolist():
            if self.alloc.free_frames(NEAR) == 0:
                break  # capacity pressure: skip, never force
            self._move(epoch, region, NEAR, delta)

    def _move(self, epoch, region, to_tier, delta):
        from_tier, _ = migrate(self.host, self.alloc, region, to_tier)
        self.events.append((epoch, region, from_tier, to_tier))
        (delta.promoted if to_tier == NEAR else delta.demoted).append(region)
