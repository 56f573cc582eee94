"""Guest/host address spaces, page tables, tier frames, and walk costs.

The guest maps 4 KB base pages (GVA -> GPA). The host backs guest memory
only at 2 MB huge-region granularity (GPA region -> tier frame); GPA and
host virtual addresses are identical, so the host table is keyed directly
by GPA region index.
"""

from dataclasses import dataclass, field
from enum import Enum
import heapq

import numpy as np

from .errors import (
    AlreadyMapped,
    ConfigError,
    DestinationFull,
    GuestUnmapped,
    HostUnmapped,
    OutOfMemory,
    UnknownConfiguration,
)

PAGE_BYTES = 4096
REGION_BYTES = 2 * 1024 * 1024
PAGES_PER_REGION = REGION_BYTES // PAGE_BYTES  # 512; also the per-batch consolidation cap


class PageSize(Enum):
    BASE_4K = PAGE_BYTES
    HUGE_2M = REGION_BYTES

    @property
    def bytes(self) -> int:
        return self.value


# Nested page-walk cost multipliers, normalized to huge pages at both
# levels, keyed by (guest size, host size) then working-set label.
_WALK_COST = {
    (PageSize.BASE_4K, PageSize.BASE_4K): {"32GB": 5.2, "64GB": 4.2, "256GB": 4.1},
    (PageSize.BASE_4K, PageSize.HUGE_2M): {"32GB": 3.2, "64GB": 2.3, "256GB": 2.3},
    (PageSize.HUGE_2M, PageSize.HUGE_2M): {"32GB": 1.0, "64GB": 1.0, "256GB": 1.0},
}

WSS_LABELS = ("32GB", "64GB", "256GB")


def walk_cost(guest_size: PageSize, host_size: PageSize, wss: str) -> float:
    """Page-walk cost multiplier for a (guest, host) page-size setting.

    Values are an exact table lookup; combinations outside the table
    (huge guest pages over a 4 KB host) are refused, never interpolated.
    """
    if wss not in WSS_LABELS:
        raise UnknownConfiguration(f"unknown working-set label {wss!r}")
    try:
        return _WALK_COST[(guest_size, host_size)][wss]
    except KeyError:
        raise UnknownConfiguration(
            f"no walk cost for guest={guest_size.name} host={host_size.name}"
        ) from None


def region_of(gpa_page: int) -> int:
    return gpa_page // PAGES_PER_REGION


class GuestPageTable:
    """Injective GVA page -> GPA page map with per-region population counts.

    Backed by dense int64 arrays (unmapped = -1) so whole traces can be
    translated with one fancy-indexing pass.
    """

    def __init__(self, gva_capacity: int = 0, gpa_capacity: int = 0):
        self._fwd = np.full(gva_capacity, -1, dtype=np.int64)
        self._rev = np.full(gpa_capacity, -1, dtype=np.int64)
        n_regions = -(-gpa_capacity // PAGES_PER_REGION) if gpa_capacity else 0
        self._region_pop = np.zeros(n_regions, dtype=np.int64)
        self.mapped_count = 0

    @classmethod
    def linear(cls, n_pages: int, gpa_capacity: int | None = None) -> "GuestPageTable":
        """Identity-map pages 0..n_pages-1 (fully backed guest at start)."""
        cap = max(gpa_capacity or 0, n_pages)
        gpt = cls(gva_capacity=n_pages, gpa_capacity=cap)
        idx = np.arange(n_pages, dtype=np.int64)
        gpt._fwd[:n_pages] = idx
        gpt._rev[:n_pages] = idx
        full, tail = divmod(n_pages, PAGES_PER_REGION)
        gpt._region_pop[:full] = PAGES_PER_REGION
        if tail:
            gpt._region_pop[full] = tail
        gpt.mapped_count = n_pages
        return gpt

    def _grow_gva(self, gva: int):
        if gva >= len(self._fwd):
            grown = np.full(max(gva + 1, 2 * len(self._fwd)), -1, dtype=np.int64)
            grown[: len(self._fwd)] = self._fwd
            self._fwd = grown

    def _grow_gpa(self, gpa: int):
        if gpa >= len(self._rev):
            grown = np.full(max(gpa + 1, 2 * len(self._rev)), -1, dtype=np.int64)
            grown[: len(self._rev)] = self._rev
            self._rev = grown
        n_regions = -(-len(self._rev) // PAGES_PER_REGION)
        if n_regions > len(self._region_pop):
            pops = np.zeros(n_regions, dtype=np.int64)
            pops[: len(self._region_pop)] = self._region_pop
            self._region_pop = pops

    def map_page(self, gva: int, gpa: int):
        self._grow_gva(gva)
        self._grow_gpa(gpa)
        if self._fwd[gva] != -1:
            raise AlreadyMapped(f"gva {gva} already mapped")
        if self._rev[gpa] != -1:
            raise AlreadyMapped(f"gpa {gpa} already in use")
        self._fwd[gva] = gpa
        self._rev[gpa] = gva
        self._region_pop[region_of(gpa)] += 1
        self.mapped_count += 1

    def remap(self, gva: int, new_gpa: int):
        """Move a mapping to a fresh GPA page; the old page returns to the free pool."""
        old = self.translate(gva)
        self._grow_gpa(new_gpa)
        if self._rev[new_gpa] != -1:
            raise AlreadyMapped(f"gpa {new_gpa} already in use")
        self._rev[old] = -1
        self._region_pop[region_of(old)] -= 1
        self._fwd[gva] = new_gpa
        self._rev[new_gpa] = gva
        self._region_pop[region_of(new_gpa)] += 1

    def translate(self, gva: int) -> int:
        if gva < 0 or gva >= len(self._fwd) or self._fwd[gva] == -1:
            raise GuestUnmapped(f"gva {gva} not mapped")
        return int(self._fwd[gva])

    def translate_many(self, gvas: np.ndarray) -> np.ndarray:
        """Vectorized translate; raises GuestUnmapped naming the first bad page."""
        if len(gvas) == 0:
            return np.empty(0, dtype=np.int64)
        if gvas.min() < 0 or gvas.max() >= len(self._fwd):
            bad = gvas[(gvas < 0) | (gvas >= len(self._fwd))][0]
            raise GuestUnmapped(f"gva {int(bad)} not mapped")
        gpas = self._fwd[gvas]
        if (gpas == -1).any():
            bad = gvas[gpas == -1][0]
            raise GuestUnmapped(f"gva {int(bad)} not mapped")
        return gpas

    def is_mapped(self, gva: int) -> bool:
        return 0 <= gva < len(self._fwd) and self._fwd[gva] != -1

    def mapped_mask(self, gvas: np.ndarray) -> np.ndarray:
        """Per-element is_mapped, no raising (out-of-range counts as unmapped)."""
        gvas = np.asarray(gvas, dtype=np.int64)
        ok = (gvas >= 0) & (gvas < len(self._fwd))
        out = np.zeros(len(gvas), dtype=bool)
        out[ok] = self._fwd[gvas[ok]] != -1
        return out

    def gpa_in_use(self, gpa: int) -> bool:
        return 0 <= gpa < len(self._rev) and self._rev[gpa] != -1

    def region_population(self, region: int) -> int:
        if region < 0 or region >= len(self._region_pop):
            return 0
        return int(self._region_pop[region])

    def region_populations(self, n_regions: int) -> np.ndarray:
        """Mapped-page counts for guest-local regions 0..n_regions-1."""
        out = np.zeros(n_regions, dtype=np.int64)
        n = min(n_regions, len(self._region_pop))
        out[:n] = self._region_pop[:n]
        return out

    def mapped_gvas(self) -> np.ndarray:
        return np.nonzero(self._fwd != -1)[0].astype(np.int64)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    # Standard 64-bit finalizer; wraparound is intentional.
    with np.errstate(over="ignore"):
        z = (x + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


class PageContents:
    """One 64-bit token per GPA base page standing in for page data.

    The token of an originally-mapped page is a seeded hash of its first
    GVA, so data integrity over any remap sequence is an exact check.
    """

    def __init__(self, gpa_capacity: int, seed: int = 0):
        self.seed = seed
        self._tokens = np.zeros(gpa_capacity, dtype=np.uint64)

    @staticmethod
    def token_for(gva: int | np.ndarray, seed: int) -> np.ndarray:
        return _splitmix64(np.asarray(gva, dtype=np.uint64) ^ np.uint64(seed))

    def fill_linear(self, n_pages: int):
        # Identity-mapped start: token at gpa i derives from gva i.
        self._tokens[:n_pages] = self.token_for(np.arange(n_pages), self.seed)

    def _ensure(self, gpa: int):
        if gpa >= len(self._tokens):
            grown = np.zeros(max(gpa + 1, 2 * len(self._tokens)), dtype=np.uint64)
            grown[: len(self._tokens)] = self._tokens
            self._tokens = grown

    def read(self, gpa: int) -> int:
        self._ensure(gpa)
        return int(self._tokens[gpa])

    def write(self, gpa: int, token: int):
        self._ensure(gpa)
        self._tokens[gpa] = np.uint64(token)

    def copy_page(self, old_gpa: int, new_gpa: int):
        self._ensure(max(old_gpa, new_gpa))
        self._tokens[new_gpa] = self._tokens[old_gpa]


@dataclass(frozen=True)
class Tier:
    name: str
    role: str  # "near" or "far"
    capacity_bytes: int
    latency_ns: float

    @property
    def capacity_frames(self) -> int:
        return self.capacity_bytes // REGION_BYTES


@dataclass(frozen=True)
class TierPair:
    near: Tier
    far: Tier

    def __post_init__(self):
        if self.near.role != "near" or self.far.role != "far":
            raise ConfigError("tier pair needs exactly one near and one far tier")

    def __getitem__(self, idx: int) -> Tier:
        return (self.near, self.far)[idx]


NEAR, FAR = 0, 1


class FrameAllocator:
    """Free lists of 2 MB host frames, one per tier; lowest frame id first."""

    def __init__(self, tiers: TierPair):
        self.tiers = tiers
        self._free = [
            list(range(tiers.near.capacity_frames)),
            list(range(tiers.far.capacity_frames)),
        ]
        for heap in self._free:
            heapq.heapify(heap)
        self.allocated = [0, 0]
        self.freed = [0, 0]

    def free_frames(self, tier_idx: int) -> int:
        return len(self._free[tier_idx])

    def alloc_frame(self, tier_idx: int) -> int:
        if not self._free[tier_idx]:
            raise OutOfMemory(f"tier {self.tiers[tier_idx].name} has no free frame")
        self.allocated[tier_idx] += 1
        return heapq.heappop(self._free[tier_idx])

    def release_frame(self, tier_idx: int, frame: int):
        self.freed[tier_idx] += 1
        heapq.heappush(self._free[tier_idx], frame)

    def placed_count(self, tier_idx: int) -> int:
        return self.allocated[tier_idx] - self.freed[tier_idx]


class ConsolidationReserve:
    """Bump cursor over a contiguous, initially-unmapped GPA region range.

    Consolidation targets are carved from here one 2 MB region at a time;
    regions are consumed permanently (no reuse after the hot pages move in).
    """

    def __init__(self, start_region: int, n_regions: int):
        self.start_region = start_region
        self.n_regions = n_regions
        self._next = 0

    @property
    def consumed(self) -> int:
        return self._next

    def next_region(self, gpt: GuestPageTable) -> int:
        """Peek the next fresh region without consuming it."""
        if self._next >= self.n_regions:
            raise OutOfMemory("consolidation reserve exhausted")
        region = self.start_region + self._next
        if gpt.region_population(region) != 0:
            raise ConfigError(f"reserve region {region} is not empty")
        return region

    def consume(self):
        self._next += 1

    def alloc_region(self, gpt: GuestPageTable) -> int:
        region = self.next_region(gpt)
        self.consume()
        return region


@dataclass
class Translation:
    frame: int
    offset_pages: int
    tier_idx: int


class HostTable:
    """Placement of GPA huge regions onto tier frames.

    Region ids are global across guests (the driver assigns each guest a
    disjoint window), which keeps tier lookups a single array index.
    """

    def __init__(self, n_regions: int):
        self.n_regions = n_regions
        self._tier = np.full(n_regions, -1, dtype=np.int8)
        self._frame = np.full(n_regions, -1, dtype=np.int64)

    def is_placed(self, region: int) -> bool:
        return self._tier[region] != -1

    def place(self, region: int, tier_idx: int, frame: int):
        if self._tier[region] != -1:
            raise AlreadyMapped(f"region {region} already placed")
        self._tier[region] = tier_idx
        self._frame[region] = frame

    def placement(self, region: int) -> tuple[int, int]:
        if region < 0 or region >= self.n_regions or self._tier[region] == -1:
            raise HostUnmapped(f"region {region} not placed")
        return int(self._tier[region]), int(self._frame[region])

    def move(self, region: int, tier_idx: int, frame: int):
        if self._tier[region] == -1:
            raise HostUnmapped(f"region {region} not placed")
        self._tier[region] = tier_idx
        self._frame[region] = frame

    def tier_of_regions(self, regions: np.ndarray) -> np.ndarray:
        return self._tier[regions]

    def regions_in(self, tier_idx: int) -> np.ndarray:
        return np.nonzero(self._tier == tier_idx)[0]

    def count_in(self, tier_idx: int) -> int:
        return int((self._tier == tier_idx).sum())


def full_translate(gpt: GuestPageTable, host: HostTable, gva: int,
                   region_offset: int = 0) -> Translation:
    """Two-level walk: GVA -> GPA via the guest table, then the GPA's huge
    region -> (tier, frame) via the host table.

    `region_offset` shifts guest-local regions into the global host keyspace.
    """
    gpa = gpt.translate(gva)
    tier_idx, frame = host.placement(region_of(gpa) + region_offset)
    return Translation(frame=frame, offset_pages=gpa % PAGES_PER_REGION, tier_idx=tier_idx)


def migrate(host: HostTable, alloc: FrameAllocator, region: int, to_tier: int) -> tuple[int, int]:
    """Move one placed region to `to_tier`; returns (from_tier, new_frame).

    The destination must have a free frame: policies demote before they
    promote, so exhaustion here signals a policy bug.
    """
    from_tier, old_frame = host.placement(region)
    if from_tier == to_tier:
        raise DestinationFull(f"region {region} already in tier {to_tier}")
    if alloc.free_frames(to_tier) == 0:
        raise DestinationFull(f"no free frame in tier {to_tier}")
    frame = alloc.alloc_frame(to_tier)
    host.move(region, to_tier, frame)
    alloc.release_frame(from_tier, old_frame)
    return from_tier, frame
