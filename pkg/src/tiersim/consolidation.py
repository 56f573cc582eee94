"""Hot-page consolidation: gather scattered hot base pages into fresh regions.

Regions holding fewer than the consolidation limit (CL) hot base pages are
treated as wastefully hot at host granularity; their hot pages are copied
into freshly allocated 2 MB-aligned GPA regions and the guest mappings are
rewired, so one densely hot region replaces many sparsely hot ones. The
host never sees any of it — only the GPA-side hotness landscape changes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OutOfMemory
from .memmodel import (
    PAGES_PER_REGION,
    ConsolidationReserve,
    GuestPageTable,
    PageContents,
)
from .telemetry import HotnessReport

MAX_CONSOL = PAGES_PER_REGION  # pages accepted per invocation

DEFAULT_PER_PAGE_US = 9.0  # copy + remap + TLB flush, jointly


def consolidation_cost(pages: int, per_page_us: float = DEFAULT_PER_PAGE_US) -> float:
    """Modeled wall time in milliseconds for consolidating `pages` base pages."""
    if pages < 0:
        raise ConfigError("page count must be >= 0")
    return pages * per_page_us / 1000.0


@dataclass
class ConsolidationPlan:
    """Hot pages from under-CL regions, (region, gpa)-ordered, in <=512 chunks."""

    selected_pages: np.ndarray  # GVA page indices
    batches: list  # list of GVA np.ndarray, each 1..512 long
    source_regions: np.ndarray  # distinct regions contributing pages

    def __len__(self) -> int:
        return len(self.selected_pages)

    @property
    def empty(self) -> bool:
        return len(self.selected_pages) == 0


def filter_scattered(report: HotnessReport, cl: int,
                     exclude_regions=()) -> ConsolidationPlan:
    """Pick every hot base page living in a region with 1 <= hot count < cl.

    Strictly less-than: a region with exactly cl hot pages stays put.
    Regions in `exclude_regions` (previous consolidation targets) never
    qualify as sources again.
    """
    if not 1 <= cl <= PAGES_PER_REGION:
        raise ConfigError(f"consolidation limit {cl} outside [1, 512]")
    exclude = set(int(r) for r in exclude_regions)
    eligible = set(
        int(r) for r, c in zip(report.region_ids, report.hot_counts)
        if c < cl and int(r) not in exclude
    )
    page_regions = report.hot_gpas // PAGES_PER_REGION
    mask = np.isin(page_regions, np.array(sorted(eligible), dtype=np.int64))
    selected = report.hot_base_pages[mask]  # already (region, gpa)-ordered
    batches = [selected[i:i + MAX_CONSOL] for i in range(0, len(selected), MAX_CONSOL)]
    return ConsolidationPlan(
        selected_pages=selected,
        batches=batches,
        source_regions=np.unique(page_regions[mask]),
    )


@dataclass
class ConsolidationStats:
    pages_moved: int = 0
    regions_created: int = 0
    modeled_time_ms: float = 0.0
    invocations: int = 0
    failures: int = 0

    def merge(self, other: "ConsolidationStats"):
        self.pages_moved += other.pages_moved
        self.regions_created += other.regions_created
        self.modeled_time_ms += other.modeled_time_ms
        self.invocations += other.invocations
        self.failures += other.failures


class Consolidator:
    """Owns one guest's consolidation state: reserve, targets, stats, log.

    `backing_hook(region)`, when set, is called before any page moves so the
    caller can back the fresh region (host-side frame); if it raises
    OutOfMemory the batch is skipped with no mutation anywhere.
    """

    def __init__(self, gpt: GuestPageTable, reserve: ConsolidationReserve,
                 contents: PageContents, per_page_us: float = DEFAULT_PER_PAGE_US,
                 backing_hook=None, log_batches: int = 2):
        self.gpt = gpt
        self.reserve = reserve
        self.contents = contents
        self.per_page_us = per_page_us
        self.backing_hook = backing_hook
        self.log_batches = log_batches
        self.target_regions: set[int] = set()
        self.stats = ConsolidationStats()
        self.events: list[str] = []
        self._batches_seen = 0

    def plan(self, report: HotnessReport, cl: int) -> ConsolidationPlan:
        return filter_scattered(report, cl, exclude_regions=self.target_regions)

    def consolidate(self, plan: ConsolidationPlan) -> ConsolidationStats:
        """Run every batch of the plan; returns the delta stats."""
        delta = ConsolidationStats()
        for batch in plan.batches:
            delta.merge(self.consolidate_batch(batch))
        return delta

    def consolidate_batch(self, batch: np.ndarray) -> ConsolidationStats:
        if not 1 <= len(batch) <= MAX_CONSOL:
            raise ConfigError(f"batch size {len(batch)} outside [1, {MAX_CONSOL}]")
        log = self._batches_seen < self.log_batches
        self._batches_seen += 1
        delta = ConsolidationStats(invocations=1)
        try:
            region = self.reserve.next_region(self.gpt)
            if self.backing_hook is not None:
                self.backing_hook(region)
            self.reserve.consume()
        except OutOfMemory:
            # allocation precedes any copy, so failure mutates nothing
            delta.failures = 1
            if log:
                self.events.append(f"enomem batch_size={len(batch)}")
            self.stats.merge(delta)
            return delta
        if log:
            self.events.append(f"alloc region={region}")
        for i, gva in enumerate(batch.tolist()):
            old_gpa = self.gpt.translate(gva)
            new_gpa = region * PAGES_PER_REGION + i
            if log:
                self.events.append(f"lock gva={gva}")
                self.events.append(f"copy gpa={old_gpa} -> gpa={new_gpa}")
            self.contents.copy_page(old_gpa, new_gpa)
            self.gpt.remap(gva, new_gpa)
            if log:
                self.events.append(f"remap gva={gva} -> gpa={new_gpa}")
                self.events.append(f"free gpa={old_gpa}")
                self.events.append(f"flush_tlb gva={gva}")
                self.events.append(f"unlock gva={gva}")
        self.target_regions.add(region)
        delta.pages_moved = len(batch)
        delta.regions_created = 1
        delta.modeled_time_ms = consolidation_cost(len(batch), self.per_page_us)
        self.stats.merge(delta)
        return delta

    def run(self, report: HotnessReport, cl: int) -> ConsolidationStats:
        """filter + consolidate in one step (the per-epoch entry point)."""
        return self.consolidate(self.plan(report, cl))
