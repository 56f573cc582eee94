"""Hotness tracking: guest base-page bitmaps, host huge-region view, skew stats.

The guest sees accesses at 4 KB granularity (idle-page-tracking style bitmap
per epoch); the host sees the same trace collapsed to 2 MB GPA regions. A
base page is hot when it shows up in at least k of the last W epoch bitmaps.
"""

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyReport, UnmappedAddress
from .memmodel import PAGES_PER_REGION, GuestPageTable, PageSize


@dataclass
class AccessBitmap:
    epoch: int
    granularity: PageSize
    bits: np.ndarray  # sorted unique page (Base4K/GVA) or region (Huge2M/GPA) indices

    def __len__(self) -> int:
        return len(self.bits)

    def __contains__(self, idx: int) -> bool:
        pos = np.searchsorted(self.bits, idx)
        return pos < len(self.bits) and self.bits[pos] == idx


def scan_epoch(trace, gpt: GuestPageTable, region_offset: int = 0):
    """Replay one epoch's trace, returning (guest bitmap, host bitmap).

    Bits are fresh per call — the epoch-start clear is implicit.
    `region_offset` shifts host bits into the global region keyspace.
    """
    gvas = np.unique(trace.gvas)
    mapped = gpt.mapped_mask(gvas)
    if not mapped.all():
        raise UnmappedAddress(int(gvas[~mapped][0]))
    gpas = gpt.translate_many(gvas)
    regions = np.unique(gpas // PAGES_PER_REGION) + region_offset
    return (
        AccessBitmap(trace.epoch, PageSize.BASE_4K, gvas),
        AccessBitmap(trace.epoch, PageSize.HUGE_2M, regions),
    )


def region_access_counts(trace, gpt: GuestPageTable, n_regions: int,
                         region_offset: int = 0) -> np.ndarray:
    """Host-visible access counts per global region for one epoch's trace."""
    counts = np.zeros(n_regions, dtype=np.int64)
    if len(trace.gvas) == 0:
        return counts
    regions = gpt.translate_many(trace.gvas) // PAGES_PER_REGION + region_offset
    counts += np.bincount(regions, minlength=n_regions)[:n_regions]
    return counts


@dataclass
class HotnessReport:
    """Hot base pages over a window, grouped by their current GPA region.

    hot_base_pages carries the scattered-hot-page list handed to the
    consolidation filter; it is ordered by (region, gpa) so downstream
    batching is deterministic.
    """

    window: tuple  # (first_epoch, last_epoch)
    hot_base_pages: np.ndarray  # GVA page indices, (region, gpa)-ordered
    hot_gpas: np.ndarray  # parallel GPA page indices
    region_ids: np.ndarray  # sorted regions holding >= 1 hot page
    hot_counts: np.ndarray  # parallel hot-base-page counts

    def __post_init__(self):
        assert len(self.hot_base_pages) == len(self.hot_gpas)
        assert len(self.region_ids) == len(self.hot_counts)
        assert self.hot_counts.sum() == len(self.hot_base_pages)
        assert ((self.hot_counts >= 1) & (self.hot_counts <= PAGES_PER_REGION)).all()

    @property
    def hot_regions(self) -> np.ndarray:
        # one hot base page is enough to make its huge region hot
        return self.region_ids

    def count_of(self, region: int) -> int:
        pos = np.searchsorted(self.region_ids, region)
        if pos < len(self.region_ids) and self.region_ids[pos] == region:
            return int(self.hot_counts[pos])
        return 0

    def pages_by_region(self):
        """Yields (region, gva array, gpa array) in ascending region order."""
        regions = self.hot_gpas // PAGES_PER_REGION
        bounds = np.searchsorted(regions, self.region_ids)
        bounds = np.append(bounds, len(regions))
        for i, r in enumerate(self.region_ids):
            sl = slice(bounds[i], bounds[i + 1])
            yield int(r), self.hot_base_pages[sl], self.hot_gpas[sl]


def classify_hot(bitmaps, k_of_w: int, gpt: GuestPageTable) -> HotnessReport:
    """k-of-W hotness over the last W guest bitmaps (W = len(bitmaps))."""
    w = len(bitmaps)
    if w < 1:
        raise ConfigError("need at least one epoch bitmap")
    if not 1 <= k_of_w <= w:
        raise ConfigError(f"k_of_w {k_of_w} outside [1, {w}]")
    pages, presence = np.unique(
        np.concatenate([bm.bits for bm in bitmaps]), return_counts=True
    )
    hot = pages[presence >= k_of_w]
    gpas = gpt.translate_many(hot) if len(hot) else np.empty(0, dtype=np.int64)
    regions = gpas // PAGES_PER_REGION
    order = np.lexsort((gpas, regions))
    hot, gpas, regions = hot[order], gpas[order], regions[order]
    region_ids, counts = np.unique(regions, return_counts=True)
    return HotnessReport(
        window=(bitmaps[0].epoch, bitmaps[-1].epoch),
        hot_base_pages=hot,
        hot_gpas=gpas,
        region_ids=region_ids,
        hot_counts=counts,
    )


@dataclass
class SkewnessCDF:
    """points[k-1] = fraction of hot regions with <= k distinct hot base pages."""

    points: np.ndarray  # shape (512,)

    def __post_init__(self):
        assert len(self.points) == PAGES_PER_REGION
        assert (np.diff(self.points) >= 0).all()
        assert self.points[-1] == 1.0

    def at(self, k: int) -> float:
        return float(self.points[k - 1])


def cdf_from_counts(counts: np.ndarray) -> SkewnessCDF:
    counts = np.asarray(counts)
    counts = counts[counts >= 1]
    if len(counts) == 0:
        raise EmptyReport("no regions with hot pages")
    sorted_counts = np.sort(counts)
    ks = np.arange(1, PAGES_PER_REGION + 1)
    points = np.searchsorted(sorted_counts, ks, side="right") / len(sorted_counts)
    return SkewnessCDF(points=points)


def skewness_cdf(report: HotnessReport) -> SkewnessCDF:
    return cdf_from_counts(report.hot_counts)


def write_cdf_csv(cdf: SkewnessCDF, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "fraction"])
        for k in range(1, PAGES_PER_REGION + 1):
            w.writerow([k, format(cdf.at(k), ".9g")])


def skewed_regions(report: HotnessReport, skew_threshold: int) -> np.ndarray:
    """Regions whose hot-base-page count is in [1, skew_threshold) — strict."""
    if not 1 <= skew_threshold <= PAGES_PER_REGION:
        raise ConfigError(f"skew_threshold {skew_threshold} outside [1, 512]")
    return report.region_ids[report.hot_counts < skew_threshold]


class HostHotnessTracker:
    """Rolling host-granularity view the tiering policies consume.

    Tracks, per global region: access counts over the last W epochs, the
    last epoch each region was accessed, and a k-of-W region hotness mask.
    """

    def __init__(self, n_regions: int, window: int, k_of_w: int):
        if window < 1 or not 1 <= k_of_w <= window:
            raise ConfigError("need window >= 1 and 1 <= k_of_w <= window")
        self.n_regions = n_regions
        self.window = window
        self.k_of_w = k_of_w
        self._epochs = deque(maxlen=window)  # per-epoch count vectors
        self.last_access = np.full(n_regions, -1, dtype=np.int64)
        self.current_epoch = -1

    def observe(self, epoch: int, counts: np.ndarray):
        """Fold in one epoch's per-region access counts (global region ids)."""
        assert len(counts) == self.n_regions
        self._epochs.append(counts.copy())
        self.last_access[counts > 0] = epoch
        self.current_epoch = epoch

    def window_counts(self) -> np.ndarray:
        if not self._epochs:
            return np.zeros(self.n_regions, dtype=np.int64)
        return np.sum(self._epochs, axis=0)

    def hot_mask(self) -> np.ndarray:
        """Region present in >= k of the last W epochs."""
        if not self._epochs:
            return np.zeros(self.n_regions, dtype=bool)
        presence = np.sum([c > 0 for c in self._epochs], axis=0)
        return presence >= self.k_of_w

    def accessed_now(self) -> np.ndarray:
        if not self._epochs:
            return np.zeros(self.n_regions, dtype=bool)
        return self._epochs[-1] > 0

    def idle_age(self) -> np.ndarray:
        """Epochs since last access; never-accessed regions get a large age."""
        age = np.where(
            self.last_access >= 0,
            self.current_epoch - self.last_access,
            self.current_epoch + 1,
        )
        return age.astype(np.int64)
