"""Per-epoch guest access traces: synthetic generators and file ingest.

All generators are pure functions of (spec, epoch): the static shape of a
workload (which pages are hot, the key->page shuffle) is derived from
rng_seed alone, per-epoch sampling from (rng_seed, epoch).
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, ParseError
from .memmodel import PAGES_PER_REGION

# Reads and writes count equally toward hotness; the split only flavors traces.
WRITE_FRACTION = 0.25

_STATIC_STREAM = 0  # rng substream for workload shape
_EPOCH_STREAM = 1  # rng substream for per-epoch draws


class WorkloadKind(Enum):
    UNIFORM_HOT = "uniform_hot"
    GAUSSIAN_KV = "gaussian_kv"
    MASIM_SKEW = "masim_skew"
    SCATTER_SET = "scatter_set"


@dataclass(frozen=True)
class WorkloadSpec:
    kind: WorkloadKind
    rss_pages: int
    accesses_per_epoch: int
    rng_seed: int
    hot_fraction: float = 1.0
    pages_hot_per_region: int = 1
    gaussian_sigma: float = 0.0
    # explicit (region, pages-hot-in-region) script, ScatterSet only
    scatter_set: tuple = ()

    def __post_init__(self):
        if self.accesses_per_epoch <= 0:
            raise ConfigError("accesses_per_epoch must be > 0")
        if self.rss_pages < PAGES_PER_REGION:
            raise ConfigError("rss_pages must cover at least one huge region")
        if not 0.0 <= self.hot_fraction <= 1.0:
            raise ConfigError("hot_fraction must be in [0, 1]")
        if self.kind is WorkloadKind.MASIM_SKEW:
            if not 1 <= self.pages_hot_per_region <= PAGES_PER_REGION:
                raise ConfigError("pages_hot_per_region must be in [1, 512]")
            need = self.hot_region_count() * self.pages_hot_per_region
            if self.accesses_per_epoch < need:
                raise ConfigError(
                    f"accesses_per_epoch {self.accesses_per_epoch} cannot cover "
                    f"{need} hot pages"
                )
        if self.kind is WorkloadKind.GAUSSIAN_KV and self.gaussian_sigma <= 0:
            raise ConfigError("gaussian_sigma must be > 0 for gaussian_kv")
        if self.kind is WorkloadKind.SCATTER_SET:
            if not self.scatter_set:
                raise ConfigError("scatter_set requires at least one (region, pages) entry")
            regions = [r for r, _ in self.scatter_set]
            if len(set(regions)) != len(regions):
                raise ConfigError("scatter_set regions must be distinct")
            for r, n in self.scatter_set:
                if not 0 <= r < self.full_regions():
                    raise ConfigError(f"scatter_set region {r} outside rss")
                if not 1 <= n <= PAGES_PER_REGION:
                    raise ConfigError(f"scatter_set page count {n} must be in [1, 512]")
            need = sum(n for _, n in self.scatter_set)
            if self.accesses_per_epoch < need:
                raise ConfigError(
                    f"accesses_per_epoch {self.accesses_per_epoch} cannot cover "
                    f"{need} scripted hot pages"
                )

    def full_regions(self) -> int:
        return self.rss_pages // PAGES_PER_REGION

    def hot_region_count(self) -> int:
        return max(1, round(self.hot_fraction * self.full_regions()))

    def _static_rng(self) -> np.random.Generator:
        return np.random.default_rng([self.rng_seed, _STATIC_STREAM])

    def hot_pages(self) -> np.ndarray:
        """The fixed hot page set (sorted GVA page indices); empty for GaussianKV."""
        rng = self._static_rng()
        if self.kind is WorkloadKind.UNIFORM_HOT:
            n_hot = max(1, round(self.hot_fraction * self.rss_pages))
            return np.sort(rng.permutation(self.rss_pages)[:n_hot]).astype(np.int64)
        if self.kind is WorkloadKind.MASIM_SKEW:
            regions = rng.choice(self.full_regions(), size=self.hot_region_count(),
                                 replace=False)
            pages = [
                r * PAGES_PER_REGION
                + rng.choice(PAGES_PER_REGION, size=self.pages_hot_per_region,
                             replace=False)
                for r in np.sort(regions)
            ]
            return np.sort(np.concatenate(pages)).astype(np.int64)
        if self.kind is WorkloadKind.SCATTER_SET:
            pages = [
                r * PAGES_PER_REGION
                + rng.choice(PAGES_PER_REGION, size=n, replace=False)
                for r, n in self.scatter_set
            ]
            return np.sort(np.concatenate(pages)).astype(np.int64)
        return np.empty(0, dtype=np.int64)

    def key_placement(self) -> np.ndarray:
        """Shuffled key -> page table for GaussianKV (allocator scatter stand-in)."""
        return self._static_rng().permutation(self.rss_pages).astype(np.int64)


@dataclass
class AccessTrace:
    epoch: int
    gvas: np.ndarray  # int64 page indices, trace order
    is_write: np.ndarray  # bool, parallel to gvas

    def __len__(self) -> int:
        return len(self.gvas)

    def distinct_pages(self) -> np.ndarray:
        return np.unique(self.gvas)


def generate_epoch(spec: WorkloadSpec, epoch: int) -> AccessTrace:
    """One epoch of accesses; bit-for-bit reproducible from (spec, epoch)."""
    rng = np.random.default_rng([spec.rng_seed, _EPOCH_STREAM, epoch])
    n = spec.accesses_per_epoch

    if spec.kind is WorkloadKind.GAUSSIAN_KV:
        placement = spec.key_placement()
        keys = np.rint(rng.normal(spec.rss_pages / 2, spec.gaussian_sigma, size=n))
        keys = keys.astype(np.int64) % spec.rss_pages  # wrap, don't pile at edges
        gvas = placement[keys]
    elif spec.kind is WorkloadKind.UNIFORM_HOT:
        hot = spec.hot_pages()
        gvas = hot[rng.integers(0, len(hot), size=n)]
    else:
        # MasimSkew / ScatterSet: visit every hot page once so per-region
        # distinct counts are exact, then fill uniformly from the hot set.
        hot = spec.hot_pages()
        fill = hot[rng.integers(0, len(hot), size=n - len(hot))]
        gvas = rng.permutation(np.concatenate([hot, fill]))

    is_write = rng.random(n) < WRITE_FRACTION
    return AccessTrace(epoch=epoch, gvas=gvas.astype(np.int64), is_write=is_write)


def ingest_trace(path) -> list[AccessTrace]:
    """Parse a trace file: one `<epoch> <gva_page> <R|W>` per line, `#` comments.

    Returns traces sorted by epoch, file order preserved within an epoch.
    Address validity is the simulator's problem, not the parser's.
    """
    by_epoch: dict[int, tuple[list, list]] = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(line_no, f"expected 'epoch gva R|W', got {raw.strip()!r}")
            try:
                epoch, gva = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(line_no, f"non-integer field in {raw.strip()!r}") from None
            if epoch < 0 or gva < 0:
                raise ParseError(line_no, "epoch and gva must be non-negative")
            op = parts[2].upper()
            if op not in ("R", "W"):
                raise ParseError(line_no, f"op must be R or W, got {parts[2]!r}")
            gvas, writes = by_epoch.setdefault(epoch, ([], []))
            gvas.append(gva)
            writes.append(op == "W")
    return [
        AccessTrace(
            epoch=e,
            gvas=np.array(by_epoch[e][0], dtype=np.int64),
            is_write=np.array(by_epoch[e][1], dtype=bool),
        )
        for e in sorted(by_epoch)
    ]


def write_trace(path, traces) -> None:
    """Inverse of ingest_trace (sans comments)."""
    with open(path, "w") as fh:
        for tr in traces:
            for gva, w in zip(tr.gvas.tolist(), tr.is_write.tolist()):
                fh.write(f"{tr.epoch} {gva} {'W' if w else 'R'}\n")
