"""Scenario orchestration: setup, epoch loop, metrics, report exports.

Epoch order is fixed: per guest (in index order) generate the trace, scan
it, classify hotness, consolidate if scheduled; then one global tiering
step; then metrics. Far-access fractions are measured at scan time, i.e.
against the placements the accesses actually hit — this epoch's migrations
pay off starting next epoch.
"""

import json
import math
import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .consolidation import DEFAULT_PER_PAGE_US, Consolidator
from .errors import ConfigError, InvariantViolation
from .memmodel import (
    FAR,
    NEAR,
    PAGE_BYTES,
    PAGES_PER_REGION,
    REGION_BYTES,
    ConsolidationReserve,
    FrameAllocator,
    GuestPageTable,
    HostTable,
    PageContents,
    PageSize,
    Tier,
    TierPair,
    walk_cost,
)
from .telemetry import (
    HostHotnessTracker,
    classify_hot,
    cdf_from_counts,
    region_access_counts,
    scan_epoch,
    skewness_cdf,
    write_cdf_csv,
)
from .errors import EmptyReport
from .tiering import PolicyParams, PolicyVariant, TieringEngine
from .workload import AccessTrace, WorkloadKind, WorkloadSpec, generate_epoch, ingest_trace


def _derive_seed(*parts) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# scenario configuration


@dataclass(frozen=True)
class TelemetryParams:
    window: int = 4
    k_of_w: int = 2
    skew_threshold: int = 64

    def __post_init__(self):
        if self.window < 1 or not 1 <= self.k_of_w <= self.window:
            raise ConfigError("telemetry needs window >= 1, 1 <= k_of_w <= window")
        if not 1 <= self.skew_threshold <= PAGES_PER_REGION:
            raise ConfigError("skew_threshold must be in [1, 512]")


@dataclass(frozen=True)
class PageSizeConfig:
    guest: PageSize = PageSize.BASE_4K
    host: PageSize = PageSize.HUGE_2M
    wss: str = "64GB"

    def cost(self) -> float:
        return walk_cost(self.guest, self.host, self.wss)


@dataclass(frozen=True)
class CostParams:
    per_page_us: float = DEFAULT_PER_PAGE_US
    fold_consolidation: bool = False  # charge consolidation time to the proxy
    fold_migration: bool = False  # charge migration traffic to the proxy
    migration_ns_per_byte: float = 0.0
    log_batches: int = 2

    def __post_init__(self):
        if self.per_page_us < 0 or self.migration_ns_per_byte < 0:
            raise ConfigError("cost rates must be >= 0")


@dataclass(frozen=True)
class GuestConfig:
    workload: WorkloadSpec | None = None
    trace_file: str | None = None
    trace_rss_pages: int = 0  # mapped pages for trace-driven guests
    gpac: bool = False
    cl: int = 64
    consolidation_epoch: int = 5
    consolidation_period: int = 0  # 0 = one-shot at consolidation_epoch
    reserve_regions: int | None = None  # None = 25% of the guest's regions
    start_tier: str = "far"

    def __post_init__(self):
        if (self.workload is None) == (self.trace_file is None):
            raise ConfigError("guest needs exactly one of workload or trace_file")
        if self.trace_file is not None and self.trace_rss_pages < PAGES_PER_REGION:
            raise ConfigError("trace-driven guest needs rss_pages >= 512")
        if not 1 <= self.cl <= PAGES_PER_REGION:
            raise ConfigError(f"cl {self.cl} outside [1, 512]")
        if self.consolidation_epoch < 0 or self.consolidation_period < 0:
            raise ConfigError("consolidation schedule must be >= 0")
        if self.reserve_regions is not None and self.reserve_regions < 0:
            raise ConfigError("reserve_regions must be >= 0")
        if self.start_tier not in ("far", "near"):
            raise ConfigError("start_tier must be 'far' or 'near'")

    @property
    def rss_pages(self) -> int:
        return self.workload.rss_pages if self.workload else self.trace_rss_pages

    @property
    def initial_regions(self) -> int:
        return -(-self.rss_pages // PAGES_PER_REGION)

    @property
    def reserve_count(self) -> int:
        if self.reserve_regions is not None:
            return self.reserve_regions
        return -(-self.initial_regions // 4)

    def scheduled(self, epoch: int) -> bool:
        if not self.gpac or epoch < self.consolidation_epoch:
            return False
        if self.consolidation_period == 0:
            return epoch == self.consolidation_epoch
        return (epoch - self.consolidation_epoch) % self.consolidation_period == 0


@dataclass(frozen=True)
class Scenario:
    guests: tuple
    tiers: TierPair
    policy: PolicyParams
    epochs: int
    rng_seed: int = 0
    telemetry: TelemetryParams = TelemetryParams()
    page_sizes: PageSizeConfig = PageSizeConfig()
    costs: CostParams = CostParams()
    base_ns: float = 20.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.guests:
            raise ConfigError("scenario needs at least one guest")
        if self.base_ns < 0:
            raise ConfigError("base_ns must be >= 0")
        total_frames = self.tiers.near.capacity_frames + self.tiers.far.capacity_frames
        need = sum(g.initial_regions for g in self.guests)
        if need > total_frames:
            raise ConfigError(
                f"guest RSS needs {need} region frames, tiers provide {total_frames}"
            )
        self.page_sizes.cost()  # refuse unknown page-size configs up front


# ---------------------------------------------------------------------------
# scenario file parsing (JSON; unknown keys are errors)


def _take(doc: dict, allowed: set, ctx: str) -> None:
    if not isinstance(doc, dict):
        raise ConfigError(f"{ctx}: expected an object")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{ctx}: unknown keys {sorted(unknown)}")


def _tier_from(doc: dict, role: str) -> Tier:
    _take(doc, {"name", "capacity_regions", "capacity_bytes", "latency_ns"}, f"tiers.{role}")
    if ("capacity_regions" in doc) == ("capacity_bytes" in doc):
        raise ConfigError(f"tiers.{role}: give exactly one of capacity_regions/capacity_bytes")
    cap = (doc["capacity_regions"] * REGION_BYTES if "capacity_regions" in doc
           else doc["capacity_bytes"])
    if cap <= 0:
        raise ConfigError(f"tiers.{role}: capacity must be positive")
    if doc.get("latency_ns", 1.0) <= 0:
        raise ConfigError(f"tiers.{role}: latency_ns must be positive")
    default_latency = 100.0 if role == "near" else 300.0
    return Tier(
        name=doc.get("name", role),
        role=role,
        capacity_bytes=int(cap),
        latency_ns=float(doc.get("latency_ns", default_latency)),
    )


_PAGE_SIZE_NAMES = {"4K": PageSize.BASE_4K, "2M": PageSize.HUGE_2M}


def _workload_from(doc: dict, guest_idx: int, scenario_seed: int) -> WorkloadSpec:
    _take(doc, {"kind", "rss_pages", "accesses_per_epoch", "hot_fraction",
                "pages_hot_per_region", "gaussian_sigma", "scatter_set",
                "rng_seed"}, f"guests[{guest_idx}].workload")
    for req in ("kind", "rss_pages", "accesses_per_epoch"):
        if req not in doc:
            raise ConfigError(f"guests[{guest_idx}].workload: missing {req}")
    try:
        kind = WorkloadKind(doc["kind"])
    except ValueError:
        raise ConfigError(f"guests[{guest_idx}].workload: unknown kind {doc['kind']!r}") from None
    scatter = tuple(tuple(pair) for pair in doc.get("scatter_set", ()))
    return WorkloadSpec(
        kind=kind,
        rss_pages=int(doc["rss_pages"]),
        accesses_per_epoch=int(doc["accesses_per_epoch"]),
        rng_seed=int(doc.get("rng_seed", _derive_seed(scenario_seed, guest_idx))),
        hot_fraction=float(doc.get("hot_fraction", 1.0)),
        pages_hot_per_region=int(doc.get("pages_hot_per_region", 1)),
        gaussian_sigma=float(doc.get("gaussian_sigma", 0.0)),
        scatter_set=scatter,
    )


def _guest_from(doc: dict, guest_idx: int, scenario_seed: int) -> GuestConfig:
    _take(doc, {"workload", "trace", "gpac", "cl", "consolidation_epoch",
                "consolidation_period", "reserve_regions", "start_tier"},
          f"guests[{guest_idx}]")
    workload = trace_file = None
    trace_rss = 0
    if "workload" in doc:
        workload = _workload_from(doc["workload"], guest_idx, scenario_seed)
    if "trace" in doc:
        _take(doc["trace"], {"file", "rss_pages"}, f"guests[{guest_idx}].trace")
        trace_file = doc["trace"]["file"]
        trace_rss = int(doc["trace"]["rss_pages"])
    return GuestConfig(
        workload=workload,
        trace_file=trace_file,
        trace_rss_pages=trace_rss,
        gpac=bool(doc.get("gpac", False)),
        cl=int(doc.get("cl", 64)),
        consolidation_epoch=int(doc.get("consolidation_epoch", 5)),
        consolidation_period=int(doc.get("consolidation_period", 0)),
        reserve_regions=(None if doc.get("reserve_regions") is None
                         else int(doc["reserve_regions"])),
        start_tier=doc.get("start_tier", "far"),
    )


def scenario_from_dict(doc: dict) -> Scenario:
    _take(doc, {"rng_seed", "epochs", "policy", "tiers", "telemetry",
                "page_sizes", "costs", "base_ns", "guests"}, "scenario")
    for req in ("epochs", "tiers", "policy", "guests"):
        if req not in doc:
            raise ConfigError(f"scenario: missing {req}")
    seed = int(doc.get("rng_seed", 0))

    pol = doc["policy"]
    _take(pol, {"variant", "watermark_fraction", "scan_period", "demotion_age",
                "sample_fraction"}, "policy")
    if "variant" not in pol:
        raise ConfigError("policy: missing variant")
    try:
        variant = PolicyVariant(pol["variant"])
    except ValueError:
        raise ConfigError(f"policy: unknown variant {pol['variant']!r}") from None
    policy = PolicyParams(
        variant=variant,
        watermark_fraction=float(pol.get("watermark_fraction", 0.1)),
        scan_period=int(pol.get("scan_period", 1)),
        demotion_age=int(pol.get("demotion_age", 4)),
        sample_fraction=float(pol.get("sample_fraction", 0.125)),
        rng_seed=seed,
    )

    _take(doc["tiers"], {"near", "far"}, "tiers")
    if "near" not in doc["tiers"] or "far" not in doc["tiers"]:
        raise ConfigError("tiers: need both near and far")
    tiers = TierPair(
        near=_tier_from(doc["tiers"]["near"], "near"),
        far=_tier_from(doc["tiers"]["far"], "far"),
    )

    tele = doc.get("telemetry", {})
    _take(tele, {"window", "k_of_w", "skew_threshold"}, "telemetry")
    telemetry = TelemetryParams(
        window=int(tele.get("window", 4)),
        k_of_w=int(tele.get("k_of_w", 2)),
        skew_threshold=int(tele.get("skew_threshold", 64)),
    )

    ps = doc.get("page_sizes", {})
    _take(ps, {"guest", "host", "wss"}, "page_sizes")
    for key in ("guest", "host"):
        if key in ps and ps[key] not in _PAGE_SIZE_NAMES:
            raise ConfigError(f"page_sizes.{key}: expected one of {sorted(_PAGE_SIZE_NAMES)}")
    page_sizes = PageSizeConfig(
        guest=_PAGE_SIZE_NAMES[ps.get("guest", "4K")],
        host=_PAGE_SIZE_NAMES[ps.get("host", "2M")],
        wss=ps.get("wss", "64GB"),
    )

    co = doc.get("costs", {})
    _take(co, {"per_page_us", "fold_consolidation", "fold_migration",
               "migration_ns_per_byte", "log_batches"}, "costs")
    costs = CostParams(
        per_page_us=float(co.get("per_page_us", DEFAULT_PER_PAGE_US)),
        fold_consolidation=bool(co.get("fold_consolidation", False)),
        fold_migration=bool(co.get("fold_migration", False)),
        migration_ns_per_byte=float(co.get("migration_ns_per_byte", 0.0)),
        log_batches=int(co.get("log_batches", 2)),
    )

    if not isinstance(doc["guests"], list) or not doc["guests"]:
        raise ConfigError("guests: need a non-empty list")
    guests = tuple(_guest_from(g, i, seed) for i, g in enumerate(doc["guests"]))

    return Scenario(
        guests=guests,
        tiers=tiers,
        policy=policy,
        epochs=int(doc["epochs"]),
        rng_seed=seed,
        telemetry=telemetry,
        page_sizes=page_sizes,
        costs=costs,
        base_ns=float(doc.get("base_ns", 20.0)),
    )


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(doc)


# ---------------------------------------------------------------------------
# run state


class _GuestState:
    def __init__(self, idx: int, cfg: GuestConfig, scenario: Scenario,
                 region_offset: int, host: HostTable, alloc: FrameAllocator):
        self.idx = idx
        self.cfg = cfg
        self.region_offset = region_offset
        self.span = cfg.initial_regions + cfg.reserve_count
        gpa_capacity = self.span * PAGES_PER_REGION
        self.gpt = GuestPageTable.linear(cfg.rss_pages, gpa_capacity=gpa_capacity)
        self.contents = PageContents(gpa_capacity,
                                     seed=_derive_seed(scenario.rng_seed, idx, 3))
        self.contents.fill_linear(cfg.rss_pages)
        reserve = ConsolidationReserve(cfg.initial_regions, cfg.reserve_count)

        def back_fresh_region(local_region, _host=host, _alloc=alloc,
                              _off=region_offset):
            # fresh consolidation targets land in the far tier until a
            # policy decides otherwise; no frame -> the batch bounces
            _host.place(local_region + _off, FAR, _alloc.alloc_frame(FAR))

        self.consolidator = Consolidator(
            self.gpt, reserve, self.contents,
            per_page_us=scenario.costs.per_page_us,
            backing_hook=back_fresh_region,
            log_batches=scenario.costs.log_batches,
        )
        self.bitmaps = deque(maxlen=scenario.telemetry.window)
        self.traces = None
        if cfg.trace_file is not None:
            self.traces = {t.epoch: t for t in ingest_trace(cfg.trace_file)}
        self.last_report = None

    def trace_for(self, epoch: int) -> AccessTrace:
        if self.traces is not None:
            return self.traces.get(
                epoch,
                AccessTrace(epoch, np.empty(0, dtype=np.int64),
                            np.empty(0, dtype=bool)),
            )
        return generate_epoch(self.cfg.workload, epoch)

    @property
    def rss_bytes(self) -> int:
        return self.cfg.rss_pages * PAGE_BYTES


@dataclass
class EpochMetrics:
    epoch: int
    guest: int
    near_resident_bytes: int
    far_access_fraction: float
    amat_ns: float
    throughput_proxy: float
    consolidation_ms: float
    promoted_bytes: int
    demoted_bytes: int
    near_regions: int
    far_regions: int


@dataclass
class RunReport:
    scenario: Scenario
    metrics: list  # EpochMetrics, ordered by (epoch, guest)
    near_utilization: list  # per epoch
    heat: list  # sparse (epoch, global_region, access_count)
    consolidation: dict  # guest -> ConsolidationStats
    cdf_final: dict  # guest -> SkewnessCDF or None
    events: list  # migration events (epoch, region, from, to)
    consolidation_log: dict = field(default_factory=dict)  # guest -> lines
    summary: dict = field(default_factory=dict)


def amat_ns(base_ns: float, walk: float, near_ns: float, far_ns: float,
            far_fraction: float) -> float:
    """The per-access latency proxy: page walk plus tier-weighted data access."""
    if not 0.0 <= far_fraction <= 1.0:
        raise ConfigError(f"far_fraction {far_fraction} outside [0, 1]")
    return base_ns * walk + (1.0 - far_fraction) * near_ns + far_fraction * far_ns


def run(scenario: Scenario) -> RunReport:
    alloc = FrameAllocator(scenario.tiers)
    n_global = sum(g.initial_regions + g.reserve_count for g in scenario.guests)
    host = HostTable(n_global)

    guests = []
    offset = 0
    for idx, cfg in enumerate(scenario.guests):
        guests.append(_GuestState(idx, cfg, scenario, offset, host, alloc))
        offset += guests[-1].span

    # initial backing, guests in index order (first come, first placed)
    for g in guests:
        for local in range(g.cfg.initial_regions):
            region = g.region_offset + local
            if g.cfg.start_tier == "near" and alloc.free_frames(NEAR) > 0:
                host.place(region, NEAR, alloc.alloc_frame(NEAR))
            elif alloc.free_frames(FAR) > 0:
                host.place(region, FAR, alloc.alloc_frame(FAR))
            else:  # far exhausted: spill to near
                host.place(region, NEAR, alloc.alloc_frame(NEAR))

    guest_of = np.concatenate([
        np.full(g.span, g.idx, dtype=np.int64) for g in guests
    ])
    tracker = HostHotnessTracker(n_global, scenario.telemetry.window,
                                 scenario.telemetry.k_of_w)
    engine = TieringEngine(scenario.policy, host, alloc)
    walk = scenario.page_sizes.cost()
    near_ns = scenario.tiers.near.latency_ns
    far_ns = scenario.tiers.far.latency_ns
    all_near = amat_ns(scenario.base_ns, walk, near_ns, far_ns, 0.0)
    near_capacity_frames = scenario.tiers.near.capacity_frames

    metrics: list[EpochMetrics] = []
    near_utilization: list[float] = []
    heat: list[tuple] = []

    for epoch in range(scenario.epochs):
        epoch_counts = np.zeros(n_global, dtype=np.int64)
        far_fracs = np.zeros(len(guests))
        consol_ms = np.zeros(len(guests))
        trace_lens = np.zeros(len(guests), dtype=np.int64)
        all_regions = np.arange(n_global)
        placed_far = host.tier_of_regions(all_regions) == FAR

        for g in guests:
            trace = g.trace_for(epoch)
            trace_lens[g.idx] = len(trace)
            guest_bm, _ = scan_epoch(trace, g.gpt, region_offset=g.region_offset)
            g.bitmaps.append(guest_bm)
            counts = region_access_counts(trace, g.gpt, n_global, g.region_offset)
            epoch_counts += counts
            if len(trace):
                far_fracs[g.idx] = counts[placed_far].sum() / len(trace)

            k_eff = min(scenario.telemetry.k_of_w, len(g.bitmaps))
            g.last_report = classify_hot(list(g.bitmaps), k_eff, g.gpt)
            if g.cfg.scheduled(epoch):
                delta = g.consolidator.run(g.last_report, g.cfg.cl)
                consol_ms[g.idx] = delta.modeled_time_ms

        tracker.observe(epoch, epoch_counts)
        step = engine.step(tracker, epoch)
        promoted_b = np.zeros(len(guests), dtype=np.int64)
        demoted_b = np.zeros(len(guests), dtype=np.int64)
        for region in step.promoted:
            promoted_b[guest_of[region]] += REGION_BYTES
        for region in step.demoted:
            demoted_b[guest_of[region]] += REGION_BYTES

        if host.count_in(NEAR) > near_capacity_frames:
            raise InvariantViolation(
                f"epoch {epoch}: near tier over capacity "
                f"({host.count_in(NEAR)} > {near_capacity_frames})"
            )

        tiers_now = host.tier_of_regions(all_regions)
        touched = np.nonzero(epoch_counts)[0]
        heat.extend(
            (epoch, int(r), int(epoch_counts[r])) for r in touched
        )
        for g in guests:
            sl = slice(g.region_offset, g.region_offset + g.span)
            near_mask = tiers_now[sl] == NEAR
            pops = g.gpt.region_populations(g.span)
            near_bytes = int(pops[near_mask].sum()) * PAGE_BYTES
            if near_bytes > g.rss_bytes:
                raise InvariantViolation(
                    f"epoch {epoch}: guest {g.idx} near-resident bytes exceed RSS"
                )
            trace_len = int(trace_lens[g.idx])
            base_amat = amat_ns(scenario.base_ns, walk, near_ns, far_ns,
                                float(far_fracs[g.idx]))
            effective = base_amat
            if scenario.costs.fold_consolidation and trace_len:
                effective += consol_ms[g.idx] * 1e6 / trace_len
            if scenario.costs.fold_migration and trace_len:
                moved = int(promoted_b[g.idx] + demoted_b[g.idx])
                effective += moved * scenario.costs.migration_ns_per_byte / trace_len
            metrics.append(EpochMetrics(
                epoch=epoch,
                guest=g.idx,
                near_resident_bytes=near_bytes,
                far_access_fraction=float(far_fracs[g.idx]),
                amat_ns=effective,
                throughput_proxy=all_near / effective,
                consolidation_ms=float(consol_ms[g.idx]),
                promoted_bytes=int(promoted_b[g.idx]),
                demoted_bytes=int(demoted_b[g.idx]),
                near_regions=int(near_mask.sum()),
                far_regions=int((tiers_now[sl] == FAR).sum()),
            ))
        near_utilization.append(alloc.placed_count(NEAR) / near_capacity_frames)

    cdf_final = {}
    for g in guests:
        try:
            cdf_final[g.idx] = skewness_cdf(g.last_report)
        except EmptyReport:
            cdf_final[g.idx] = None

    report = RunReport(
        scenario=scenario,
        metrics=metrics,
        near_utilization=near_utilization,
        heat=heat,
        consolidation={g.idx: g.consolidator.stats for g in guests},
        cdf_final=cdf_final,
        events=list(engine.events),
        consolidation_log={g.idx: list(g.consolidator.events) for g in guests},
    )
    report.summary = summarize(report)
    return report


def summarize(report: RunReport) -> dict:
    """Aggregates recomputable from the per-epoch series (and nothing else)."""
    scenario = report.scenario
    per_guest = []
    for g, cfg in enumerate(scenario.guests):
        rows = [m for m in report.metrics if m.guest == g]
        rss = cfg.rss_pages * PAGE_BYTES
        stats = report.consolidation[g]
        per_guest.append({
            "guest": g,
            "mean_near_residency_pct": 100.0 * float(
                np.mean([m.near_resident_bytes for m in rows])) / rss,
            "final_near_regions": rows[-1].near_regions,
            "mean_far_access_fraction": float(
                np.mean([m.far_access_fraction for m in rows])),
            "throughput_proxy": float(
                np.mean([m.throughput_proxy for m in rows])),
            "promoted_bytes_total": int(sum(m.promoted_bytes for m in rows)),
            "demoted_bytes_total": int(sum(m.demoted_bytes for m in rows)),
            "consolidation": {
                "pages_moved": stats.pages_moved,
                "regions_created": stats.regions_created,
                "modeled_time_ms": stats.modeled_time_ms,
                "invocations": stats.invocations,
                "failures": stats.failures,
            },
        })
    return {
        "per_guest": per_guest,
        "overall": {
            "mean_near_residency_pct": float(
                np.mean([g["mean_near_residency_pct"] for g in per_guest])),
            "throughput_proxy": float(
                np.mean([g["throughput_proxy"] for g in per_guest])),
            "promoted_bytes_total": sum(g["promoted_bytes_total"] for g in per_guest),
            "demoted_bytes_total": sum(g["demoted_bytes_total"] for g in per_guest),
            "mean_near_utilization": float(np.mean(report.near_utilization)),
            "epochs": scenario.epochs,
        },
    }


# ---------------------------------------------------------------------------
# exports


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


def export(report: RunReport, out_dir) -> list:
    """Write migrations/metrics/heatmap/CDF CSVs plus summary.json.

    Everything is formatted through a fixed float format so identical
    scenarios produce byte-identical files.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def path(name):
        written.append(os.path.join(out_dir, name))
        return written[-1]

    with open(path("migrations.csv"), "w", newline="") as fh:
        fh.write("epoch,guest,promoted_bytes,demoted_bytes,near_regions,far_regions\n")
        for m in report.metrics:
            fh.write(f"{m.epoch},{m.guest},{m.promoted_bytes},{m.demoted_bytes},"
                     f"{m.near_regions},{m.far_regions}\n")

    with open(path("metrics.csv"), "w", newline="") as fh:
        fh.write("epoch,guest,near_resident_bytes,far_access_fraction,"
                 "amat_ns,throughput_proxy,consolidation_ms\n")
        for m in report.metrics:
            fh.write(f"{m.epoch},{m.guest},{m.near_resident_bytes},"
                     f"{_fmt(m.far_access_fraction)},{_fmt(m.amat_ns)},"
                     f"{_fmt(m.throughput_proxy)},{_fmt(m.consolidation_ms)}\n")

    with open(path("heatmap.csv"), "w", newline="") as fh:
        fh.write("epoch,gpa_region,access_count\n")
        for epoch, region, count in report.heat:
            fh.write(f"{epoch},{region},{count}\n")

    for g, cdf in sorted(report.cdf_final.items()):
        if cdf is not None:
            write_cdf_csv(cdf, path(f"cdf_guest{g}.csv"))

    if any(report.consolidation_log.values()):
        with open(path("consolidation_log.txt"), "w") as fh:
            for g, lines in sorted(report.consolidation_log.items()):
                for line in lines:
                    fh.write(f"guest{g} {line}\n")

    with open(path("summary.json"), "w") as fh:
        json.dump(report.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return written
