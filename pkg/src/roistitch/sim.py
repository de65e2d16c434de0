"""Discrete-event simulation of edge partitioning, uplink, batching and a
serverless backend.

Pipeline for one run: every frame is partitioned into patches, patches queue
on a FIFO uplink, the chosen policy turns arrivals into invocations, and each
invocation runs on the first free backend instance for an execution time
drawn from a normal distribution (truncated at zero) around the profiled mean
for its batch size.

The clock is integer microseconds; records expose milliseconds.
"""

from __future__ import annotations

import heapq
import logging
import math
import statistics
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .baselines import AimdConfig, BatchItem, TimeoutBatchConfig, aimd_schedule, sequential_schedule, timeout_schedule
from .cost import FunctionConfig, PricingTable, invocation_cost_exact, max_canvases_per_batch
from .latency import LatencyProfile
from .partition import FrameSpec, PartitionConfig, PatchMeta, partition
from .scheduler import InvokeEvent, SloAwareBatcher, to_ms, to_us
from .stitcher import CanvasSpec, canvas_efficiency, stitch_all
from .workload import TraceScene, substream

log = logging.getLogger(__name__)

POLICIES = ("slo_aware", "sequential", "per_patch", "aimd", "timeout")


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class LinkModel:
    bandwidth_mbps: float = 40.0
    bytes_per_pixel: float = 0.1
    shared: bool = True  # one FIFO uplink for all scenes, else one per scene

    def __post_init__(self):
        if not self.bandwidth_mbps > 0:
            raise SimulationError("bandwidth must be positive")
        if self.bytes_per_pixel < 0:
            raise SimulationError("bytes_per_pixel must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    profile: LatencyProfile
    partition: PartitionConfig = PartitionConfig(4, 4)
    canvas: CanvasSpec = CanvasSpec(1024, 1024, 0.25)
    function: FunctionConfig = FunctionConfig()
    prices: PricingTable = PricingTable()
    link: LinkModel = LinkModel()
    policy: str = "slo_aware"
    slo_ms: float = 1000.0
    seed: int = 0
    instances: int = 2  # 0 = unbounded (every invocation gets its own instance)
    cold_start_ms: float = 0.0
    billing_granularity_s: float | None = None
    aimd: AimdConfig | None = None  # default: latency target = slo / 2
    timeout: TimeoutBatchConfig | None = None  # default: max batch = memory cap, timeout = slo / 4
    per_patch_min_scale: float = 0.25
    deterministic_execution: bool = False  # execution time = profiled mean

    def validate(self) -> int:
        """Check cross-field consistency; returns the per-batch canvas cap."""
        if self.policy not in POLICIES:
            raise SimulationError(f"unknown policy {self.policy!r}; choose from {', '.join(POLICIES)}")
        if not self.slo_ms > 0:
            raise SimulationError(f"slo must be positive, got {self.slo_ms}")
        if tuple(self.profile.canvas) != (self.canvas.width, self.canvas.height):
            raise SimulationError(
                f"profile canvas {self.profile.canvas[0]}x{self.profile.canvas[1]} does not match "
                f"canvas {self.canvas.width}x{self.canvas.height}"
            )
        if self.instances < 0:
            raise SimulationError("instances must be >= 0")
        if not 0 < self.per_patch_min_scale <= 1:
            raise SimulationError("per_patch_min_scale must be in (0, 1]")
        try:
            return max_canvases_per_batch(self.function, self.canvas)
        except ValueError as exc:
            raise SimulationError(str(exc)) from exc


@dataclass(frozen=True)
class PatchRecord:
    patch_id: str
    frame_id: str
    w: int
    h: int
    size_bytes: int
    generation_ms: float
    arrival_ms: float
    deadline_ms: float
    invocation: int
    fire_ms: float
    dispatch_ms: float
    completion_ms: float
    latency_ms: float
    violated: bool
    infeasible_at_arrival: bool


@dataclass(frozen=True)
class InvocationRecord:
    index: int
    policy: str
    trigger: str
    k: int
    n_patches: int
    fire_ms: float
    dispatch_ms: float
    completion_ms: float
    exec_ms: float
    estimated_slack_ms: float | None
    cost: Decimal
    efficiencies: tuple[float, ...]


@dataclass(frozen=True)
class RunMetrics:
    policy: str
    patches: tuple[PatchRecord, ...]
    invocations: tuple[InvocationRecord, ...]
    rejected: tuple[str, ...] = ()
    events: tuple[dict, ...] = field(default=(), compare=False, repr=False)

    @property
    def total_cost(self) -> Decimal:
        return sum((i.cost for i in self.invocations), Decimal(0))

    @property
    def bandwidth_bytes(self) -> int:
        return sum(p.size_bytes for p in self.patches)

    @property
    def violations(self) -> int:
        """Late patches plus patches that could not meet their deadline even when they arrived."""
        return sum(p.violated for p in self.patches)

    @property
    def violation_rate(self) -> float:
        return self.violations / len(self.patches) if self.patches else 0.0

    @property
    def efficiencies(self) -> list[float]:
        return [e for i in self.invocations for e in i.efficiencies]

    @property
    def mean_amortized_latency_ms(self) -> float:
        """Batch execution time shared evenly by the patches it carried, averaged over patches."""
        n = sum(i.n_patches for i in self.invocations)
        return math.fsum(i.exec_ms for i in self.invocations) / n if n else 0.0

    def summary(self) -> dict:
        effs = self.efficiencies
        lat = [p.latency_ms for p in self.patches]
        return {
            "policy": self.policy,
            "patches": len(self.patches),
            "rejected": len(self.rejected),
            "invocations": len(self.invocations),
            "canvases": sum(i.k for i in self.invocations),
            "total_cost": self.total_cost,
            "bandwidth_bytes": self.bandwidth_bytes,
            "violations": self.violations,
            "violation_rate": self.violation_rate,
            "infeasible_at_arrival": sum(p.infeasible_at_arrival for p in self.patches),
            "mean_latency_ms": statistics.fmean(lat) if lat else 0.0,
            "mean_amortized_latency_ms": self.mean_amortized_latency_ms,
            "mean_canvas_efficiency": statistics.fmean(effs) if effs else 0.0,
            "median_canvas_efficiency": statistics.median(effs) if effs else 0.0,
        }


def transmission_schedule(patches: Sequence[PatchMeta], link: LinkModel) -> list[float]:
    """Arrival times (ms) of patches sent back to back over one FIFO link."""
    return [to_ms(t) for t in _transmit_us(patches, link)]


def _transmit_us(patches: Sequence[PatchMeta], link: LinkModel) -> list[int]:
    # bits / Mbps is microseconds; Fraction keeps it exact before the ceil
    mbps = Fraction(str(link.bandwidth_mbps))
    free = None
    out = []
    for p in patches:
        gen = to_us(p.generation_time)
        start = gen if free is None else max(gen, free)
        free = start + math.ceil(Fraction(p.size_bytes * 8) / mbps)
        out.append(free)
    return out


class ExecutionSampler:
    """Execution times (µs) per batch size, drawn in call order from one RNG."""

    def __init__(self, profile: LatencyProfile, rng: np.random.Generator, deterministic: bool = False):
        self.profile = profile
        self.rng = rng
        self.deterministic = deterministic
        self.draws: list[int] = []

    def draw_ms(self, k: int) -> float:
        mu, sigma = self.profile.mu(k), self.profile.sigma(k)
        if self.deterministic or sigma == 0:
            return mu
        while True:
            x = self.rng.normal(mu, sigma)
            if x > 0:
                return x

    def __call__(self, k: int, scale: float = 1.0) -> int:
        t = max(0, round(self.draw_ms(k) * scale * 1000))
        self.draws.append(t)
        return t


def _frame_patches(scenes: Sequence[TraceScene], cfg: SimConfig) -> list[PatchMeta]:
    out = []
    for s in scenes:
        for f in s.frames:
            spec = FrameSpec(f"{s.scene_id}:{f.frame}", s.width, s.height, f.t_ms, cfg.slo_ms)
            out.extend(partition(spec, cfg.partition, f.rois, cfg.link.bytes_per_pixel))
    return out


def _arrivals(patches: list[PatchMeta], scenes: Sequence[TraceScene], link: LinkModel) -> list[int]:
    if link.shared or len(scenes) <= 1:
        order = sorted(range(len(patches)), key=lambda i: (to_us(patches[i].generation_time), i))
        times = _transmit_us([patches[i] for i in order], link)
        out = [0] * len(patches)
        for i, t in zip(order, times):
            out[i] = t
        return out
    out = [0] * len(patches)
    by_scene: dict[str, list[int]] = {}
    for i, p in enumerate(patches):
        by_scene.setdefault(p.source_frame_id.rsplit(":", 1)[0], []).append(i)
    for idxs in by_scene.values():
        for i, t in zip(idxs, _transmit_us([patches[i] for i in idxs], link)):
            out[i] = t
    return out


def _run_slo_aware(
    patches: list[PatchMeta], arrivals: list[int], cfg: SimConfig, cap: int, emit: Callable[[dict], None]
) -> list[InvokeEvent]:
    batcher = SloAwareBatcher(cfg.canvas, cfg.profile, cap, log=emit)
    heap: list[tuple[int, int, int, object]] = []
    seq = 0
    # arrivals enter the heap first, so at equal timestamps they run before timers
    for i in sorted(range(len(patches)), key=lambda i: (arrivals[i], i)):
        heap.append((arrivals[i], seq, 0, patches[i]))
        seq += 1
    heapq.heapify(heap)
    events: list[InvokeEvent] = []
    while heap:
        now, _, kind, payload = heapq.heappop(heap)
        if kind == 0:
            events.extend(batcher.arrive_us(payload, now))
            if batcher.pending_timer_us is not None:
                heapq.heappush(heap, (batcher.pending_timer_us, seq, 1, batcher.epoch))
                seq += 1
        else:
            ev = batcher.timer_us(now, payload)
            if ev is not None:
                events.append(ev)
    return events


def _canvas_items(patches: list[PatchMeta], arrivals: list[int], spec: CanvasSpec) -> list[BatchItem]:
    """Stitch each frame's patches on their own and release a canvas once all its patches arrived."""
    by_frame: dict[str, list[int]] = {}
    for i, p in enumerate(patches):
        by_frame.setdefault(p.source_frame_id, []).append(i)
    items = []
    for frame_id, idxs in by_frame.items():
        result = stitch_all([patches[i] for i in idxs], spec)
        arrival = {patches[i].patch_id: arrivals[i] for i in idxs}
        for c, eff in zip(result.canvases, canvas_efficiency(result)):
            ids = tuple(p.patch_id for p in c.placements)
            items.append(BatchItem(f"{frame_id}/c{c.index}", max(arrival[pid] for pid in ids), ids, eff))
    items.sort(key=lambda it: it.arrival_us)
    return items


def _baseline_events(
    patches: list[PatchMeta],
    arrivals: list[int],
    cfg: SimConfig,
    cap: int,
    sampler: ExecutionSampler,
    emit: Callable[[dict], None],
) -> list[InvokeEvent]:
    if cfg.policy == "per_patch":
        items = sorted(
            (BatchItem(p.patch_id, t, (p.patch_id,)) for p, t in zip(patches, arrivals)),
            key=lambda it: it.arrival_us,
        )
    else:
        items = _canvas_items(patches, arrivals, cfg.canvas)
    for it in items:
        emit({"type": "arrival", "t": to_ms(it.arrival_us), "item_id": it.item_id, "patch_ids": list(it.patch_ids)})
    if cfg.policy in ("sequential", "per_patch"):
        events = sequential_schedule(items, policy=cfg.policy)
    elif cfg.policy == "aimd":
        acfg = cfg.aimd or AimdConfig(latency_target=cfg.slo_ms / 2, max_batch=cap)
        acfg = replace(acfg, max_batch=min(acfg.max_batch, cap))
        events = aimd_schedule(items, acfg, observe=lambda k: to_ms(sampler(k)))
    else:
        tcfg = cfg.timeout or TimeoutBatchConfig(max_batch=cap, timeout=cfg.slo_ms / 4)
        tcfg = replace(tcfg, max_batch=min(tcfg.max_batch, cap))
        events = timeout_schedule(items, tcfg)
    for ev in events:
        emit(ev.record())
    return events


def run(scenes: TraceScene | Iterable[TraceScene], cfg: SimConfig) -> RunMetrics:
    """Simulate one policy over a trace; a pure function of (trace, cfg)."""
    cap = cfg.validate()
    scenes = [scenes] if isinstance(scenes, TraceScene) else list(scenes)
    event_log: list[dict] = []

    def emit(rec: dict) -> None:
        event_log.append({"policy": cfg.policy, **rec})

    all_patches = _frame_patches(scenes, cfg)
    patches, rejected = [], []
    for p in all_patches:
        if p.w > cfg.canvas.width or p.h > cfg.canvas.height:
            rejected.append(p.patch_id)
        else:
            patches.append(p)
    if rejected:
        log.warning("%d patches larger than the %dx%d canvas were dropped", len(rejected), cfg.canvas.width, cfg.canvas.height)
    arrivals = _arrivals(patches, scenes, cfg.link)
    sampler = ExecutionSampler(cfg.profile, substream(cfg.seed, "execution"), cfg.deterministic_execution)

    if cfg.policy == "slo_aware":
        events = _run_slo_aware(patches, arrivals, cfg, cap, emit)
    else:
        events = _baseline_events(patches, arrivals, cfg, cap, sampler, emit)

    by_id = {p.patch_id: (p, t) for p, t in zip(patches, arrivals)}
    area = cfg.canvas.area
    exec_us = list(sampler.draws)  # aimd has already drawn one per invocation
    for ev in events[len(exec_us):]:
        if cfg.policy == "per_patch":
            p = by_id[ev.patch_ids[0]][0]
            exec_us.append(sampler(1, max(cfg.per_patch_min_scale, p.rect.area / area)))
        else:
            exec_us.append(sampler(ev.batch_size))

    # backend: FIFO dispatch in firing order to the earliest free instance
    order = sorted(range(len(events)), key=lambda i: (events[i].fire_us, i))
    free: list[int] = [0] * cfg.instances
    cold = to_us(cfg.cold_start_ms)
    invocations: list[InvocationRecord] = []
    patch_records: list[PatchRecord] = []
    for idx, i in enumerate(order):
        ev, t_us = events[i], exec_us[i]
        if cfg.instances:
            dispatch = max(ev.fire_us, heapq.heappop(free))
        else:
            dispatch = ev.fire_us
        done = dispatch + cold + t_us
        if cfg.instances:
            heapq.heappush(free, done)
        cost = invocation_cost_exact(Decimal(t_us) / 1_000_000, cfg.function, cfg.prices, cfg.billing_granularity_s)
        invocations.append(
            InvocationRecord(
                index=idx,
                policy=cfg.policy,
                trigger=ev.trigger,
                k=ev.batch_size,
                n_patches=len(ev.patch_ids),
                fire_ms=ev.fire_time,
                dispatch_ms=to_ms(dispatch),
                completion_ms=to_ms(done),
                exec_ms=to_ms(t_us),
                estimated_slack_ms=ev.estimated_slack,
                cost=cost,
                efficiencies=ev.efficiencies,
            )
        )
        for pid in ev.patch_ids:
            p, arr = by_id[pid]
            gen = to_us(p.generation_time)
            latency = done - gen
            patch_records.append(
                PatchRecord(
                    patch_id=pid,
                    frame_id=p.source_frame_id,
                    w=p.w,
                    h=p.h,
                    size_bytes=p.size_bytes,
                    generation_ms=to_ms(gen),
                    arrival_ms=to_ms(arr),
                    deadline_ms=p.deadline,
                    invocation=idx,
                    fire_ms=ev.fire_time,
                    dispatch_ms=to_ms(dispatch),
                    completion_ms=to_ms(done),
                    latency_ms=to_ms(latency),
                    violated=ev.flagged_infeasible or latency > to_us(p.slo),
                    infeasible_at_arrival=ev.flagged_infeasible,
                )
            )
    return RunMetrics(cfg.policy, tuple(patch_records), tuple(invocations), tuple(rejected), tuple(event_log))
