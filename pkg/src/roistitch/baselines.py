"""Reference batching policies used for comparison.

All three consume a stream of ready items (usually canvases stitched per
frame, or raw patches for the per-patch policy) and return invocations in
firing order. None of them looks at deadlines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .scheduler import InvokeEvent, to_ms, to_us


@dataclass(frozen=True)
class BatchItem:
    item_id: str
    arrival_us: int
    patch_ids: tuple[str, ...]
    efficiency: float | None = None

    @classmethod
    def at(cls, item_id: str, arrival_ms: float, patch_ids: Sequence[str] = (), efficiency=None) -> BatchItem:
        return cls(item_id, to_us(arrival_ms), tuple(patch_ids) or (item_id,), efficiency)

    @property
    def arrival(self) -> float:
        return to_ms(self.arrival_us)


@dataclass(frozen=True)
class AimdConfig:
    initial_batch: int = 1
    additive_step: int = 1
    multiplicative_factor: float = 0.5
    latency_target: float = math.inf  # ms
    max_batch: int = 1_000_000

    def __post_init__(self):
        if self.initial_batch < 1:
            raise ValueError("initial_batch must be >= 1")
        if not 0 < self.multiplicative_factor < 1:
            raise ValueError("multiplicative_factor must be in (0, 1)")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")


@dataclass(frozen=True)
class TimeoutBatchConfig:
    max_batch: int
    timeout: float  # ms

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")


def _event(batch: list[BatchItem], fire_us: int, trigger: str, policy: str) -> InvokeEvent:
    effs = tuple(i.efficiency for i in batch if i.efficiency is not None)
    return InvokeEvent(
        fire_us=fire_us,
        patch_ids=tuple(pid for i in batch for pid in i.patch_ids),
        batch_size=len(batch),
        trigger=trigger,
        policy=policy,
        efficiencies=effs,
    )


def _ordered(items: Iterable[BatchItem]) -> list[BatchItem]:
    return sorted(items, key=lambda i: i.arrival_us)


def sequential_schedule(items: Iterable[BatchItem], policy: str = "sequential") -> list[InvokeEvent]:
    """One invocation per item, fired on arrival."""
    return [_event([i], i.arrival_us, "arrival", policy) for i in _ordered(items)]


def aimd_schedule(
    items: Iterable[BatchItem],
    cfg: AimdConfig,
    observe: Callable[[int], float],
    policy: str = "aimd",
) -> list[InvokeEvent]:
    """Fire whenever the queue reaches the current target batch size.

    ``observe(k)`` returns the latency (ms) measured for the batch just fired;
    the target grows by ``additive_step`` while that stays within
    ``latency_target`` and is cut by ``multiplicative_factor`` otherwise.
    Whatever is left when the stream ends is flushed at the last arrival.
    """
    events = []
    target = min(cfg.initial_batch, cfg.max_batch)
    queue: list[BatchItem] = []
    for item in _ordered(items):
        queue.append(item)
        if len(queue) >= target:
            events.append(_event(queue, item.arrival_us, "batch_full", policy))
            latency = observe(len(queue))
            queue = []
            if latency <= cfg.latency_target:
                target = min(cfg.max_batch, target + cfg.additive_step)
            else:
                target = max(1, math.floor(target * cfg.multiplicative_factor))
    if queue:
        events.append(_event(queue, queue[-1].arrival_us, "flush", policy))
        observe(len(queue))
    return events


def timeout_schedule(
    items: Iterable[BatchItem], cfg: TimeoutBatchConfig, policy: str = "timeout"
) -> list[InvokeEvent]:
    """Fire on a full batch or once the oldest queued item has waited ``timeout``."""
    timeout_us = to_us(cfg.timeout)
    events = []
    queue: list[BatchItem] = []
    for item in _ordered(items):
        if queue and queue[0].arrival_us + timeout_us <= item.arrival_us:
            events.append(_event(queue, queue[0].arrival_us + timeout_us, "timeout", policy))
            queue = []
        queue.append(item)
        if len(queue) >= cfg.max_batch:
            events.append(_event(queue, item.arrival_us, "batch_full", policy))
            queue = []
    if queue:
        events.append(_event(queue, queue[0].arrival_us + timeout_us, "timeout", policy))
    return events
