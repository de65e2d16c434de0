"""Online SLO-aware batching invoker.

Every arriving patch is tentatively added to the pending queue and the queue
is restitched. The batch must be invoked no later than
``earliest_deadline - slack(canvas_count)``; if the new patch would push that
instant into the past, or would need more canvases than fit in GPU memory,
the previous batch is invoked right away and the patch starts a new queue.

Times are integer microseconds internally (``*_us``) and milliseconds at the
public interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .latency import LatencyProfile
from .partition import PatchMeta
from .stitcher import CanvasSpec, Stitcher, StitchResult, canvas_efficiency

DEADLINE_TIMER = "deadline_timer"
INFEASIBLE_ARRIVAL = "infeasible_arrival"
MEMORY_CAP = "memory_cap"

EventLog = Callable[[dict], None]


def to_us(ms: float) -> int:
    return round(ms * 1000)


def to_ms(us: int) -> float:
    return us / 1000


def slack_us(profile: LatencyProfile, k: int) -> int:
    # round up: a longer slack only moves invocation earlier
    return math.ceil(profile.slack(k) * 1000 - 1e-6)


@dataclass(frozen=True)
class InvokeEvent:
    fire_us: int
    patch_ids: tuple[str, ...]
    batch_size: int
    trigger: str
    policy: str = "slo_aware"
    estimated_slack_us: Optional[int] = None
    stitch: Optional[StitchResult] = None
    min_deadline_us: Optional[int] = None
    flagged_infeasible: bool = False
    efficiencies: tuple[float, ...] = ()

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("invocation with empty batch")

    @property
    def fire_time(self) -> float:
        return to_ms(self.fire_us)

    @property
    def min_deadline(self) -> Optional[float]:
        return None if self.min_deadline_us is None else to_ms(self.min_deadline_us)

    @property
    def estimated_slack(self) -> Optional[float]:
        return None if self.estimated_slack_us is None else to_ms(self.estimated_slack_us)

    def record(self) -> dict:
        return {
            "type": "invoke",
            "policy": self.policy,
            "t": self.fire_time,
            "trigger": self.trigger,
            "k": self.batch_size,
            "patch_ids": list(self.patch_ids),
            "estimated_slack": self.estimated_slack,
            "min_deadline": self.min_deadline,
            "flagged_infeasible": self.flagged_infeasible,
            "efficiencies": [round(e, 6) for e in self.efficiencies],
        }


@dataclass(frozen=True)
class SchedulerState:
    """Read-only view of the batcher between events (times in ms)."""

    queue: tuple[str, ...]
    canvases: int
    t_ddl_min: Optional[float]
    t_remain: Optional[float]
    pending_timer: Optional[float]
    epoch: int


class SloAwareBatcher:
    def __init__(
        self,
        spec: CanvasSpec,
        profile: LatencyProfile,
        max_canvases: int,
        log: EventLog | None = None,
    ):
        if max_canvases < 1:
            raise ValueError("max_canvases must be >= 1")
        self.spec = spec
        self.profile = profile
        self.max_canvases = max_canvases
        self.log = log
        self._slack_cache: dict[int, int] = {}
        self.queue: list[PatchMeta] = []
        self.current = Stitcher(spec)
        self.previous = Stitcher(spec)
        self.t_ddl_us: int | None = None
        self.t_remain_us: int | None = None
        self.pending_timer_us: int | None = None
        self.epoch = 0

    def slack_us(self, k: int) -> int:
        v = self._slack_cache.get(k)
        if v is None:
            v = self._slack_cache[k] = slack_us(self.profile, k)
        return v

    def snapshot(self) -> SchedulerState:
        def ms(v):
            return None if v is None else to_ms(v)

        return SchedulerState(
            queue=tuple(p.patch_id for p in self.queue),
            canvases=self.current.canvas_count,
            t_ddl_min=ms(self.t_ddl_us),
            t_remain=ms(self.t_remain_us),
            pending_timer=ms(self.pending_timer_us),
            epoch=self.epoch,
        )

    def _emit(self, record: dict) -> None:
        if self.log is not None:
            self.log(record)

    def _invoke(self, patches, stitcher: Stitcher, now_us: int, trigger: str, flagged=False) -> InvokeEvent:
        result = stitcher.result()
        k = len(result)
        ev = InvokeEvent(
            fire_us=now_us,
            patch_ids=tuple(p.patch_id for p in patches),
            batch_size=k,
            trigger=trigger,
            estimated_slack_us=self.slack_us(k),
            stitch=result,
            min_deadline_us=min(to_us(p.deadline) for p in patches),
            flagged_infeasible=flagged,
            efficiencies=tuple(canvas_efficiency(result)),
        )
        self._emit(ev.record())
        return ev

    def _set_timer(self, now_us: int) -> None:
        self.epoch += 1
        self.pending_timer_us = self.t_remain_us
        self._emit({"type": "timer_set", "t": to_ms(now_us), "fire_at": to_ms(self.t_remain_us), "epoch": self.epoch})

    def arrive_us(self, patch: PatchMeta, now_us: int) -> list[InvokeEvent]:
        deadline = to_us(patch.deadline)
        self._emit({"type": "arrival", "t": to_ms(now_us), "patch_id": patch.patch_id, "deadline": to_ms(deadline)})

        if deadline - self.slack_us(1) < now_us:
            # hopeless even alone: run it by itself now and leave the queue be
            solo = Stitcher(self.spec)
            solo.add(patch.patch_id, patch.w, patch.h)
            return [self._invoke([patch], solo, now_us, INFEASIBLE_ARRIVAL, flagged=True)]

        events = []
        self.previous = self.current
        grown = self.current.copy()
        grown.add(patch.patch_id, patch.w, patch.h)
        t_ddl = deadline if self.t_ddl_us is None else min(self.t_ddl_us, deadline)
        k = grown.canvas_count
        t_remain = t_ddl - self.slack_us(k)
        self._emit({"type": "repack", "t": to_ms(now_us), "patches": len(self.queue) + 1, "canvases": k})

        trigger = None
        if self.queue:
            if k > self.max_canvases:
                trigger = MEMORY_CAP
            elif t_remain < now_us:
                trigger = INFEASIBLE_ARRIVAL
        if trigger is not None:
            events.append(self._invoke(self.queue, self.previous, now_us, trigger))
            self.queue = [patch]
            self.previous = Stitcher(self.spec)
            grown = Stitcher(self.spec)
            grown.add(patch.patch_id, patch.w, patch.h)
            t_ddl = deadline
            k = 1
            t_remain = t_ddl - self.slack_us(1)
            self._emit({"type": "repack", "t": to_ms(now_us), "patches": 1, "canvases": 1})
        else:
            self.queue.append(patch)

        self.current = grown
        self.t_ddl_us = t_ddl
        self.t_remain_us = t_remain
        self._set_timer(now_us)
        return events

    def timer_us(self, now_us: int, epoch: int | None = None) -> InvokeEvent | None:
        if epoch is not None and epoch != self.epoch:
            return None
        if not self.queue:
            return None
        ev = self._invoke(self.queue, self.current, now_us, DEADLINE_TIMER)
        self.queue = []
        self.current = Stitcher(self.spec)
        self.previous = Stitcher(self.spec)
        self.t_ddl_us = self.t_remain_us = self.pending_timer_us = None
        return ev

    # millisecond interface

    def on_patch_arrival(self, patch: PatchMeta, now: float) -> list[InvokeEvent]:
        return self.arrive_us(patch, to_us(now))

    def on_timer(self, now: float, epoch: int | None = None) -> InvokeEvent | None:
        return self.timer_us(to_us(now), epoch)
