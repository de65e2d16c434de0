"""Serverless pay-per-use cost model.

An invocation that runs for ``t_f`` seconds costs
``t_f * (vcpus * p_cpu + memory * p_mem + gpu_memory * p_gpu) + p_req``.
Arithmetic is done in :class:`decimal.Decimal` so totals over millions of
invocations do not drift; floats are produced only for reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from typing import Mapping

from .stitcher import CanvasSpec


class CostError(ValueError):
    pass


def _dec(v) -> Decimal:
    if isinstance(v, Decimal):
        return v
    if isinstance(v, float):
        return Decimal(repr(v))
    return Decimal(str(v))


@dataclass(frozen=True)
class FunctionConfig:
    vcpus: float = 2
    memory_gb: float = 4
    gpu_memory_gb: float = 6
    model_size_gb: float = 2
    concurrency: int = 1

    def __post_init__(self):
        for name in ("vcpus", "memory_gb", "gpu_memory_gb", "model_size_gb", "concurrency"):
            if not getattr(self, name) > 0:
                raise CostError(f"function config: {name} must be positive")
        if not self.model_size_gb < self.gpu_memory_gb:
            raise CostError("function config: model_size_gb must be smaller than gpu_memory_gb")


@dataclass(frozen=True)
class PricingTable:
    p_cpu: Decimal = Decimal("2.138e-5")  # $/vCPU-s
    p_mem: Decimal = Decimal("2.138e-5")  # $/GB-s
    p_gpu: Decimal = Decimal("1.05e-4")  # $/GB-s
    p_req: Decimal = Decimal("2e-7")  # $/invocation

    def __post_init__(self):
        for name in ("p_cpu", "p_mem", "p_gpu", "p_req"):
            v = _dec(getattr(self, name))
            if v < 0:
                raise CostError(f"pricing: {name} must be >= 0")
            object.__setattr__(self, name, v)

    @classmethod
    def from_mapping(cls, data: Mapping[str, object]) -> PricingTable:
        unknown = set(data) - {"p_cpu", "p_mem", "p_gpu", "p_req"}
        if unknown:
            raise CostError(f"unknown pricing keys: {sorted(unknown)}")
        try:
            return cls(**{k: _dec(v) for k, v in data.items()})
        except ArithmeticError as exc:
            raise CostError(f"pricing values must be decimal numbers: {exc}") from exc


def rate_per_second(cfg: FunctionConfig, prices: PricingTable) -> Decimal:
    return _dec(cfg.vcpus) * prices.p_cpu + _dec(cfg.memory_gb) * prices.p_mem + _dec(cfg.gpu_memory_gb) * prices.p_gpu


def billed_seconds(t_f: float, granularity: float | None = None) -> Decimal:
    t = _dec(t_f)
    if granularity:
        g = _dec(granularity)
        t = math.ceil(t / g) * g
    return t


def invocation_cost_exact(
    t_f: float, cfg: FunctionConfig, prices: PricingTable, granularity: float | None = None
) -> Decimal:
    if t_f < 0:
        raise CostError(f"negative execution time: {t_f}")
    return billed_seconds(t_f, granularity) * rate_per_second(cfg, prices) + prices.p_req


def invocation_cost(
    t_f: float, cfg: FunctionConfig, prices: PricingTable, granularity: float | None = None
) -> float:
    """Dollar cost of one invocation lasting ``t_f`` seconds.

    ``granularity`` rounds the billed duration up to a multiple of that many
    seconds; by default billing is continuous.
    """
    return float(invocation_cost_exact(t_f, cfg, prices, granularity))


def max_canvases_per_batch(cfg: FunctionConfig, spec: CanvasSpec) -> int:
    """Largest batch whose canvases plus the model fit in GPU memory."""
    n = math.floor((_dec(cfg.gpu_memory_gb) - _dec(cfg.model_size_gb)) / _dec(spec.vram_per_canvas))
    if n < 1:
        raise CostError("cannot fit one canvas")
    return n
