"""Experiment configuration documents (TOML).

Relative paths inside a config are resolved against the config file's
directory. Every table and key is optional; unknown keys are rejected so typos
surface early. An annotated example lives in ``configs/experiment.toml``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .baselines import AimdConfig, TimeoutBatchConfig
from .cost import CostError, FunctionConfig, PricingTable
from .latency import LatencyProfile, ProfileError, linear_law_profile, load_profile
from .partition import PartitionConfig, PartitionError
from .sim import LinkModel, SimConfig, SimulationError
from .stitcher import CanvasSpec, StitchError
from .workload import TraceError, TraceScene, WorkloadGenConfig, generate_trace, load_trace, retime


class ConfigError(ValueError):
    pass


DEFAULT_LAW = {"mu_base": 30.0, "mu_per_canvas": 18.0, "sigma_base": 1.5, "sigma_per_canvas": 0.5, "max_k": 16}

_SCHEMA: dict[str, set[str] | None] = {
    "seed": None,
    "policy": None,
    "slo_ms": None,
    "trace": {"path", "fps", "generate"},
    "profile": {"path", "mu_base", "mu_per_canvas", "sigma_base", "sigma_per_canvas", "max_k"},
    "partition": {"zones_x", "zones_y"},
    "canvas": {"width", "height", "vram_gb"},
    "function": {"vcpus", "memory_gb", "gpu_memory_gb", "model_size_gb", "concurrency"},
    "pricing": {"p_cpu", "p_mem", "p_gpu", "p_req"},
    "link": {"bandwidth_mbps", "bytes_per_pixel", "shared"},
    "backend": {"instances", "cold_start_ms", "billing_granularity_s", "deterministic"},
    "aimd": {"initial_batch", "additive_step", "multiplicative_factor", "latency_target_ms", "max_batch"},
    "timeout": {"max_batch", "timeout_ms"},
    "per_patch": {"min_scale"},
    "output": {"dir", "patches", "invocations", "events"},
    "sweep": {"slo_ms", "bandwidth_mbps", "policy", "fps"},
}

_GEN_KEYS = {f for f in WorkloadGenConfig.__dataclass_fields__}


@dataclass
class ExperimentConfig:
    sim: SimConfig
    trace_path: Path | None = None
    trace_gen: WorkloadGenConfig | None = None
    trace_fps: float | None = None
    out_dir: Path = Path("out")
    write_patches: bool = True
    write_invocations: bool = True
    write_events: bool = True
    sweep: dict[str, list] = field(default_factory=dict)

    def load_scenes(self) -> list[TraceScene]:
        if self.trace_path is not None:
            if not self.trace_path.exists():
                raise ConfigError(f"trace file not found: {self.trace_path}")
            scenes = load_trace(self.trace_path)
        elif self.trace_gen is not None:
            scenes = [generate_trace(self.trace_gen)]
        else:
            scenes = []
        if self.trace_fps is not None:
            scenes = [retime(s, self.trace_fps) for s in scenes]
        return scenes


def _check_keys(doc: dict) -> None:
    for key, value in doc.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        allowed = _SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"[{key}] must be a table")
        extra = set(value) - allowed
        if extra:
            raise ConfigError(f"unknown key(s) in [{key}]: {', '.join(sorted(extra))}")


def _profile(doc: dict, base: Path, canvas: CanvasSpec) -> LatencyProfile:
    if "path" in doc:
        path = base / doc["path"]
        if not path.exists():
            raise ConfigError(f"profile file not found: {path}")
        return load_profile(path)
    law = {**DEFAULT_LAW, **doc}
    return linear_law_profile(
        int(law["max_k"]),
        float(law["mu_base"]),
        float(law["mu_per_canvas"]),
        float(law["sigma_base"]),
        float(law["sigma_per_canvas"]),
        canvas=(canvas.width, canvas.height),
    )


def from_dict(doc: dict[str, Any], base: Path = Path(".")) -> ExperimentConfig:
    _check_keys(doc)
    try:
        t = doc.get("trace", {})
        gen = None
        if "generate" in t:
            g = dict(t["generate"])
            extra = set(g) - _GEN_KEYS
            if extra:
                raise ConfigError(f"unknown key(s) in [trace.generate]: {', '.join(sorted(extra))}")
            for k in ("roi_count_range", "roi_aspect_range", "roi_height_range"):
                if k in g:
                    g[k] = tuple(g[k])
            gen = WorkloadGenConfig(**g)
        c = doc.get("canvas", {})
        canvas = CanvasSpec(int(c.get("width", 1024)), int(c.get("height", 1024)), float(c.get("vram_gb", 0.25)))
        p = doc.get("partition", {})
        f = doc.get("function", {})
        link = doc.get("link", {})
        b = doc.get("backend", {})
        slo = float(doc.get("slo_ms", 1000))
        aimd = None
        if "aimd" in doc:
            a = dict(doc["aimd"])
            if "latency_target_ms" in a:
                a["latency_target"] = float(a.pop("latency_target_ms"))
            aimd = AimdConfig(**a)
        timeout = None
        if "timeout" in doc:
            tm = doc["timeout"]
            timeout = TimeoutBatchConfig(int(tm.get("max_batch", 16)), float(tm.get("timeout_ms", slo / 4)))
        sim = SimConfig(
            profile=_profile(doc.get("profile", {}), base, canvas),
            partition=PartitionConfig(int(p.get("zones_x", 4)), int(p.get("zones_y", 4))),
            canvas=canvas,
            function=FunctionConfig(**f),
            prices=PricingTable.from_mapping(doc.get("pricing", {})),
            link=LinkModel(
                float(link.get("bandwidth_mbps", 40)),
                float(link.get("bytes_per_pixel", 0.1)),
                bool(link.get("shared", True)),
            ),
            policy=str(doc.get("policy", "slo_aware")),
            slo_ms=slo,
            seed=int(doc.get("seed", 0)),
            instances=int(b.get("instances", 2)),
            cold_start_ms=float(b.get("cold_start_ms", 0)),
            billing_granularity_s=float(b["billing_granularity_s"]) if b.get("billing_granularity_s") else None,
            aimd=aimd,
            timeout=timeout,
            per_patch_min_scale=float(doc.get("per_patch", {}).get("min_scale", 0.25)),
            deterministic_execution=bool(b.get("deterministic", False)),
        )
        sim.validate()
        o = doc.get("output", {})
        sweep = {k: list(v) if isinstance(v, list) else [v] for k, v in doc.get("sweep", {}).items()}
        return ExperimentConfig(
            sim=sim,
            trace_path=base / t["path"] if "path" in t else None,
            trace_gen=gen,
            trace_fps=float(t["fps"]) if "fps" in t else None,
            out_dir=base / o.get("dir", "out"),
            write_patches=bool(o.get("patches", True)),
            write_invocations=bool(o.get("invocations", True)),
            write_events=bool(o.get("events", True)),
            sweep=sweep,
        )
    except ConfigError:
        raise
    except (
        CostError,
        ProfileError,
        PartitionError,
        StitchError,
        SimulationError,
        TraceError,
        TypeError,
        ValueError,
    ) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(doc, path.parent)


def with_overrides(cfg: ExperimentConfig, **sim_changes) -> ExperimentConfig:
    changes = {k: v for k, v in sim_changes.items() if v is not None}
    if not changes:
        return cfg
    try:
        sim = replace(cfg.sim, **changes)
        sim.validate()
    except (SimulationError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return replace(cfg, sim=sim)
