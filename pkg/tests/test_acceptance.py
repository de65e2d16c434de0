"""End-to-end acceptance checks, one test per criterion.

Each test records its measured quantities with ``record_property``; the
conftest prints one PASS/FAIL line per criterion at the end of the run.
"""

import math
import random
import statistics
import time
from decimal import Decimal
from fractions import Fraction

import numpy as np
import pytest

from roistitch.baselines import TimeoutBatchConfig
from roistitch.cli import main
from roistitch.cost import FunctionConfig, PricingTable, invocation_cost, invocation_cost_exact
from roistitch.latency import linear_law_profile
from roistitch.partition import FrameSpec, PartitionConfig, partition
from roistitch.sim import ExecutionSampler, LinkModel, SimConfig, run
from roistitch.stitcher import CanvasSpec, stitch_all
from roistitch.workload import WorkloadGenConfig, generate_trace, retime, substream

pytestmark = pytest.mark.acceptance

DEFAULT_PROFILE = linear_law_profile(16, 30, 18, 1.5, 0.5)


class _Item:
    def __init__(self, patch_id, w, h):
        self.patch_id, self.w, self.h = patch_id, w, h


@pytest.fixture(scope="module")
def default_trace():
    return generate_trace(WorkloadGenConfig(seed=2024, n_frames=300, fps=2.0))


def run_at(trace, fps, **changes):
    cfg = SimConfig(profile=DEFAULT_PROFILE, seed=7, **changes)
    return run(retime(trace, fps), cfg)


@pytest.mark.acceptance(1, "packing validity over random patch sets")
def test_packing_validity(record_property):
    rng = random.Random(1)
    canvases = [(256, 256), (512, 384), (640, 480), (1024, 1024)]
    sets = 10_000
    failures = 0
    start = time.perf_counter()
    for s in range(sets):
        M, N = rng.choice(canvases)
        n = rng.randint(1, 30)
        dims = [(rng.randint(16, M), rng.randint(16, N)) for _ in range(n)]
        res = stitch_all([_Item(f"p{i}", w, h) for i, (w, h) in enumerate(dims)], CanvasSpec(M, N))
        ok = sorted(res.placement_index) == sorted(f"p{i}" for i in range(n))
        ok &= math.ceil(sum(w * h for w, h in dims) / (M * N)) <= len(res) <= n
        for c in res.canvases:
            rects = [p.position for p in c.placements]
            for p in c.placements:
                i = int(p.patch_id[1:])
                ok &= (p.position.w, p.position.h) == dims[i]
            for a in rects:
                ok &= 0 <= a.x and 0 <= a.y and a.x + a.w <= M and a.y + a.h <= N
            for i, a in enumerate(rects):
                for b in rects[i + 1 :]:
                    ok &= not (a.x < b.x + b.w and b.x < a.x + a.w and a.y < b.y + b.h and b.y < a.y + a.h)
        failures += not ok
    elapsed = time.perf_counter() - start
    record_property("sets", sets)
    record_property("invalid", failures)
    record_property("seconds", f"{elapsed:.1f}")
    assert failures == 0
    assert elapsed < 30


@pytest.mark.acceptance(2, "deadline oracle with zero-variance execution")
def test_deadline_oracle(record_property):
    profile = linear_law_profile(8, 30, 18, canvas=(512, 512))
    rng = random.Random(2)
    traces = 1000
    late, flagged, patches, violations = 0, 0, 0, 0
    for seed in range(traces):
        trace = generate_trace(
            WorkloadGenConfig(
                seed=seed,
                n_frames=6,
                fps=rng.choice([1.0, 2.0, 5.0, 10.0]),
                width=1280,
                height=720,
                roi_proportion_mean=rng.uniform(0.02, 0.15),
                roi_height_range=(16, 96),
            )
        )
        cfg = SimConfig(
            profile=profile,
            partition=PartitionConfig(3, 3),
            canvas=CanvasSpec(512, 512, 1.0),
            link=LinkModel(bandwidth_mbps=rng.choice([5.0, 20.0, 80.0])),
            slo_ms=rng.choice([60.0, 150.0, 300.0, 1000.0]),
            seed=seed,
            instances=0,
            deterministic_execution=True,
        )
        m = run(trace, cfg)
        # replay the log: every batch finishes mu_k after it fires
        for ev in m.events:
            if ev["type"] != "invoke" or ev["flagged_infeasible"]:
                continue
            if ev["t"] + profile.mu(ev["k"]) > ev["min_deadline"] + 1e-9:
                late += 1
        patches += len(m.patches)
        flagged += sum(p.infeasible_at_arrival for p in m.patches)
        violations += sum(p.violated and not p.infeasible_at_arrival for p in m.patches)
    record_property("traces", traces)
    record_property("patches", patches)
    record_property("flagged", flagged)
    record_property("unflagged_violations", violations + late)
    assert late == 0 and violations == 0


@pytest.mark.acceptance(3, "violation rate at most 5% with sampled execution")
def test_violation_rate(record_property):
    start = time.perf_counter()
    trace = generate_trace(WorkloadGenConfig(seed=33, n_frames=2000, fps=2.0))
    rates = {}
    total = 0
    for slo in (500.0, 1000.0):
        assert slo >= 2 * DEFAULT_PROFILE.slack(1)
        m = run(trace, SimConfig(profile=DEFAULT_PROFILE, slo_ms=slo, seed=3))
        rates[slo] = m.violation_rate
        total = len(m.patches)
    elapsed = time.perf_counter() - start
    record_property("patches", total)
    for slo, r in rates.items():
        record_property(f"rate@{slo:g}ms", f"{r:.4%}")
    record_property("seconds", f"{elapsed:.1f}")
    assert total >= 20_000
    assert all(r <= 0.05 for r in rates.values())
    assert elapsed < 60


@pytest.mark.acceptance(4, "cost below sequential and a timeout batcher")
def test_cost_advantage(default_trace, record_property):
    fps = 4.0
    ours = run_at(default_trace, fps).total_cost
    seq = run_at(default_trace, fps, policy="sequential").total_cost
    timeouts = {}
    for t in (25.0, 50.0, 100.0, 250.0, 500.0):
        timeouts[t] = run_at(default_trace, fps, policy="timeout", timeout=TimeoutBatchConfig(16, t)).total_cost
    best = min(timeouts, key=timeouts.get)
    record_property("ratio_vs_sequential", f"{ours / seq:.3f}")
    record_property("slo_aware", f"{ours:.6f}")
    record_property("best_timeout", f"{best:g}ms:{timeouts[best]:.6f}")
    assert ours <= Decimal("0.8") * seq
    assert any(ours <= c for c in timeouts.values())


@pytest.mark.acceptance(5, "median canvas efficiency grows with SLO and arrival rate")
def test_efficiency_trend(default_trace, record_property):
    by_slo = [statistics.median(run_at(default_trace, 2.0, slo_ms=s).efficiencies) for s in (500.0, 1000.0, 2000.0)]
    by_rate = [statistics.median(run_at(default_trace, f, slo_ms=1000.0).efficiencies) for f in (1.0, 2.0, 4.0)]
    record_property("slo_grid", "/".join(f"{e:.3f}" for e in by_slo))
    record_property("rate_grid", "/".join(f"{e:.3f}" for e in by_rate))
    assert by_slo == sorted(by_slo)
    assert by_rate == sorted(by_rate)


@pytest.mark.acceptance(6, "amortized latency per patch falls with arrival rate")
def test_amortization(default_trace, record_property):
    low = run_at(default_trace, 1.0).mean_amortized_latency_ms
    high = run_at(default_trace, 4.0).mean_amortized_latency_ms
    record_property("low_rate_ms", f"{low:.3f}")
    record_property("high_rate_ms", f"{high:.3f}")
    assert high <= low


@pytest.mark.acceptance(7, "finer zone grids transmit fewer bytes")
def test_partition_bytes(record_property):
    bpp = 0.1
    grids = {"6x6": (6, 6), "4x4": (4, 4), "2x2": (2, 2)}
    totals = {name: [] for name in [*grids, "full"]}
    for seed in range(10):
        scene = generate_trace(WorkloadGenConfig(seed=seed, n_frames=60, scene_id=f"scene{seed}"))
        for name, (x, y) in grids.items():
            b = 0
            for f in scene.frames:
                spec = FrameSpec(str(f.frame), scene.width, scene.height, f.t_ms, 1000.0)
                b += sum(p.size_bytes for p in partition(spec, PartitionConfig(x, y), f.rois, bpp))
            totals[name].append(b)
        totals["full"].append(len(scene.frames) * math.ceil(scene.width * scene.height * bpp))
    means = {k: statistics.fmean(v) for k, v in totals.items()}
    for k, v in means.items():
        record_property(k, f"{v / 1e6:.2f}MB")
    order = ["6x6", "4x4", "2x2", "full"]
    assert all(means[a] <= 1.02 * means[b] for a, b in zip(order, order[1:]))


@pytest.mark.acceptance(8, "cost arithmetic against a rational oracle")
def test_cost_arithmetic(record_property):
    rng = random.Random(8)
    worst = Fraction(0)
    for _ in range(10_000):
        t = rng.uniform(0, 30)
        cfg = FunctionConfig(
            vcpus=rng.uniform(0.1, 16),
            memory_gb=rng.uniform(0.1, 64),
            gpu_memory_gb=rng.uniform(2, 48),
            model_size_gb=1,
        )
        prices = PricingTable(
            Decimal(repr(rng.uniform(0, 1e-4))),
            Decimal(repr(rng.uniform(0, 1e-4))),
            Decimal(repr(rng.uniform(0, 1e-3))),
            Decimal(repr(rng.uniform(0, 1e-6))),
        )
        F = lambda v: Fraction(repr(float(v)))  # noqa: E731
        want = F(t) * (
            F(cfg.vcpus) * F(prices.p_cpu) + F(cfg.memory_gb) * F(prices.p_mem) + F(cfg.gpu_memory_gb) * F(prices.p_gpu)
        ) + F(prices.p_req)
        got = Fraction(invocation_cost(t, cfg, prices))
        if want:
            worst = max(worst, abs(got - want) / want)
    example = invocation_cost_exact(1, FunctionConfig(2, 4, 6, 2), PricingTable())
    record_property("worst_rel_error", f"{float(worst):.2e}")
    record_property("example", str(example))
    assert worst <= Fraction(1, 10**12)
    assert example == Decimal("7.5848e-4")
    assert invocation_cost(1, FunctionConfig(2, 4, 6, 2), PricingTable()) == 7.5848e-4


@pytest.mark.acceptance(9, "execution rarely exceeds the slack estimate")
def test_estimator_bound(record_property):
    draws = 100_000
    sampler = ExecutionSampler(DEFAULT_PROFILE, substream(9, "execution"))
    worst = 0.0
    for e in DEFAULT_PROFILE.entries:
        xs = np.fromiter((sampler.draw_ms(e.k) for _ in range(draws)), float, draws)
        assert (xs > 0).all()
        worst = max(worst, float((xs > DEFAULT_PROFILE.slack(e.k)).mean()))
    record_property("batch_sizes", len(DEFAULT_PROFILE.entries))
    record_property("draws_each", draws)
    record_property("worst_exceed", f"{worst:.4%}")
    assert worst < 0.005


@pytest.mark.acceptance(10, "simulate is byte-for-byte reproducible")
def test_cli_determinism(tmp_path, record_property):
    assert main(["gen-trace", "--out", str(tmp_path / "t.jsonl"), "--seed", "10", "--frames", "120", "--scenes", "2"]) == 0
    assert main(["gen-profile", "--out", str(tmp_path / "p.csv"), "--seed", "10"]) == 0
    (tmp_path / "exp.toml").write_text(
        'seed = 10\n[trace]\npath = "t.jsonl"\n[profile]\npath = "p.csv"\n[backend]\ninstances = 2\n'
    )
    names = ("summary.csv", "patches.csv", "invocations.csv", "events.jsonl")
    same = True
    for policy in ("slo_aware", "aimd", "timeout"):
        for run_dir in ("a", "b"):
            out = tmp_path / policy / run_dir
            assert main(["simulate", str(tmp_path / "exp.toml"), "--policy", policy, "--out", str(out)]) == 0
        same &= all(
            (tmp_path / policy / "a" / n).read_bytes() == (tmp_path / policy / "b" / n).read_bytes() for n in names
        )
    record_property("policies", 3)
    record_property("files", len(names))
    assert same
