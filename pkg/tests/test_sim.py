from dataclasses import replace
from decimal import Decimal

import pytest

from roistitch.cost import invocation_cost, invocation_cost_exact
from roistitch.geometry import Rect
from roistitch.latency import LatencyProfile, ProfileEntry, linear_law_profile
from roistitch.partition import PartitionConfig, PatchMeta
from roistitch.sim import POLICIES, LinkModel, SimConfig, SimulationError, run, transmission_schedule
from roistitch.stitcher import CanvasSpec
from roistitch.workload import TraceFrame, TraceScene, WorkloadGenConfig, generate_trace

MB = 1_000_000


def sized(pid, size, gen=0.0):
    return PatchMeta(pid, "f", Rect(0, 0, 1, 1), gen, 1000.0, size)


def test_transmission_single_and_fifo():
    link = LinkModel(bandwidth_mbps=80)
    assert transmission_schedule([sized("a", MB)], link) == [100.0]
    assert transmission_schedule([sized("a", MB), sized("b", MB)], link) == [100.0, 200.0]
    assert transmission_schedule([sized("a", 0, gen=42.5)], link) == [42.5]
    # link idle until the second patch is generated
    assert transmission_schedule([sized("a", MB), sized("b", MB, gen=500)], link) == [100.0, 600.0]


def one_patch_setup(slo, sigma=0.0):
    scene = TraceScene("s", 100, 100, 1.0, (TraceFrame(0, 0.0, (Rect(0, 0, 100, 100),)),))
    cfg = SimConfig(
        profile=LatencyProfile((100, 100), (ProfileEntry(1, 100, 10), ProfileEntry(2, 170, 10))),
        partition=PartitionConfig(1, 1),
        canvas=CanvasSpec(100, 100, 1.0),
        link=LinkModel(bytes_per_pixel=0),
        slo_ms=slo,
        deterministic_execution=True,
    )
    return scene, cfg


def test_single_patch_replay():
    scene, cfg = one_patch_setup(500)
    m = run(scene, cfg)
    (inv,) = m.invocations
    (p,) = m.patches
    assert (inv.fire_ms, inv.completion_ms, inv.k) == (370, 470, 1)
    assert (p.latency_ms, p.violated, p.infeasible_at_arrival) == (470, False, False)
    assert m.total_cost == invocation_cost_exact(0.1, cfg.function, cfg.prices)
    assert float(m.total_cost) == pytest.approx(invocation_cost(0.1, cfg.function, cfg.prices))


def test_single_patch_hopeless():
    scene, cfg = one_patch_setup(120)
    m = run(scene, cfg)
    (p,) = m.patches
    assert p.infeasible_at_arrival and p.violated
    assert m.invocations[0].fire_ms == 0 and m.violation_rate == 1.0


@pytest.mark.parametrize("policy", POLICIES)
def test_empty_trace(policy, default_profile):
    m = run([], SimConfig(profile=default_profile, policy=policy))
    assert m.total_cost == 0 and m.violation_rate == 0 and m.invocations == ()
    s = m.summary()
    assert s["patches"] == 0 and s["mean_canvas_efficiency"] == 0.0


@pytest.fixture(scope="module")
def scene():
    return generate_trace(WorkloadGenConfig(seed=11, n_frames=60, fps=2))


@pytest.mark.parametrize("policy", POLICIES)
def test_conservation(policy, scene, default_profile):
    m = run(scene, SimConfig(profile=default_profile, policy=policy, seed=3))
    assert sum(i.n_patches for i in m.invocations) == len(m.patches)
    assert len({p.patch_id for p in m.patches}) == len(m.patches)
    assert m.total_cost == sum((i.cost for i in m.invocations), Decimal(0))
    assert all(p.completion_ms >= p.dispatch_ms >= p.fire_ms >= p.arrival_ms >= p.generation_ms for p in m.patches)
    assert m.violations == sum(p.latency_ms > p.deadline_ms - p.generation_ms or p.infeasible_at_arrival for p in m.patches)


@pytest.mark.parametrize("policy", POLICIES)
def test_deterministic(policy, scene, default_profile):
    cfg = SimConfig(profile=default_profile, policy=policy, seed=9)
    a, b = run(scene, cfg), run(scene, cfg)
    assert a == b and a.events == b.events


def test_seed_changes_execution(scene, default_profile):
    a = run(scene, SimConfig(profile=default_profile, seed=1))
    b = run(scene, SimConfig(profile=default_profile, seed=2))
    assert [i.exec_ms for i in a.invocations] != [i.exec_ms for i in b.invocations]


def test_zero_sigma_no_violations(scene):
    profile = linear_law_profile(16, 30, 18)
    m = run(scene, SimConfig(profile=profile, instances=0, slo_ms=500))
    assert m.violations == sum(p.infeasible_at_arrival for p in m.patches) == 0


def test_memory_cap_respected(scene, default_profile):
    cfg = SimConfig(profile=default_profile, canvas=CanvasSpec(1024, 1024, 1.0))
    m = run(scene, cfg)
    assert max(i.k for i in m.invocations) <= 4


def test_batching_beats_sequential_on_cost(scene, default_profile):
    cfg = SimConfig(profile=default_profile, seed=5)
    ours = run(scene, cfg).total_cost
    seq = run(scene, replace(cfg, policy="sequential")).total_cost
    assert ours < seq


def test_oversize_patches_rejected(default_profile):
    scene = TraceScene("s", 3000, 3000, 1.0, (TraceFrame(0, 0.0, (Rect(0, 0, 2000, 2000), Rect(0, 0, 10, 10))),))
    m = run(scene, SimConfig(profile=default_profile, partition=PartitionConfig(1, 1)))
    assert m.rejected == ("s:0/z0",) and m.patches == ()


@pytest.mark.parametrize(
    "changes",
    [{"policy": "bogus"}, {"slo_ms": 0}, {"canvas": CanvasSpec(512, 512)}, {"instances": -1}],
)
def test_config_errors_before_loop(changes, default_profile):
    with pytest.raises(SimulationError):
        run([], replace(SimConfig(profile=default_profile), **changes))


def test_backend_queueing(default_profile):
    # four frames at once, one instance: invocations serialize
    frames = tuple(TraceFrame(i, float(i), (Rect(0, 0, 1000, 1000),)) for i in range(4))
    scene = TraceScene("s", 1024, 1024, 1.0, frames)
    cfg = SimConfig(
        profile=default_profile,
        partition=PartitionConfig(1, 1),
        policy="sequential",
        instances=1,
        deterministic_execution=True,
        link=LinkModel(bytes_per_pixel=0),
    )
    m = run(scene, cfg)
    done = [i.completion_ms for i in m.invocations]
    assert done == [48.0, 96.0, 144.0, 192.0]
