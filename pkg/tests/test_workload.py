import numpy as np
import pytest

from roistitch.geometry import Rect
from roistitch.workload import (
    TraceError,
    TraceFrame,
    TraceScene,
    WorkloadGenConfig,
    dumps_trace,
    generate_trace,
    load_trace,
    loads_trace,
    retime,
    save_trace,
    substream,
)


def test_same_seed_same_trace():
    cfg = WorkloadGenConfig(seed=42, n_frames=50)
    assert dumps_trace(generate_trace(cfg)) == dumps_trace(generate_trace(cfg))


def test_different_seed_or_scene_differs():
    a = dumps_trace(generate_trace(WorkloadGenConfig(seed=1, n_frames=20)))
    b = dumps_trace(generate_trace(WorkloadGenConfig(seed=2, n_frames=20)))
    c = generate_trace(WorkloadGenConfig(seed=1, n_frames=20, scene_id="other"))
    assert a != b
    assert a.replace('"scene0"', '"other"') != dumps_trace(c)


def test_mean_proportion_close_to_target():
    scene = generate_trace(WorkloadGenConfig(seed=3, n_frames=1000, roi_proportion_mean=0.10))
    assert 0.08 <= scene.roi_proportions().mean() <= 0.12


def test_proportions_fluctuate_with_bursts():
    scene = generate_trace(WorkloadGenConfig(seed=4, n_frames=600, burst_probability=0.1))
    props = scene.roi_proportions()
    assert props.std() > 0.1 * props.mean()
    assert props.max() > 1.5 * np.median(props)


def test_zero_roi_count():
    scene = generate_trace(WorkloadGenConfig(seed=0, n_frames=10, roi_count_range=(0, 0)))
    assert all(f.rois == () for f in scene.frames)


def test_rois_within_frame_and_times_increasing():
    scene = generate_trace(WorkloadGenConfig(seed=7, n_frames=100, width=640, height=480, roi_height_range=(8, 40)))
    frame = Rect(0, 0, 640, 480)
    assert all(frame.contains(r) for f in scene.frames for r in f.rois)
    assert [f.t_ms for f in scene.frames] == [round(i * 500.0, 3) for i in range(100)]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"width": 20, "height": 20, "roi_height_range": (32, 64)},
        {"roi_proportion_mean": 0},
        {"burst_multiplier": 0.5},
        {"roi_count_range": (5, 2)},
    ],
)
def test_invalid_generator_config(kwargs):
    with pytest.raises(TraceError):
        WorkloadGenConfig(**kwargs)


def test_jsonl_round_trip(tmp_path):
    scenes = [generate_trace(WorkloadGenConfig(seed=s, n_frames=15, scene_id=f"s{s}")) for s in range(2)]
    save_trace(scenes, tmp_path / "t.jsonl")
    back = load_trace(tmp_path / "t.jsonl")
    assert back == scenes
    first = (tmp_path / "t.jsonl").read_text().splitlines()[0]
    assert first.startswith('{"scene":"s0","frame":0,"t_ms":0.0,"W":3840,"H":2160,"rois":')


def test_trace_validation():
    with pytest.raises(TraceError, match="strictly increasing"):
        TraceScene("s", 10, 10, 1, (TraceFrame(0, 5, ()), TraceFrame(1, 5, ())))
    with pytest.raises(TraceError, match="outside frame"):
        TraceScene("s", 10, 10, 1, (TraceFrame(0, 0, (Rect(5, 5, 10, 10),)),))
    with pytest.raises(TraceError, match="line 1"):
        loads_trace('{"scene": "s"}\n')


def test_retime():
    scene = generate_trace(WorkloadGenConfig(seed=0, n_frames=5, fps=2))
    fast = retime(scene, 4)
    assert [f.t_ms for f in fast.frames] == [0, 250, 500, 750, 1000]
    assert [f.rois for f in fast.frames] == [f.rois for f in scene.frames]


def test_substreams_independent():
    a = substream(5, "trace").random(3)
    b = substream(5, "execution").random(3)
    assert not np.allclose(a, b)
    assert np.array_equal(a, substream(5, "trace").random(3))
