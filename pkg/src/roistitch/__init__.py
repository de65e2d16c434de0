"""Deadline-aware stitching and batching of video RoI patches for serverless inference."""

from .baselines import AimdConfig, BatchItem, TimeoutBatchConfig, aimd_schedule, sequential_schedule, timeout_schedule
from .cost import FunctionConfig, PricingTable, invocation_cost, max_canvases_per_batch
from .geometry import Rect, area, enclosing_rect, overlap_area
from .latency import LatencyProfile, ProfileEntry, profile_from_samples, slack_time
from .partition import FrameSpec, PartitionConfig, PatchMeta, assign_rois, make_zones, partition
from .scheduler import InvokeEvent, SloAwareBatcher
from .sim import LinkModel, RunMetrics, SimConfig, run, transmission_schedule
from .stitcher import CanvasSpec, StitchResult, canvas_efficiency, stitch_all
from .workload import TraceScene, WorkloadGenConfig, generate_trace

__version__ = "0.1.0"
