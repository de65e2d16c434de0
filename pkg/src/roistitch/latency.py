"""Conservative batch latency estimates from an offline profile.

Slack for a batch of ``k`` canvases is ``mu_k + 3 * sigma_k``. Batch sizes
that were not profiled are linearly interpolated between neighbours and
extrapolated past the largest profiled size.
"""

from __future__ import annotations

import csv
import io
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

SIGMA_MULTIPLIER = 3


class ProfileError(ValueError):
    pass


class ProfileWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ProfileEntry:
    k: int
    mu: float  # ms
    sigma: float  # ms

    def __post_init__(self):
        if self.k < 1:
            raise ProfileError(f"batch size must be >= 1, got {self.k}")
        if not self.mu > 0:
            raise ProfileError(f"k={self.k}: mu must be positive, got {self.mu}")
        if self.sigma < 0:
            raise ProfileError(f"k={self.k}: sigma must be non-negative, got {self.sigma}")

    @property
    def slack(self) -> float:
        return self.mu + SIGMA_MULTIPLIER * self.sigma


@dataclass(frozen=True)
class LatencyProfile:
    canvas: tuple[int, int]
    entries: tuple[ProfileEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ProfileError("profile needs at least one entry")
        entries = tuple(sorted(self.entries, key=lambda e: e.k))
        ks = [e.k for e in entries]
        if len(set(ks)) != len(ks):
            raise ProfileError(f"duplicate batch sizes in profile: {ks}")
        object.__setattr__(self, "entries", entries)
        for a, b in zip(entries, entries[1:]):
            if b.mu < a.mu:
                warnings.warn(
                    f"profile mu decreases from k={a.k} ({a.mu}) to k={b.k} ({b.mu})",
                    ProfileWarning,
                    stacklevel=3,
                )
                break

    @property
    def max_k(self) -> int:
        return self.entries[-1].k

    def _interp(self, k: int, value) -> float:
        es = self.entries
        if k < 1:
            raise ProfileError(f"invalid batch size: {k}")
        if len(es) == 1:
            e = es[0]
            # one point: scale through the origin above it, hold flat below it
            return value(e) * k / e.k if k > e.k else value(e)
        if k <= es[0].k:
            return value(es[0])
        for lo, hi in zip(es, es[1:]):
            if k == hi.k:
                return value(hi)
            if k < hi.k:
                t = (k - lo.k) / (hi.k - lo.k)
                return value(lo) + t * (value(hi) - value(lo))
        lo, hi = es[-2], es[-1]
        return value(hi) + (k - hi.k) * (value(hi) - value(lo)) / (hi.k - lo.k)

    def slack(self, k: int) -> float:
        return self._interp(k, lambda e: e.slack)

    def mu(self, k: int) -> float:
        return self._interp(k, lambda e: e.mu)

    def sigma(self, k: int) -> float:
        return max(0.0, self._interp(k, lambda e: e.sigma))


def slack_time(profile: LatencyProfile, k: int) -> float:
    """Slack time (ms) for a batch of ``k`` canvases."""
    return profile.slack(k)


def profile_from_samples(
    samples: Mapping[int, Sequence[float]], canvas: tuple[int, int] = (1024, 1024)
) -> LatencyProfile:
    """Build a profile from measured execution times, keyed by batch size.

    sigma uses the population form (divide by n).
    """
    entries = []
    for k in sorted(samples):
        xs = list(samples[k])
        if not xs:
            raise ProfileError(f"no samples for batch size {k}")
        n = len(xs)
        mu = math.fsum(xs) / n
        var = math.fsum((x - mu) ** 2 for x in xs) / n
        entries.append(ProfileEntry(int(k), mu, math.sqrt(var)))
    return LatencyProfile(tuple(canvas), tuple(entries))


_CANVAS_RE = re.compile(r"#\s*canvas\s*=\s*(\d+)\s*x\s*(\d+)", re.IGNORECASE)


def dumps_profile(profile: LatencyProfile) -> str:
    buf = io.StringIO()
    buf.write(f"# canvas={profile.canvas[0]}x{profile.canvas[1]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "mu_ms", "sigma_ms"])
    for e in profile.entries:
        w.writerow([e.k, repr(float(e.mu)), repr(float(e.sigma))])
    return buf.getvalue()


def loads_profile(text: str) -> LatencyProfile:
    canvas = None
    rows = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            m = _CANVAS_RE.match(s)
            if m:
                canvas = (int(m.group(1)), int(m.group(2)))
            continue
        rows.append(s)
    if canvas is None:
        raise ProfileError("profile is missing the '# canvas=MxN' line")
    reader = csv.DictReader(rows)
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["k", "mu_ms", "sigma_ms"]:
        raise ProfileError(f"profile header must be k,mu_ms,sigma_ms, got {reader.fieldnames}")
    try:
        entries = [ProfileEntry(int(r["k"]), float(r["mu_ms"]), float(r["sigma_ms"])) for r in reader]
    except (TypeError, ValueError) as exc:
        raise ProfileError(f"bad profile row: {exc}") from exc
    return LatencyProfile(canvas, tuple(entries))


def save_profile(profile: LatencyProfile, path: str | Path) -> None:
    Path(path).write_text(dumps_profile(profile), encoding="utf-8")


def load_profile(path: str | Path) -> LatencyProfile:
    return loads_profile(Path(path).read_text(encoding="utf-8"))


def linear_law_profile(
    max_k: int,
    mu_base: float,
    mu_per_canvas: float,
    sigma_base: float = 0.0,
    sigma_per_canvas: float = 0.0,
    canvas: tuple[int, int] = (1024, 1024),
) -> LatencyProfile:
    """Profile straight from a linear latency law, without sampling."""
    return LatencyProfile(
        canvas,
        tuple(
            ProfileEntry(k, mu_base + mu_per_canvas * k, sigma_base + sigma_per_canvas * k)
            for k in range(1, max_k + 1)
        ),
    )
