"""Intervention accounting: switches, action counts, burden, success-only stats.

Per-episode statistics are averaged over successful episodes only, since
time-limited failures inflate action counts; cumulative totals cover every
episode. Burden combines switch count, switch latency, and mean
intervention length into a single supervisor-cost number.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .gate import AUTONOMOUS, SUPERVISOR


@dataclass
class EpisodeStats:
    ints: int
    acts_h: int
    acts_r: int
    success: bool
    switch_causes: list[str] = field(default_factory=list)

    @property
    def length(self) -> int:
        return self.acts_h + self.acts_r


@dataclass(frozen=True)
class MetricsConfig:
    latency: float = 10.0  # timesteps per context switch, both directions summed

    def __post_init__(self):
        if self.latency < 0:
            raise ValueError("latency must be >= 0")


@dataclass
class RunMetrics:
    episodes: int
    successes: int
    mean_ints: float | None
    std_ints: float | None
    mean_acts_h: float | None
    std_acts_h: float | None
    mean_acts_r: float | None
    std_acts_r: float | None
    total_ints: int
    total_acts_h: int
    total_acts_r: int
    burden: float | None
    auto_success: tuple[int, int] | None = None  # (successes, episodes)
    aided_success: tuple[int, int] | None = None


def episode_stats(mode_trace: list[str], success: bool, switch_causes: list[str] | None = None) -> EpisodeStats:
    """Count switches and per-mode actions for one episode.

    Episodes start in autonomous mode, so a trace that opens in supervisor
    mode already contains one context switch. When the engine supplies the
    per-switch cause labels they are the authoritative switch count: a cede
    followed by an immediate re-engage executes supervisor actions
    back-to-back, which the executed-mode trace alone cannot distinguish
    from one sustained intervention.
    """
    if not mode_trace:
        raise ValueError("empty mode trace")
    boundaries = 0
    prev = AUTONOMOUS
    for mode in mode_trace:
        if mode not in (AUTONOMOUS, SUPERVISOR):
            raise ValueError(f"unknown mode {mode!r} in trace")
        if prev == AUTONOMOUS and mode == SUPERVISOR:
            boundaries += 1
        prev = mode
    acts_h = sum(1 for m in mode_trace if m == SUPERVISOR)
    if switch_causes is None:
        ints = boundaries
        causes = []
    else:
        causes = list(switch_causes)
        ints = len(causes)
        if boundaries > ints:
            raise ValueError(f"{ints} switch causes but {boundaries} trace boundaries")
    if ints > acts_h:
        raise ValueError(f"{ints} switches cannot exceed {acts_h} supervisor actions")
    return EpisodeStats(
        ints=ints,
        acts_h=acts_h,
        acts_r=len(mode_trace) - acts_h,
        success=success,
        switch_causes=causes,
    )


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())  # population std


def aggregate(stats_list: list[EpisodeStats], latency: float = 10.0) -> RunMetrics:
    """Success-only per-episode means/stds plus cumulative totals over all episodes."""
    succ = [s for s in stats_list if s.success]
    total_ints = sum(s.ints for s in stats_list)
    total_h = sum(s.acts_h for s in stats_list)
    total_r = sum(s.acts_r for s in stats_list)
    if succ:
        mi, si = _mean_std([s.ints for s in succ])
        mh, sh = _mean_std([s.acts_h for s in succ])
        mr, sr = _mean_std([s.acts_r for s in succ])
        mean_int_len = (sum(s.acts_h for s in succ) / sum(s.ints for s in succ)) if sum(s.ints for s in succ) else 0.0
        b = burden(mi, mean_int_len, latency)
    else:
        mi = si = mh = sh = mr = sr = b = None
    return RunMetrics(
        episodes=len(stats_list),
        successes=len(succ),
        mean_ints=mi,
        std_ints=si,
        mean_acts_h=mh,
        std_acts_h=sh,
        mean_acts_r=mr,
        std_acts_r=sr,
        total_ints=total_ints,
        total_acts_h=total_h,
        total_acts_r=total_r,
        burden=b,
    )


def burden(switches: float, intervention_length: float, latency: float) -> float:
    """Supervisor burden: switches * (latency + mean supervisor actions per intervention)."""
    if switches < 0 or intervention_length < 0 or latency < 0:
        raise ValueError("burden inputs must be nonnegative")
    return switches * (latency + intervention_length)


_COLUMNS = [
    "Ints",
    "Acts (H)",
    "Acts (R)",
    "T Ints",
    "T Acts (H)",
    "T Acts (R)",
    "Auto Succ",
    "Int-Aided Succ",
    "Burden",
]


def _row(metrics: RunMetrics) -> dict:
    def frac(pair):
        return f"{pair[0]}/{pair[1]}" if pair else None

    return {
        "Ints": metrics.mean_ints,
        "Acts (H)": metrics.mean_acts_h,
        "Acts (R)": metrics.mean_acts_r,
        "T Ints": metrics.total_ints,
        "T Acts (H)": metrics.total_acts_h,
        "T Acts (R)": metrics.total_acts_r,
        "Auto Succ": frac(metrics.auto_success),
        "Int-Aided Succ": frac(metrics.aided_success),
        "Burden": metrics.burden,
    }


def to_jsonl(rows: dict[str, RunMetrics]) -> str:
    """One JSON record per labelled run; absent stats serialize as nulls."""
    lines = []
    for label, metrics in rows.items():
        record = {"run": label, **_row(metrics)}
        lines.append(json.dumps(record, sort_keys=True))
    return "\n".join(lines) + "\n"


def to_csv(rows: dict[str, RunMetrics]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["run", *_COLUMNS])
    writer.writeheader()
    for label, metrics in rows.items():
        writer.writerow({"run": label, **_row(metrics)})
    return buf.getvalue()
