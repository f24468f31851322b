"""Latency bookkeeping and the scripted-mission evaluator.

Latency statistics are computed over one-way estimates (round trip / 2)
and exported as CSV rows flagged with whether mapping was active at probe
send time. The mission evaluator replays a recorded trajectory against
the world geometry and grades the take-off / fly-to-wall / return / land
profile as a pass/fail report.
"""

import csv
import math
import statistics
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import VehicleState
from .protocol import LatencyProbe
from .world import WorldModel

# Mission pass thresholds (declared acceptance parameters).
CLEARANCE_MIN_M = 0.5
RETURN_ERROR_MAX_M = 0.10
TOUCHDOWN_SPEED_MAX = 0.2
TOUCHDOWN_ALTITUDE_M = 0.01
TRAJECTORY_GAP_MAX_S = 0.1


class EmptyLogError(ValueError):
    """Latency statistics need at least one probe."""


class TrajectoryGapError(ValueError):
    """Trajectory has a hole larger than the sampling contract allows."""


@dataclass
class LatencyLog:
    """Time-ordered probe list plus mapping-enabled intervals."""

    probes: List[LatencyProbe] = field(default_factory=list)
    mapping_intervals: List[Tuple[int, int]] = field(default_factory=list)

    def add(self, probe: LatencyProbe):
        if any(p.id == probe.id for p in self.probes):
            raise ValueError(f"duplicate probe id {probe.id}")
        self.probes.append(probe)

    def add_mapping_interval(self, start_ns: int, end_ns: int):
        if end_ns < start_ns:
            raise ValueError("interval end before start")
        for s, e in self.mapping_intervals:
            if start_ns < e and s < end_ns:
                raise ValueError("mapping intervals must not overlap")
        self.mapping_intervals.append((start_ns, end_ns))
        self.mapping_intervals.sort()

    def mapping_enabled(self, t_ns: int) -> bool:
        return any(s <= t_ns < e for s, e in self.mapping_intervals)


def latency_stats(log: LatencyLog) -> Tuple[float, float, float]:
    """(mean_ms, median_ms, max_ms) of the one-way estimates."""
    if not log.probes:
        raise EmptyLogError("no probes recorded")
    ms = [p.one_way_ms for p in log.probes]
    return statistics.fmean(ms), statistics.median(ms), max(ms)


CSV_HEADER = ["probe_id", "t_tx_ns", "one_way_ms", "mapping_enabled"]


def csv_rows(log: LatencyLog) -> List[Tuple[int, int, float, int]]:
    return [(p.id, p.t_tx_ns, p.one_way_ms,
             int(log.mapping_enabled(p.t_tx_ns))) for p in log.probes]


def export_csv(log: LatencyLog, path) -> None:
    """Write one row per probe; floats use repr so they parse back exactly."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for probe_id, t_tx_ns, one_way_ms, enabled in csv_rows(log):
            writer.writerow([probe_id, t_tx_ns, repr(one_way_ms), enabled])


def read_csv(path) -> List[Tuple[int, int, float, int]]:
    """Parse an exported latency CSV back into its rows."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [(int(r[0]), int(r[1]), float(r[2]), int(r[3]))
                for r in reader]


@dataclass
class MissionReport:
    """Pass/fail summary of one scripted flight."""

    min_wall_clearance: float
    return_error: float
    touchdown_speed: float
    max_latency_ms: float = 0.0
    mean_latency_ms: float = 0.0
    median_latency_ms: float = 0.0
    passed: bool = False

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict}: clearance {self.min_wall_clearance:.3f} m, "
                f"return {self.return_error:.3f} m, "
                f"touchdown {self.touchdown_speed:.3f} m/s")


def evaluate_mission(trajectory: Sequence[VehicleState], world: WorldModel,
                     script=None,
                     latency_log: Optional[LatencyLog] = None) -> MissionReport:
    """Grade a recorded flight: clearance, return accuracy, touchdown.

    The trajectory must be gap-free (sample spacing <= 0.1 s). The script
    is accepted for interface parity but the grading is purely geometric.
    """
    if not trajectory:
        raise TrajectoryGapError("empty trajectory")
    times = np.array([s.time for s in trajectory])
    if np.any(np.diff(times) > TRAJECTORY_GAP_MAX_S):
        worst = float(np.diff(times).max())
        raise TrajectoryGapError(f"largest sample gap {worst:.3f} s")

    positions = np.array([s.position for s in trajectory])
    clearance = min(world.obstacle_clearance(p) for p in positions)

    return_error = float(np.linalg.norm(positions[-1][:2] - positions[0][:2]))

    z = positions[:, 2]
    vz = np.array([s.velocity[2] for s in trajectory])
    if z[-1] > TOUCHDOWN_ALTITUDE_M:
        touchdown_speed = math.inf  # never landed
    else:
        airborne = np.nonzero(z > TOUCHDOWN_ALTITUDE_M)[0]
        touchdown_idx = int(airborne[-1]) + 1 if airborne.size else 0
        touchdown_speed = float(abs(vz[touchdown_idx]))

    report = MissionReport(
        min_wall_clearance=float(clearance),
        return_error=return_error,
        touchdown_speed=touchdown_speed,
        passed=(clearance >= CLEARANCE_MIN_M
                and return_error <= RETURN_ERROR_MAX_M
                and touchdown_speed <= TOUCHDOWN_SPEED_MAX),
    )
    if latency_log is not None and latency_log.probes:
        mean_ms, median_ms, max_ms = latency_stats(latency_log)
        report.mean_latency_ms = mean_ms
        report.median_latency_ms = median_ms
        report.max_latency_ms = max_ms
    return report


__all__ = [
    "LatencyLog", "latency_stats", "export_csv", "read_csv", "csv_rows",
    "CSV_HEADER", "MissionReport", "evaluate_mission",
    "EmptyLogError", "TrajectoryGapError",
    "CLEARANCE_MIN_M", "RETURN_ERROR_MAX_M", "TOUCHDOWN_SPEED_MAX",
]
