"""Time-parameterized reference along the waypoint polyline."""

from __future__ import annotations

import numpy as np

from .environment import Waypoint


class ReferenceTrack:
    """A carrot that moves from the spawn through the waypoints at each
    segment's speed, then parks at the final waypoint."""

    def __init__(self, spawn: np.ndarray, waypoints: list[Waypoint]):
        self.spawn = np.asarray(spawn, dtype=float).reshape(3)
        self.waypoints = list(waypoints)
        knots = [self.spawn] + [w.position for w in self.waypoints]
        self._starts = np.array(knots[:-1]) if self.waypoints else np.zeros((0, 3))
        self._ends = np.array(knots[1:]) if self.waypoints else np.zeros((0, 3))
        durations = []
        for seg, wp in enumerate(self.waypoints):
            dist = float(np.linalg.norm(self._ends[seg] - self._starts[seg]))
            durations.append(dist / wp.speed if dist > 0 else 0.0)
        self._durations = np.array(durations)
        self._t_knots = np.concatenate([[0.0], np.cumsum(self._durations)])

    @property
    def duration(self) -> float:
        return float(self._t_knots[-1]) if self.waypoints else 0.0

    @property
    def final_position(self) -> np.ndarray:
        return self.waypoints[-1].position if self.waypoints else self.spawn

    def segment_at(self, t: float) -> int:
        """Index of the active segment (== active waypoint index)."""
        if not self.waypoints:
            return 0
        idx = int(np.searchsorted(self._t_knots[1:], t, side="right"))
        return min(idx, len(self.waypoints) - 1)

    def state_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(reference position, reference velocity) at time t."""
        if not self.waypoints:
            return self.spawn.copy(), np.zeros(3)
        if t >= self.duration:
            return self.final_position.copy(), np.zeros(3)
        seg = self.segment_at(t)
        t0 = self._t_knots[seg]
        dur = self._durations[seg]
        start, end = self._starts[seg], self._ends[seg]
        if dur <= 0:
            return end.copy(), np.zeros(3)
        frac = (t - t0) / dur
        direction = (end - start) / float(np.linalg.norm(end - start))
        return start + frac * (end - start), direction * self.waypoints[seg].speed

    def reference_state(self, t: float) -> np.ndarray:
        """Full 8-state reference: carrot position/velocity, level attitude."""
        pos, vel = self.state_at(t)
        out = np.zeros(8)
        out[:3] = pos
        out[3:6] = vel
        return out
