"""World geometry: axis-aligned rectangular wall panels plus mission data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import Plane

_AXIS_NAMES = {0: "x", 1: "y", 2: "z"}


@dataclass(frozen=True)
class Panel:
    """Rectangular wall patch on an axis-aligned plane.

    ``axis`` is the fixed coordinate (0=x, 1=y, 2=z) held at ``value``; the
    two free coordinates (in ascending axis order) range over
    ``[lo_a, hi_a] x [lo_b, hi_b]``.
    """

    axis: int
    value: float
    lo_a: float
    hi_a: float
    lo_b: float
    hi_b: float

    def __post_init__(self) -> None:
        if self.axis not in (0, 1, 2):
            raise ValueError("axis must be 0, 1 or 2")
        if self.lo_a >= self.hi_a or self.lo_b >= self.hi_b:
            raise ValueError("panel extent is degenerate")

    @property
    def free_axes(self) -> tuple[int, int]:
        return tuple(a for a in (0, 1, 2) if a != self.axis)  # type: ignore[return-value]

    def plane(self) -> Plane:
        coeffs = [0.0, 0.0, 0.0]
        coeffs[self.axis] = 1.0
        return Plane(coeffs[0], coeffs[1], coeffs[2], -self.value)

    def distance(self, point: np.ndarray) -> float:
        """Euclidean distance from a point to the rectangle (not the infinite
        plane)."""
        p = np.asarray(point, dtype=float).reshape(3)
        a, b = self.free_axes
        da = p[a] - min(max(p[a], self.lo_a), self.hi_a)
        db = p[b] - min(max(p[b], self.lo_b), self.hi_b)
        dn = p[self.axis] - self.value
        return float(np.sqrt(da * da + db * db + dn * dn))

    def describe(self) -> str:
        a, b = self.free_axes
        return (
            f"{_AXIS_NAMES[self.axis]}={self.value:g}, "
            f"{_AXIS_NAMES[a]} in [{self.lo_a:g},{self.hi_a:g}], "
            f"{_AXIS_NAMES[b]} in [{self.lo_b:g},{self.hi_b:g}]"
        )


@dataclass(frozen=True)
class Waypoint:
    position: np.ndarray
    speed: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        if self.speed <= 0:
            raise ValueError("waypoint speed must be positive")


@dataclass
class Environment:
    """Named panel set with spawn position and waypoint mission."""

    name: str
    panels: list[Panel]
    spawn: np.ndarray
    waypoints: list[Waypoint] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.spawn = np.asarray(self.spawn, dtype=float).reshape(3)

    def min_panel_distance(self, point: np.ndarray) -> float:
        if not self.panels:
            return float("inf")
        return min(panel.distance(point) for panel in self.panels)


def corridor_environment(
    length: float = 20.0,
    width: float = 2.0,
    height: float = 3.0,
    zigzag_amplitude: float = 0.55,
    speed: float = 0.3,
) -> Environment:
    """Two parallel walls ``width`` apart with end caps; the waypoint line
    zigzags toward the walls mid-corridor so the reference itself violates the
    safety distance, as the close-to-wall mission profile requires."""
    half = width / 2.0
    panels = [
        Panel(axis=1, value=half, lo_a=0.0, hi_a=length, lo_b=0.0, hi_b=height),
        Panel(axis=1, value=-half, lo_a=0.0, hi_a=length, lo_b=0.0, hi_b=height),
        Panel(axis=0, value=0.0, lo_a=-half, hi_a=half, lo_b=0.0, hi_b=height),
        Panel(axis=0, value=length, lo_a=-half, hi_a=half, lo_b=0.0, hi_b=height),
        Panel(axis=2, value=0.0, lo_a=0.0, hi_a=length, lo_b=-half, hi_b=half),
        Panel(axis=2, value=height, lo_a=0.0, hi_a=length, lo_b=-half, hi_b=half),
    ]
    z = height / 2.0
    amp = min(zigzag_amplitude, half - 0.05)
    waypoints = [
        Waypoint(np.array([4.0, 0.0, z]), speed),
        Waypoint(np.array([7.0, amp, z]), speed),
        Waypoint(np.array([10.0, -amp, z]), speed),
        Waypoint(np.array([13.0, 0.0, z]), speed),
        Waypoint(np.array([length - 2.0, 0.0, z]), speed),
    ]
    return Environment(
        name="corridor",
        panels=panels,
        spawn=np.array([1.5, 0.0, z]),
        waypoints=waypoints,
    )


def confined_room_environment(
    size: tuple[float, float, float] = (6.0, 6.0, 3.0),
    floor_z: float = -0.75,
) -> Environment:
    """Closed box with no entry or exit, centered on the spawn column.

    The hover waypoint sits clear of floor and ceiling; the walls are what
    the noisy runs threaten.  The default size leaves a calm center: with
    ~1.5 m phantom position errors a 4 m box keeps the collision penalty in
    permanent emergency mode for any weighting, which drowns the effect the
    adaptive-vs-fixed comparison measures.
    """
    hx, hy = size[0] / 2.0, size[1] / 2.0
    z0, z1 = floor_z, floor_z + size[2]
    panels = [
        Panel(axis=0, value=hx, lo_a=-hy, hi_a=hy, lo_b=z0, hi_b=z1),
        Panel(axis=0, value=-hx, lo_a=-hy, hi_a=hy, lo_b=z0, hi_b=z1),
        Panel(axis=1, value=hy, lo_a=-hx, hi_a=hx, lo_b=z0, hi_b=z1),
        Panel(axis=1, value=-hy, lo_a=-hx, hi_a=hx, lo_b=z0, hi_b=z1),
        Panel(axis=2, value=z0, lo_a=-hx, hi_a=hx, lo_b=-hy, hi_b=hy),
        Panel(axis=2, value=z1, lo_a=-hx, hi_a=hx, lo_b=-hy, hi_b=hy),
    ]
    hover = np.array([0.0, 0.0, 1.0])
    return Environment(
        name="confined_room",
        panels=panels,
        spawn=hover,
        waypoints=[Waypoint(hover, 0.3)],
    )
