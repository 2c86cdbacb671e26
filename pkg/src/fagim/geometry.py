"""Port grid, block grouping and the index <-> coordinate maps.

All labels and indices exposed here are 1-based: group labels ``g``, labels
inside a group ``p`` and global port indices ``i``.  Groups are numbered top
to bottom then left to right, and so are ports inside a group.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_range(name: str, value: int, upper: int) -> None:
    if not 1 <= value <= upper:
        raise ValueError(f"{name}={value} outside 1..{upper}")


def group_label(a: int, b: int, G1: int, G2: int | None = None) -> int:
    """Label of the group in row ``a`` and column ``b`` of the group grid."""
    _check_range("a", a, G1)
    if G2 is not None:
        _check_range("b", b, G2)
    elif b < 1:
        raise ValueError(f"b={b} must be >= 1")
    return (b - 1) * G1 + a


def group_position(g: int, G1: int) -> tuple[int, int]:
    """Inverse of :func:`group_label`: ``g -> (a, b)``."""
    if g < 1:
        raise ValueError(f"g={g} must be >= 1")
    b, a = divmod(g - 1, G1)
    return a + 1, b + 1


def port_label_in_group(c: int, d: int, P1: int, P2: int | None = None) -> int:
    """Label of the port in row ``c`` and column ``d`` inside its group."""
    _check_range("c", c, P1)
    if P2 is not None:
        _check_range("d", d, P2)
    elif d < 1:
        raise ValueError(f"d={d} must be >= 1")
    return (d - 1) * P1 + c


def port_position_in_group(p: int, P1: int) -> tuple[int, int]:
    """Inverse of :func:`port_label_in_group`: ``p -> (c, d)``."""
    if p < 1:
        raise ValueError(f"p={p} must be >= 1")
    d, c = divmod(p - 1, P1)
    return c + 1, d + 1


def global_index(g: int, p: int, P: int, G: int | None = None) -> int:
    """Global port index of port ``p`` of group ``g``."""
    _check_range("p", p, P)
    if G is not None:
        _check_range("g", g, G)
    elif g < 1:
        raise ValueError(f"g={g} must be >= 1")
    return (g - 1) * P + p


def decompose(i: int, P: int, N: int | None = None) -> tuple[int, int]:
    """Inverse of :func:`global_index`: ``i -> (g, p)``."""
    if N is not None:
        _check_range("i", i, N)
    elif i < 1:
        raise ValueError(f"i={i} must be >= 1")
    g, p = divmod(i - 1, P)
    return g + 1, p + 1


@dataclass(frozen=True)
class FluidAntennaGeometry:
    """Rectangular fluid antenna of size ``wavelength*W1 x wavelength*W2``
    with ``N1 x N2`` uniformly spaced ports.

    Axis 1 is vertical (rows), axis 2 horizontal (columns).  An axis with a
    single port has zero spacing and every port sits at coordinate 0 on it.
    """

    N1: int
    N2: int
    W1: float
    W2: float
    wavelength: float = 1.0

    def __post_init__(self):
        for name in ("N1", "N2"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        for name in ("W1", "W2"):
            if not np.isfinite(getattr(self, name)) or getattr(self, name) < 0:
                raise ConfigError(f"{name} must be finite and non-negative")
        if not self.wavelength > 0:
            raise ConfigError("wavelength must be positive")

    @property
    def N(self) -> int:
        return self.N1 * self.N2

    @property
    def D1(self) -> float:
        return self.wavelength * self.W1 / (self.N1 - 1) if self.N1 > 1 else 0.0

    @property
    def D2(self) -> float:
        return self.wavelength * self.W2 / (self.N2 - 1) if self.N2 > 1 else 0.0

    def grid_coordinates(self, row: np.ndarray, col: np.ndarray) -> np.ndarray:
        """(x, y) of 1-based grid rows/columns, stacked on the last axis."""
        row = np.asarray(row)
        col = np.asarray(col)
        return np.stack([(row - 1) * self.D1, (col - 1) * self.D2], axis=-1)

    def column_major_coordinates(self) -> np.ndarray:
        """Coordinates of an ungrouped labeling, top to bottom then left to
        right over the whole grid.  Used by FA-IM, which has no groups."""
        i = np.arange(self.N)
        col, row = np.divmod(i, self.N1)
        return self.grid_coordinates(row + 1, col + 1)


@dataclass(frozen=True)
class GroupingPlan:
    """Block partition of the port grid into ``G1 x G2`` groups of
    ``P1 x P2`` ports each."""

    geometry: FluidAntennaGeometry
    G1: int
    G2: int

    def __post_init__(self):
        geo = self.geometry
        for name, n_axis in (("G1", geo.N1), ("G2", geo.N2)):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
            if n_axis % value:
                raise ConfigError(f"{name}={value} does not tile an axis of {n_axis} ports")
        if not _is_power_of_two(self.P):
            raise ConfigError(f"ports per group P={self.P} is not a power of 2")

    @property
    def P1(self) -> int:
        return self.geometry.N1 // self.G1

    @property
    def P2(self) -> int:
        return self.geometry.N2 // self.G2

    @property
    def G(self) -> int:
        return self.G1 * self.G2

    @property
    def P(self) -> int:
        return self.P1 * self.P2

    @property
    def N(self) -> int:
        return self.geometry.N

    def labels(self, i: int) -> tuple[int, int, int, int]:
        """Row/column labels ``(a, b, c, d)`` of global port ``i``."""
        g, p = decompose(i, self.P, self.N)
        a, b = group_position(g, self.G1)
        c, d = port_position_in_group(p, self.P1)
        return a, b, c, d

    def grid_position(self, i: int) -> tuple[int, int]:
        """1-based (row, column) of port ``i`` on the full grid."""
        a, b, c, d = self.labels(i)
        return (a - 1) * self.P1 + c, (b - 1) * self.P2 + d

    def port_coordinates(self, i: int) -> tuple[float, float]:
        row, col = self.grid_position(i)
        x, y = self.geometry.grid_coordinates(row, col)
        return float(x), float(y)

    @cached_property
    def coordinates(self) -> np.ndarray:
        """``(N, 2)`` array; row ``i-1`` holds the coordinates of port ``i``."""
        rows, cols = zip(*(self.grid_position(i) for i in range(1, self.N + 1)))
        return self.geometry.grid_coordinates(np.array(rows), np.array(cols))

    @cached_property
    def index_sets(self) -> tuple[tuple[int, ...], ...]:
        """The port index set of every group, ``index_sets[g-1]``."""
        P = self.P
        return tuple(tuple(range((g - 1) * P + 1, g * P + 1)) for g in range(1, self.G + 1))

    def group_of(self, i: int) -> int:
        return decompose(i, self.P, self.N)[0]


def port_coordinates(plan: GroupingPlan, i: int) -> tuple[float, float]:
    return plan.port_coordinates(i)


def grouping_index_sets(plan: GroupingPlan) -> list[tuple[int, ...]]:
    return list(plan.index_sets)
