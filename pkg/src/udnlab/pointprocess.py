"""Random network geometries: point sampling, association, loads.

Coordinates are in meters, densities in nodes per km^2. All sampling
takes an explicit ``numpy.random.Generator`` so callers control stream
derivation (see :mod:`udnlab.streams`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._nearest import nearest_index
from .errors import InvalidParameterError, NoServerError

AN = "AN"
UE = "UE"

_M2_PER_KM2 = 1e6


@dataclass(frozen=True)
class Window:
    """Planar observation window, a disk or an axis-aligned square.

    ``size_m`` is the disk radius or the square side, in meters.
    """

    shape: str
    center: tuple[float, float]
    size_m: float

    def __post_init__(self):
        if self.shape not in ("disk", "square"):
            raise InvalidParameterError(f"unknown window shape {self.shape!r}")
        if not self.size_m > 0:
            raise InvalidParameterError("window size must be positive")

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius_m=1000.0) -> "Window":
        return cls("disk", (float(center[0]), float(center[1])), float(radius_m))

    @classmethod
    def square(cls, center=(0.0, 0.0), side_m=1000.0) -> "Window":
        return cls("square", (float(center[0]), float(center[1])), float(side_m))

    @property
    def area_km2(self) -> float:
        if self.shape == "disk":
            return math.pi * self.size_m**2 / _M2_PER_KM2
        return self.size_m**2 / _M2_PER_KM2

    def contains(self, points: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
        """Boolean mask of points inside the window (closed, tolerant)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dx = pts[:, 0] - self.center[0]
        dy = pts[:, 1] - self.center[1]
        slack = 1.0 + rtol
        if self.shape == "disk":
            return dx**2 + dy**2 <= (self.size_m * slack) ** 2
        half = self.size_m / 2.0 * slack
        return (np.abs(dx) <= half) & (np.abs(dy) <= half)


@dataclass(frozen=True)
class PointSet:
    """A finite set of planar points of one kind (AN or UE)."""

    points: np.ndarray  # shape (n, 2), meters
    kind: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        if self.kind not in (AN, UE):
            raise InvalidParameterError(f"point kind must be 'AN' or 'UE', got {self.kind!r}")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class NetworkSnapshot:
    """One realization of AN and UE positions with nearest-AN associations.

    ``assoc[u]`` is the serving AN index of UE ``u``; ``loads[a]`` counts
    the UEs associated to AN ``a`` (so ``loads.sum() == len(ues)``).
    """

    window: Window
    ans: PointSet
    ues: PointSet
    assoc: np.ndarray
    loads: np.ndarray
    typical_ue_index: int | None = None


def _sample_uniform(count: int, window: Window, rng: np.random.Generator) -> np.ndarray:
    if count == 0:
        return np.empty((0, 2), dtype=float)
    cx, cy = window.center
    if window.shape == "disk":
        r = window.size_m * np.sqrt(rng.random(count))
        phi = 2.0 * np.pi * rng.random(count)
        return np.column_stack((cx + r * np.cos(phi), cy + r * np.sin(phi)))
    half = window.size_m / 2.0
    xy = rng.random((count, 2)) * window.size_m
    return xy + (cx - half, cy - half)


def sample_hppp(density_per_km2: float, window: Window, rng: np.random.Generator,
                kind: str = AN) -> PointSet:
    """Homogeneous Poisson point process restricted to ``window``.

    The point count is Poisson with mean ``density * area``; positions are
    i.i.d. uniform.
    """
    if density_per_km2 < 0:
        raise InvalidParameterError("density must be nonnegative")
    n = int(rng.poisson(density_per_km2 * window.area_km2))
    return PointSet(_sample_uniform(n, window, rng), kind)


def sample_fixed(count: int, window: Window, rng: np.random.Generator,
                 kind: str = UE) -> PointSet:
    """Exactly ``count`` i.i.d. uniform points in ``window``."""
    if count < 0:
        raise InvalidParameterError("count must be nonnegative")
    return PointSet(_sample_uniform(int(count), window, rng), kind)


def associate_nearest(ans: PointSet, ues: PointSet) -> tuple[np.ndarray, np.ndarray]:
    """Map every UE to its minimum-distance AN.

    Returns ``(assoc, loads)``. Exact distance ties go to the lowest AN
    index. Raises :class:`NoServerError` when there is no AN.
    """
    if len(ans) == 0:
        raise NoServerError("cannot associate UEs: no access nodes")
    assoc = nearest_index(ans.points, ues.points)
    loads = np.bincount(assoc, minlength=len(ans)).astype(np.int64)
    return assoc, loads


def make_snapshot(window: Window, ans: PointSet, ues: PointSet,
                  typical_ue_index: int | None = None) -> NetworkSnapshot:
    """Assemble a snapshot, computing associations and loads."""
    assoc, loads = associate_nearest(ans, ues)
    return NetworkSnapshot(window, ans, ues, assoc, loads, typical_ue_index)


def place_typical_ue(snapshot: NetworkSnapshot) -> NetworkSnapshot:
    """Insert a probe UE at the window center and refresh associations.

    The inserted UE becomes the last UE index and is marked as typical.
    """
    center = np.asarray(snapshot.window.center, dtype=float).reshape(1, 2)
    pts = np.vstack([snapshot.ues.points, center])
    ues = PointSet(pts, snapshot.ues.kind)
    assoc, loads = associate_nearest(snapshot.ans, ues)
    return NetworkSnapshot(snapshot.window, snapshot.ans, ues, assoc, loads,
                           typical_ue_index=len(pts) - 1)
