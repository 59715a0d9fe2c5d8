"""Network geometry: AP placement, reference-point grids, test points."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from cfpos.errors import ConfigError, DegenerateGeometryError
from cfpos.numerics import RngStream


@dataclass(frozen=True)
class Position2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class ApSite:
    position: Position2D
    height: float = 10.0
    antenna_count: int = 25
    element_spacing: float = 0.5  # in wavelengths

    def __post_init__(self):
        if self.height <= 0:
            raise ConfigError(f"AP height must be positive, got {self.height}")
        if self.antenna_count < 2:
            raise ConfigError(f"AP needs at least 2 antennas, got {self.antenna_count}")
        if self.element_spacing <= 0:
            raise ConfigError(f"element spacing must be positive, got {self.element_spacing}")


@dataclass(frozen=True)
class Scenario:
    aps: tuple[ApSite, ...]
    rps: tuple[Position2D, ...]
    ue_height: float = 1.5
    area_side: float = 200.0
    grid_side: int = field(default=0)

    def __post_init__(self):
        if len(self.aps) < 1:
            raise ConfigError("scenario needs at least one AP")
        if len(self.rps) < 4:
            raise ConfigError(f"scenario needs at least 4 RPs, got {len(self.rps)}")
        object.__setattr__(self, "aps", tuple(self.aps))
        object.__setattr__(self, "rps", tuple(self.rps))
        if self.grid_side:
            expected = make_rp_grid(self.area_side, self.grid_side**2)
            if list(self.rps) != expected:
                raise ConfigError("RPs do not match the declared grid")
        for p in (*self.rps, *(ap.position for ap in self.aps)):
            if not (0 <= p.x <= self.area_side and 0 <= p.y <= self.area_side):
                raise ConfigError(f"site ({p.x}, {p.y}) lies outside the area")

    @property
    def n_aps(self) -> int:
        return len(self.aps)

    @property
    def n_rps(self) -> int:
        return len(self.rps)

    def ap_xy(self) -> np.ndarray:
        return np.array([[ap.position.x, ap.position.y] for ap in self.aps]).reshape(-1, 2)

    def ap_heights(self) -> np.ndarray:
        return np.array([ap.height for ap in self.aps])

    def rp_xy(self) -> np.ndarray:
        return positions_array(self.rps)

    def to_json(self) -> str:
        doc = {
            "area_side": self.area_side,
            "ue_height": self.ue_height,
            "grid": {"side": self.grid_side, "n_rps": self.n_rps},
            "aps": [
                {
                    "x": ap.position.x,
                    "y": ap.position.y,
                    "height": ap.height,
                    "antenna_count": ap.antenna_count,
                    "element_spacing": ap.element_spacing,
                }
                for ap in self.aps
            ],
        }
        if not self.grid_side:
            doc["rps"] = [asdict(p) for p in self.rps]
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        aps = tuple(
            ApSite(
                Position2D(a["x"], a["y"]),
                a["height"],
                a["antenna_count"],
                a["element_spacing"],
            )
            for a in doc["aps"]
        )
        side = doc.get("grid", {}).get("side", 0)
        if side:
            rps = make_rp_grid(doc["area_side"], side * side)
        else:
            rps = [Position2D(p["x"], p["y"]) for p in doc["rps"]]
        return cls(aps, tuple(rps), doc["ue_height"], doc["area_side"], side)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_json(Path(path).read_text())


def positions_array(points) -> np.ndarray:
    return np.array([[p.x, p.y] for p in points], dtype=float).reshape(-1, 2)


def place_aps(area_side: float, L: int, height: float, antenna_count: int,
              element_spacing: float, rng: RngStream) -> list[ApSite]:
    """Place ``L`` APs i.i.d. uniformly over the square ``[0, area_side]^2``."""
    if L < 1:
        raise ConfigError(f"number of APs must be >= 1, got {L}")
    xy = rng.generator.uniform(0.0, area_side, size=(L, 2))
    return [ApSite(Position2D(float(x), float(y)), height, antenna_count, element_spacing)
            for x, y in xy]


def make_rp_grid(area_side: float, K: int) -> list[Position2D]:
    """Cell-centered square grid of ``K`` reference points, row-major.

    Each axis holds ``sqrt(K)`` points at pitch ``area_side / sqrt(K)``,
    inset by half a pitch from the boundary.
    """
    side = math.isqrt(K) if K > 0 else 0
    if K < 1 or side * side != K:
        lo = max(side, 1) ** 2
        hi = (side + 1) ** 2
        raise ConfigError(
            f"number of RPs must be a perfect square, got {K} (nearest: {lo} or {hi})"
        )
    pitch = area_side / side
    coords = [(i + 0.5) * pitch for i in range(side)]
    return [Position2D(x, y) for y in coords for x in coords]


def grid_pitch(area_side: float, K: int) -> float:
    return area_side / math.isqrt(K)


def nominal_aoa(ap: ApSite, ue: Position2D) -> float:
    """Azimuth from ``ap`` to ``ue`` in degrees, in (-180, 180]."""
    dx = ue.x - ap.position.x
    dy = ue.y - ap.position.y
    if dx == 0.0 and dy == 0.0:
        raise DegenerateGeometryError("UE is horizontally coincident with the AP")
    return wrap_deg(math.degrees(math.atan2(dy, dx)))


def nominal_aoa_array(ap_xy: np.ndarray, ue_xy: np.ndarray) -> np.ndarray:
    """Vectorized azimuths, shape (len(ue_xy), len(ap_xy))."""
    d = ue_xy[:, None, :] - ap_xy[None, :, :]
    if np.any((d[..., 0] == 0.0) & (d[..., 1] == 0.0)):
        raise DegenerateGeometryError("a UE is horizontally coincident with an AP")
    return wrap_deg(np.degrees(np.arctan2(d[..., 1], d[..., 0])))


def wrap_deg(angle):
    """Wrap angles in degrees to (-180, 180]."""
    a = np.mod(np.asarray(angle, dtype=float), 360.0)
    a = np.where(a > 180.0, a - 360.0, a)
    return a if a.ndim else float(a)


def distance_3d(ap: ApSite, ue: Position2D, ue_height: float) -> float:
    """Distance between the AP array and a UE at ``ue_height``."""
    return math.hypot(ue.x - ap.position.x, ue.y - ap.position.y, ap.height - ue_height)


def distance_3d_array(ap_xy, ap_heights, ue_xy, ue_height: float) -> np.ndarray:
    """Vectorized 3D distances, shape (len(ue_xy), len(ap_xy))."""
    d = ue_xy[:, None, :] - np.asarray(ap_xy)[None, :, :]
    dz = np.asarray(ap_heights)[None, :] - ue_height
    return np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2 + dz**2)


def sample_test_points(area_side: float, T: int, rng: RngStream) -> list[Position2D]:
    """``T`` test points i.i.d. uniform over the area."""
    if T < 1:
        raise ConfigError(f"number of test points must be >= 1, got {T}")
    xy = rng.generator.uniform(0.0, area_side, size=(T, 2))
    return [Position2D(float(x), float(y)) for x, y in xy]


def build_scenario(area_side: float, L: int, K: int, *, ap_height: float = 10.0,
                   ue_height: float = 1.5, antenna_count: int = 25,
                   element_spacing: float = 0.5, rng: RngStream) -> Scenario:
    aps = place_aps(area_side, L, ap_height, antenna_count, element_spacing, rng)
    rps = make_rp_grid(area_side, K)
    return Scenario(tuple(aps), tuple(rps), ue_height, area_side, math.isqrt(K))
