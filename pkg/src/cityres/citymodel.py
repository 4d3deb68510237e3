"""Building and city descriptions, dimensional and nondimensional.

A building is a rigid foundation occupying an interval of the ground surface
plus an elastic superstructure; a city is an ordered row of such buildings,
either a finite row or one periodic cell repeated indefinitely.  The spectral
problem is driven by two real polynomials in the squared frequency,

    p(s) = c^2 s - (B f)^2
    q(s) = (2 r c^2 s / f) * (c^2 s - ((gamma + 1)/gamma) * p(s)),

through which the ground coupling enters, and by the top-displacement relation
eta = -(B f)^2 alpha / p(xi^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

__all__ = [
    "BuildingResonanceError",
    "DimensionalBuilding",
    "HalfSpaceSpec",
    "BuildingSpec",
    "CityConfig",
    "nondimensionalize",
    "redimensionalize",
    "replicate",
    "p_of",
    "q_of",
    "top_displacement",
    "all_identical",
    "STANDARD_PARAMETERS",
]

_CONSISTENCY_RTOL = 1e-12

#: The recurring nondimensional parameter set (mass ratio, aspect ratio,
#: width ratio, density ratio, shear-speed ratio) used by every bundled
#: scenario; foundation intervals vary per scenario.
STANDARD_PARAMETERS = dict(gamma=1.5, f=0.5, c=1.0, r=0.1, bshear=1.5)


class BuildingResonanceError(ValueError):
    """The driving polynomial p(xi^2) vanishes: isolated-building resonance."""


def _require_positive(**named: float) -> None:
    for name, value in named.items():
        if not (value > 0.0) or not math.isfinite(value):
            raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class DimensionalBuilding:
    """Physical description of one building.

    ``top_mass`` and ``elastic_modulus`` are stored explicitly but must be
    consistent with the primitive quantities: top_mass = 2 * half_width *
    height * density and elastic_modulus = 2 * shear * half_width / height.
    """

    half_width: float
    height: float
    density: float
    shear: float
    top_mass: float
    foundation_mass: float
    elastic_modulus: float

    def __post_init__(self) -> None:
        _require_positive(
            half_width=self.half_width,
            height=self.height,
            density=self.density,
            shear=self.shear,
            top_mass=self.top_mass,
            foundation_mass=self.foundation_mass,
            elastic_modulus=self.elastic_modulus,
        )
        mass = 2.0 * self.half_width * self.height * self.density
        if abs(self.top_mass - mass) > _CONSISTENCY_RTOL * mass:
            raise ValueError(
                f"top_mass {self.top_mass} inconsistent with "
                f"2 * half_width * height * density = {mass}"
            )
        modulus = 2.0 * self.shear * self.half_width / self.height
        if abs(self.elastic_modulus - modulus) > _CONSISTENCY_RTOL * modulus:
            raise ValueError(
                f"elastic_modulus {self.elastic_modulus} inconsistent with "
                f"2 * shear * half_width / height = {modulus}"
            )

    @property
    def shear_speed(self) -> float:
        return math.sqrt(self.shear / self.density)

    @classmethod
    def from_primitives(
        cls, half_width: float, height: float, density: float, shear: float,
        foundation_mass: float,
    ) -> "DimensionalBuilding":
        """Construct with the derived mass and modulus filled in consistently."""
        return cls(
            half_width=half_width,
            height=height,
            density=density,
            shear=shear,
            top_mass=2.0 * half_width * height * density,
            foundation_mass=foundation_mass,
            elastic_modulus=2.0 * shear * half_width / height,
        )


@dataclass(frozen=True)
class HalfSpaceSpec:
    """Elastic half-plane: density, shear modulus, and reference length."""

    density: float
    shear: float
    length: float

    def __post_init__(self) -> None:
        _require_positive(density=self.density, shear=self.shear, length=self.length)

    @property
    def shear_speed(self) -> float:
        return math.sqrt(self.shear / self.density)


@dataclass(frozen=True)
class BuildingSpec:
    """Nondimensional parameters of one building plus its foundation interval.

    gamma : top-to-foundation mass ratio
    f     : half-width-to-height aspect ratio
    c     : building half-width over the reference length
    r     : building-to-ground density ratio
    bshear: building-to-ground shear-speed ratio
    a, b  : foundation interval endpoints (nondimensional), a < b
    """

    gamma: float
    f: float
    c: float
    r: float
    bshear: float
    a: float
    b: float

    def __post_init__(self) -> None:
        _require_positive(
            gamma=self.gamma, f=self.f, c=self.c, r=self.r, bshear=self.bshear
        )
        if not (self.a < self.b):
            raise ValueError(f"foundation requires a < b, got [{self.a}, {self.b}]")

    @property
    def half_length(self) -> float:
        return 0.5 * (self.b - self.a)

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    def shifted(self, offset: float) -> "BuildingSpec":
        return replace(self, a=self.a + offset, b=self.b + offset)

    def shares_parameters(self, other: "BuildingSpec") -> bool:
        return (
            self.gamma == other.gamma
            and self.f == other.f
            and self.c == other.c
            and self.r == other.r
            and self.bshear == other.bshear
        )


@dataclass(frozen=True)
class CityConfig:
    """An ordered row of buildings, finite or one periodic cell.

    In periodic mode ``period`` is the full cell width (the pattern repeats
    with building j + B sitting at [a_j + period, b_j + period]) and all
    listed foundations must fit inside one cell.
    """

    buildings: tuple[BuildingSpec, ...]
    mode: str = "finite"
    period: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "buildings", tuple(self.buildings))
        if not self.buildings:
            raise ValueError("a city must contain at least one building")
        if self.mode not in ("finite", "periodic"):
            raise ValueError(f"mode must be 'finite' or 'periodic', got {self.mode!r}")
        order = sorted(self.buildings, key=lambda bl: bl.a)
        for left, right in zip(order, order[1:]):
            if right.a < left.b:
                raise ValueError(
                    f"overlapping foundations [{left.a}, {left.b}] and "
                    f"[{right.a}, {right.b}]"
                )
        if self.mode == "periodic":
            if self.period is None:
                raise ValueError("periodic mode requires a period")
            _require_positive(period=self.period)
            span = max(bl.b for bl in self.buildings) - min(
                bl.a for bl in self.buildings
            )
            if span >= self.period:
                raise ValueError(
                    f"cell of width {self.period} cannot contain foundations "
                    f"spanning {span}"
                )
        elif self.period is not None:
            raise ValueError("finite mode takes no period")

    @property
    def n_buildings(self) -> int:
        return len(self.buildings)

    @property
    def is_periodic(self) -> bool:
        return self.mode == "periodic"

    @property
    def half_period(self) -> float:
        if self.period is None:
            raise ValueError("finite city has no period")
        return 0.5 * self.period


def nondimensionalize(
    buildings: Sequence[DimensionalBuilding],
    positions: Sequence[tuple[float, float]],
    halfspace: HalfSpaceSpec,
) -> CityConfig:
    """Convert physical buildings at dimensional positions to a finite city."""
    if len(buildings) != len(positions):
        raise ValueError("one (a, b) position per building required")
    specs = []
    for bldg, (a, b) in zip(buildings, positions):
        specs.append(
            BuildingSpec(
                gamma=bldg.top_mass / bldg.foundation_mass,
                f=bldg.half_width / bldg.height,
                c=bldg.half_width / halfspace.length,
                r=bldg.density / halfspace.density,
                bshear=bldg.shear_speed / halfspace.shear_speed,
                a=a / halfspace.length,
                b=b / halfspace.length,
            )
        )
    return CityConfig(buildings=tuple(specs), mode="finite")


def redimensionalize(
    city: CityConfig, halfspace: HalfSpaceSpec, foundation_masses: Sequence[float]
) -> tuple[list[DimensionalBuilding], list[tuple[float, float]]]:
    """Inverse of :func:`nondimensionalize` given the foundation masses."""
    if len(foundation_masses) != city.n_buildings:
        raise ValueError("one foundation mass per building required")
    out_b: list[DimensionalBuilding] = []
    out_pos: list[tuple[float, float]] = []
    for spec, m0 in zip(city.buildings, foundation_masses):
        half_width = spec.c * halfspace.length
        height = half_width / spec.f
        density = spec.r * halfspace.density
        speed = spec.bshear * halfspace.shear_speed
        shear = density * speed * speed
        bldg = DimensionalBuilding.from_primitives(
            half_width=half_width,
            height=height,
            density=density,
            shear=shear,
            foundation_mass=m0,
        )
        expected_gamma = bldg.top_mass / m0
        if abs(expected_gamma - spec.gamma) > 1e-9 * spec.gamma:
            raise ValueError(
                "foundation mass inconsistent with the building's mass ratio"
            )
        out_b.append(bldg)
        out_pos.append((spec.a * halfspace.length, spec.b * halfspace.length))
    return out_b, out_pos


def replicate(city: CityConfig, n_cells: int) -> CityConfig:
    """Unroll a periodic cell into a finite city of ``n_cells`` copies."""
    if not city.is_periodic:
        raise ValueError("replicate expects a periodic city")
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    assert city.period is not None
    specs = [
        bl.shifted(k * city.period) for k in range(n_cells) for bl in city.buildings
    ]
    return CityConfig(buildings=tuple(specs), mode="finite")


def p_of(building: BuildingSpec, xi_sq: float) -> float:
    """Driving polynomial p at squared frequency xi_sq."""
    return building.c**2 * xi_sq - (building.bshear * building.f) ** 2


def q_of(building: BuildingSpec, xi_sq: float) -> float:
    """Coupling polynomial q at squared frequency xi_sq."""
    c2s = building.c**2 * xi_sq
    p = p_of(building, xi_sq)
    return (
        2.0
        * building.r
        * c2s
        / building.f
        * (c2s - (building.gamma + 1.0) / building.gamma * p)
    )


def top_displacement(building: BuildingSpec, xi: float, alpha: float) -> float:
    """Roof displacement for foundation displacement ``alpha`` at frequency xi."""
    p = p_of(building, xi * xi)
    if abs(p) <= 1e-12:
        raise BuildingResonanceError(
            f"p(xi^2) = {p:.3e} at xi = {xi}: isolated-building resonance, "
            "top displacement unbounded"
        )
    return -((building.bshear * building.f) ** 2) * alpha / p


def all_identical(city: CityConfig) -> bool:
    """True when every building shares the same nondimensional parameters."""
    first = city.buildings[0]
    return all(first.shares_parameters(bl) for bl in city.buildings[1:])
