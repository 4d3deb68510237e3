"""Tests for building/city descriptions and the p, q, eta relations."""

import math

import pytest

from cityres.citymodel import (
    STANDARD_PARAMETERS,
    BuildingResonanceError,
    BuildingSpec,
    CityConfig,
    DimensionalBuilding,
    HalfSpaceSpec,
    all_identical,
    nondimensionalize,
    p_of,
    q_of,
    redimensionalize,
    replicate,
    top_displacement,
)


def standard_building(a=-0.2, b=0.2) -> BuildingSpec:
    return BuildingSpec(a=a, b=b, **STANDARD_PARAMETERS)


class TestDimensionalBuilding:
    def test_from_primitives_consistency(self):
        bldg = DimensionalBuilding.from_primitives(
            half_width=1.0, height=2.0, density=200.0, shear=450.0,
            foundation_mass=533.0,
        )
        assert bldg.top_mass == pytest.approx(800.0, abs=0)
        assert bldg.elastic_modulus == pytest.approx(450.0, abs=0)
        assert bldg.shear_speed == pytest.approx(1.5, abs=1e-15)

    def test_inconsistent_mass_rejected(self):
        with pytest.raises(ValueError):
            DimensionalBuilding(
                half_width=1.0, height=2.0, density=200.0, shear=450.0,
                top_mass=801.0, foundation_mass=533.0, elastic_modulus=450.0,
            )

    def test_inconsistent_modulus_rejected(self):
        with pytest.raises(ValueError):
            DimensionalBuilding(
                half_width=1.0, height=2.0, density=200.0, shear=450.0,
                top_mass=800.0, foundation_mass=533.0, elastic_modulus=451.0,
            )

    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            DimensionalBuilding.from_primitives(
                half_width=-1.0, height=2.0, density=200.0, shear=450.0,
                foundation_mass=1.0,
            )


class TestNondimensionalize:
    def test_ratios(self):
        hs = HalfSpaceSpec(density=100.0, shear=100.0, length=1.0)  # beta = 1
        bldg = DimensionalBuilding.from_primitives(
            half_width=1.0, height=2.0, density=10.0,
            shear=2.25 * 10.0,  # building speed 1.5
            foundation_mass=40.0 / 1.5,  # gamma = 1.5
        )
        city = nondimensionalize([bldg], [(-0.2, 0.2)], hs)
        (spec,) = city.buildings
        assert spec.gamma == pytest.approx(1.5, rel=1e-15)
        assert spec.f == pytest.approx(0.5, abs=0)
        assert spec.c == pytest.approx(1.0, abs=0)
        assert spec.r == pytest.approx(0.1, rel=1e-15)
        assert spec.bshear == pytest.approx(1.5, rel=1e-15)
        assert (spec.a, spec.b) == (-0.2, 0.2)

    def test_length_scaling(self):
        hs = HalfSpaceSpec(density=1.0, shear=1.0, length=2.0)
        bldg = DimensionalBuilding.from_primitives(
            half_width=2.0, height=4.0, density=1.0, shear=1.0, foundation_mass=8.0
        )
        city = nondimensionalize([bldg], [(1.0, 3.0)], hs)
        (spec,) = city.buildings
        assert spec.c == pytest.approx(1.0, abs=0)
        assert (spec.a, spec.b) == (0.5, 1.5)

    def test_round_trip(self):
        hs = HalfSpaceSpec(density=37.5, shear=91.2, length=3.7)
        originals = [
            DimensionalBuilding.from_primitives(
                half_width=1.1, height=2.9, density=13.0, shear=88.0,
                foundation_mass=17.0,
            ),
            DimensionalBuilding.from_primitives(
                half_width=0.7, height=1.3, density=21.0, shear=40.0,
                foundation_mass=9.0,
            ),
        ]
        positions = [(0.0, 2.5), (4.0, 5.6)]
        city = nondimensionalize(originals, positions, hs)
        back_b, back_pos = redimensionalize(
            city, hs, [bl.foundation_mass for bl in originals]
        )
        for orig, rec in zip(originals, back_b):
            for name in (
                "half_width", "height", "density", "shear",
                "top_mass", "foundation_mass", "elastic_modulus",
            ):
                o, r = getattr(orig, name), getattr(rec, name)
                assert abs(o - r) <= 1e-12 * abs(o), name
        for (oa, ob), (ra, rb) in zip(positions, back_pos):
            assert abs(oa - ra) <= 1e-12 * max(1.0, abs(oa))
            assert abs(ob - rb) <= 1e-12 * abs(ob)


class TestCityConfig:
    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            CityConfig(
                buildings=(standard_building(0.0, 1.0), standard_building(0.5, 2.0))
            )

    def test_periodic_requires_period_and_fit(self):
        with pytest.raises(ValueError):
            CityConfig(buildings=(standard_building(),), mode="periodic")
        with pytest.raises(ValueError):
            CityConfig(
                buildings=(standard_building(0.0, 3.0),),
                mode="periodic",
                period=2.0,
            )

    def test_finite_takes_no_period(self):
        with pytest.raises(ValueError):
            CityConfig(buildings=(standard_building(),), mode="finite", period=5.0)

    def test_half_period(self):
        city = CityConfig(
            buildings=(standard_building(0.0, 1.0),), mode="periodic", period=7.5
        )
        assert city.half_period == 3.75

    def test_replicate_unrolls_cells(self):
        cell = CityConfig(
            buildings=(standard_building(-2.5, -1.5), standard_building(1.5, 3.0)),
            mode="periodic",
            period=7.5,
        )
        city = replicate(cell, 3)
        assert city.mode == "finite"
        assert city.n_buildings == 6
        assert city.buildings[2].a == pytest.approx(-2.5 + 7.5, abs=0)
        assert city.buildings[5].b == pytest.approx(3.0 + 2 * 7.5, abs=0)

    def test_replicate_rejects_finite(self):
        with pytest.raises(ValueError):
            replicate(CityConfig(buildings=(standard_building(),)), 2)


class TestPolynomials:
    def test_p_at_standard_parameters(self):
        assert p_of(standard_building(), 1.0) == pytest.approx(0.4375, abs=1e-15)

    def test_p_root(self):
        b = standard_building()
        root = (b.bshear * b.f / b.c) ** 2
        assert p_of(b, root) == pytest.approx(0.0, abs=1e-15)

    def test_p_increasing(self):
        b = standard_building()
        xs = [0.1 * k for k in range(1, 30)]
        vals = [p_of(b, x) for x in xs]
        assert all(v2 > v1 for v1, v2 in zip(vals, vals[1:]))

    def test_q_at_standard_parameters(self):
        want = 0.4 * (1.0 - (5.0 / 3.0) * 0.4375)
        assert q_of(standard_building(), 1.0) == pytest.approx(want, abs=1e-15)
        assert want == pytest.approx(0.1083333, abs=5e-8)

    def test_q_vanishes_at_zero_frequency(self):
        assert q_of(standard_building(), 1e-300) == pytest.approx(0.0, abs=1e-299)

    def test_identical_building_degeneracy(self):
        b1 = standard_building(0.0, 1.0)
        b2 = standard_building(4.0, 5.0)
        for s in (0.3, 1.0, 2.7):
            assert p_of(b1, s) == p_of(b2, s)
            assert q_of(b1, s) == q_of(b2, s)

    def test_all_identical(self):
        city = CityConfig(
            buildings=(standard_building(0.0, 1.0), standard_building(2.0, 3.0))
        )
        assert all_identical(city)
        other = BuildingSpec(
            gamma=2.0, f=0.5, c=1.0, r=0.1, bshear=1.5, a=5.0, b=6.0
        )
        mixed = CityConfig(buildings=(standard_building(0.0, 1.0), other))
        assert not all_identical(mixed)


class TestTopDisplacement:
    def test_standard_value(self):
        eta = top_displacement(standard_building(), 1.0, 1.0)
        assert eta == pytest.approx(-0.5625 / 0.4375, abs=1e-12)
        assert eta == pytest.approx(-1.2857143, abs=5e-8)

    def test_zero_alpha(self):
        assert top_displacement(standard_building(), 1.0, 0.0) == 0.0

    def test_resonance_singularity(self):
        b = standard_building()
        xi = b.bshear * b.f / b.c
        with pytest.raises(BuildingResonanceError):
            top_displacement(b, xi, 1.0)

    def test_linear_in_alpha(self):
        b = standard_building()
        assert top_displacement(b, 1.3, 2.0) == pytest.approx(
            2.0 * top_displacement(b, 1.3, 1.0), rel=1e-15
        )
