"""Iteration, potential, rays, fixed points."""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from puzzlekit.dynamics import (
    Parameter,
    apply_map,
    classify_alpha,
    equipotential,
    fixed_points,
    green,
    trace_ray,
)
from puzzlekit.errors import InMainComponent, NotLanded

GOLDEN = (1.0 - math.sqrt(5.0)) / 2.0  # fixed point of z^2 - 1
RABBIT = complex(-0.12256116687665362, 0.7448617666197442)

# frozen from a 60-digit evaluation of lim d^-n log|f^n(z)|
GREEN_2_M1_10 = 2.2975344148631247838
GREEN_3_I_5 = 1.6094485801245049161


class TestApplyMap:
    def test_squaring(self):
        assert apply_map(Parameter(2, 0), 2.0) == 4.0

    def test_critical_value_is_c(self):
        assert apply_map(Parameter(3, 1j), 0.0) == 1j

    def test_fixed_point_of_basilica(self):
        z = GOLDEN
        assert abs(apply_map(Parameter(2, -1), z) - z) < 1e-15

    def test_degree_validation(self):
        with pytest.raises(ValueError):
            Parameter(1, 0.0)


class TestGreen:
    def test_pure_power_log(self):
        assert abs(green(Parameter(2, 0), 2.0) - math.log(2.0)) < 1e-12

    def test_non_escaping_is_zero(self):
        assert green(Parameter(2, 0), 0.5) == 0.0
        assert green(Parameter(2, -1), 0.0) == 0.0

    def test_frozen_oracle_quadratic(self):
        assert abs(green(Parameter(2, -1), 10.0) - GREEN_2_M1_10) < 1e-9

    def test_frozen_oracle_cubic(self):
        assert abs(green(Parameter(3, 1j), 5.0) - GREEN_3_I_5) < 1e-9

    def test_functional_equation(self):
        p = Parameter(2, RABBIT)
        for z in (3.0 + 0.2j, -1.9 + 1.4j, 0.8 - 2.2j):
            assert abs(green(p, apply_map(p, z)) - 2 * green(p, z)) < 1e-10

    def test_escape_radius_validation(self):
        with pytest.raises(ValueError):
            green(Parameter(2, -1), 10.0, escape_radius=1.5)


class TestTraceRay:
    def test_radial_ray_of_squaring(self):
        tr = trace_ray(Parameter(2, 0), Fraction(0), 2.0, 0.01)
        assert np.abs(tr.points.imag).max() < 1e-12
        assert np.abs(tr.points - np.exp(tr.potentials)).max() < 1e-12

    def test_half_ray_is_negative_axis(self):
        tr = trace_ray(Parameter(2, 0), Fraction(1, 2), 2.0, 0.01)
        assert np.abs(tr.points.imag).max() < 1e-12
        assert (tr.points.real < 0).all()

    def test_potentials_strictly_decreasing(self):
        tr = trace_ray(Parameter(2, -1), Fraction(1, 7), 2.0, 0.05)
        assert (np.diff(tr.potentials) < 0).all()

    def test_landing_at_alpha_of_basilica(self):
        tr = trace_ray(Parameter(2, -1), Fraction(1, 3), 2.0, 1e-25,
                       landing_tol=1e-8)
        assert tr.landed
        assert abs(tr.landing_point - GOLDEN) < 1e-6

    def test_not_landed_raises_when_required(self):
        with pytest.raises(NotLanded):
            trace_ray(Parameter(2, -1), Fraction(1, 3), 2.0, 0.5,
                      require_landing=True)

    def test_short_trace_reports_not_landed(self):
        tr = trace_ray(Parameter(2, -1), Fraction(1, 3), 2.0, 0.5)
        assert not tr.landed and tr.landing_point is None

    def test_bad_height_range(self):
        with pytest.raises(ValueError):
            trace_ray(Parameter(2, 0), Fraction(0), 0.01, 2.0)

    def test_points_sit_on_recorded_potential(self):
        p = Parameter(2, RABBIT)
        tr = trace_ray(p, Fraction(1, 7), 2.0, 0.01, landing_tol=0.0)
        for z, h in zip(tr.points, tr.potentials):
            assert abs(green(p, z) - h) < 1e-8

    def test_equivariance(self):
        # f maps the angle-t trace at height h to the angle-dt trace at dh
        p = Parameter(2, RABBIT)
        a = trace_ray(p, Fraction(1, 7), 2.0, 0.02, 8, landing_tol=0.0)
        b = trace_ray(p, Fraction(2, 7), 4.0, 0.04, 8, landing_tol=0.0)
        m = min(len(a.points), len(b.points))
        assert np.abs(2.0 * a.potentials[:m] - b.potentials[:m]).max() < 1e-12
        image = a.points[:m] ** 2 + p.c
        assert np.abs(image - b.points[:m]).max() < 1e-6


class TestFixedPoints:
    def test_squaring(self):
        fps = fixed_points(Parameter(2, 0))
        locs = sorted(fp.location.real for fp in fps)
        assert np.allclose(locs, [0.0, 1.0], atol=1e-12)
        mults = sorted(abs(fp.multiplier) for fp in fps)
        assert np.allclose(mults, [0.0, 2.0], atol=1e-12)

    def test_basilica_golden_pair(self):
        fps = fixed_points(Parameter(2, -1))
        locs = sorted(fp.location.real for fp in fps)
        root5 = math.sqrt(5.0)
        assert np.allclose(locs, [(1 - root5) / 2, (1 + root5) / 2], atol=1e-12)
        for fp in fps:
            assert abs(fp.multiplier - 2 * fp.location) < 1e-12
            assert not fp.non_repelling

    def test_cubic_trivial(self):
        fps = fixed_points(Parameter(3, 0))
        locs = sorted(round(fp.location.real, 9) for fp in fps)
        assert locs == [-1.0, 0.0, 1.0]

    def test_kind_starts_as_other(self):
        assert all(fp.kind == "other" for fp in fixed_points(Parameter(2, -1)))

    @settings(max_examples=40, deadline=None)
    @given(
        d=st.sampled_from([2, 3, 5]),
        re=st.floats(-2, 2, allow_nan=False),
        im=st.floats(-2, 2, allow_nan=False),
    )
    def test_residuals_and_vieta(self, d, re, im):
        p = Parameter(d, complex(re, im))
        fps = fixed_points(p)
        assert len(fps) == d
        for fp in fps:
            z = fp.location
            assert abs(apply_map(p, z) - z) < 1e-10 * (1 + abs(z) ** d)
        total = sum(fp.location for fp in fps)
        prod = np.prod([fp.location for fp in fps])
        assert abs(total - (1.0 if d == 2 else 0.0)) < 1e-8
        assert abs(prod - (-1) ** d * p.c) < 1e-8


class TestClassifyAlpha:
    def test_basilica(self):
        info = classify_alpha(Parameter(2, -1), q_max=4)
        assert info.kind == "alpha"
        assert abs(info.location - GOLDEN) < 1e-12
        assert info.landing_angles == [Fraction(1, 3), Fraction(2, 3)]

    def test_chebyshev(self):
        info = classify_alpha(Parameter(2, -2), q_max=4)
        assert abs(info.location + 1.0) < 1e-12
        assert abs(info.multiplier + 2.0) < 1e-12
        assert info.q == 2

    def test_rabbit_third_limb(self):
        info = classify_alpha(Parameter(2, RABBIT))
        assert info.landing_angles == [Fraction(1, 7), Fraction(2, 7),
                                       Fraction(4, 7)]
        assert abs(info.multiplier) > 1.0

    def test_dendrite_parameter(self):
        info = classify_alpha(Parameter(2, 1j))
        assert info.q == 3
        assert info.landing_angles == [Fraction(1, 7), Fraction(2, 7),
                                       Fraction(4, 7)]

    def test_main_component_rejected(self):
        with pytest.raises(InMainComponent):
            classify_alpha(Parameter(2, 0.1))

    def test_cubic_sample(self):
        info = classify_alpha(Parameter(3, complex(0.3, 1.1)), q_max=4)
        assert info.q == 2
        assert info.landing_angles == [Fraction(1, 8), Fraction(3, 8)]

    def test_angle_cycle_invariant_under_multiplication(self):
        info = classify_alpha(Parameter(2, RABBIT))
        angles = set(info.landing_angles)
        assert {(2 * a) % 1 for a in angles} == angles


class TestEquipotential:
    def test_circle_for_squaring(self):
        curve = equipotential(Parameter(2, 0), math.log(2.0), 64)
        assert np.abs(np.abs(curve) - 2.0).max() < 1e-9

    def test_circle_any_degree(self):
        curve = equipotential(Parameter(5, 0), 0.8, 32)
        assert np.abs(np.abs(curve) - math.exp(0.8)).max() < 1e-9

    def test_jordan_curve_encloses_fixed_points(self):
        p = Parameter(2, -1)
        curve = equipotential(p, 1.0, 256)
        for fp in fixed_points(p):
            rel = np.roll(curve, -1) - fp.location
            ang = np.angle(rel / (curve - fp.location))
            assert round(float(ang.sum() / (2 * math.pi))) == 1

    def test_positive_height_required(self):
        with pytest.raises(ValueError):
            equipotential(Parameter(2, 0), 0.0, 16)
