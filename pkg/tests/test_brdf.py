import math

import numpy as np
import pytest

from anglseg.brdf import (
    LAMBERTIAN, PHONG_SPECULAR, TWO_LOBE, BrdfModel, Direction,
    constant_illumination, default_materials, eval_brdf, integrate_radiance,
)


def random_direction(rng, theta_max=math.pi / 2):
    return Direction(float(rng.uniform(0, theta_max)),
                     float(rng.uniform(0, 2 * math.pi)))


class TestDirection:
    def test_phi_wraps(self):
        d = Direction(0.3, 2 * math.pi + 1.0)
        assert abs(d.phi - 1.0) < 1e-12
        d = Direction(0.3, -0.5)
        assert abs(d.phi - (2 * math.pi - 0.5)) < 1e-12

    def test_theta_out_of_range(self):
        with pytest.raises(ValueError):
            Direction(math.pi / 2 + 0.1, 0.0)
        with pytest.raises(ValueError):
            Direction(-0.1, 0.0)

    def test_unit_vector(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            d = random_direction(rng)
            u = d.unit()
            assert abs(np.linalg.norm(u) - 1.0) < 1e-12
            assert u[2] >= -1e-12


class TestModelValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            BrdfModel(0, "mirror")

    def test_albedo_range(self):
        with pytest.raises(ValueError):
            BrdfModel(0, LAMBERTIAN, albedo=1.5)

    def test_white_point_cap(self):
        # peak 0.9 + 0.5*(10+2)/2 = 3.9, far past the cap
        with pytest.raises(ValueError, match="white point"):
            BrdfModel(0, TWO_LOBE, albedo=0.9, specular_strength=0.5,
                      shininess=10)
        BrdfModel(0, TWO_LOBE, albedo=0.3, specular_strength=0.1, shininess=6)


class TestEvalBrdf:
    def test_lambertian_constant(self):
        m = BrdfModel(0, LAMBERTIAN, albedo=0.5)
        rng = np.random.default_rng(11)
        for _ in range(10):
            v = eval_brdf(m, random_direction(rng), random_direction(rng))
            assert abs(v - 0.5 / math.pi) < 1e-12
        assert round(eval_brdf(m, Direction(0.1, 0.2), Direction(0.3, 0.4)), 6) \
            == 0.159155

    def test_reciprocity_100_pairs(self):
        rng = np.random.default_rng(23)
        models = [
            BrdfModel(0, LAMBERTIAN, albedo=0.7),
            BrdfModel(1, PHONG_SPECULAR, specular_strength=0.1, shininess=12),
            BrdfModel(2, TWO_LOBE, albedo=0.4, specular_strength=0.05,
                      shininess=20),
        ]
        for m in models:
            for _ in range(100):
                l, v = random_direction(rng), random_direction(rng)
                assert eval_brdf(m, l, v) == eval_brdf(m, v, l)

    def test_mirror_beats_off_mirror(self):
        rng = np.random.default_rng(31)
        for n in (8, 16, 64):
            m = BrdfModel(0, PHONG_SPECULAR, specular_strength=0.03,
                          shininess=n)
            for _ in range(10):
                l = Direction(float(rng.uniform(0.2, 0.8)),
                              float(rng.uniform(0, 2 * math.pi)))
                mirror = Direction(l.theta, l.phi + math.pi)
                off = Direction(min(l.theta + math.pi / 6, math.pi / 2),
                                l.phi + math.pi)
                assert eval_brdf(m, l, mirror) > eval_brdf(m, l, off)

    def test_nonnegative_everywhere(self):
        rng = np.random.default_rng(41)
        for m in default_materials(10):
            for _ in range(30):
                assert eval_brdf(m, random_direction(rng),
                                 random_direction(rng)) >= 0.0


class TestIntegrateRadiance:
    def test_lambertian_closed_form(self):
        # constant illumination: integral collapses to albedo * level
        view = Direction(0.4, 1.0)
        for albedo in (0.2, 0.5, 0.9):
            for level in (1.0, 2.5):
                m = BrdfModel(0, LAMBERTIAN, albedo=albedo)
                got = integrate_radiance(m, constant_illumination(level), view)
                want = albedo * level
                assert abs(got - want) / want < 1e-3

    def test_zero_illumination(self):
        m = BrdfModel(0, TWO_LOBE, albedo=0.5, specular_strength=0.05,
                      shininess=10)
        got = integrate_radiance(m, constant_illumination(0.0),
                                 Direction(0.3, 0.0))
        assert got == 0.0

    def test_linearity(self):
        m = BrdfModel(0, TWO_LOBE, albedo=0.4, specular_strength=0.06,
                      shininess=12)
        view = Direction(0.5, 2.0)
        one = integrate_radiance(m, constant_illumination(1.0), view)
        two = integrate_radiance(m, constant_illumination(2.0), view)
        assert abs(two - 2.0 * one) / abs(two) < 1e-9

    def test_grid_minimum(self):
        m = BrdfModel(0, LAMBERTIAN, albedo=0.5)
        with pytest.raises(ValueError, match="16x32"):
            integrate_radiance(m, constant_illumination(1.0),
                               Direction(0.1, 0.0), n_theta=8, n_phi=32)

    def test_energy_cap_all_defaults(self):
        # hemispherical reflectance under unit illumination stays near 1
        views = [Direction(0.0, 0.0), Direction(0.45, 1.0), Direction(1.2, 4.0)]
        for m in default_materials(10):
            for v in views:
                assert integrate_radiance(m, constant_illumination(1.0), v) \
                    <= 1.05


class TestDefaultMaterials:
    def test_ids_and_count(self):
        bank = default_materials(10)
        assert [m.class_id for m in bank] == list(range(10))
        assert len({m.name for m in bank}) == 10
        assert len(default_materials(6)) == 6

    def test_too_many(self):
        with pytest.raises(ValueError):
            default_materials(11)

    def test_has_variety(self):
        kinds = {m.kind for m in default_materials(10)}
        assert LAMBERTIAN in kinds and TWO_LOBE in kinds
