import numpy as np
import pytest

from tensortomo.errors import GridError, InputDomainError
from tensortomo.forward import Sinogram
from tensortomo.phantoms import (Inclusion, SceneSpec, add_noise,
                                 corner_reflector_profile, deviatoric_delta,
                                 disk_indicator_field, hemisphere_mask,
                                 mollifier_2d, scene_to_reflectivity)
from tensortomo.tensors import l2_norm


class TestMollifier:
    def test_unit_integral(self):
        for eps in (0.05, 0.2):
            n = 801
            x = np.linspace(-1, 1, n)
            xx, yy = np.meshgrid(x, x, indexing="ij")
            h = x[1] - x[0]
            total = mollifier_2d(eps)(xx, yy).sum() * h * h
            assert total == pytest.approx(1.0, rel=1e-6)

    def test_peak_value(self):
        eps = 0.1
        assert mollifier_2d(eps)(0.0, 0.0) == pytest.approx(
            2.0 / (np.pi * eps ** 2))

    def test_second_moment(self):
        # width convention: standard deviation eps/2 per axis
        eps = 0.2
        n = 1201
        x = np.linspace(-1, 1, n)
        xx, yy = np.meshgrid(x, x, indexing="ij")
        h = x[1] - x[0]
        m = mollifier_2d(eps)(xx, yy)
        assert (m * xx ** 2).sum() * h * h == pytest.approx(
            (eps / 2) ** 2, rel=1e-6)


class TestDeviatoricDelta:
    def test_component_structure(self):
        f = deviatoric_delta(0.1, 129)
        assert f.rank == 2
        assert np.allclose(f.values[:, :, 1], 0.0)
        assert np.allclose(f.values[:, :, 0], -f.values[:, :, 2])

    def test_component_integrals(self):
        f = deviatoric_delta(0.1, 513)
        h = f.spacing
        assert f.values[:, :, 0].sum() * h * h == pytest.approx(1.0, rel=1e-6)
        assert f.values[:, :, 2].sum() * h * h == pytest.approx(-1.0,
                                                                rel=1e-6)

    def test_trace_free(self):
        f = deviatoric_delta(0.08, 129)
        assert np.allclose(f.values[:, :, 0] + f.values[:, :, 2], 0.0)

    def test_width_below_grid_resolution(self):
        with pytest.raises(GridError):
            deviatoric_delta(0.01, 65)


class TestSceneSpec:
    def test_rejects_out_of_disk_inclusion(self):
        inc = Inclusion((0.9, 0.0), 0.3, corner_reflector_profile(0.5))
        with pytest.raises(InputDomainError):
            SceneSpec(inclusions=[inc])

    def test_rejects_bad_mollification(self):
        with pytest.raises(InputDomainError):
            SceneSpec(mollify_eps=0.0)

    def test_overlap_warns(self):
        resp = corner_reflector_profile(0.5)
        spec = SceneSpec(inclusions=[Inclusion((0.1, 0.0), 0.3, resp),
                                     Inclusion((-0.1, 0.0), 0.3, resp)])
        with pytest.warns(UserWarning):
            scene_to_reflectivity(spec)


class TestReflectivity:
    def test_background_inside_outside(self):
        model = scene_to_reflectivity(SceneSpec(background=2.0),
                                      scene_radius=3.0)
        d = np.array([1.0, 0.0])
        assert model(np.array([0.0, 0.0]), d, d) == pytest.approx(2.0)
        assert model(np.array([2.9, 0.0]), d, d) == pytest.approx(2.0)
        assert model(np.array([3.1, 0.0]), d, d) == pytest.approx(0.0)

    def test_corner_reflector_directionality(self):
        resp = corner_reflector_profile(0.3)
        spec = SceneSpec(inclusions=[Inclusion((0.0, 0.0), 0.5, resp)])
        model = scene_to_reflectivity(spec)
        x = np.array([0.0, 0.0])
        d = np.array([1.0, 0.0])
        d2 = np.array([np.cos(0.3), np.sin(0.3)])
        mono = model(x, d, d)
        bi = model(x, d, d2)
        assert mono == pytest.approx(1.0)
        assert bi < mono
        assert bi == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_swap_symmetry(self):
        resp = corner_reflector_profile(0.4)
        spec = SceneSpec(background=0.5,
                         inclusions=[Inclusion((0.2, -0.1), 0.3, resp)])
        model = scene_to_reflectivity(spec)
        rng = np.random.default_rng(4)
        for _ in range(10):
            x = rng.uniform(-1, 1, size=2) * 0.5
            a1, a2 = rng.uniform(0, 2 * np.pi, size=2)
            u = np.array([np.cos(a1), np.sin(a1)])
            v = np.array([np.cos(a2), np.sin(a2)])
            assert model(x, u, v) == pytest.approx(model(x, v, u), rel=1e-14)

    def test_corner_reflector_rejects_bad_sharpness(self):
        with pytest.raises(InputDomainError):
            corner_reflector_profile(-1.0)


class TestMaskAndNoise:
    def make_sino(self):
        s_grid, phi_grid = Sinogram.grids(11, 8)
        return Sinogram(s_grid, phi_grid, np.ones((11, 8)))

    def test_hemisphere_mask_keeps_half(self):
        # axis between bins so no grid angle sits on the half-circle boundary
        g = hemisphere_mask(self.make_sino(), np.pi / 2 + np.pi / 8)
        kept = np.unique(g.mask, axis=0)
        assert g.mask.sum() == 11 * 4
        assert g.values.shape == (11, 8)
        assert kept.shape[0] == 1

    def test_noise_zero_sigma_is_identity(self):
        g0 = self.make_sino()
        g = add_noise(g0, 0.0, seed=1)
        assert np.array_equal(g.values, g0.values)

    def test_noise_deterministic_and_masked(self):
        g0 = hemisphere_mask(self.make_sino(), 0.0)
        a = add_noise(g0, 0.1, seed=7)
        b = add_noise(g0, 0.1, seed=7)
        c = add_noise(g0, 0.1, seed=8)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)
        assert np.array_equal(a.values[~g0.mask], g0.values[~g0.mask])
        assert not np.array_equal(a.values[g0.mask], g0.values[g0.mask])

    def test_noise_rejects_negative_sigma(self):
        with pytest.raises(InputDomainError):
            add_noise(self.make_sino(), -0.1, seed=0)

    def test_noise_statistics(self):
        s_grid, phi_grid = Sinogram.grids(101, 64)
        g0 = Sinogram(s_grid, phi_grid, np.zeros((101, 64)))
        g = add_noise(g0, 0.5, seed=3)
        assert np.std(g.values) == pytest.approx(0.5, rel=0.02)


class TestHelperFields:
    def test_disk_indicator_area(self):
        f = disk_indicator_field(257)
        h = f.spacing
        area = f.values[:, :, 0].sum() * h * h
        assert area == pytest.approx(np.pi, rel=1e-3)

    def test_l2_norm_of_indicator(self):
        f = disk_indicator_field(257)
        # antialiased edge cells bias the squared integral down by O(h)
        assert l2_norm(f) == pytest.approx(np.sqrt(np.pi), rel=3e-3)
