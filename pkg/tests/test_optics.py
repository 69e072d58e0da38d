import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from holotrap import (
    ComplexField,
    ConfigurationError,
    OpticalSystem,
    SamplingError,
    fresnel_propagate,
    max_propagation_distance,
    propagate_to_focal,
    propagate_to_slm,
)
from holotrap.optics import load_intensity_csv, save_intensity_csv


def slm_field(sys, samples):
    return ComplexField(samples, sys.slm_pitch, sys.wavelength, "slm")


def focal_field(sys, samples):
    return ComplexField(samples, sys.focal_pitch, sys.wavelength, "focal")


def rms_rel(a, b):
    return np.sqrt(np.mean(np.abs(a - b) ** 2) / np.mean(np.abs(b) ** 2))


class TestOpticalSystem:
    def test_focal_pitch_derived(self, default_sys):
        # 810e-9 * 3.55e-3 / (512 * 20e-3 / 480)
        assert default_sys.focal_pitch == pytest.approx(1.34789062e-7, rel=1e-8)
        assert default_sys.field_of_view == pytest.approx(512 * default_sys.focal_pitch)

    def test_airy_radius(self, default_sys):
        assert default_sys.airy_radius == pytest.approx(1.22 * 575.1e-9, rel=1e-12)

    @pytest.mark.parametrize(
        "kw",
        [
            {"wavelength": 0},
            {"focal_length": -1e-3},
            {"pupil_diameter": 0},
            {"beam_waist_at_slm": 0},
            {"slm_pitch": 0},
            {"numerical_aperture": 1.0},
            {"numerical_aperture": 0.0},
            {"grid_size": 511},
            {"grid_size": 0},
        ],
    )
    def test_rejects_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            OpticalSystem(**kw)

    def test_pupil_is_strict_disk(self, default_sys):
        m = default_sys.pupil_mask()
        X, Y = default_sys.slm_coords()
        assert not np.any(m & (X**2 + Y**2 >= (2.5e-3) ** 2))
        assert m[default_sys.center, default_sys.center]
        # symmetric about the center sample
        c = default_sys.center
        assert np.array_equal(m[1:, 1:], m[1:, 1:][::-1, ::-1])
        assert m[c, c + 59] and not m[c, c + 60]  # 60 * 41.67 um = 2.5 mm sits on the edge


class TestComplexField:
    def test_copy_and_readonly(self):
        a = np.ones((4, 4), complex)
        f = ComplexField(a, 1e-6, 1e-6)
        a[0, 0] = 5
        assert f.samples[0, 0] == 1
        with pytest.raises(ValueError):
            f.samples[0, 0] = 2

    @pytest.mark.parametrize(
        "args",
        [
            (np.ones((4, 3)), 1e-6, 1e-6, "slm"),
            (np.ones((1, 1)), 1e-6, 1e-6, "slm"),
            (np.ones((4, 4)), 0.0, 1e-6, "slm"),
            (np.ones((4, 4)), 1e-6, -1.0, "slm"),
            (np.ones((4, 4)), 1e-6, 1e-6, "image"),
        ],
    )
    def test_invalid(self, args):
        with pytest.raises(ConfigurationError):
            ComplexField(*args)

    def test_energy(self):
        f = ComplexField(np.full((3 * 2, 6), 2.0), 1.0, 1.0)
        assert f.energy == 4 * 36


class TestFocalPropagation:
    def test_airy_first_zero(self, default_sys):
        s = default_sys
        e = propagate_to_focal(slm_field(s, s.pupil_mask()), s)
        assert e.pitch == s.focal_pitch and e.plane == "focal"
        # oracle: direct DFT of the sampled pupil along x, at sub-pixel focal positions
        X, _ = s.slm_coords()
        cols = s.pupil_mask().sum(axis=0).astype(float)
        xs = X[0]
        rho = np.linspace(0.5e-6, 0.9e-6, 4001)
        amp = np.abs(np.exp(-2j * np.pi * np.outer(rho, xs) / (s.wavelength * s.focal_length)) @ cols)
        zero = rho[np.argmin(amp)]
        assert zero == pytest.approx(s.airy_radius, rel=0.02)
        # the grid result has its first minimum within a pixel of the same radius
        row = np.abs(e.samples[s.center, s.center :])
        first_min = int(np.argmax(np.diff(row) > 0))
        assert abs(first_min * s.focal_pitch - zero) <= s.focal_pitch

    def test_delta_gives_flat_focal_magnitude(self, small_sys):
        s = small_sys
        a = np.zeros((64, 64), complex)
        a[s.center, s.center] = 1
        mag = np.abs(propagate_to_focal(slm_field(s, a), s).samples)
        assert np.ptp(mag) < 1e-15
        assert mag[0, 0] == pytest.approx(1 / 64)

    def test_blaze_575um_lands_at_5um(self, default_sys):
        s = default_sys
        X, _ = s.slm_coords()
        e = propagate_to_focal(slm_field(s, s.pupil_mask() * np.exp(2j * np.pi * X / 575.1e-6)), s)
        r, c = np.unravel_index(np.argmax(e.intensity), e.intensity.shape)
        assert r == s.center
        assert abs((c - s.center) * s.focal_pitch - 5.0e-6) <= s.focal_pitch / 2

    def test_round_trip(self, default_sys):
        s = default_sys
        rng = np.random.default_rng(1)
        x = rng.normal(size=(512, 512)) + 1j * rng.normal(size=(512, 512))
        back = propagate_to_slm(propagate_to_focal(slm_field(s, x), s), s)
        assert back.plane == "slm" and back.pitch == s.slm_pitch
        assert rms_rel(back.samples, x) < 1e-12

    def test_centered_focal_delta_gives_constant_slm(self, small_sys):
        s = small_sys
        a = np.zeros((64, 64), complex)
        a[s.center, s.center] = 3.0
        e = propagate_to_slm(focal_field(s, a), s).samples
        assert np.allclose(e, 3.0 / 64, atol=1e-15, rtol=0)

    def test_symmetric_pair_gives_cosine(self, small_sys):
        s = small_sys
        m = 5
        a = np.zeros((64, 64), complex)
        a[s.center, s.center + m] = 1
        a[s.center, s.center - m] = 1
        e = propagate_to_slm(focal_field(s, a), s).samples
        k = np.arange(64) - s.center
        oracle = 2 * np.cos(2 * np.pi * m * k / 64) / 64
        assert np.max(np.abs(e.imag)) < 1e-15
        assert np.allclose(e, np.broadcast_to(oracle, (64, 64)), atol=1e-15)

    @pytest.mark.parametrize("m", [1, 3, 17])
    def test_shift_theorem(self, small_sys, m):
        s = small_sys
        a = np.zeros((64, 64), complex)
        a[s.center, s.center] = 1
        b = np.zeros((64, 64), complex)
        b[s.center, s.center + m] = 1
        ea = propagate_to_slm(focal_field(s, a), s).samples
        eb = propagate_to_slm(focal_field(s, b), s).samples
        k = np.arange(64) - s.center
        ramp = np.exp(2j * np.pi * m * k / 64)
        assert np.allclose(eb, ea * ramp[None, :], atol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(
        x=arrays(np.float64, (2, 16, 16), elements=st.floats(-10, 10)),
        y=arrays(np.float64, (2, 16, 16), elements=st.floats(-10, 10)),
        a=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
        b=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
    )
    def test_linearity(self, x, y, a, b):
        s = OpticalSystem(grid_size=16)
        X = x[0] + 1j * x[1]
        Y = y[0] + 1j * y[1]
        lhs = propagate_to_focal(slm_field(s, a * X + b * Y), s).samples
        rhs = a * propagate_to_focal(slm_field(s, X), s).samples + b * propagate_to_focal(slm_field(s, Y), s).samples
        scale = max(1.0, np.abs(rhs).max())
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale

    @settings(max_examples=25, deadline=None)
    @given(x=arrays(np.float64, (2, 8, 8), elements=st.floats(-1e3, 1e3)))
    def test_parseval_property(self, x):
        s = OpticalSystem(grid_size=8)
        X = x[0] + 1j * x[1]
        f = propagate_to_focal(slm_field(s, X), s)
        e = np.sum(np.abs(X) ** 2)
        assert f.energy == pytest.approx(e, rel=1e-10, abs=1e-300)

    def test_mismatched_grid(self, default_sys, small_sys):
        with pytest.raises(ConfigurationError):
            propagate_to_focal(slm_field(small_sys, np.ones((64, 64))), default_sys)
        with pytest.raises(ConfigurationError):
            propagate_to_focal(ComplexField(np.ones((512, 512)), 1e-5, default_sys.wavelength), default_sys)
        with pytest.raises(ConfigurationError):
            propagate_to_slm(slm_field(default_sys, np.ones((512, 512))), default_sys)
        with pytest.raises(ConfigurationError):
            propagate_to_focal(ComplexField(np.ones((512, 512)), default_sys.slm_pitch, 633e-9), default_sys)


def gaussian_focus(sys, w0):
    X, Y = sys.focal_coords()
    return ComplexField(np.exp(-(X**2 + Y**2) / w0**2), sys.focal_pitch, sys.wavelength, "focal")


class TestFresnel:
    def test_zero_distance_identity(self, default_sys):
        f = gaussian_focus(default_sys, 2e-6)
        assert fresnel_propagate(f, 0.0) is f

    def test_energy_preserved(self, default_sys):
        f = gaussian_focus(default_sys, 2e-6)
        g = fresnel_propagate(f, 20e-6)
        assert g.plane == "intermediate"
        assert g.energy == pytest.approx(f.energy, rel=1e-8)

    @pytest.mark.parametrize("paraxial", [True, False])
    def test_gaussian_rayleigh_range(self, default_sys, paraxial):
        w0 = 2e-6
        zr = math.pi * w0**2 / default_sys.wavelength
        f = gaussian_focus(default_sys, w0)
        c = default_sys.center
        i0 = f.intensity[c, c]
        ip = fresnel_propagate(f, zr, paraxial=paraxial).intensity[c, c] / i0
        im = fresnel_propagate(f, -zr, paraxial=paraxial).intensity[c, c] / i0
        assert ip == pytest.approx(0.5, rel=0.01)
        assert im == pytest.approx(ip, rel=0.01)

    def test_bound_violation_reports_max(self, default_sys):
        f = gaussian_focus(default_sys, 0.5e-6)
        zmax = max_propagation_distance(f)
        assert 0 < zmax < 1e-3
        with pytest.raises(SamplingError) as exc:
            fresnel_propagate(f, 2 * zmax)
        assert exc.value.max_distance == pytest.approx(zmax)
        fresnel_propagate(f, 0.5 * zmax)

    def test_bound_shrinks_with_bandwidth(self, default_sys):
        wide = max_propagation_distance(gaussian_focus(default_sys, 2e-6))
        narrow = max_propagation_distance(gaussian_focus(default_sys, 1e-6))
        assert narrow < wide

    def test_exact_kernel_rejects_evanescent(self):
        # focal pitch below wavelength/2 reaches evanescent frequencies
        s = OpticalSystem(grid_size=64)
        rng = np.random.default_rng(0)
        f = ComplexField(rng.normal(size=(64, 64)), 0.2e-6, 810e-9, "focal")
        with pytest.raises(SamplingError):
            fresnel_propagate(f, 1e-9, paraxial=False)
        assert s.grid_size == 64

    def test_lens_phase_refocuses(self, default_sys):
        s = default_sys
        f_lens = -s.focal_length**2 / 30e-6
        X, Y = s.slm_coords()
        slm = s.pupil_mask() * np.exp(-1j * np.pi * (X**2 + Y**2) / (s.wavelength * f_lens))
        focal = propagate_to_focal(slm_field(s, slm), s)
        c = s.center
        on_axis = {dz: fresnel_propagate(focal, dz * 1e-6).intensity[c, c] for dz in (28, 30, 32)}
        assert on_axis[30] > on_axis[28] and on_axis[30] > on_axis[32]


def test_intensity_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    a = rng.random((6, 6))
    p = tmp_path / "i.csv"
    save_intensity_csv(a, p)
    text = p.read_text().splitlines()
    assert len(text) == 6 and text[0].count(",") == 5
    assert np.allclose(load_intensity_csv(p), a, rtol=1e-12)
    f = ComplexField(a + 1j * a, 1.0, 1.0)
    save_intensity_csv(f, p)
    assert np.allclose(load_intensity_csv(p), 2 * a**2, rtol=1e-12)
