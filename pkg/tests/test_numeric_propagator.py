import math

import numpy as np
import pytest

import airy_evolve.numeric_propagator as npmod
from airy_evolve import (
    Aperture,
    ForceProfile,
    GridSpec,
    PhysicalConstants,
    StepScheme,
    WaveField,
    ai_packet,
    analytic_field,
    dft,
    evolve,
    idft,
    shape_error,
    step,
)
from airy_evolve.errors import ConfigurationError, DivergenceError, ParameterError, StateError
from airy_evolve.numeric_propagator import CRANK_NICOLSON, SPLIT_STEP, steps_for

UNIT = PhysicalConstants(hbar=1.0, mass=1.0, b=1.0)
SCHEMES = [SPLIT_STEP, CRANK_NICOLSON]


def gaussian(grid, sigma, x_c=0.0, k0=0.0):
    x = grid.x
    return WaveField(grid, np.exp(-((x - x_c) ** 2) / (4 * sigma ** 2) + 1j * k0 * x))


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return WaveField(grid, rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n))


class TestGrid:
    def test_sampling(self):
        g = GridSpec(-1.0, 1.0, 20)
        assert g.dx == 0.1
        assert g.x[0] == -1.0 and g.x[-1] == pytest.approx(0.9)

    @pytest.mark.parametrize("args", [(0.0, 0.0, 32), (1.0, -1.0, 32), (-1.0, 1.0, 8), (-1, 1, 16.5)])
    def test_invalid(self, args):
        with pytest.raises(ParameterError):
            GridSpec(*args)

    def test_small_grid_message(self):
        with pytest.raises(ParameterError, match="n ≥ 16"):
            GridSpec(-1, 1, 8)

    def test_field_rejects_nan(self):
        g = GridSpec(-1, 1, 16)
        a = np.zeros(16, complex)
        a[3] = np.nan
        with pytest.raises(StateError):
            WaveField(g, a)

    def test_field_is_read_only(self):
        f = WaveField(GridSpec(-1, 1, 16), np.ones(16))
        with pytest.raises(ValueError):
            f.amplitudes[0] = 2.0


class TestSchemeAndAperture:
    def test_unknown_scheme(self):
        with pytest.raises(ParameterError):
            StepScheme("rk4", 1e-3)

    @pytest.mark.parametrize("dt", [-1e-3, math.nan, math.inf])
    def test_bad_dt(self, dt):
        with pytest.raises(ParameterError):
            StepScheme(SPLIT_STEP, dt)

    def test_mask_shape(self):
        ap = Aperture(-1.0, 1.0, 0.5)
        m = ap.mask(np.array([-2.0, -1.5, -1.25, -1.0, 0.0, 1.0, 1.25, 1.5, 3.0]))
        assert m.tolist() == pytest.approx([0, 0, 0.5, 1, 1, 1, 0.5, 0, 0], abs=1e-15)

    def test_mask_smooth_and_bounded(self):
        ap = Aperture(-3.0, 2.0, 1.5)
        x = np.linspace(-6, 6, 2001)
        m = ap.mask(x)
        assert np.all((m >= 0) & (m <= 1))
        assert np.max(np.abs(np.diff(m))) < 0.01

    @pytest.mark.parametrize("args", [(1.0, 1.0, 0.5), (0.0, 1.0, 0.0)])
    def test_invalid_aperture(self, args):
        with pytest.raises(ParameterError):
            Aperture(*args)


class TestTransforms:
    grid = GridSpec(-10.0, 10.0, 128)

    def test_constant_field_single_mode(self):
        s = dft(WaveField(self.grid, np.full(self.grid.n, 2.0 + 1j)))
        mag = np.abs(s.amplitudes)
        assert mag[0] > 1
        assert np.all(mag[1:] < 1e-12 * mag[0])

    def test_round_trip(self):
        f = random_field(self.grid, 1)
        assert np.max(np.abs(idft(dft(f)).amplitudes - f.amplitudes)) < 1e-12

    def test_parseval(self):
        f = random_field(self.grid, 2)
        s = dft(f)
        lhs = f.norm()
        rhs = np.sum(np.abs(s.amplitudes) ** 2) * self.grid.dk
        assert abs(lhs - rhs) / lhs < 1e-10

    def test_gaussian_transform_matches_continuum(self):
        g = GridSpec(-20.0, 20.0, 512)
        s = dft(WaveField(g, np.exp(-g.x ** 2 / 2)))
        assert np.allclose(s.amplitudes, np.exp(-g.k ** 2 / 2), atol=1e-12)


class TestStep:
    def test_zero_dt_identity(self):
        f = ai_packet(1.0, 0.0, GridSpec(-20, 20, 256))
        out = step(f, UNIT, ForceProfile.constant(1.0), StepScheme(SPLIT_STEP, 0.0), 0.0)
        assert np.array_equal(out.amplitudes, f.amplitudes)

    def test_non_finite_field_rejected(self):
        class Broken:
            grid = GridSpec(-1, 1, 16)
            amplitudes = np.full(16, np.nan, complex)

        with pytest.raises(StateError):
            step(Broken(), UNIT, ForceProfile.zero(), StepScheme(), 0.0)

    def test_plane_wave_phase(self):
        g = GridSpec(-10.0, 10.0, 256)
        k0 = 5 * g.dk
        f = WaveField(g, np.exp(1j * k0 * g.x))
        dt = 0.01
        scheme = StepScheme(SPLIT_STEP, dt)
        (_, out), = evolve(f, UNIT, ForceProfile.zero(), scheme, None, 100 * dt)
        expected = np.exp(1j * k0 * g.x - 1j * k0 ** 2 * 100 * dt / 2)
        assert np.max(np.abs(out.amplitudes - expected)) < 1e-10

    def test_gaussian_spreading(self):
        g = GridSpec(-40.0, 40.0, 2048)
        sigma0, t = 1.0, 2.0
        (_, out), = evolve(
            gaussian(g, sigma0), UNIT, ForceProfile.zero(), StepScheme(SPLIT_STEP, 1e-2), None, t
        )
        d = out.density
        mean = np.sum(g.x * d) / np.sum(d)
        var = np.sum((g.x - mean) ** 2 * d) / np.sum(d)
        expected = sigma0 ** 2 * (1 + (t / (2 * sigma0 ** 2)) ** 2)
        assert abs(var - expected) / expected < 1e-3

    def test_gaussian_under_constant_force_accelerates(self):
        g = GridSpec(-40.0, 40.0, 2048)
        f0, t = 0.8, 2.0
        (_, out), = evolve(
            gaussian(g, 1.5), UNIT, ForceProfile.constant(f0), StepScheme(SPLIT_STEP, 1e-2), None, t
        )
        d = out.density
        mean = np.sum(g.x * d) / np.sum(d)
        assert mean == pytest.approx(f0 * t ** 2 / 2, abs=1e-6)

    @pytest.mark.parametrize("kind", SCHEMES)
    def test_norm_conserved_without_aperture(self, kind):
        g = GridSpec(-30.0, 30.0, 1024)
        f = gaussian(g, 1.0, k0=1.0)
        force = ForceProfile.sinusoid(0.5, 2.0)
        (_, out), = evolve(f, UNIT, force, StepScheme(kind, 1e-3), None, 1.0)
        assert abs(out.norm() - f.norm()) / f.norm() < 1e-10


class TestEvolve:
    grid = GridSpec(-60.0, 60.0, 4096)
    aperture = Aperture(-40.0, 40.0, 8.0)

    def test_zero_end_time_returns_masked_initial(self):
        f = ai_packet(1.0, 0.0, self.grid)
        out = evolve(f, UNIT, ForceProfile.zero(), StepScheme(), self.aperture, 0.0)
        assert len(out) == 1 and out[0][0] == 0.0
        assert np.array_equal(out[0][1].amplitudes, f.amplitudes * self.aperture.mask(self.grid.x))

    def test_snapshot_off_lattice(self):
        f = ai_packet(1.0, 0.0, self.grid)
        with pytest.raises(ConfigurationError):
            evolve(f, UNIT, ForceProfile.zero(), StepScheme(SPLIT_STEP, 0.3), None, 0.9, [0.45])

    def test_unsorted_snapshots(self):
        f = ai_packet(1.0, 0.0, self.grid)
        with pytest.raises(ConfigurationError):
            evolve(f, UNIT, ForceProfile.zero(), StepScheme(SPLIT_STEP, 0.1), None, 1.0, [0.5, 0.2])

    def test_steps_for(self):
        assert steps_for(2.0, 1e-3) == 2000
        assert steps_for(0.0, 0.5) == 0
        with pytest.raises(ConfigurationError):
            steps_for(1.0, 0.3)

    def test_divergence_reports_step(self, monkeypatch):
        real = npmod._Stepper.advance

        def poisoned(self, psi, t):
            out = real(self, psi, t)
            if t >= 4 * self.dt - 1e-15:
                out = out.copy()
                out[7] = np.nan
            return out

        monkeypatch.setattr(npmod._Stepper, "advance", poisoned)
        f = ai_packet(1.0, 0.0, self.grid)
        with pytest.raises(DivergenceError) as info:
            evolve(f, UNIT, ForceProfile.zero(), StepScheme(SPLIT_STEP, 0.01), self.aperture, 0.1)
        assert info.value.step_index == 5

    def test_snapshots_in_order(self):
        f = ai_packet(1.0, 0.0, self.grid)
        out = evolve(f, UNIT, ForceProfile.zero(), StepScheme(SPLIT_STEP, 0.01), self.aperture, 0.1, [0.0, 0.05, 0.1])
        assert [t for t, _ in out] == [0.0, 0.05, 0.1]

    def test_free_split_step_exact_up_to_global_phase(self):
        # p^2 and x close a finite Lie algebra, so Strang splitting of a
        # constant linear potential only adds a global phase, whatever dt is
        g = GridSpec(-60.0, 60.0, 4096)
        f = ai_packet(1.0, 0.0, g)
        (_, coarse), = evolve(f, UNIT, ForceProfile.zero(), StepScheme(SPLIT_STEP, 0.5), self.aperture, 1.0)
        (_, fine), = evolve(f, UNIT, ForceProfile.zero(), StepScheme(SPLIT_STEP, 1e-3), self.aperture, 1.0)
        w = (-10, 10)
        assert shape_error(coarse, UNIT, ForceProfile.zero(), 1.0, w).max_abs_dev < 1e-4
        assert shape_error(fine, UNIT, ForceProfile.zero(), 1.0, w).max_abs_dev < 1e-4

    def test_second_order_convergence(self):
        force = ForceProfile.sinusoid(1.0, 1.0)
        f = ai_packet(1.0, 0.0, self.grid)
        errs = []
        for dt in (0.1, 0.05, 0.025):
            (_, out), = evolve(f, UNIT, force, StepScheme(SPLIT_STEP, dt), self.aperture, 1.0)
            ref = analytic_field(UNIT, force, self.grid, 1.0)
            sel = self.grid.window_mask(-8, 8)
            errs.append(np.max(np.abs(out.density[sel] - ref.density[sel])))
        ratios = [a / b for a, b in zip(errs, errs[1:])]
        assert all(3.5 < r < 4.5 for r in ratios), ratios

    def test_aperture_locality(self):
        f = ai_packet(1.0, 0.0, self.grid)
        scheme = StepScheme(SPLIT_STEP, 1e-3)
        (_, masked), = evolve(f, UNIT, ForceProfile.zero(), scheme, self.aperture, 0.5)
        masked_once = f.with_amplitudes(f.amplitudes * self.aperture.mask(self.grid.x))
        (_, open_), = evolve(masked_once, UNIT, ForceProfile.zero(), scheme, None, 0.5)
        sel = self.grid.window_mask(-10, 10)
        peak = np.max(masked.density)
        assert np.max(np.abs(masked.density[sel] - open_.density[sel])) < 1e-6 * peak


def test_schemes_agree_in_window(free_run, free_run_cn):
    split = dict(free_run)[1.0]
    (_, cn), = free_run_cn
    sel = split.grid.window_mask(-10, 10)
    peak = np.max(split.density[sel])
    assert np.max(np.abs(split.density[sel] - cn.density[sel])) < 1e-3 * peak
