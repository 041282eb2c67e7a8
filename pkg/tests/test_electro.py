"""Electrostatic load models: plate formula, 2D field solve, pressure extraction."""

import io

import numpy as np
import pytest

from micropull import (
    GapClosureError,
    LoadModelConfig,
    VACUUM_PERMITTIVITY,
    maxwell_load,
    plate_load,
    solve_field2d,
)
from micropull.electro import dump_field_csv, integrated_face_force, plate_load_derivative


class TestLoadModelConfig:
    def test_defaults_valid(self):
        cfg = LoadModelConfig()
        assert cfg.kind == "field2d"
        assert cfg.cells_across_gap == 24
        assert cfg.cells_along_beam == 160

    @pytest.mark.parametrize("kwargs", [
        {"kind": "magnetostatic"},
        {"fringing_coefficient": -0.1},
        {"cells_across_gap": 7},
        {"cells_along_beam": 39},
        {"tip_extension_gaps": -1.0},
        {"face_probe_fraction": 0.0},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            LoadModelConfig(**kwargs)


class TestPlateLoad:
    def test_undeformed_reference_value(self, st1_1_measured):
        s = st1_1_measured
        q = plate_load(s, None, 100.0, 0.0)
        x = np.linspace(0.0, s.length_l, 11)
        expected = VACUUM_PERMITTIVITY * s.width_w * 100.0**2 / (2.0 * s.gap_g**2)
        assert expected == pytest.approx(2.6562e-2, rel=1e-3)
        assert np.allclose(q(x), expected, rtol=1e-12)

    def test_zero_voltage_zero_load(self, st1_1_measured):
        q = plate_load(st1_1_measured, None, 0.0, 0.65)
        assert np.all(q(np.linspace(0, st1_1_measured.length_l, 5)) == 0.0)

    def test_fringing_increases_load(self, st1_1_measured):
        x = np.array([0.5 * st1_1_measured.length_l])
        q0 = plate_load(st1_1_measured, None, 50.0, 0.0)(x)[0]
        q1 = plate_load(st1_1_measured, None, 50.0, 0.65)(x)[0]
        assert q1 > q0

    def test_contact_raises(self, st1_1_measured):
        g = st1_1_measured.gap_g
        with pytest.raises(GapClosureError):
            plate_load(st1_1_measured, lambda x: np.full_like(x, g), 10.0, 0.0)

    def test_deformed_gap_amplification(self, st1_1_measured):
        s = st1_1_measured
        half_gap = lambda x: np.full_like(x, 0.5 * s.gap_g)
        q_flat = plate_load(s, None, 80.0, 0.0)
        q_half = plate_load(s, half_gap, 80.0, 0.0)
        x = np.array([0.3 * s.length_l])
        assert q_half(x)[0] == pytest.approx(4.0 * q_flat(x)[0], rel=1e-12)

    def test_derivative_matches_finite_difference(self, st1_1_measured):
        s = st1_1_measured
        v0 = 0.3 * s.gap_g
        dv = 1e-6 * s.gap_g
        x = np.array([0.5 * s.length_l])
        for f in (0.0, 0.65):
            qp = plate_load(s, lambda xx: np.full_like(xx, v0 + dv), 70.0, f)(x)[0]
            qm = plate_load(s, lambda xx: np.full_like(xx, v0 - dv), 70.0, f)(x)[0]
            fd = (qp - qm) / (2.0 * dv)
            analytic = plate_load_derivative(s, 70.0, f)(np.array([v0]))[0]
            assert analytic == pytest.approx(fd, rel=1e-6)


@pytest.fixture(scope="module")
def uniform_solution(st1_1_measured):
    return solve_field2d(st1_1_measured, None, 100.0, LoadModelConfig())


class TestField2D:
    V = 100.0

    def test_interior_field_matches_parallel_plate(self, st1_1_measured, uniform_solution):
        s = st1_1_measured
        fs = uniform_solution
        interior = fs.face_x < s.length_l - 3.0 * s.gap_g
        expected = self.V / s.gap_g
        worst = np.max(np.abs(fs.face_field[interior] - expected)) / expected
        assert worst < 1e-2

    def test_discrete_maximum_principle(self, st1_1_measured, uniform_solution):
        fs = uniform_solution
        slack = 1e-9 * self.V
        assert fs.potential.min() >= -slack
        assert fs.potential.max() <= self.V + slack

    def test_maximum_principle_deformed(self, st1_1_measured):
        s = st1_1_measured
        shape = lambda x: 0.4 * s.gap_g * (x / s.length_l) ** 2
        fs = solve_field2d(s, shape, self.V, LoadModelConfig())
        slack = 1e-9 * self.V
        assert fs.potential.min() >= -slack
        assert fs.potential.max() <= self.V + slack

    def test_zero_voltage(self, st1_1_measured):
        fs = solve_field2d(st1_1_measured, None, 0.0, LoadModelConfig())
        assert np.all(fs.potential == 0.0)
        assert np.all(fs.face_field == 0.0)

    def test_linearity_in_voltage(self, st1_1_measured, uniform_solution):
        fs2 = solve_field2d(st1_1_measured, None, 2.0 * self.V, LoadModelConfig())
        assert np.allclose(fs2.potential, 2.0 * uniform_solution.potential, rtol=0, atol=1e-11 * self.V)

    def test_charge_balance(self, st1_1_measured, uniform_solution):
        fs = uniform_solution
        imbalance = abs(fs.beam_charge_per_depth + fs.counter_charge_per_depth)
        assert imbalance <= 1e-2 * abs(fs.beam_charge_per_depth)

    def test_charge_balance_deformed(self, st1_1_measured):
        s = st1_1_measured
        shape = lambda x: 0.4 * s.gap_g * (x / s.length_l) ** 2
        fs = solve_field2d(s, shape, self.V, LoadModelConfig())
        imbalance = abs(fs.beam_charge_per_depth + fs.counter_charge_per_depth)
        assert imbalance <= 1e-2 * abs(fs.beam_charge_per_depth)

    def test_tip_field_enhancement(self, st1_1_measured, uniform_solution):
        s = st1_1_measured
        fs = uniform_solution
        interior = np.mean(fs.face_field[fs.face_x < s.length_l - 3.0 * s.gap_g])
        assert fs.face_field[-1] > interior

    def test_force_stable_under_mesh_doubling(self, st1_1_measured, uniform_solution):
        s = st1_1_measured
        coarse = integrated_face_force(uniform_solution, s)
        fine_cfg = LoadModelConfig(cells_across_gap=48, cells_along_beam=320)
        fine = integrated_face_force(solve_field2d(s, None, self.V, fine_cfg), s)
        assert abs(fine - coarse) / coarse < 5e-3

    def test_contact_raises(self, st1_1_measured):
        s = st1_1_measured
        with pytest.raises(GapClosureError):
            solve_field2d(s, lambda x: np.full_like(x, s.gap_g), self.V, LoadModelConfig())

    def test_gap_closure_during_coupling_shapes(self, st1_1_measured):
        # a shape exceeding the gap only near the tip must still be caught
        s = st1_1_measured
        spike = lambda x: 1.2 * s.gap_g * (x / s.length_l) ** 8
        with pytest.raises(GapClosureError):
            solve_field2d(s, spike, self.V, LoadModelConfig())


class TestMaxwellLoad:
    V = 100.0

    def test_matches_plate_load_in_interior(self, st1_1_measured):
        s = st1_1_measured
        fs = solve_field2d(s, None, self.V, LoadModelConfig())
        q_maxwell = maxwell_load(fs, s)
        q_plate = plate_load(s, None, self.V, 0.0)
        x = np.linspace(0.0, s.length_l - 3.0 * s.gap_g, 41)
        assert np.allclose(q_maxwell(x), q_plate(x), rtol=2e-2)

    def test_total_force_agreement_with_plate(self, st1_1_measured):
        s = st1_1_measured
        fs = solve_field2d(s, None, self.V, LoadModelConfig())
        x = np.linspace(0.0, s.length_l, 4001)
        total_maxwell = np.trapezoid(maxwell_load(fs, s)(x), x)
        total_plate = np.trapezoid(plate_load(s, None, self.V, 0.0)(x), x)
        assert abs(total_maxwell - total_plate) / total_plate < 5e-2

    def test_zero_field_zero_load(self, st1_1_measured):
        s = st1_1_measured
        fs = solve_field2d(s, None, 0.0, LoadModelConfig())
        q = maxwell_load(fs, s)
        assert np.all(q(np.linspace(0, s.length_l, 7)) == 0.0)

    def test_sign_independent_of_voltage(self, st1_1_measured):
        s = st1_1_measured
        x = np.linspace(0, s.length_l, 11)
        q_pos = maxwell_load(solve_field2d(s, None, +self.V, LoadModelConfig()), s)(x)
        q_neg = maxwell_load(solve_field2d(s, None, -self.V, LoadModelConfig()), s)(x)
        assert np.all(q_pos >= 0.0)
        assert np.allclose(q_pos, q_neg, rtol=1e-10)

    def test_zero_beyond_tip(self, st1_1_measured):
        s = st1_1_measured
        fs = solve_field2d(s, None, self.V, LoadModelConfig())
        q = maxwell_load(fs, s)
        beyond = np.array([s.length_l * 1.01, s.length_l + s.gap_g])
        assert np.all(q(beyond) == 0.0)


class TestFieldDump:
    def test_csv_shape_and_header(self, st1_1_measured):
        fs = solve_field2d(st1_1_measured, None, 10.0, LoadModelConfig())
        sink = io.StringIO()
        dump_field_csv(fs, sink)
        lines = sink.getvalue().strip().split("\n")
        assert lines[0] == "x_um,y_um,phi_V"
        nx1, ny1 = fs.potential.shape
        assert len(lines) == 1 + nx1 * ny1
        x, y, phi = (float(v) for v in lines[1].split(","))
        assert phi == pytest.approx(10.0)
