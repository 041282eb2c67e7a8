"""Coupled equilibrium, sweeps and pull-in search."""

import numpy as np
import pytest

from micropull import (
    LoadModelConfig,
    Material,
    PullInNotFoundError,
    SolverConfig,
    Specimen,
    SweepPoint,
    SweepResult,
    build_mesh,
    find_pull_in,
    modulus_band_sweep,
    osterberg_pull_in,
    plate_load,
    solve_equilibrium,
    solve_nonlinear,
    voltage_sweep,
)
from micropull.coupled import _Runner

PLATE = SolverConfig(load_model=LoadModelConfig(kind="parallel_plate"))
PLATE_F0 = SolverConfig(
    load_model=LoadModelConfig(kind="parallel_plate", fringing_coefficient=0.0)
)


class TestConfig:
    def test_monolithic_requires_parallel_plate(self):
        with pytest.raises(ValueError, match="monolithic"):
            SolverConfig(coupling_mode="monolithic")  # default load is field2d

    @pytest.mark.parametrize("kwargs", [
        {"structural_mode": "elastic"},
        {"coupling_mode": "simultaneous"},
        {"coupling_tolerance": 0.0},
        {"relaxation": 0.0},
        {"relaxation": 1.5},
        {"pull_in_bracket_tolerance": -1.0},
        {"n_elements": 2},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


class TestEquilibrium:
    def test_zero_voltage_single_iteration(self, st1_1_measured):
        for cfg in (PLATE, SolverConfig(), PLATE_F0):
            res = solve_equilibrium(st1_1_measured, 0.0, cfg)
            assert res.converged
            assert res.iterations == 1
            assert res.deflection.tip == 0.0

    def test_negative_voltage_rejected(self, st1_1_measured):
        with pytest.raises(ValueError, match="voltage"):
            solve_equilibrium(st1_1_measured, -1.0, PLATE)

    def test_softening_beats_one_pass_deflection(self, st1_1_measured):
        s = st1_1_measured
        voltage = 50.0
        res = solve_equilibrium(s, voltage, PLATE)
        assert res.converged
        assert res.deflection.tip < 0.05 * s.gap_g
        one_pass = solve_nonlinear(
            build_mesh(s, PLATE.n_elements), plate_load(s, None, voltage, 0.65)
        )
        assert res.deflection.tip >= one_pass.tip

    def test_staggered_monolithic_agreement(self, st1_1_measured):
        # cross-oracle: two independent solution paths for the same
        # discrete equations
        voltage = 150.0
        stag = solve_equilibrium(st1_1_measured, voltage, PLATE_F0)
        mono = solve_equilibrium(
            st1_1_measured, voltage,
            SolverConfig(
                load_model=LoadModelConfig(kind="parallel_plate", fringing_coefficient=0.0),
                coupling_mode="monolithic",
            ),
        )
        assert stag.converged and mono.converged
        assert stag.deflection.tip == pytest.approx(mono.deflection.tip, rel=1e-4)

    def test_monolithic_linear_mode(self, st1_1_measured):
        cfg_lin_mono = SolverConfig(
            structural_mode="linear",
            load_model=LoadModelConfig(kind="parallel_plate", fringing_coefficient=0.0),
            coupling_mode="monolithic",
        )
        cfg_lin_stag = SolverConfig(
            structural_mode="linear",
            load_model=LoadModelConfig(kind="parallel_plate", fringing_coefficient=0.0),
        )
        mono = solve_equilibrium(st1_1_measured, 120.0, cfg_lin_mono)
        stag = solve_equilibrium(st1_1_measured, 120.0, cfg_lin_stag)
        assert mono.converged and stag.converged
        assert mono.deflection.tip == pytest.approx(stag.deflection.tip, rel=1e-4)

    def test_failure_above_pull_in(self, st1_1_measured):
        res = solve_equilibrium(st1_1_measured, 400.0, PLATE)
        assert not res.converged
        assert res.failure_reason in ("gap closure", "max coupling iterations",
                                      "structural divergence")


class TestSweep:
    def test_monotone_below_pull_in(self, st1_1_measured):
        est = osterberg_pull_in(st1_1_measured).voltage
        sweep = voltage_sweep(st1_1_measured, 0.2 * est, 6, PLATE)
        assert all(p.converged for p in sweep.points)
        tips = [p.tip_displacement for p in sweep.points]
        assert all(b > a for a, b in zip(tips, tips[1:]))
        assert sweep.pull_in is None

    def test_convex_displacement_curve(self, st1_1_measured):
        sweep = voltage_sweep(st1_1_measured, 170.0, 17, PLATE)
        tips = np.array([p.tip_displacement for p in sweep.points if p.converged])
        assert len(tips) >= 10
        assert np.all(np.diff(tips) > 0.0)
        assert np.all(np.diff(tips, 2) >= -1e-9)

    def test_step_doubling_leaves_fixed_points(self, st1_1_measured):
        est = osterberg_pull_in(st1_1_measured).voltage
        coarse = voltage_sweep(st1_1_measured, 0.5 * est, 5, PLATE)
        fine = voltage_sweep(st1_1_measured, 0.5 * est, 10, PLATE)
        fine_by_voltage = {p.voltage: p.tip_displacement for p in fine.points}
        for p in coarse.points:
            assert p.voltage in fine_by_voltage
            assert p.tip_displacement == pytest.approx(
                fine_by_voltage[p.voltage], rel=1e-6
            )

    def test_sweep_through_pull_in_field2d(self, st1_1_measured):
        sweep = voltage_sweep(st1_1_measured, 200.0, 10, SolverConfig())
        assert not sweep.points[-1].converged
        converged = sweep.converged_points()
        assert converged
        assert converged[-1].voltage < 200.0
        assert sweep.pull_in is not None
        assert converged[-1].voltage <= sweep.pull_in.bracket_low

    def test_validation(self, st1_1_measured):
        with pytest.raises(ValueError, match="v_max"):
            voltage_sweep(st1_1_measured, 0.0, 5, PLATE)
        with pytest.raises(ValueError, match="n_steps"):
            voltage_sweep(st1_1_measured, 10.0, 1, PLATE)

    def test_result_invariants_enforced(self):
        with pytest.raises(ValueError, match="increasing"):
            SweepResult(points=(
                SweepPoint(2.0, 0.0, True, 1), SweepPoint(1.0, 0.0, True, 1),
            ))
        with pytest.raises(ValueError, match="precede"):
            SweepResult(points=(
                SweepPoint(1.0, 0.0, False, 1), SweepPoint(2.0, 0.0, True, 1),
            ))


@pytest.fixture(scope="module")
def plate_pull_in(st1_1_measured):
    return find_pull_in(st1_1_measured, PLATE)


class TestPullIn:
    def test_bracket_width(self, plate_pull_in):
        r = plate_pull_in
        assert r.bracket_high - r.bracket_low <= PLATE.pull_in_bracket_tolerance * 1.0001
        assert r.bracket_low < r.pull_in_voltage < r.bracket_high
        assert r.method == "fem"

    def test_bracket_replays_deterministically(self, st1_1_measured, plate_pull_in):
        low = solve_equilibrium(st1_1_measured, plate_pull_in.bracket_low, PLATE)
        high = solve_equilibrium(st1_1_measured, plate_pull_in.bracket_high, PLATE)
        assert low.converged
        assert not high.converged

    def test_against_dense_voltage_scan(self, st1_1_measured, plate_pull_in):
        # brute-force the transition at 0.05 V resolution around the bracket
        runner = _Runner(st1_1_measured, PLATE)
        last_ok, last_tip = None, None
        for v in np.arange(plate_pull_in.bracket_low - 1.0,
                           plate_pull_in.bracket_high + 1.0, 0.05):
            res = runner.equilibrium(v)
            if res.converged:
                last_ok, last_tip = v, res.deflection.tip
        assert last_ok is not None
        assert plate_pull_in.bracket_low - 0.05 <= last_ok < plate_pull_in.bracket_high + 0.05
        assert last_tip == pytest.approx(plate_pull_in.tip_displacement, rel=0.05)

    @pytest.mark.parametrize("sid", ["ST1-1", "ST1-4"])
    def test_last_stable_tip_fraction(self, catalog, sid):
        from micropull import select_specimen
        s = select_specimen(catalog, sid, "measured")
        r = find_pull_in(s, PLATE)
        assert 0.3 * s.gap_g < r.tip_displacement < 0.6 * s.gap_g

    def test_no_pull_in_below_cap(self):
        stiff = Specimen(
            id="stiff", length_l=50e-6, width_w=15e-6, thickness_t=10e-6,
            gap_g=20e-6, material=Material(166e9, 0.23), dimension_source="nominal",
        )
        assert osterberg_pull_in(stiff).voltage > 10_000.0
        with pytest.raises(PullInNotFoundError):
            find_pull_in(stiff, PLATE)


class TestModulusBand:
    def test_low_modulus_dominates(self, st1_1_measured):
        low, high = modulus_band_sweep(st1_1_measured, 150e9, 166e9, 140.0, 7, PLATE)
        assert all(p.converged for p in low.points)
        assert all(p.converged for p in high.points)
        for pl, ph in zip(low.points, high.points):
            assert pl.voltage == ph.voltage
            assert pl.tip_displacement > ph.tip_displacement

    def test_intermediate_modulus_between(self, st1_1_measured):
        low, high = modulus_band_sweep(st1_1_measured, 150e9, 166e9, 140.0, 7, PLATE)
        mid = voltage_sweep(st1_1_measured.with_young_modulus(158e9), 140.0, 7, PLATE)
        for pl, pm, ph in zip(low.points, mid.points, high.points):
            assert pl.tip_displacement > pm.tip_displacement > ph.tip_displacement

    def test_pull_in_ordering_in_modulus(self, st1_1_measured):
        v_low = find_pull_in(st1_1_measured.with_young_modulus(150e9), PLATE).pull_in_voltage
        v_high = find_pull_in(st1_1_measured.with_young_modulus(166e9), PLATE).pull_in_voltage
        assert v_low < v_high

    def test_validation(self, st1_1_measured):
        with pytest.raises(ValueError, match="moduli"):
            modulus_band_sweep(st1_1_measured, 166e9, 150e9, 100.0, 5, PLATE)
