"""Truncated density-matrix route: generator, propagation, certificates."""

import numpy as np
import pytest

import wgcharge as w
from wgcharge import DriveKind, DriveSide


def decoupled(l1=0.02, l2=0.01):
    return w.MasterEqCoefficients(
        lamb_shift_1=0.0,
        lamb_shift_2=0.0,
        detuning_eff_1=0.0,
        detuning_eff_2=0.0,
        exchange=0.0,
        decay_1=l1,
        decay_2=l2,
        collective=0.0,
        intrinsic_1=0.0,
        intrinsic_2=0.0,
        linewidth_1=l1,
        linewidth_2=l2,
    )


def fock_density(cutoff, n1, n2):
    dim = cutoff * cutoff
    rho = np.zeros((dim, dim), dtype=complex)
    rho[n1 * cutoff + n2, n1 * cutoff + n2] = 1.0
    return w.DensityMatrix(cutoff=cutoff, data=rho)


class TestDensityMatrix:
    def test_vacuum_is_valid_and_normalized(self):
        rho = w.vacuum_density(4)
        rho.validate()
        assert np.trace(rho.data) == pytest.approx(1.0)

    def test_constructor_validation(self):
        with pytest.raises(ValueError):
            w.DensityMatrix(cutoff=1, data=np.eye(1))
        with pytest.raises(ValueError):
            w.DensityMatrix(cutoff=3, data=np.eye(4))

    def test_validate_catches_trace_defect(self):
        rho = w.vacuum_density(3)
        bad = w.DensityMatrix(3, rho.data * 2.0)
        with pytest.raises(w.UnphysicalStateError):
            bad.validate()

    def test_validate_catches_hermiticity_defect(self):
        data = w.vacuum_density(3).data.copy()
        data[0, 1] = 1e-3
        with pytest.raises(w.UnphysicalStateError):
            w.DensityMatrix(3, data).validate()

    def test_validate_catches_negative_population(self):
        data = np.zeros((9, 9), dtype=complex)
        data[0, 0] = 1.5
        data[1, 1] = -0.5
        with pytest.raises(w.UnphysicalStateError):
            w.DensityMatrix(3, data).validate()


class TestMomentsFromDensity:
    def test_single_quantum_in_charger(self):
        state = w.moments_from_density(fock_density(3, 1, 0))
        assert state.n1 == pytest.approx(1.0, abs=1e-14)
        assert state.n2 == 0.0
        assert state.m1 == 0.0
        assert state.s1 == 0.0

    def test_two_quanta_in_battery(self):
        state = w.moments_from_density(fock_density(3, 0, 2))
        assert state.n2 == pytest.approx(2.0, abs=1e-14)
        assert state.n1 == 0.0
        assert state.s2 == 0.0

    def test_superposition_carries_mode_amplitude(self):
        cutoff = 3
        psi = np.zeros(cutoff * cutoff, dtype=complex)
        psi[0] = psi[1 * cutoff + 0] = 1.0 / np.sqrt(2.0)
        rho = w.DensityMatrix(cutoff, np.outer(psi, psi.conj()))
        state = w.moments_from_density(rho)
        assert state.m1 == pytest.approx(0.5, abs=1e-14)
        assert state.m2 == 0.0


class TestEvolveDensity:
    def test_vacuum_is_stationary_without_drive(self):
        gen = w.lindblad_generator(
            decoupled(), w.DriveSpec(DriveKind.LINEAR, DriveSide.LEFT, 0.0), 4
        )
        snaps = w.evolve_density(gen, w.vacuum_density(4), np.array([0.0, 50.0]))
        final = w.moments_from_density(snaps[-1])
        for name in ("m1", "m2", "n1", "n2", "x12", "s1", "s2", "s12"):
            assert abs(complex(final.moment(name))) < 1e-14

    def test_driven_mode_follows_coherent_transient(self):
        coeffs = decoupled(l1=0.02, l2=0.01)
        om = 5e-4
        drive = w.DriveSpec(DriveKind.LINEAR, DriveSide.LEFT, om)
        gen = w.lindblad_generator(coeffs, drive, 6)
        t = np.linspace(0.0, 400.0, 9)
        snaps = w.evolve_density(gen, w.vacuum_density(6), t)
        states = [w.moments_from_density(s) for s in snaps]
        analytic = (-2j * om / coeffs.linewidth_1) * (
            1.0 - np.exp(-coeffs.linewidth_1 * t / 2.0)
        )
        m1 = np.array([s.m1 for s in states])
        assert np.max(np.abs(m1 - analytic)) < 1e-9
        # a driven damped mode stays coherent: n = |m|^2, nothing in mode 2
        assert max(abs(s.n1 - abs(s.m1) ** 2) for s in states) < 1e-9
        assert max(abs(s.m2) for s in states) == 0.0

    def test_parametric_drive_matches_moment_route(self):
        coeffs = decoupled()
        drive = w.DriveSpec(DriveKind.QUADRATIC, DriveSide.LEFT, 2e-4)
        gen = w.lindblad_generator(coeffs, drive, 8)
        t = np.linspace(0.0, 400.0, 5)
        snaps = w.evolve_density(gen, w.vacuum_density(8), t)
        oracle_states = [w.moments_from_density(s) for s in snaps]
        system = w.second_moment_system(coeffs, drive)
        moment_states = w.states_from_trajectory(
            system, w.evolve(system, w.vacuum_state(system), t)
        )
        for a, b in zip(oracle_states, moment_states):
            for name in ("n1", "s1", "n2", "s2"):
                dev = abs(complex(a.moment(name)) - complex(b.moment(name)))
                assert dev < 1e-9

    def test_input_validation(self):
        gen = w.lindblad_generator(
            decoupled(), w.DriveSpec(DriveKind.LINEAR, DriveSide.LEFT, 0.0), 4
        )
        with pytest.raises(ValueError):
            w.evolve_density(gen, w.vacuum_density(6), np.array([0.0, 1.0]))
        vac = w.vacuum_density(4)
        with pytest.raises(ValueError):
            w.evolve_density(gen, vac, np.array([1.0, 0.5]))
        with pytest.raises(ValueError):
            w.evolve_density(gen, vac, np.array([-1.0, 1.0]))
        with pytest.raises(ValueError):
            w.evolve_density(gen, vac, np.array([]))
        with pytest.raises(ValueError):
            w.evolve_density(gen, vac, np.array([[0.0, 1.0]]))
        with pytest.raises(ValueError):
            w.evolve_density(gen, vac, np.array([0.0, 1.0]), max_step=0.0)


class TestConvergedMoments:
    def test_parameter_validation(self, reference_coeffs):
        coeffs = reference_coeffs(w.SetupKind.THREE_POINT_OPEN)
        drive = w.DriveSpec(DriveKind.LINEAR, DriveSide.LEFT, 1e-3)
        grid = np.array([0.0, 10.0])
        with pytest.raises(ValueError):
            w.converged_moments(coeffs, drive, grid, tol=0.0)
        with pytest.raises(ValueError):
            w.converged_moments(coeffs, drive, grid, start_cutoff=1)

    def test_exhausted_ladder_raises(self, reference_coeffs):
        coeffs = reference_coeffs(w.SetupKind.THREE_POINT_OPEN)
        drive = w.DriveSpec(DriveKind.LINEAR, DriveSide.LEFT, 1e-3)
        with pytest.raises(w.CutoffConvergenceError):
            w.converged_moments(
                coeffs, drive, np.array([0.0, 10.0]), max_cutoff=6
            )

    def test_weak_drive_converges_at_first_doubling(self, reference_coeffs):
        coeffs = reference_coeffs(w.SetupKind.THREE_POINT_OPEN)
        drive = w.DriveSpec(DriveKind.LINEAR, DriveSide.LEFT, 1e-3)
        grid = np.array([0.0, 50.0])
        result = w.converged_moments(coeffs, drive, grid)
        assert result.cutoff == 12
        assert result.certificate <= 1e-8
        assert len(result.states) == grid.size
