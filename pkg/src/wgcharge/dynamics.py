"""Gaussian moment dynamics of the driven charger-battery pair.

The master equation is quadratic in mode operators for both drive types, so
first and second moments close on themselves. This module builds the drift
systems, propagates them exactly with matrix exponentials over each grid
interval, classifies stability, finds the parametric-drive instability
threshold, and evaluates the transient closed forms (with automatic fallback
to direct integration near their removable singularities or off resonance).

Conventions: mode 1 is the charger side of the chain, mode 2 the battery side.
A left drive acts on mode 1 and charges mode 2 through the waveguide; a right
drive mirrors the roles. Moments are x12 = <a1+ a2>, s_j = <a_j^2>,
s12 = <a1 a2>; `_conj` labels mark rows carrying complex conjugates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .configs import directional_couplings
from .errors import UnstableSystemError
from .slh import MasterEqCoefficients

#: relative half-width of the excluded neighborhood around closed-form poles
SINGULARITY_RTOL = 1e-8

#: relative tolerance below which a backward coupling counts as cancelled
NONRECIPROCAL_RTOL = 1e-10

#: relative tolerance on effective detunings for the resonant closed forms
RESONANCE_RTOL = 1e-10


class DriveKind(enum.Enum):
    """Coherent displacement drive or two-photon (parametric) drive."""

    LINEAR = "linear"
    QUADRATIC = "quadratic"


class DriveSide(enum.Enum):
    """Which mode the drive acts on: left is mode 1, right is mode 2."""

    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class DriveSpec:
    """Drive type, driven side, amplitude, and the mode/reference frequencies.

    Frequencies only scale reported energies; amplitude shares units with the
    decay rates. The battery is the mode the drive does not act on.
    """

    kind: DriveKind
    side: DriveSide
    amplitude: float
    omega1: float = 1.0
    omega2: float = 1.0
    omega0: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError("drive amplitude must be finite and nonnegative")
        for name in ("omega1", "omega2", "omega0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive")

    @property
    def driven_mode(self) -> int:
        return 1 if self.side is DriveSide.LEFT else 2

    @property
    def battery_mode(self) -> int:
        return 2 if self.side is DriveSide.LEFT else 1

    @property
    def omega_battery(self) -> float:
        return self.omega2 if self.side is DriveSide.LEFT else self.omega1

    @property
    def omega_charger(self) -> float:
        return self.omega1 if self.side is DriveSide.LEFT else self.omega2


@dataclass(frozen=True)
class MomentState:
    """First and second moments of the two-mode Gaussian state."""

    m1: complex = 0.0
    m2: complex = 0.0
    n1: float = 0.0
    n2: float = 0.0
    x12: complex = 0.0
    s1: complex = 0.0
    s2: complex = 0.0
    s12: complex = 0.0

    def __post_init__(self) -> None:
        for name in ("n1", "n2"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"occupation {name} must be finite")
            if value < -1e-12:
                raise ValueError(f"occupation {name} must be nonnegative")

    def moment(self, name: str) -> complex:
        return getattr(self, name)


@dataclass(frozen=True)
class DriftSystem:
    """Linear ODE x' = matrix @ x + source with labeled components."""

    matrix: np.ndarray
    source: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        s = np.asarray(self.source, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("drift matrix must be square")
        if s.shape != (m.shape[0],):
            raise ValueError("source length must match matrix dimension")
        if len(self.labels) != m.shape[0]:
            raise ValueError("labels length must match matrix dimension")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "source", s)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def index(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class StabilityReport:
    """Drift eigenvalues, their largest real part, and the verdict."""

    eigenvalues: tuple[complex, ...]
    max_real: float
    stable: bool


def _mode_rates(coeffs: MasterEqCoefficients):
    dc = directional_couplings(coeffs)
    a1 = -(1j * coeffs.detuning_eff_1 + coeffs.linewidth_1 / 2.0)
    a2 = -(1j * coeffs.detuning_eff_2 + coeffs.linewidth_2 / 2.0)
    return dc, a1, a2


def first_moment_system(
    coeffs: MasterEqCoefficients, drive: DriveSpec
) -> DriftSystem:
    """Drift system for the mode amplitudes.

    Linear drive: two rows (m1, m2) with a constant source on the driven mode.
    Quadratic drive: four rows (m1, m2, m1_conj, m2_conj); the drive couples
    amplitudes to their conjugates, so stability depends on the amplitude.
    """
    dc, a1, a2 = _mode_rates(coeffs)
    om = drive.amplitude
    if drive.kind is DriveKind.LINEAR:
        matrix = np.array([[a1, dc.g_bwd], [dc.g_fwd, a2]], dtype=complex)
        source = np.zeros(2, dtype=complex)
        source[0 if drive.side is DriveSide.LEFT else 1] = -1j * om
        return DriftSystem(matrix, source, ("m1", "m2"))
    matrix = np.array(
        [
            [a1, dc.g_bwd, 0.0, 0.0],
            [dc.g_fwd, a2, 0.0, 0.0],
            [0.0, 0.0, np.conj(a1), np.conj(dc.g_bwd)],
            [0.0, 0.0, np.conj(dc.g_fwd), np.conj(a2)],
        ],
        dtype=complex,
    )
    if drive.side is DriveSide.LEFT:
        matrix[0, 2] = -1j * om
        matrix[2, 0] = 1j * om
    else:
        matrix[1, 3] = -1j * om
        matrix[3, 1] = 1j * om
    return DriftSystem(
        matrix, np.zeros(4, dtype=complex), ("m1", "m2", "m1_conj", "m2_conj")
    )


_LINEAR_LABELS = (
    "m1", "m2", "m1_conj", "m2_conj",
    "n1", "n2", "x12", "x12_conj",
    "s1", "s1_conj", "s2", "s2_conj", "s12", "s12_conj",
)

_QUADRATIC_LABELS = (
    "n1", "n2", "x12", "x12_conj",
    "s12", "s12_conj", "s1", "s1_conj", "s2", "s2_conj",
)


def second_moment_system(
    coeffs: MasterEqCoefficients, drive: DriveSpec
) -> DriftSystem:
    """Closed drift system for all moments needed by the battery metrics.

    Linear drive returns the 14-row block-triangular composite (first moments
    feeding occupations, cross moments, and anomalous moments). Quadratic
    drive returns the 10-row second-moment system with constant sources from
    the vacuum fluctuations; first moments stay zero and are omitted.
    """
    dc, a1, a2 = _mode_rates(coeffs)
    gf, gb = dc.g_fwd, dc.g_bwd
    l1, l2 = coeffs.linewidth_1, coeffs.linewidth_2
    d1, d2 = coeffs.detuning_eff_1, coeffs.detuning_eff_2
    ls = dc.lambda_sum
    om = drive.amplitude
    left = drive.side is DriveSide.LEFT

    if drive.kind is DriveKind.LINEAR:
        labels = _LINEAR_LABELS
        ix = {name: k for k, name in enumerate(labels)}
        m = np.zeros((14, 14), dtype=complex)
        src = np.zeros(14, dtype=complex)

        def put(row: str, col: str, value: complex) -> None:
            m[ix[row], ix[col]] += value

        put("m1", "m1", a1)
        put("m1", "m2", gb)
        put("m2", "m2", a2)
        put("m2", "m1", gf)
        put("m1_conj", "m1_conj", np.conj(a1))
        put("m1_conj", "m2_conj", np.conj(gb))
        put("m2_conj", "m2_conj", np.conj(a2))
        put("m2_conj", "m1_conj", np.conj(gf))
        src[ix["m1" if left else "m2"]] = -1j * om
        src[ix["m1_conj" if left else "m2_conj"]] = 1j * om

        put("n1", "n1", -l1)
        put("n1", "x12", gb)
        put("n1", "x12_conj", np.conj(gb))
        put("n2", "n2", -l2)
        put("n2", "x12", np.conj(gf))
        put("n2", "x12_conj", gf)
        put("x12", "x12", -1j * (d2 - d1) - ls / 2.0)
        put("x12", "n2", np.conj(gb))
        put("x12", "n1", gf)
        put("x12_conj", "x12_conj", 1j * (d2 - d1) - ls / 2.0)
        put("x12_conj", "n2", gb)
        put("x12_conj", "n1", np.conj(gf))

        put("s1", "s1", -2j * d1 - l1)
        put("s1", "s12", 2.0 * gb)
        put("s1_conj", "s1_conj", 2j * d1 - l1)
        put("s1_conj", "s12_conj", 2.0 * np.conj(gb))
        put("s2", "s2", -2j * d2 - l2)
        put("s2", "s12", 2.0 * gf)
        put("s2_conj", "s2_conj", 2j * d2 - l2)
        put("s2_conj", "s12_conj", 2.0 * np.conj(gf))
        put("s12", "s12", -1j * (d1 + d2) - ls / 2.0)
        put("s12", "s2", gb)
        put("s12", "s1", gf)
        put("s12_conj", "s12_conj", 1j * (d1 + d2) - ls / 2.0)
        put("s12_conj", "s2_conj", np.conj(gb))
        put("s12_conj", "s1_conj", np.conj(gf))

        if left:
            put("n1", "m1", 1j * om)
            put("n1", "m1_conj", -1j * om)
            put("x12", "m2", 1j * om)
            put("x12_conj", "m2_conj", -1j * om)
            put("s1", "m1", -2j * om)
            put("s1_conj", "m1_conj", 2j * om)
            put("s12", "m2", -1j * om)
            put("s12_conj", "m2_conj", 1j * om)
        else:
            put("n2", "m2", 1j * om)
            put("n2", "m2_conj", -1j * om)
            put("x12", "m1_conj", -1j * om)
            put("x12_conj", "m1", 1j * om)
            put("s2", "m2", -2j * om)
            put("s2_conj", "m2_conj", 2j * om)
            put("s12", "m1", -1j * om)
            put("s12_conj", "m1_conj", 1j * om)
        return DriftSystem(m, src, labels)

    labels = _QUADRATIC_LABELS
    ix = {name: k for k, name in enumerate(labels)}
    m = np.zeros((10, 10), dtype=complex)
    src = np.zeros(10, dtype=complex)

    def put(row: str, col: str, value: complex) -> None:
        m[ix[row], ix[col]] += value

    put("n1", "n1", -l1)
    put("n1", "x12", gb)
    put("n1", "x12_conj", np.conj(gb))
    put("n2", "n2", -l2)
    put("n2", "x12", np.conj(gf))
    put("n2", "x12_conj", gf)
    put("x12", "x12", -1j * (d2 - d1) - ls / 2.0)
    put("x12", "n2", np.conj(gb))
    put("x12", "n1", gf)
    put("x12_conj", "x12_conj", 1j * (d2 - d1) - ls / 2.0)
    put("x12_conj", "n2", gb)
    put("x12_conj", "n1", np.conj(gf))
    put("s12", "s12", -1j * (d1 + d2) - ls / 2.0)
    put("s12", "s2", gb)
    put("s12", "s1", gf)
    put("s12_conj", "s12_conj", 1j * (d1 + d2) - ls / 2.0)
    put("s12_conj", "s2_conj", np.conj(gb))
    put("s12_conj", "s1_conj", np.conj(gf))
    put("s1", "s1", -2j * d1 - l1)
    put("s1", "s12", 2.0 * gb)
    put("s1_conj", "s1_conj", 2j * d1 - l1)
    put("s1_conj", "s12_conj", 2.0 * np.conj(gb))
    put("s2", "s2", -2j * d2 - l2)
    put("s2", "s12", 2.0 * gf)
    put("s2_conj", "s2_conj", 2j * d2 - l2)
    put("s2_conj", "s12_conj", 2.0 * np.conj(gf))

    if left:
        put("n1", "s1", 1j * om)
        put("n1", "s1_conj", -1j * om)
        put("x12", "s12", 1j * om)
        put("x12_conj", "s12_conj", -1j * om)
        put("s12", "x12", -1j * om)
        put("s12_conj", "x12_conj", 1j * om)
        put("s1", "n1", -2j * om)
        put("s1_conj", "n1", 2j * om)
        src[ix["s1"]] = -1j * om
        src[ix["s1_conj"]] = 1j * om
    else:
        put("n2", "s2", 1j * om)
        put("n2", "s2_conj", -1j * om)
        put("x12", "s12_conj", -1j * om)
        put("x12_conj", "s12", 1j * om)
        put("s12", "x12_conj", -1j * om)
        put("s12_conj", "x12", 1j * om)
        put("s2", "n2", -2j * om)
        put("s2_conj", "n2", 2j * om)
        src[ix["s2"]] = -1j * om
        src[ix["s2_conj"]] = 1j * om
    return DriftSystem(m, src, labels)


def vacuum_state(system: DriftSystem) -> np.ndarray:
    """All moments zero: both modes in vacuum."""
    return np.zeros(system.dim, dtype=complex)


def evolve(
    system: DriftSystem, initial: np.ndarray, t_grid: np.ndarray
) -> np.ndarray:
    """Propagate x' = M x + b exactly across the grid.

    Each interval is advanced with the exponential of the augmented matrix
    [[M, b], [0, 0]], so the result is exact for the linear system regardless
    of step size and bit-reproducible across runs. `initial` is the state at
    t_grid[0]; the returned array has shape (len(t_grid), dim) with the
    initial state in row 0.
    """
    x0 = np.asarray(initial, dtype=complex)
    if x0.shape != (system.dim,):
        raise ValueError("initial state length must match system dimension")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a nonempty 1-d array")
    if not np.all(np.isfinite(t)) or t[0] < 0:
        raise ValueError("time grid must be finite and nonnegative")
    steps = np.diff(t)
    if t.size > 1 and not np.all(steps > 0):
        raise ValueError("time grid must be strictly ascending")

    n = system.dim
    aug = np.zeros((n + 1, n + 1), dtype=complex)
    aug[:n, :n] = system.matrix
    aug[:n, n] = system.source
    propagators = {
        dt: scipy.linalg.expm(aug * dt) for dt in np.unique(steps)
    }

    out = np.empty((t.size, n), dtype=complex)
    y = np.concatenate([x0, [1.0]])
    out[0] = y[:n]
    for k, dt in enumerate(steps):
        y = propagators[dt] @ y
        out[k + 1] = y[:n]
    return out


def states_from_trajectory(
    system: DriftSystem, trajectory: np.ndarray
) -> list[MomentState]:
    """Map trajectory rows to MomentState; absent moments default to zero."""
    traj = np.asarray(trajectory, dtype=complex)
    if traj.ndim != 2 or traj.shape[1] != system.dim:
        raise ValueError("trajectory shape must be (n_times, system dim)")
    cols = {name: system.labels.index(name) for name in system.labels}

    def col(row: np.ndarray, name: str) -> complex:
        if name in cols:
            return complex(row[cols[name]])
        return 0.0

    states = []
    for row in traj:
        states.append(
            MomentState(
                m1=col(row, "m1"),
                m2=col(row, "m2"),
                n1=max(col(row, "n1").real, 0.0),
                n2=max(col(row, "n2").real, 0.0),
                x12=col(row, "x12"),
                s1=col(row, "s1"),
                s2=col(row, "s2"),
                s12=col(row, "s12"),
            )
        )
    return states


def stability(
    coeffs: MasterEqCoefficients, drive: DriveSpec, margin: float = 1e-12
) -> StabilityReport:
    """Classify the drift of the mode amplitudes.

    A linear drive never changes the homogeneous drift, so the eigenvalues
    are the two undriven mode poles. A quadratic drive mixes amplitudes with
    conjugates and destabilizes the driven mode above threshold.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if drive.kind is DriveKind.LINEAR:
        _, a1, a2 = _mode_rates(coeffs)
        eigs = [complex(a1), complex(a2)]
    else:
        system = first_moment_system(coeffs, drive)
        eigs = [complex(z) for z in np.linalg.eigvals(system.matrix)]
    eigs.sort(key=lambda z: (-z.real, z.imag))
    max_real = max(z.real for z in eigs)
    return StabilityReport(
        eigenvalues=tuple(eigs), max_real=max_real, stable=max_real < -margin
    )


def instability_threshold(
    coeffs: MasterEqCoefficients,
    side: DriveSide = DriveSide.LEFT,
    tol: float = 1e-10,
) -> float:
    """Smallest quadratic-drive amplitude with a non-decaying amplitude mode.

    Bisection on the largest drift eigenvalue real part; at the cancellation
    point with resonant driving the exact value is half the driven mode's
    linewidth. `tol` is the absolute half-width of the final bracket.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")

    def max_real(amplitude: float) -> float:
        drive = DriveSpec(DriveKind.QUADRATIC, side, amplitude)
        return stability(coeffs, drive, margin=0.0).max_real

    if max_real(0.0) >= 0.0:
        raise UnstableSystemError("system is unstable even without a drive")
    lo = 0.0
    hi = max(coeffs.linewidth_1, coeffs.linewidth_2, tol)
    for _ in range(80):
        if max_real(hi) >= 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise UnstableSystemError(
            "no instability threshold found below amplitude "
            f"{hi:.3e}; the drive cannot destabilize this system"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if max_real(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def steady_state(system: DriftSystem, margin: float = 1e-12) -> np.ndarray:
    """Fixed point of a strictly stable drift; refuses otherwise."""
    eigs = np.linalg.eigvals(system.matrix)
    max_real = float(eigs.real.max())
    if not max_real < -margin:
        raise UnstableSystemError(
            f"no steady state: largest drift eigenvalue real part {max_real:.3e}"
        )
    return np.linalg.solve(system.matrix, -system.source)


def steady_moments(coeffs: MasterEqCoefficients, drive: DriveSpec) -> MomentState:
    """Steady state of the full second-moment system as a MomentState."""
    system = second_moment_system(coeffs, drive)
    fixed = steady_state(system)
    return states_from_trajectory(system, fixed[np.newaxis, :])[0]


def steady_energies(
    coeffs: MasterEqCoefficients, drive: DriveSpec
) -> dict[str, float]:
    """Steady battery and charger energies from the drift fixed point."""
    state = steady_moments(coeffs, drive)
    n_b = state.n2 if drive.battery_mode == 2 else state.n1
    n_c = state.n1 if drive.battery_mode == 2 else state.n2
    return {
        "E_b": drive.omega_battery * n_b,
        "E_c": drive.omega_charger * n_c,
    }


def _csinhc(z: np.ndarray) -> np.ndarray:
    """sinh(z)/z, regular at z = 0."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-4
    zs = z[small]
    z2 = zs * zs
    out[small] = 1.0 + z2 / 6.0 + z2 * z2 / 120.0
    zb = z[~small]
    out[~small] = np.sinh(zb) / zb
    return out


def _is_resonant(coeffs: MasterEqCoefficients) -> bool:
    tol = RESONANCE_RTOL * coeffs.rate_scale
    return abs(coeffs.detuning_eff_1) <= tol and abs(coeffs.detuning_eff_2) <= tol


def _energies_by_evolve(
    coeffs: MasterEqCoefficients, drive: DriveSpec, t: np.ndarray
) -> dict[str, np.ndarray]:
    """Direct integration route used where closed forms are not applicable."""
    grid, inverse = np.unique(t, return_inverse=True)
    offset = 0
    if grid.size == 0:
        raise ValueError("empty time grid")
    if grid[0] > 0.0:
        grid = np.concatenate([[0.0], grid])
        offset = 1
    system = second_moment_system(coeffs, drive)
    states = states_from_trajectory(
        system, evolve(system, vacuum_state(system), grid)
    )
    battery_is_2 = drive.battery_mode == 2
    n_b = np.array([s.n2 if battery_is_2 else s.n1 for s in states])
    n_c = np.array([s.n1 if battery_is_2 else s.n2 for s in states])
    s_b = np.array([s.s2 if battery_is_2 else s.s1 for s in states])
    pick = offset + inverse
    return {
        "E_b": drive.omega_battery * n_b[pick],
        "E_c": drive.omega_charger * n_c[pick],
        "s_b": s_b[pick],
    }


def linear_closed_form_is_singular(coeffs: MasterEqCoefficients) -> bool:
    """True inside the excluded neighborhood of the linear-form poles.

    The transient expressions divide by 4 g_bwd g_fwd - lw1 lw2 and by each
    linewidth; near a zero of either the integration route is used instead.
    """
    dc = directional_couplings(coeffs)
    l1, l2 = coeffs.linewidth_1, coeffs.linewidth_2
    scale = coeffs.rate_scale
    den = 4.0 * dc.g_bwd * dc.g_fwd - l1 * l2
    return (
        abs(den) <= SINGULARITY_RTOL * scale**2
        or min(l1, l2) <= SINGULARITY_RTOL * scale
    )


def closed_form_linear(
    coeffs: MasterEqCoefficients, drive: DriveSpec, t
) -> dict[str, np.ndarray]:
    """Transient battery and charger energies under a linear drive.

    Uses the resonant closed forms, switching to the specialized expressions
    when the backward coupling is cancelled; falls back to exact integration
    off resonance or inside the excluded neighborhood of the pole where the
    denominator 4 g_bwd g_fwd - lw1 lw2 vanishes. Returns {"E_b", "E_c"}
    with arrays shaped like t.
    """
    if drive.kind is not DriveKind.LINEAR:
        raise ValueError("closed_form_linear requires a linear drive")
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if np.any(t_arr < 0) or not np.all(np.isfinite(t_arr)):
        raise ValueError("times must be finite and nonnegative")

    dc = directional_couplings(coeffs)
    l1, l2 = coeffs.linewidth_1, coeffs.linewidth_2
    lam, dlt, s_par = dc.lambda_sum, dc.lambda_diff, dc.s_param
    scale = coeffs.rate_scale
    om = drive.amplitude
    left = drive.side is DriveSide.LEFT
    omega_b, omega_c = drive.omega_battery, drive.omega_charger
    g_drive = dc.g_fwd if left else dc.g_bwd
    den = 4.0 * dc.g_bwd * dc.g_fwd - l1 * l2

    usable = _is_resonant(coeffs) and not linear_closed_form_is_singular(coeffs)
    if not usable:
        out = _energies_by_evolve(coeffs, drive, t_arr)
        result = {"E_b": out["E_b"], "E_c": out["E_c"]}
        if scalar:
            return {k: v[0] for k, v in result.items()}
        return result

    quarter = t_arr / 4.0
    if abs(dc.g_bwd) <= NONRECIPROCAL_RTOL * scale:
        if left:
            shape = 1.0 - np.exp(-lam * quarter) * (
                np.cosh(dlt * quarter) + lam * quarter * _csinhc(dlt * quarter)
            )
            e_b = (
                16.0 * omega_b * abs(g_drive) ** 2 * om**2 / (l1**2 * l2**2)
            ) * np.abs(shape) ** 2
            e_c = (4.0 * omega_c * om**2 / l1**2) * (
                1.0 - np.exp(-l1 * t_arr / 2.0)
            ) ** 2
        else:
            e_b = np.zeros_like(t_arr)
            e_c = (4.0 * omega_c * om**2 / l2**2) * (
                1.0 - np.exp(-l2 * t_arr / 2.0)
            ) ** 2
    else:
        ch = np.cosh(s_par * quarter)
        shc = quarter * _csinhc(s_par * quarter)
        damp = np.exp(-lam * quarter)
        e_b = (
            16.0 * omega_b * abs(g_drive) ** 2 * om**2 / abs(den) ** 2
        ) * np.abs(damp * (ch + lam * shc) - 1.0) ** 2
        sgn = 1.0 if left else -1.0
        lam_far = lam + sgn * dlt
        e_c = (omega_c * om**2 / abs(den) ** 2) * np.abs(
            lam_far - damp * (lam_far * ch + (s_par**2 + sgn * lam * dlt) * shc)
        ) ** 2
    result = {"E_b": e_b.real, "E_c": e_c.real}
    if scalar:
        return {k: float(v[0]) for k, v in result.items()}
    return result


def quadratic_closed_form_is_degenerate(
    coeffs: MasterEqCoefficients, amplitude: float
) -> bool:
    """True inside the excluded neighborhood of the quadratic-form poles.

    The printed time-domain forms have removable singularities where decay
    combinations degenerate (for example lw1 + 2*amplitude = lw2); there the
    integration route is used instead.
    """
    l1, l2 = coeffs.linewidth_1, coeffs.linewidth_2
    om = amplitude
    scale = max(l1 + l2 + 2.0 * om, 1e-300)
    combos = (
        l2,
        l1 - 2.0 * om,
        l1 + 2.0 * om,
        l1 + l2 - 2.0 * om,
        l1 + l2 + 2.0 * om,
        l2 - l1 + 2.0 * om,
        l2 - l1 - 2.0 * om,
    )
    return any(abs(c) < SINGULARITY_RTOL * scale for c in combos)


def closed_form_quadratic_nr(
    coeffs: MasterEqCoefficients, drive: DriveSpec, t
) -> dict[str, np.ndarray]:
    """Transient moments under a left quadratic drive at a cancellation point.

    Valid below threshold with the backward coupling cancelled; raises
    UnstableSystemError above threshold and ValueError when the backward
    coupling survives. Returns {"E_b", "E_c", "s2"}; near a pole degeneracy
    or off resonance the values come from exact integration instead.
    """
    if drive.kind is not DriveKind.QUADRATIC:
        raise ValueError("closed_form_quadratic_nr requires a quadratic drive")
    if drive.side is not DriveSide.LEFT:
        raise ValueError(
            "closed forms cover the left-drive case; use evolve for right drive"
        )
    dc = directional_couplings(coeffs)
    scale = coeffs.rate_scale
    if abs(dc.g_bwd) > NONRECIPROCAL_RTOL * scale:
        raise ValueError(
            "closed_form_quadratic_nr requires a cancelled backward coupling"
        )
    report = stability(coeffs, drive)
    if not report.stable:
        raise UnstableSystemError(
            "quadratic drive above threshold: largest eigenvalue real part "
            f"{report.max_real:.3e}"
        )

    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if np.any(t_arr < 0) or not np.all(np.isfinite(t_arr)):
        raise ValueError("times must be finite and nonnegative")

    om = drive.amplitude
    if (
        quadratic_closed_form_is_degenerate(coeffs, om)
        or not _is_resonant(coeffs)
    ):
        out = _energies_by_evolve(coeffs, drive, t_arr)
        result = {"E_b": out["E_b"], "E_c": out["E_c"], "s2": out["s_b"]}
        if scalar:
            return {k: v[0] for k, v in result.items()}
        return result

    l1, l2 = coeffs.linewidth_1, coeffs.linewidth_2
    ls = l1 + l2
    g2 = abs(coeffs.collective) ** 2
    omega_b, omega_c = drive.omega_battery, drive.omega_charger

    e_slow = np.exp(-t_arr * (l1 - 2.0 * om))
    e_fast = np.exp(-t_arr * (l1 + 2.0 * om))
    e_bat = np.exp(-l2 * t_arr)
    e_sum_m = np.exp(-t_arr * (ls - 2.0 * om) / 2.0)
    e_sum_p = np.exp(-t_arr * (ls + 2.0 * om) / 2.0)

    dm = l2 - l1 - 2.0 * om
    dp = l2 - l1 + 2.0 * om

    term1 = (
        4.0 * om * (l2 + 2.0 * l1)
        / (l2 * (l1 - 2.0 * om) * (l1 + 2.0 * om) * (ls - 2.0 * om) * (ls + 2.0 * om))
    )
    term2 = 8.0 * om * (l2 - l1) * e_bat / (l2 * (dm * dp) ** 2)
    term3 = -4.0 * e_sum_p / (dm**2 * (ls + 2.0 * om))
    term4 = -e_slow / ((l1 - 2.0 * om) * dp**2)
    term5 = 4.0 * e_sum_m / ((ls - 2.0 * om) * dp**2)
    term6 = e_fast / ((l1 + 2.0 * om) * dm**2)
    e_b = 2.0 * omega_b * g2 * om * (term1 + term2 + term3 + term4 + term5 + term6)

    e_c = (
        -omega_c
        * om
        * (
            l1 * (e_slow - e_fast)
            + 2.0 * om * (-2.0 + e_slow + e_fast)
        )
        / (2.0 * (l1**2 - 4.0 * om**2))
    )

    c1 = (
        -2.0 * (l1 * ls + 4.0 * om**2)
        / (l2 * (l1**2 - 4.0 * om**2) * (ls**2 - 4.0 * om**2))
    )
    c2 = 2.0 * e_bat * ((l2 - l1) ** 2 + 4.0 * om**2) / (l2 * (dm * dp) ** 2)
    c3 = -4.0 * e_sum_p / (dm**2 * (ls + 2.0 * om))
    c4 = e_slow / ((l1 - 2.0 * om) * dp**2)
    c5 = -4.0 * e_sum_m / ((ls - 2.0 * om) * dp**2)
    c6 = e_fast / ((l1 + 2.0 * om) * dm**2)
    if abs(dc.g_fwd) > 0.0:
        phase = (dc.g_fwd / abs(dc.g_fwd)) ** 2
    else:
        phase = 1.0
    s2 = phase * 2j * g2 * om * (c1 + c2 + c3 + c4 + c5 + c6)

    result = {"E_b": e_b, "E_c": e_c, "s2": s2}
    if scalar:
        return {k: v[0] for k, v in result.items()}
    return result


def analytic_steady_energies(
    coeffs: MasterEqCoefficients, drive: DriveSpec
) -> dict[str, float]:
    """Steady energies from the resonant formulas, independent of the solver.

    Linear drive covers any stable reciprocal or nonreciprocal point; the
    quadratic route covers the left-driven cancellation point below
    threshold.
    """
    if not _is_resonant(coeffs):
        raise ValueError("analytic steady energies assume resonant driving")
    dc = directional_couplings(coeffs)
    l1, l2 = coeffs.linewidth_1, coeffs.linewidth_2
    om = drive.amplitude
    if drive.kind is DriveKind.LINEAR:
        den = 4.0 * dc.g_bwd * dc.g_fwd - l1 * l2
        if abs(den) <= SINGULARITY_RTOL * coeffs.rate_scale**2:
            raise UnstableSystemError("amplitude drift is singular: no steady state")
        left = drive.side is DriveSide.LEFT
        g_drive = dc.g_fwd if left else dc.g_bwd
        lam_far = l2 if left else l1
        e_b = 16.0 * drive.omega_battery * abs(g_drive) ** 2 * om**2 / abs(den) ** 2
        e_c = 4.0 * drive.omega_charger * om**2 * lam_far**2 / abs(den) ** 2
        return {"E_b": e_b, "E_c": e_c}
    if drive.side is not DriveSide.LEFT:
        raise ValueError("quadratic analytic steady energies cover the left drive")
    if abs(dc.g_bwd) > NONRECIPROCAL_RTOL * coeffs.rate_scale:
        raise ValueError("quadratic analytic steady energies require cancellation")
    report = stability(coeffs, drive)
    if not report.stable:
        raise UnstableSystemError("quadratic drive above threshold")
    ls = l1 + l2
    e_c = 2.0 * drive.omega_charger * om**2 / (l1**2 - 4.0 * om**2)
    g2 = abs(coeffs.collective) ** 2
    e_b = (
        4.0 * drive.omega_battery * g2 * (l2 + 2.0 * l1)
        / (drive.omega_charger * l2 * (ls**2 - 4.0 * om**2))
    ) * e_c
    return {"E_b": e_b, "E_c": e_c}
