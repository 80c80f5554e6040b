"""Energy, extractable work, and transfer figures of merit.

For a single-mode Gaussian state the maximal unitarily extractable work has a
closed form through the determinant-like combination

    D = (1 + 2n - 2|m|^2)^2 - 4|s - m^2|^2

built from the occupation n, amplitude m, and anomalous moment s of the mode.
The passive energy is omega*(sqrt(D) - 1)/2, and the extractable fraction
compares the ergotropy to the stored energy. Directionality is quantified by
the left/right charging contrast R and the battery/charger storage ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DriveSpec, MomentState
from .errors import SingularPointError, UndefinedRatioError, UnphysicalStateError

#: relative slack below D = 1 still attributed to rounding
_D_CLAMP_TOL = 1e-6


@dataclass(frozen=True)
class BatteryMetrics:
    """Stored energy split into extractable and passive parts."""

    energy: float
    passive_energy: float
    d_param: float
    ergotropy: float
    extractable_fraction: float

    def __post_init__(self) -> None:
        if self.energy < 0:
            raise ValueError("energy must be nonnegative")
        if self.d_param < 0:
            raise ValueError("d_param must be nonnegative")
        if not -1e-12 <= self.ergotropy <= self.energy + 1e-12:
            raise ValueError("ergotropy must lie between 0 and the energy")
        if abs(self.passive_energy - (self.energy - self.ergotropy)) > 1e-9 * max(
            1.0, self.energy
        ):
            raise ValueError("passive energy must equal energy minus ergotropy")
        if not 0.0 <= self.extractable_fraction <= 1.0 + 1e-12:
            raise ValueError("extractable fraction must lie in [0, 1]")


@dataclass(frozen=True)
class TransferMetrics:
    """Directional contrast R and battery/charger storage ratio."""

    r_ratio: float
    eta: float

    def __post_init__(self) -> None:
        if abs(self.r_ratio) > 1.0 + 1e-12:
            raise ValueError("r_ratio must lie in [-1, 1]")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")


def gaussian_d_parameter(n: float, m: complex, s: complex) -> float:
    """The work-content combination D for a single-mode Gaussian state.

    D = 1 marks a displaced coherent (fully extractable) state; larger values
    signal passive thermal or squeezed-thermal content. Values below 1 beyond
    rounding tolerance are unphysical moment combinations.
    """
    base = 1.0 + 2.0 * n - 2.0 * abs(m) ** 2
    d = base * base - 4.0 * abs(s - m * m) ** 2
    if d < 1.0 - _D_CLAMP_TOL:
        raise UnphysicalStateError(
            f"moment combination gives D = {d:.12g} < 1; "
            "moments do not describe a physical Gaussian state"
        )
    return max(d, 1.0)


def battery_metrics(
    state: MomentState, battery_mode: int, omega_b: float
) -> BatteryMetrics:
    """Energy, ergotropy, and extractable fraction of the chosen mode."""
    if battery_mode not in (1, 2):
        raise ValueError("battery_mode must be 1 or 2")
    if not omega_b > 0:
        raise ValueError("omega_b must be positive")
    if battery_mode == 1:
        n, m, s = state.n1, state.m1, state.s1
    else:
        n, m, s = state.n2, state.m2, state.s2
    d = gaussian_d_parameter(n, m, s)
    energy = omega_b * n
    passive = omega_b * (math.sqrt(d) - 1.0) / 2.0
    ergotropy = min(max(energy - passive, 0.0), energy)
    fraction = ergotropy / energy if energy > 0.0 else 0.0
    return BatteryMetrics(
        energy=energy,
        passive_energy=energy - ergotropy,
        d_param=d,
        ergotropy=ergotropy,
        extractable_fraction=fraction,
    )


def ergotropy_zero_mean(n: float, s: complex, omega_b: float) -> float:
    """Ergotropy of a zero-mean Gaussian mode, the parametric-charging case.

    Reduction of the general expression at m = 0; kept as an independent
    route for cross-checking battery_metrics.
    """
    if not omega_b > 0:
        raise ValueError("omega_b must be positive")
    base = (1.0 + 2.0 * n) ** 2 - 4.0 * abs(s) ** 2
    if base < 1.0 - _D_CLAMP_TOL:
        raise UnphysicalStateError(
            f"moment combination gives D = {base:.12g} < 1 at zero mean"
        )
    passive = (math.sqrt(max(base, 1.0)) - 1.0) / 2.0
    return omega_b * min(max(n - passive, 0.0), n)


def nonreciprocal_ratio(e_left: float, e_right: float) -> float:
    """Charging contrast (E_left - E_right) / (E_left + E_right).

    E_left and E_right are the battery energies under left and right driving
    with everything else fixed. Both zero leaves the ratio undefined.
    """
    if e_left < 0 or e_right < 0:
        raise ValueError("battery energies must be nonnegative")
    total = e_left + e_right
    if total <= 0.0:
        raise UndefinedRatioError(
            "charging contrast undefined: no energy reaches the battery "
            "from either side"
        )
    return (e_left - e_right) / total


def storage_ratio(e_battery: float, e_charger: float) -> float:
    """Battery-to-charger stored-energy ratio."""
    if e_battery < 0 or e_charger < 0:
        raise ValueError("energies must be nonnegative")
    if e_charger <= 0.0:
        raise UndefinedRatioError(
            "storage ratio undefined: charger holds no energy"
        )
    return e_battery / e_charger


def transfer_metrics(
    e_left: float, e_right: float, e_charger_left: float
) -> TransferMetrics:
    """Bundle the contrast and the left-drive storage ratio."""
    return TransferMetrics(
        r_ratio=nonreciprocal_ratio(e_left, e_right),
        eta=storage_ratio(e_left, e_charger_left),
    )


def steady_r_from_couplings(g_fwd: complex, g_bwd: complex) -> float:
    """Steady-state contrast at equal mode frequencies under linear driving.

    The steady battery energy under each drive direction is proportional to
    the corresponding one-way coupling magnitude squared, so the contrast
    reduces to their normalized difference.
    """
    wf = abs(g_fwd) ** 2
    wb = abs(g_bwd) ** 2
    total = wf + wb
    if total <= 0.0:
        raise UndefinedRatioError(
            "charging contrast undefined: both directional couplings vanish"
        )
    return (wf - wb) / total


def analytic_r_threepoint(phi2: float, theta2: float) -> float:
    """Steady contrast of the open three-point geometry as a phase map.

    R = sin(phi2) sin(theta2) / (1 + cos(phi2) cos(theta2)). The denominator
    is proportional to |g_fwd|^2 + |g_bwd|^2, so it vanishes exactly where
    both directional couplings cancel, at (phi2, theta2) = (0, pi) and
    (pi, 0) mod 2 pi; there the contrast has no defined value.
    """
    num = math.sin(phi2) * math.sin(theta2)
    den = 1.0 + math.cos(phi2) * math.cos(theta2)
    if abs(den) < 1e-15 and abs(num) < 1e-15:
        raise SingularPointError(
            "contrast undefined where both directional couplings cancel"
        )
    return num / den


def analytic_eta_threepoint(
    phi2,
    theta2,
    gamma: float,
    kappa2: float = 0.0,
    phiw=0.0,
    phim=None,
):
    """Steady storage ratio of the three-point geometries under linear drive.

    Open chain (phim None):

        eta = 4 g^2 cos^2((phi2 - theta2)/2) / (k2 + 2g(1 + cos phi2 cos theta2))^2

    Mirror-terminated chain (phim given): the forward coupling gains the
    mirror factor 2 cos(phim/2) and the battery linewidth becomes
    k2 + 2g |cos(phiw + phim/2) + e^{i theta2} cos(phiw + phi2 + phim/2)|^2.
    Broadcasts over arrays; division by a vanishing linewidth yields inf/nan
    under numpy semantics for array input (scalar input raises).
    """
    if gamma < 0 or kappa2 < 0:
        raise ValueError("rates must be nonnegative")
    phi2_a = np.asarray(phi2, dtype=float)
    theta2_a = np.asarray(theta2, dtype=float)
    scalar = phi2_a.ndim == 0 and np.ndim(theta2) == 0
    if phim is None:
        g_fwd_sq = (
            4.0 * gamma**2 * np.cos((phi2_a - theta2_a) / 2.0) ** 2
        )
        linewidth = kappa2 + 2.0 * gamma * (
            1.0 + np.cos(phi2_a) * np.cos(theta2_a)
        )
    else:
        half = np.asarray(phim, dtype=float) / 2.0
        phiw_a = np.asarray(phiw, dtype=float)
        g_fwd_sq = (
            16.0
            * gamma**2
            * np.cos(half) ** 2
            * np.cos((phi2_a - theta2_a) / 2.0) ** 2
        )
        reflected = np.cos(phiw_a + half) + np.exp(1j * theta2_a) * np.cos(
            phiw_a + phi2_a + half
        )
        linewidth = kappa2 + 2.0 * gamma * np.abs(reflected) ** 2
    if scalar and linewidth == 0.0:
        raise UndefinedRatioError(
            "storage ratio undefined: battery linewidth vanishes"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = g_fwd_sq / np.asarray(linewidth, dtype=float) ** 2
    if scalar:
        return float(eta)
    return eta


def battery_trajectory_metrics(
    states: list[MomentState], drive: DriveSpec
) -> dict[str, np.ndarray]:
    """Battery metrics along a trajectory, as plain arrays for output."""
    energy = np.empty(len(states))
    ergotropy = np.empty(len(states))
    fraction = np.empty(len(states))
    charger = np.empty(len(states))
    for k, state in enumerate(states):
        bm = battery_metrics(state, drive.battery_mode, drive.omega_battery)
        energy[k] = bm.energy
        ergotropy[k] = bm.ergotropy
        fraction[k] = bm.extractable_fraction
        n_c = state.n1 if drive.battery_mode == 2 else state.n2
        charger[k] = drive.omega_charger * n_c
    return {
        "E_b": energy,
        "E_c": charger,
        "ergotropy": ergotropy,
        "zeta": fraction,
    }
