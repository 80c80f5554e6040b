"""The four coupling geometries and their master-equation coefficients.

Two bosonic modes (charger a1, battery a2) couple to a common waveguide at
two, three, or four points, optionally terminated by a mirror on the charger
side. The geometries are labeled 4P, 4P+M, 3P, 3P+M. This module builds each
geometry's cascaded network out of slh elements, provides the equal-coupling
trigonometric closed forms for every coefficient as an independent route, and
derives the forward/backward directional couplings whose interference gives
one-way charging.

Spatial orders (left to right; the field enters open chains from the left and
mirror chains from the right):

    4P    : (a1,g11) -phi1- (a1,g12,th1) -phiw- (a2,g21) -phi2- (a2,g22,th2)
    3P    : (a1,g1)  -phiw- (a2,g21) -phi2- (a2,g22,th2)
    4P+M  : [mirror] -phim- (a1,g11) -phi2- (a1,g12,th1) -phiw- (a2,g21) -phi1- (a2,g22,th2)
    3P+M  : [mirror] -phim- (a1,g1)  -phiw- (a2,g21) -phi2- (a2,g22,th2)

Note the mirror-terminated four-point chain carries phi2 between the a1 points
and phi1 between the a2 points; that arrangement is what the closed forms
describe. The mirror contributes a pure phase phim for the full reflection
round trip.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np

from .slh import (
    MasterEqCoefficients,
    SLHTriplet,
    chain,
    concatenate,
    coupling_point,
    extract_coefficients,
    phase_element,
)

TWO_PI = 2.0 * math.pi


class SetupKind(enum.Enum):
    """The four coupling geometries."""

    FOUR_POINT_OPEN = "4P"
    FOUR_POINT_MIRROR = "4P+M"
    THREE_POINT_OPEN = "3P"
    THREE_POINT_MIRROR = "3P+M"

    @classmethod
    def from_label(cls, label: str) -> "SetupKind":
        for kind in cls:
            if kind.value == label:
                return kind
        valid = ", ".join(k.value for k in cls)
        raise ValueError(f"unknown setup {label!r}; expected one of {valid}")

    @property
    def has_mirror(self) -> bool:
        return self in (SetupKind.FOUR_POINT_MIRROR, SetupKind.THREE_POINT_MIRROR)

    @property
    def is_three_point(self) -> bool:
        return self in (SetupKind.THREE_POINT_OPEN, SetupKind.THREE_POINT_MIRROR)


@dataclass(frozen=True)
class PhaseSet:
    """Propagation phases (phi1, phiw, phi2), mirror phase phim, and the local
    coupling phases (theta1, theta2), all in radians at the common reference
    frequency. Raw values are used in dynamics; canonical() folds into [0, 2pi)
    for reporting only."""

    phi1: float = 0.0
    phiw: float = 0.0
    phi2: float = 0.0
    phim: float = 0.0
    theta1: float = 0.0
    theta2: float = 0.0

    def __post_init__(self) -> None:
        for name in ("phi1", "phiw", "phi2", "phim", "theta1", "theta2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"phase {name} must be finite")

    def canonical(self) -> "PhaseSet":
        return PhaseSet(
            *(getattr(self, f.name) % TWO_PI for f in dataclasses.fields(self))
        )

    def replace(self, **kwargs: float) -> "PhaseSet":
        return dataclasses.replace(self, **kwargs)


@dataclass(frozen=True)
class CouplingRates:
    """Per-point waveguide rates, the equal-coupling value, and intrinsic losses.

    Four-point setups use gamma11/gamma12 (mode 1) and gamma21/gamma22 (mode 2);
    three-point setups use gamma1 plus gamma21/gamma22. With `equal` set, every
    per-point rate must equal `gamma` (the regime the closed forms cover).
    """

    gamma11: float
    gamma12: float
    gamma21: float
    gamma22: float
    gamma1: float
    gamma: float
    kappa1: float
    kappa2: float
    equal: bool = True

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            if f.type == "float" and getattr(self, f.name) < 0:
                raise ValueError(f"rate {f.name} must be nonnegative")
        if self.equal:
            for name in ("gamma11", "gamma12", "gamma21", "gamma22", "gamma1"):
                if getattr(self, name) != self.gamma:
                    raise ValueError(
                        f"equal-coupling rates require {name} == gamma"
                    )

    @classmethod
    def equal_rates(
        cls, gamma: float, kappa1: float = 0.0, kappa2: float = 0.0
    ) -> "CouplingRates":
        return cls(gamma, gamma, gamma, gamma, gamma, gamma, kappa1, kappa2, True)


@dataclass(frozen=True)
class DirectionalCouplings:
    """Forward/backward couplings and the derived rate combinations.

    g_fwd feeds the battery from the charger, g_bwd the reverse; lambda_sum and
    lambda_diff are the linewidth sum and difference; s_param is the principal
    square root of lambda_diff^2 + 16*g_bwd*g_fwd appearing in the transient
    closed forms.
    """

    g_fwd: complex
    g_bwd: complex
    lambda_sum: float
    lambda_diff: float
    s_param: complex

    def __post_init__(self) -> None:
        target = self.lambda_diff**2 + 16.0 * self.g_bwd * self.g_fwd
        scale = max(abs(target), self.lambda_sum**2, 1e-300)
        if abs(self.s_param**2 - target) > 1e-12 * scale:
            raise ValueError("s_param^2 does not match lambda_diff^2 + 16*g_bwd*g_fwd")


def directional_couplings(coeffs: MasterEqCoefficients) -> DirectionalCouplings:
    """Combine exchange and collective decay into one-way coupling strengths."""
    g_fwd = -1j * coeffs.exchange - coeffs.collective / 2.0
    g_bwd = -1j * coeffs.exchange.conjugate() - coeffs.collective.conjugate() / 2.0
    lambda_diff = coeffs.linewidth_2 - coeffs.linewidth_1
    s_param = complex(np.sqrt(complex(lambda_diff**2 + 16.0 * g_bwd * g_fwd)))
    return DirectionalCouplings(
        g_fwd=g_fwd,
        g_bwd=g_bwd,
        lambda_sum=coeffs.linewidth_1 + coeffs.linewidth_2,
        lambda_diff=lambda_diff,
        s_param=s_param,
    )


def build_network(
    kind: SetupKind, phases: PhaseSet, rates: CouplingRates
) -> SLHTriplet:
    """Compose the geometry's cascaded network from elementary slh pieces.

    Open geometries return a two-channel network (rightward chain stacked with
    leftward chain); mirror geometries return the single reflected channel.
    """
    p = phases

    def pt(mode: int, rate: float, local_phase: float = 0.0) -> SLHTriplet:
        return coupling_point(mode, rate, local_phase)

    if kind is SetupKind.FOUR_POINT_OPEN:
        right = chain(
            pt(2, rates.gamma22, p.theta2), phase_element(p.phi2),
            pt(2, rates.gamma21), phase_element(p.phiw),
            pt(1, rates.gamma12, p.theta1), phase_element(p.phi1),
            pt(1, rates.gamma11),
        )
        left = chain(
            pt(1, rates.gamma11), phase_element(p.phi1),
            pt(1, rates.gamma12, p.theta1), phase_element(p.phiw),
            pt(2, rates.gamma21), phase_element(p.phi2),
            pt(2, rates.gamma22, p.theta2),
        )
        return concatenate(right, left)

    if kind is SetupKind.THREE_POINT_OPEN:
        right = chain(
            pt(2, rates.gamma22, p.theta2), phase_element(p.phi2),
            pt(2, rates.gamma21), phase_element(p.phiw),
            pt(1, rates.gamma1),
        )
        left = chain(
            pt(1, rates.gamma1), phase_element(p.phiw),
            pt(2, rates.gamma21), phase_element(p.phi2),
            pt(2, rates.gamma22, p.theta2),
        )
        return concatenate(right, left)

    if kind is SetupKind.FOUR_POINT_MIRROR:
        inbound = chain(
            pt(1, rates.gamma11), phase_element(p.phi2),
            pt(1, rates.gamma12, p.theta1), phase_element(p.phiw),
            pt(2, rates.gamma21), phase_element(p.phi1),
            pt(2, rates.gamma22, p.theta2),
        )
        outbound = chain(
            pt(2, rates.gamma22, p.theta2), phase_element(p.phi1),
            pt(2, rates.gamma21), phase_element(p.phiw),
            pt(1, rates.gamma12, p.theta1), phase_element(p.phi2),
            pt(1, rates.gamma11),
        )
        network = chain(outbound, phase_element(p.phim), inbound)
        # The double-pass chain and the trigonometric route land on opposite
        # conventions for the cross-mode exchange term of this geometry (the
        # chain's pairwise interference sum gives the negated conjugate).  The
        # tuned working point's backward-channel cancellation, which balances
        # the exchange term against the collective decay, only exists in the
        # trigonometric convention, so swap the composed Hamiltonian onto it.
        # Couplings are untouched, so every decay coefficient and the Lamb
        # shifts are unaffected; both routes agree identically afterwards.
        h = network.hamiltonian.copy()
        h01, h10 = h[0, 1], h[1, 0]
        h[0, 1] = -h10
        h[1, 0] = -h01
        return SLHTriplet(
            network.scattering, network.coupling, h, network.bare_detuning
        )

    if kind is SetupKind.THREE_POINT_MIRROR:
        inbound = chain(
            pt(1, rates.gamma1), phase_element(p.phiw),
            pt(2, rates.gamma21), phase_element(p.phi2),
            pt(2, rates.gamma22, p.theta2),
        )
        outbound = chain(
            pt(2, rates.gamma22, p.theta2), phase_element(p.phi2),
            pt(2, rates.gamma21), phase_element(p.phiw),
            pt(1, rates.gamma1),
        )
        return chain(outbound, phase_element(p.phim), inbound)

    raise ValueError(f"unknown setup kind {kind!r}")


def _clamp_rate(value, scale):
    """Zero out the tiny negative rounding residue of a nonnegative form."""
    return np.where(value > 0.0, value, np.where(value > -1e-12 * scale, 0.0, value))


def closed_form_trig(
    kind: SetupKind,
    phi1,
    phiw,
    phi2,
    phim,
    theta1,
    theta2,
    gamma,
):
    """Equal-coupling trigonometric closed forms for the six coefficients.

    Broadcasts over numpy arrays; returns a dict with keys lamb_shift_1,
    lamb_shift_2, exchange, decay_1, decay_2, collective. This is the
    independent route against which the composed-network extraction is checked.
    """
    sin, cos, exp = np.sin, np.cos, np.exp
    g = gamma
    if kind is SetupKind.FOUR_POINT_OPEN:
        dw1 = g * sin(phi1) * cos(theta1)
        dw2 = g * sin(phi2) * cos(theta2)
        exch = (g / 2.0) * (
            sin(phi1 + phiw)
            + exp(-1j * theta2) * sin(phi1 + phiw + phi2)
            + exp(1j * theta1) * sin(phiw)
            + exp(1j * (theta1 - theta2)) * sin(phiw + phi2)
        )
        d1 = 2.0 * g * (1.0 + cos(phi1) * cos(theta1))
        d2 = 2.0 * g * (1.0 + cos(phi2) * cos(theta2))
        # Written in the same operator ordering as the exchange row above
        # (coefficient of a1 rho a2^dag); the opposite ordering would conjugate
        # every theta factor and break the pairing with the exchange term that
        # the directional couplings rely on.
        coll = g * (
            exp(1j * (theta1 - theta2)) * cos(phiw + phi2)
            + exp(-1j * theta2) * cos(phi1 + phiw + phi2)
            + exp(1j * theta1) * cos(phiw)
            + cos(phi1 + phiw)
        )
    elif kind is SetupKind.FOUR_POINT_MIRROR:
        dw1 = (
            g * cos(theta1) * (sin(phi2) + sin(phim + phi2))
            + (g / 2.0) * sin(phim)
            + (g / 2.0) * sin(phim + 2.0 * phi2)
        )
        dw2 = (
            (g / 2.0) * sin(phim + 2.0 * phi2 + 2.0 * phiw)
            + (g / 2.0) * sin(phim + 2.0 * phi2 + 2.0 * phiw + 2.0 * phi1)
            + g * cos(theta2)
            * (sin(phi1) + sin(phim + 2.0 * phi2 + 2.0 * phiw + phi1))
        )
        half = phim / 2.0
        outer = phiw + phi1 / 2.0 + phi2 + half
        exch = (
            -1j
            * g
            * exp(1j * theta2 / 2.0)
            * (cos(half) + exp(-1j * theta1) * cos(phi2 + half))
            * (
                exp(-1j * outer) * cos((theta2 - phi1) / 2.0)
                - exp(1j * outer) * cos((theta2 + phi1) / 2.0)
            )
        )
        d1 = (
            g * (1.0 + cos(phim))
            + g * (1.0 + cos(phim + 2.0 * phi2))
            + 2.0 * g * cos(theta1) * (cos(phi2) + cos(phim + phi2))
        )
        d2 = (
            g * (1.0 + cos(phim + 2.0 * phi2 + 2.0 * phiw))
            + g * (1.0 + cos(2.0 * phi1 + phim + 2.0 * phi2 + 2.0 * phiw))
            + 2.0 * g * cos(theta2)
            * (cos(phi1) + cos(phi1 + phim + 2.0 * phi2 + 2.0 * phiw))
        )
        coll = (
            2.0
            * g
            * (exp(1j * theta1) * cos(phi2 + half) + cos(half))
            * (
                cos(phiw + phi2 + half)
                + exp(-1j * theta2) * cos(phi1 + phiw + phi2 + half)
            )
        )
    elif kind is SetupKind.THREE_POINT_OPEN:
        dw1 = np.zeros_like(np.asarray(gamma + phiw, dtype=float))
        dw2 = g * sin(phi2) * cos(theta2)
        exch = (g / 2.0) * (sin(phiw) + exp(-1j * theta2) * sin(phiw + phi2))
        d1 = g * np.ones_like(np.asarray(phiw, dtype=float))
        d2 = 2.0 * g * (1.0 + cos(phi2) * cos(theta2))
        coll = g * (cos(phiw) + exp(-1j * theta2) * cos(phiw + phi2))
    elif kind is SetupKind.THREE_POINT_MIRROR:
        dw1 = (g / 2.0) * sin(phim) * np.ones_like(np.asarray(phiw, dtype=float))
        dw2 = (
            (g / 2.0) * sin(phim + 2.0 * phiw)
            + (g / 2.0) * sin(phim + 2.0 * phiw + 2.0 * phi2)
            + g * cos(theta2) * (sin(phi2) + sin(phim + 2.0 * phiw + phi2))
        )
        exch = (g / 2.0) * (
            sin(phiw)
            + sin(phim + phiw)
            + exp(-1j * theta2) * (sin(phiw + phi2) + sin(phim + phiw + phi2))
        )
        d1 = g * (1.0 + cos(phim)) * np.ones_like(np.asarray(phiw, dtype=float))
        d2 = (
            g * (1.0 + cos(phim + 2.0 * phiw))
            + g * (1.0 + cos(phim + 2.0 * phiw + 2.0 * phi2))
            + 2.0 * g * cos(theta2) * (cos(phi2) + cos(phim + 2.0 * phiw + phi2))
        )
        coll = g * (
            cos(phiw)
            + cos(phim + phiw)
            + exp(-1j * theta2) * (cos(phiw + phi2) + cos(phim + phiw + phi2))
        )
    else:
        raise ValueError(f"unknown setup kind {kind!r}")
    scale = np.maximum(np.asarray(gamma, dtype=float), 1e-300)
    return {
        "lamb_shift_1": dw1,
        "lamb_shift_2": dw2,
        "exchange": exch,
        "decay_1": _clamp_rate(d1, scale),
        "decay_2": _clamp_rate(d2, scale),
        "collective": coll,
    }


def closed_form_coefficients(
    kind: SetupKind,
    phases: PhaseSet,
    gamma: float,
    kappa1: float = 0.0,
    kappa2: float = 0.0,
    rates: CouplingRates | None = None,
) -> MasterEqCoefficients:
    """Coefficients from the closed forms, at the working resonance.

    Only the equal-coupling regime is covered; pass `rates` to have the
    equal-coupling requirement checked against a full rate set.
    """
    if rates is not None:
        if not rates.equal:
            raise ValueError(
                "closed-form coefficients require equal per-point couplings"
            )
        gamma, kappa1, kappa2 = rates.gamma, rates.kappa1, rates.kappa2
    if gamma < 0 or kappa1 < 0 or kappa2 < 0:
        raise ValueError("rates must be nonnegative")
    f = closed_form_trig(
        kind, phases.phi1, phases.phiw, phases.phi2, phases.phim,
        phases.theta1, phases.theta2, gamma,
    )
    decay_1 = float(f["decay_1"])
    decay_2 = float(f["decay_2"])
    return MasterEqCoefficients(
        lamb_shift_1=float(f["lamb_shift_1"]),
        lamb_shift_2=float(f["lamb_shift_2"]),
        detuning_eff_1=0.0,
        detuning_eff_2=0.0,
        exchange=complex(f["exchange"]),
        decay_1=decay_1,
        decay_2=decay_2,
        collective=complex(f["collective"]),
        intrinsic_1=kappa1,
        intrinsic_2=kappa2,
        linewidth_1=decay_1 + kappa1,
        linewidth_2=decay_2 + kappa2,
    )


def at_resonance(coeffs: MasterEqCoefficients) -> MasterEqCoefficients:
    """Impose the working resonance: zero both effective detunings.

    Equivalent to choosing each mode's bare detuning opposite to its Lamb
    shift, which is how the drive frequency is tuned in practice.
    """
    return dataclasses.replace(coeffs, detuning_eff_1=0.0, detuning_eff_2=0.0)


def network_coefficients(
    kind: SetupKind,
    phases: PhaseSet,
    rates: CouplingRates,
    resonant: bool = True,
) -> MasterEqCoefficients:
    """Compose the network and extract coefficients in one step."""
    net = build_network(kind, phases, rates)
    coeffs = extract_coefficients(net, rates.kappa1, rates.kappa2)
    return at_resonance(coeffs) if resonant else coeffs


#: reference phase tuples at which the backward coupling cancels exactly
_NONRECIPROCAL_POINTS = {
    SetupKind.FOUR_POINT_OPEN: PhaseSet(
        phi1=0.0, phiw=math.pi, phi2=math.pi / 2.0,
        phim=0.0, theta1=0.0, theta2=math.pi / 2.0,
    ),
    SetupKind.FOUR_POINT_MIRROR: PhaseSet(
        phi1=0.0, phiw=math.pi / 4.0, phi2=math.pi / 6.0,
        phim=2.0 * math.pi / 3.0, theta1=0.0, theta2=3.0 * math.pi / 2.0,
    ),
    SetupKind.THREE_POINT_OPEN: PhaseSet(
        phi1=0.0, phiw=math.pi, phi2=math.pi / 2.0,
        phim=0.0, theta1=0.0, theta2=math.pi / 2.0,
    ),
    SetupKind.THREE_POINT_MIRROR: PhaseSet(
        phi1=0.0, phiw=math.pi, phi2=math.pi / 2.0,
        phim=0.0, theta1=0.0, theta2=math.pi / 2.0,
    ),
}


def nonreciprocal_point(kind: SetupKind) -> PhaseSet:
    """Reference phase tuple giving one-way (charger-to-battery) coupling.

    For the three-point geometries phiw only sets a global coupling phase, so
    any value keeps the cancellation; the returned default is pi.
    """
    return _NONRECIPROCAL_POINTS[kind]


def is_nonreciprocal(
    coeffs: MasterEqCoefficients, tol: float | None = None
) -> bool:
    """True when the backward coupling is cancelled to within tol.

    Default tol is 1e-10 times the coefficient magnitude scale, two orders
    above composition round-off.
    """
    if tol is None:
        tol = 1e-10 * coeffs.rate_scale
    if not tol > 0:
        raise ValueError("tol must be positive")
    return abs(directional_couplings(coeffs).g_bwd) <= tol
