"""Composition algebra for cascaded two-mode bosonic networks.

A network element is a triplet (scattering, coupling, hamiltonian): a list of
pure scattering phases (one per input-output channel), per-channel coupling
coefficient vectors over the two cavity modes, and a quadratic 2x2 Hamiltonian
matrix. Elements compose in series (output of one feeds the next) and by
concatenation (independent channels side by side). From a composed network the
master-equation coefficients (Lamb shifts, exchange coupling, individual and
collective decay rates) are extracted by summing over channels.

Conventions: channel k couples through the operator
L_k = coupling[k][0]*a1 + coupling[k][1]*a2, and the Hamiltonian matrix h
represents sum_ij h[i,j] a_i^dag a_j, so the exchange coupling J multiplying
a2^dag a1 sits at h[1,0]. Bare mode detunings supplied at coupling points are
tracked in a separate ledger (`bare_detuning`) so the waveguide-induced Lamb
shifts can be isolated after composition.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedNetworkError

#: absolute tolerance for unit-modulus and hermiticity validation
_ATOL = 1e-12


def _zeros2x2() -> np.ndarray:
    return np.zeros((2, 2), dtype=complex)


@dataclass
class SLHTriplet:
    """One composable network element (or a fully composed network).

    scattering: tuple of unit-modulus complex scalars, one per channel.
    coupling: per channel, the (c1, c2) coefficients of L = c1*a1 + c2*a2,
        in units of sqrt(rate).
    hamiltonian: 2x2 complex Hermitian matrix in rate units (includes any
        bare detunings supplied at coupling points).
    bare_detuning: 2x2 ledger of the bare (non-waveguide) Hamiltonian terms,
        kept separate so Lamb shifts can be read off hamiltonian - bare.
    """

    scattering: tuple[complex, ...]
    coupling: tuple[tuple[complex, complex], ...]
    hamiltonian: np.ndarray
    bare_detuning: np.ndarray = field(default_factory=_zeros2x2)

    def __post_init__(self) -> None:
        self.scattering = tuple(complex(s) for s in self.scattering)
        self.coupling = tuple(
            (complex(c1), complex(c2)) for (c1, c2) in self.coupling
        )
        self.hamiltonian = np.asarray(self.hamiltonian, dtype=complex)
        self.bare_detuning = np.asarray(self.bare_detuning, dtype=complex)
        if self.hamiltonian.shape != (2, 2):
            raise ValueError("hamiltonian must be a 2x2 matrix")
        if self.bare_detuning.shape != (2, 2):
            raise ValueError("bare_detuning must be a 2x2 matrix")
        if len(self.scattering) != len(self.coupling):
            raise ValueError(
                "scattering and coupling must have the same channel count"
            )
        scale = max(1.0, float(np.abs(self.hamiltonian).max()))
        for s in self.scattering:
            if abs(abs(s) - 1.0) > _ATOL:
                raise ValueError(f"scattering entry {s!r} is not unit modulus")
        if np.abs(self.hamiltonian - self.hamiltonian.conj().T).max() > _ATOL * scale:
            raise ValueError("hamiltonian is not Hermitian")

    @property
    def n_channels(self) -> int:
        return len(self.scattering)


def identity_element() -> SLHTriplet:
    """Single pass-through channel: unit scattering, no coupling, no energy."""
    return SLHTriplet((1.0 + 0.0j,), ((0.0j, 0.0j),), _zeros2x2())


def phase_element(phi: float) -> SLHTriplet:
    """Propagation segment: adds phase phi to the travelling field."""
    if not math.isfinite(phi):
        raise ValueError("phase must be finite")
    return SLHTriplet((cmath.exp(1j * phi),), ((0.0j, 0.0j),), _zeros2x2())


def coupling_point(
    mode_index: int,
    rate: float,
    local_phase: float,
    hamiltonian: np.ndarray | None = None,
) -> SLHTriplet:
    """Point where cavity mode `mode_index` (1 or 2) meets the waveguide.

    The channel coupling coefficient is sqrt(rate/2)*exp(i*local_phase) on the
    chosen mode. An optional Hamiltonian carries the mode's bare detuning; it
    is recorded in the bare ledger.
    """
    if mode_index not in (1, 2):
        raise ValueError("mode_index must be 1 or 2")
    if not rate >= 0.0:
        raise ValueError("rate must be nonnegative")
    coeff = math.sqrt(rate / 2.0) * cmath.exp(1j * local_phase)
    coupling = (coeff, 0.0j) if mode_index == 1 else (0.0j, coeff)
    h = _zeros2x2() if hamiltonian is None else np.asarray(hamiltonian, dtype=complex)
    return SLHTriplet((1.0 + 0.0j,), (coupling,), h.copy(), h.copy())


def series(downstream: SLHTriplet, upstream: SLHTriplet) -> SLHTriplet:
    """Feed the output of `upstream` into the input of `downstream`.

    Only single-channel elements compose in series here; multichannel chains
    are assembled channel-by-channel and then concatenated.
    """
    if downstream.n_channels != 1 or upstream.n_channels != 1:
        raise ValueError("series composition requires single-channel elements")
    s2 = downstream.scattering[0]
    s1 = upstream.scattering[0]
    w = np.array(downstream.coupling[0])  # downstream L2 coefficients
    u = np.array(upstream.coupling[0])  # upstream L1 coefficients
    coupling = w + s2 * u
    # interference term: (1/2i) (L2^dag S2 L1 - h.c.) with
    # L2^dag S2 L1 -> matrix c[i, j] = s2 * conj(w[i]) * u[j] on a_i^dag a_j
    c = s2 * np.outer(w.conj(), u)
    h = downstream.hamiltonian + upstream.hamiltonian + (c - c.conj().T) / 2j
    return SLHTriplet(
        (s2 * s1,),
        ((coupling[0], coupling[1]),),
        h,
        downstream.bare_detuning + upstream.bare_detuning,
    )


def chain(*elements: SLHTriplet) -> SLHTriplet:
    """Series-compose elements listed from most-downstream to most-upstream."""
    if not elements:
        return identity_element()
    result = elements[-1]
    for element in reversed(elements[:-1]):
        result = series(element, result)
    return result


def concatenate(a: SLHTriplet, b: SLHTriplet) -> SLHTriplet:
    """Stack two elements as independent parallel channels."""
    return SLHTriplet(
        a.scattering + b.scattering,
        a.coupling + b.coupling,
        a.hamiltonian + b.hamiltonian,
        a.bare_detuning + b.bare_detuning,
    )


@dataclass(frozen=True)
class MasterEqCoefficients:
    """Parameter bundle of the two-mode master equation.

    lamb_shift_j: waveguide-induced frequency pull of mode j.
    detuning_eff_j: bare detuning plus Lamb shift (zero at working resonance).
    exchange: coherent exchange coupling J multiplying a2^dag a1.
    decay_j: waveguide-induced decay rate of mode j.
    collective: shared-channel dissipative coupling between the modes.
    intrinsic_j: non-waveguide loss rate of mode j.
    linewidth_j: decay_j + intrinsic_j.
    """

    lamb_shift_1: float
    lamb_shift_2: float
    detuning_eff_1: float
    detuning_eff_2: float
    exchange: complex
    decay_1: float
    decay_2: float
    collective: complex
    intrinsic_1: float
    intrinsic_2: float
    linewidth_1: float
    linewidth_2: float

    def __post_init__(self) -> None:
        if self.decay_1 < 0 or self.decay_2 < 0:
            raise ValueError("decay rates must be nonnegative")
        if self.intrinsic_1 < 0 or self.intrinsic_2 < 0:
            raise ValueError("intrinsic rates must be nonnegative")
        scale = max(self.decay_1, self.decay_2, 1e-300)
        if abs(self.collective) ** 2 > self.decay_1 * self.decay_2 + 1e-12 * scale**2:
            raise ValueError(
                "collective rate exceeds the Cauchy-Schwarz bound "
                f"|{self.collective}|^2 > {self.decay_1}*{self.decay_2}"
            )
        for lw, dec, intr in (
            (self.linewidth_1, self.decay_1, self.intrinsic_1),
            (self.linewidth_2, self.decay_2, self.intrinsic_2),
        ):
            if lw != dec + intr:
                raise ValueError("linewidth must equal decay + intrinsic exactly")

    @property
    def rate_scale(self) -> float:
        """Magnitude scale used for relative tolerances on rates."""
        return max(
            self.linewidth_1,
            self.linewidth_2,
            abs(self.exchange),
            abs(self.collective),
            1e-300,
        )


def extract_coefficients(
    net: SLHTriplet, kappa1: float, kappa2: float
) -> MasterEqCoefficients:
    """Read the master-equation coefficients off a composed network.

    Decay rates are channel sums of squared coupling moduli; the collective
    rate is the channel sum coeff1*conj(coeff2) (the ordering that matches the
    cross-dissipator acting as a1 . a2^dag). Lamb shifts are the diagonal
    Hamiltonian entries left after removing the bare-detuning ledger.
    """
    if net.n_channels > 2:
        raise UnsupportedNetworkError(
            f"networks with {net.n_channels} channels are not supported"
        )
    if kappa1 < 0 or kappa2 < 0:
        raise ValueError("intrinsic rates must be nonnegative")
    decay_1 = sum(abs(c1) ** 2 for c1, _ in net.coupling)
    decay_2 = sum(abs(c2) ** 2 for _, c2 in net.coupling)
    collective = sum(c1 * c2.conjugate() for c1, c2 in net.coupling)
    induced = net.hamiltonian - net.bare_detuning
    lamb_1 = float(induced[0, 0].real)
    lamb_2 = float(induced[1, 1].real)
    bare_1 = float(net.bare_detuning[0, 0].real)
    bare_2 = float(net.bare_detuning[1, 1].real)
    return MasterEqCoefficients(
        lamb_shift_1=lamb_1,
        lamb_shift_2=lamb_2,
        detuning_eff_1=bare_1 + lamb_1,
        detuning_eff_2=bare_2 + lamb_2,
        exchange=complex(net.hamiltonian[1, 0]),
        decay_1=float(decay_1),
        decay_2=float(decay_2),
        collective=complex(collective),
        intrinsic_1=float(kappa1),
        intrinsic_2=float(kappa2),
        linewidth_1=float(decay_1) + float(kappa1),
        linewidth_2=float(decay_2) + float(kappa2),
    )
