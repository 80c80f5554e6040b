"""Independent density-matrix route for validating the moment dynamics.

Evolves the full two-mode master equation in a truncated Fock basis with a
fixed-step RK4 integrator, checks state sanity (trace, hermiticity,
positivity) along the way, and extracts the same moments the Gaussian route
produces. Truncation is certified by doubling the per-mode cutoff until all
reported moments stop moving; weak drives keep occupations far below the
cutoff so the ladder terminates quickly.

Everything here is deliberately separate from the moment-system code: the
only shared inputs are the master-equation coefficients and the drive, so
agreement between the two routes checks the physics, not the bookkeeping.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dynamics import DriveKind, DriveSide, DriveSpec, MomentState
from .errors import CutoffConvergenceError, UnphysicalStateError
from .slh import MasterEqCoefficients

#: dimensionless RK4 step: dt = _STEP_FRACTION / fastest rate
_STEP_FRACTION = 0.02

#: per-step trace drift treated as an integration failure
_TRACE_STEP_TOL = 1e-10


@dataclass(frozen=True)
class DensityMatrix:
    """Two-mode density matrix in the product Fock basis |n1> x |n2>."""

    cutoff: int
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.cutoff < 2:
            raise ValueError("cutoff must be at least 2")
        d = np.asarray(self.data, dtype=complex)
        dim = self.cutoff * self.cutoff
        if d.shape != (dim, dim):
            raise ValueError(
                f"density matrix must be {dim}x{dim} for cutoff {self.cutoff}"
            )
        object.__setattr__(self, "data", d)

    def validate(
        self,
        herm_tol: float = 1e-10,
        trace_tol: float = 1e-8,
        pos_tol: float = 1e-8,
    ) -> None:
        """Raise UnphysicalStateError unless Hermitian, unit-trace, positive."""
        rho = self.data
        herm = np.abs(rho - rho.conj().T).max()
        if herm > herm_tol:
            raise UnphysicalStateError(f"hermiticity defect {herm:.3e}")
        trace = complex(np.trace(rho))
        if abs(trace - 1.0) > trace_tol:
            raise UnphysicalStateError(f"trace defect {abs(trace - 1.0):.3e}")
        lowest = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2.0).min())
        if lowest < -pos_tol:
            raise UnphysicalStateError(f"negative population {lowest:.3e}")


def vacuum_density(cutoff: int) -> DensityMatrix:
    dim = cutoff * cutoff
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return DensityMatrix(cutoff=cutoff, data=rho)


def _destroy(cutoff: int) -> sp.csr_matrix:
    return sp.diags(
        np.sqrt(np.arange(1.0, cutoff)), 1, format="csr", dtype=complex
    )


@functools.lru_cache(maxsize=8)
def _operators(cutoff: int) -> dict:
    a = _destroy(cutoff)
    eye = sp.identity(cutoff, format="csr", dtype=complex)
    a1 = sp.kron(a, eye, format="csr")
    a2 = sp.kron(eye, a, format="csr")
    a1h = a1.conj().T.tocsr()
    a2h = a2.conj().T.tocsr()
    return {
        "a1": a1,
        "a2": a2,
        "a1h": a1h,
        "a2h": a2h,
        "n1": (a1h @ a1).tocsr(),
        "n2": (a2h @ a2).tocsr(),
        "ad1a2": (a1h @ a2).tocsr(),
        "ad2a1": (a2h @ a1).tocsr(),
        "a1a1": (a1 @ a1).tocsr(),
        "a2a2": (a2 @ a2).tocsr(),
        "a1a2": (a1 @ a2).tocsr(),
        "a1h_dense": a1h.toarray(),
        "a2h_dense": a2h.toarray(),
    }


@dataclass(frozen=True)
class LindbladGenerator:
    """Right-hand side of the truncated master equation."""

    cutoff: int
    drift: sp.csr_matrix
    a1: sp.csr_matrix
    a2: sp.csr_matrix
    a1h_dense: np.ndarray
    a2h_dense: np.ndarray
    linewidth_1: float
    linewidth_2: float
    collective: complex
    rate_scale: float

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        """d(rho)/dt, assembled as X + X^dagger to stay Hermitian."""
        r1 = self.a1 @ rho
        r2 = self.a2 @ rho
        x = self.drift @ rho
        x += (0.5 * self.linewidth_1) * (r1 @ self.a1h_dense)
        x += (0.5 * self.linewidth_2) * (r2 @ self.a2h_dense)
        if self.collective != 0.0:
            x += self.collective * (r1 @ self.a2h_dense)
        return x + x.conj().T


def lindblad_generator(
    coeffs: MasterEqCoefficients, drive: DriveSpec, cutoff: int
) -> LindbladGenerator:
    """Build the truncated generator for the given coefficients and drive."""
    ops = _operators(cutoff)
    om = drive.amplitude
    h = (
        coeffs.detuning_eff_1 * ops["n1"]
        + coeffs.detuning_eff_2 * ops["n2"]
        + coeffs.exchange * ops["ad2a1"]
        + np.conj(coeffs.exchange) * ops["ad1a2"]
    )
    driven = ops["a1"] if drive.side is DriveSide.LEFT else ops["a2"]
    driven_sq = ops["a1a1"] if drive.side is DriveSide.LEFT else ops["a2a2"]
    if drive.kind is DriveKind.LINEAR:
        h = h + om * (driven + driven.conj().T)
    else:
        h = h + (om / 2.0) * (driven_sq + driven_sq.conj().T)
    damp = (
        coeffs.linewidth_1 * ops["n1"]
        + coeffs.linewidth_2 * ops["n2"]
        + coeffs.collective * ops["ad2a1"]
        + np.conj(coeffs.collective) * ops["ad1a2"]
    )
    drift = (-1j * h - 0.5 * damp).tocsr()
    rate_scale = max(
        coeffs.linewidth_1,
        coeffs.linewidth_2,
        abs(coeffs.exchange),
        abs(coeffs.collective),
        abs(coeffs.detuning_eff_1),
        abs(coeffs.detuning_eff_2),
        om,
    )
    return LindbladGenerator(
        cutoff=cutoff,
        drift=drift,
        a1=ops["a1"],
        a2=ops["a2"],
        a1h_dense=ops["a1h_dense"],
        a2h_dense=ops["a2h_dense"],
        linewidth_1=coeffs.linewidth_1,
        linewidth_2=coeffs.linewidth_2,
        collective=complex(coeffs.collective),
        rate_scale=rate_scale,
    )


def evolve_density(
    generator: LindbladGenerator,
    initial: DensityMatrix,
    t_grid: np.ndarray,
    max_step: float | None = None,
) -> list[DensityMatrix]:
    """Fixed-step RK4 trajectory at the output times, validated along the way.

    The step targets _STEP_FRACTION over the fastest rate (at least one step
    per grid interval); the per-step trace drift guard catches runaway
    truncation errors early. Returned matrices are validated snapshots.
    """
    if generator.cutoff != initial.cutoff:
        raise ValueError("generator and initial state cutoffs differ")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a nonempty 1-d array")
    if not np.all(np.isfinite(t)) or t[0] < 0:
        raise ValueError("time grid must be finite and nonnegative")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ValueError("time grid must be strictly ascending")
    if max_step is None:
        if generator.rate_scale > 0.0:
            max_step = _STEP_FRACTION / generator.rate_scale
        else:
            max_step = math.inf
    if not max_step > 0:
        raise ValueError("max_step must be positive")

    rho = initial.data.copy()
    out = [DensityMatrix(generator.cutoff, rho.copy())]
    out[0].validate()
    rhs = generator.rhs
    for k in range(t.size - 1):
        span = t[k + 1] - t[k]
        n_sub = max(1, math.ceil(span / max_step))
        h = span / n_sub
        for _ in range(n_sub):
            k1 = rhs(rho)
            k2 = rhs(rho + (h / 2.0) * k1)
            k3 = rhs(rho + (h / 2.0) * k2)
            k4 = rhs(rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            trace = complex(np.trace(rho)).real
            if abs(trace - 1.0) > _TRACE_STEP_TOL:
                raise UnphysicalStateError(
                    f"trace drifted by {abs(trace - 1.0):.3e} in one step; "
                    "cutoff or step size too aggressive"
                )
            rho /= trace
        snapshot = DensityMatrix(generator.cutoff, rho.copy())
        snapshot.validate()
        out.append(snapshot)
    return out


def _expect(op: sp.csr_matrix, rho: np.ndarray) -> complex:
    # tr(op @ rho) without forming the product matrix
    return complex(op.multiply(rho.T).sum())


def moments_from_density(state: DensityMatrix) -> MomentState:
    """First and second moments of a density matrix, matching MomentState."""
    ops = _operators(state.cutoff)
    rho = state.data
    return MomentState(
        m1=_expect(ops["a1"], rho),
        m2=_expect(ops["a2"], rho),
        n1=max(_expect(ops["n1"], rho).real, 0.0),
        n2=max(_expect(ops["n2"], rho).real, 0.0),
        x12=_expect(ops["ad1a2"], rho),
        s1=_expect(ops["a1a1"], rho),
        s2=_expect(ops["a2a2"], rho),
        s12=_expect(ops["a1a2"], rho),
    )


_MOMENT_FIELDS = ("m1", "m2", "n1", "n2", "x12", "s1", "s2", "s12")


@dataclass(frozen=True)
class OracleResult:
    """Converged oracle moments with the truncation certificate."""

    states: tuple[MomentState, ...]
    cutoff: int
    certificate: float


def _moment_distance(
    a: list[MomentState], b: list[MomentState]
) -> float:
    worst = 0.0
    for sa, sb in zip(a, b):
        for name in _MOMENT_FIELDS:
            worst = max(worst, abs(complex(getattr(sa, name)) - complex(getattr(sb, name))))
    return worst


def converged_moments(
    coeffs: MasterEqCoefficients,
    drive: DriveSpec,
    t_grid: np.ndarray,
    tol: float = 1e-8,
    start_cutoff: int = 6,
    max_cutoff: int = 16,
) -> OracleResult:
    """Moments from the density-matrix route at a certified cutoff.

    Doubles the per-mode cutoff until every reported moment changes by less
    than tol across the doubling; aborts above max_cutoff. The certificate
    is the largest moment change over the final doubling.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if start_cutoff < 2:
        raise ValueError("start_cutoff must be at least 2")

    def run(cutoff: int) -> list[MomentState]:
        gen = lindblad_generator(coeffs, drive, cutoff)
        snapshots = evolve_density(gen, vacuum_density(cutoff), t_grid)
        return [moments_from_density(s) for s in snapshots]

    cutoff = start_cutoff
    previous = run(cutoff)
    while True:
        doubled = 2 * cutoff
        if doubled > max_cutoff:
            raise CutoffConvergenceError(
                f"moments not converged at cutoff {cutoff}; "
                f"next doubling {doubled} exceeds the cap {max_cutoff}"
            )
        current = run(doubled)
        certificate = _moment_distance(previous, current)
        if certificate <= tol:
            return OracleResult(
                states=tuple(current), cutoff=doubled, certificate=certificate
            )
        cutoff = doubled
        previous = current
