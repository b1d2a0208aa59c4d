"""Negative-eigenvalue trace functionals and the energy-shift sums.

Multiplicity convention (single source of truth): every function here that
returns a *radial* trace counts each radial eigenvalue once.  The physical
channel trace carries the magnetic degeneracy 2|kappa|; it is applied
exactly where a physical quantity is assembled (spectral shift brackets,
channel shift differences, the screened-energy probe, and the density
integral side of the derivative identity, whose density already contains
2|kappa|).  Nothing else multiplies by the degeneracy, so the factor can
never enter twice.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import (ConfigError, ConsistencyError, ConvergenceError,
                     CouplingTooLargeError, ParameterError, PotentialError)
from .grids import LOGARITHMIC, Coupling, RadialGrid, build_grid
from .hydrogenic import DensityTable, channel_density
from .operators import (FurryOperator, PositiveBasis, bound_states,
                        furry_restriction, positive_basis,
                        restrict_shifted_potential, sample_potential)
from .partial_waves import Channel, channel_numbers

ArrayF = NDArray[np.float64]
RadialFunction = Callable[[ArrayF], ArrayF]


def negative_trace(furry_op: FurryOperator, lam: float = 0.0,
                   U: Optional[RadialFunction] = None) -> float:
    """Sum of |negative eigenvalues| of the restricted operator, radial
    convention (each radial eigenvalue counted once)."""
    mat = furry_op.matrix
    if U is not None and lam != 0.0:
        u = sample_potential(U, furry_op.grid.nodes)
        stacked = np.concatenate([u, u])
        proj = furry_op.basis.vectors.T @ (stacked[:, None] * furry_op.basis.vectors)
        mat = mat - lam * proj
    ev = np.linalg.eigvalsh(mat)
    return float(-np.sum(ev[ev < 0.0]))


@dataclass(frozen=True)
class TraceCurve:
    """S(lambda) = tr(A - lambda B)_- sampled on a coupling grid."""

    lambdas: ArrayF
    values: ArrayF
    channel: Channel
    potential_tag: str


def trace_curve(basis: PositiveBasis, U: RadialFunction,
                lambdas: Sequence[float], potential_tag: str = "custom") -> TraceCurve:
    base = furry_restriction(basis)
    vals = np.array([negative_trace(base, lam, U) for lam in lambdas])
    return TraceCurve(lambdas=np.asarray(lambdas, dtype=float), values=vals,
                      channel=basis.channel, potential_tag=potential_tag)


# --------------------------------------------------------------------------
# derivative identity

def density_from_basis(basis: PositiveBasis) -> DensityTable:
    """Channel density assembled from the bound states of a filtered basisable.

    Used to keep the derivative check and its density side on exactly the
    same state set (same grid, same cutoff, same filtering)."""
    grid = basis.grid
    n = grid.n_points
    mask = basis.bound_mask
    shells = (basis.vectors[:n, mask] ** 2 + basis.vectors[n:, mask] ** 2)
    prof = shells.sum(axis=1) / grid.weights
    pref = basis.channel.degeneracy / (4.0 * np.pi * grid.nodes**2)
    nb = int(mask.sum())
    return DensityTable(grid=grid, values=pref * prof, channel=basis.channel,
                        n_max=basis.channel.n_start + nb - 1, kappa_max=None,
                        truncation_estimate=np.zeros(n), gamma=basis.gamma)


@dataclass(frozen=True)
class DerivativeReport:
    """Two-sided derivative of the negative trace against the density integral."""

    derivative: float          # Richardson-extrapolated central difference
    density_integral: float    # int rho_kappa U 4 pi r^2 dr, same state set
    relative_gap: float
    left_derivative: float
    right_derivative: float
    lambda_step: float
    bound_states_used: int
    channel: Channel


def feynman_hellmann_check(coupling: Coupling | float, channel: Channel,
                           U: RadialFunction, lambda_step: float = 1e-3,
                           basis: Optional[PositiveBasis] = None,
                           grid: Optional[RadialGrid] = None,
                           dt: float = 0.014) -> DerivativeReport:
    """Central-difference derivative of S(lambda) versus the density integral.

    Both sides are physical (they carry the 2|kappa| degeneracy).  The
    derivative uses steps lambda and lambda/2 with Richardson elimination
    of the O(lambda^2) error.
    """
    gamma = coupling.gamma if isinstance(coupling, Coupling) else float(coupling)
    if basis is None:
        if grid is None:
            r_max = 80.0 / gamma
            n = int(np.ceil(np.log(r_max / 1e-6) / dt))
            grid = build_grid(LOGARITHMIC, 1e-6, r_max, n)
        basis = positive_basis(gamma, channel, grid)
    base = furry_restriction(basis)
    u = sample_potential(U, basis.grid.nodes)
    stacked = np.concatenate([u, u])
    B = basis.vectors.T @ (stacked[:, None] * basis.vectors)
    A = base.matrix

    def S(lam: float) -> float:
        ev = np.linalg.eigvalsh(A - lam * B)
        return float(-np.sum(ev[ev < 0.0]))

    floor = np.linalg.eigvalsh(A - lambda_step * B)[0]
    floor_m = np.linalg.eigvalsh(A + lambda_step * B)[0]
    if min(floor, floor_m) <= -1.0:
        raise CouplingTooLargeError(
            f"restricted operator reaches {min(floor, floor_m):.3f} <= -1 at "
            f"|lambda| = {lambda_step}; reduce the step to stay in the "
            f"small-coupling regime")
    s0 = S(0.0)
    d_full = (S(lambda_step) - S(-lambda_step)) / (2.0 * lambda_step)
    d_half = (S(lambda_step / 2) - S(-lambda_step / 2)) / lambda_step
    deriv = (4.0 * d_half - d_full) / 3.0
    dp = 2.0 * (S(lambda_step / 2) - s0) / lambda_step - (S(lambda_step) - s0) / lambda_step
    dm = 2.0 * (s0 - S(-lambda_step / 2)) / lambda_step - (s0 - S(-lambda_step)) / lambda_step
    deg = channel.degeneracy
    table = density_from_basis(basis)
    dens = table.weighted_integral(sample_potential(U, table.grid.nodes))
    deriv_phys = deg * deriv
    gap = abs(deriv_phys - dens) / max(abs(dens), 1e-300)
    return DerivativeReport(derivative=deriv_phys, density_integral=dens,
                            relative_gap=gap, left_derivative=deg * dm,
                            right_derivative=deg * dp, lambda_step=lambda_step,
                            bound_states_used=basis.bound_count, channel=channel)


# --------------------------------------------------------------------------
# closed-form channel traces and the energy-shift sum

_BINOMIAL_HALF = (0.5, -0.375, 0.3125, -0.2734375, 0.24609375, -0.2255859375)


def closed_channel_negtrace(gamma: float, kappa: int, n_exact: int = 60) -> float:
    """sum_n (1 - lambda_{n,kappa}) in the radial convention, with the
    n-tail summed through Hurwitz-zeta closed forms of the binomial series
    of (1+u)^{-1/2} (naive truncation would lose every significant digit
    of the shift brackets)."""
    import mpmath as mp

    with mp.workdps(40):
        g = mp.mpf(gamma)
        w = mp.sqrt(kappa * kappa - g * g)
        n0 = 0 if kappa > 0 else 1
        acc = mp.mpf(0)
        for n in range(n0, n_exact + 1):
            acc += 1 - 1 / mp.sqrt(1 + g * g / (n + w) ** 2)
        for k, coef in enumerate(_BINOMIAL_HALF, start=1):
            acc += mp.mpf(coef) * g ** (2 * k) * mp.zeta(2 * k, n_exact + 1 + w)
        return float(acc)


def bohr_channel_sum(kappa: int) -> float:
    """sum_{n >= 1} (n + ell_kappa)^{-2} = Hurwitz zeta(2, ell_kappa + 1)."""
    import mpmath as mp

    ell = abs(kappa) - (1 if kappa > 0 else 0)
    return float(mp.zeta(2, ell + 1))


@dataclass(frozen=True)
class EnergyShiftResult:
    """The coupling-normalized sum of channel brackets (relativistic minus
    quadratic level sums), truncated in kappa with a reported tail."""

    gamma: float
    kappa_partials: dict
    value: float
    tail_estimate: float

    def increments(self) -> ArrayF:
        ks = sorted({abs(k) for k in self.kappa_partials})
        return np.array([self.kappa_partials[k] + self.kappa_partials[-k]
                         for k in ks])


def spectral_shift(coupling: Coupling | float, kappa_max: int = 60,
                   n_max: int = 60) -> EnergyShiftResult:
    """Closed-form evaluation of the shift

        s(gamma) = gamma^{-2} sum_kappa [ 2|k| sum_n (1 - lambda_{n,k})
                                          - |k| gamma^2 sum_n (n+ell_k)^{-2} ].

    Each bracket is an O(gamma^4) difference of two divergence-matched
    sums; both sums use closed-form tails so the cancellation is exact to
    working precision.  Brackets fall off like kappa^{-2}; the truncated
    kappa-tail is estimated from the last computed increments.
    """
    gamma = coupling.gamma if isinstance(coupling, Coupling) else float(coupling)
    partials = {}
    for k in range(1, kappa_max + 1):
        for kappa in (k, -k):
            dirac = closed_channel_negtrace(gamma, kappa, n_exact=n_max)
            bohr = bohr_channel_sum(kappa)
            partials[kappa] = abs(kappa) * (2.0 * dirac - gamma**2 * bohr)
    incs = np.array([partials[k] + partials[-k] for k in range(1, kappa_max + 1)])
    if np.any(np.diff(incs[3:]) > 0):
        raise ConvergenceError("kappa increments stopped decaying; the bracket "
                               "cancellation has lost precision")
    # increments behave like c / kappa^2; estimate the dropped tail
    c_fit = float(np.mean(incs[-3:] * np.arange(kappa_max - 2, kappa_max + 1) ** 2))
    tail = c_fit / kappa_max
    value = float(np.sum(incs) / gamma**2)
    return EnergyShiftResult(gamma=gamma, kappa_partials=partials, value=value,
                             tail_estimate=tail / gamma**2)


# --------------------------------------------------------------------------
# channel-shift decay in the massless comparison picture

@dataclass(frozen=True)
class DecayReport:
    """Per-channel shift of the negative trace under a small perturbation,
    with the fitted power of its decay in |kappa|."""

    gamma: float
    lam: float
    shifts: dict            # signed kappa -> physical trace shift
    fitted_slope: float     # of log(s_{+k} + s_{-k}) against log k
    epsilon: float          # decay margin: slope <= -1 - epsilon


def channel_shift_decay(coupling: Coupling | float, V: RadialFunction,
                        U: RadialFunction, lam: float,
                        kappa_range: Sequence[int],
                        dt: float = 0.02, r_max: Optional[float] = None,
                        bases: Optional[dict] = None) -> DecayReport:
    """Shift of the massless-picture negative channel traces.

    The comparison operators keep the positive-subspace projection of the
    Coulomb channel while the inner operator is the free one minus the
    screened potential: the restriction is of D_gamma + gamma/r - V - lam U - 1.
    V must be Coulomb-dominated: 0 <= V <= gamma/r on the nodes.
    """
    gamma = coupling.gamma if isinstance(coupling, Coupling) else float(coupling)
    if r_max is None:
        r_max = 60.0 / gamma
    n = int(np.ceil(np.log(r_max / 1e-6) / dt))
    grid = build_grid(LOGARITHMIC, 1e-6, r_max, n)
    v = sample_potential(V, grid.nodes)
    if np.any(v < -1e-14) or np.any(v > gamma / grid.nodes * (1 + 1e-12)):
        raise PotentialError("V must satisfy 0 <= V <= gamma/r on all nodes")
    u = sample_potential(U, grid.nodes)
    shifts = {}
    for k_abs in kappa_range:
        for kappa in (k_abs, -k_abs):
            ch = channel_numbers(kappa)
            basis = (bases or {}).get(kappa)
            if basis is None:
                basis = positive_basis(gamma, ch, grid)
            coulomb_gap = gamma / grid.nodes
            s_ref = negative_trace(restrict_shifted_potential(basis, v - coulomb_gap))
            s_pert = negative_trace(
                restrict_shifted_potential(basis, v + lam * u - coulomb_gap))
            shift = ch.degeneracy * (s_pert - s_ref)
            if lam > 0 and shift < -1e-10 * max(abs(s_ref), 1.0):
                raise ConsistencyError(
                    f"negative trace decreased under a nonnegative perturbation "
                    f"(kappa={kappa}, shift={shift:.3e})")
            shifts[kappa] = shift
    ks = np.array(sorted(set(abs(k) for k in kappa_range)), dtype=float)
    totals = np.array([shifts[int(k)] + shifts[-int(k)] for k in ks])
    if np.any(totals <= 0):
        raise ConsistencyError("vanishing channel shift; cannot fit a decay power")
    slope = float(np.polyfit(np.log(ks), np.log(totals), 1)[0])
    return DecayReport(gamma=gamma, lam=lam, shifts=shifts, fitted_slope=slope,
                       epsilon=-1.0 - slope)


# --------------------------------------------------------------------------
# screened one-particle energy probe at desk-scale Z

@dataclass(frozen=True)
class ScreenedEnergyReport:
    """One-particle sum with screened outer channels versus the statistical
    energy plus the quadratic shift term."""

    z: float
    gamma: float
    split_l: int
    total: float
    reference: float
    tf_energy: float
    coulomb_self_energy: float
    shift_value: float
    unscreened: dict
    screened: dict


def screened_energy_probe(coupling: Coupling | float, Z: float, tf,
                          L: int, dt: float = 0.02,
                          r_max: Optional[float] = None,
                          kappa_cap: Optional[int] = None) -> ScreenedEnergyReport:
    """Evaluate -sum_{|k|<L} tr_k(F)_- - sum_{Z/2>=|k|>=L} tr_k F(-chi)_- - D[rho]
    at desk scale and report it beside E_stat(Z) + (1/2 - s(gamma)) Z^2.

    A consistency probe: the value is reported with its grid stability,
    not asserted against the asymptotic theorem.
    """
    from .thomasfermi import coulomb_self_energy, statistical_atom_energy

    gamma = coupling.gamma if isinstance(coupling, Coupling) else float(coupling)
    if L < 1 or L > Z / 2:
        raise ParameterError(f"need 1 <= L <= Z/2, got L={L}, Z={Z}")
    c = Z / gamma
    unscreened = {}
    for k in range(1, L):
        for kappa in (k, -k):
            unscreened[kappa] = (c**2 * 2 * abs(kappa)
                                 * closed_channel_negtrace(gamma, kappa))
    if r_max is None:
        r_max = 60.0 / gamma
    n = int(np.ceil(np.log(r_max / 1e-6) / dt))
    grid = build_grid(LOGARITHMIC, 1e-6, r_max, n)
    chi_scaled = tf.screening_potential_samples(grid.nodes / c) / c**2
    screened = {}
    top = int(Z // 2) if kappa_cap is None else min(int(Z // 2), kappa_cap)
    for k in range(L, top + 1):
        for kappa in (k, -k):
            ch = channel_numbers(kappa)
            basis = positive_basis(gamma, ch, grid)
            op = restrict_shifted_potential(basis, -chi_scaled)
            screened[kappa] = c**2 * 2 * abs(kappa) * negative_trace(op)
    d_self = coulomb_self_energy(tf)
    shift = spectral_shift(gamma, kappa_max=40)
    total = -sum(unscreened.values()) - sum(screened.values()) - d_self
    e_tf = statistical_atom_energy(tf)
    reference = e_tf + (0.5 - shift.value) * Z**2
    return ScreenedEnergyReport(z=Z, gamma=gamma, split_l=L, total=total,
                                reference=reference, tf_energy=e_tf,
                                coulomb_self_energy=d_self,
                                shift_value=shift.value,
                                unscreened=unscreened, screened=screened)
