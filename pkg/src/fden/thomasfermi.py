"""Neutral-atom statistical (Thomas-Fermi) model and its screening objects.

The universal screening function solves phi'' = phi^(3/2)/sqrt(x),
phi(0) = 1, phi(inf) = 0.  The initial slope is found by bisection
shooting; the far tail is obtained by integrating the same equation
inward from x = 1e4, starting on the decaying asymptote
144 x^-3 (1 + beta x^-lam) and shooting on beta to match the outward
solution.  Everything else (density, normalization, energies, screening)
is pinned by two facts verified in the tests: the total electron number
equals Z and the density grows like (Z/r)^{3/2} toward the nucleus.

Units: Hartree atomic units; lengths in Bohr radii.  For nuclear charge Z
the length scale is b_Z = (3 pi / 4)^{2/3} / 2 * Z^{-1/3} and
rho_Z(r) = Z^2 rho_1(Z^{1/3} r) exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import solve_ivp

from .errors import ConfigError, DomainError, SolverError
from .grids import LOGARITHMIC, RadialGrid, build_grid

ArrayF = NDArray[np.float64]

LENGTH_CONST = 0.5 * (3.0 * np.pi / 4.0) ** (2.0 / 3.0)   # b_1 in Bohr radii
TAIL_EXPONENT = 0.5 * (np.sqrt(73.0) - 7.0)               # decaying correction power
KINETIC_CONST = 0.3 * (3.0 * np.pi**2) ** (2.0 / 3.0)


def _rhs(x, y):
    phi = y[0] if y[0] > 0.0 else 0.0
    return (y[1], phi * np.sqrt(phi) / np.sqrt(x))


def _series_start(slope: float, x0: float) -> tuple[float, float]:
    # regular expansion at the origin: phi = 1 + s x + (4/3) x^{3/2} + ...
    return (1.0 + slope * x0 + (4.0 / 3.0) * x0**1.5,
            slope + 2.0 * np.sqrt(x0))


def _shoot_outward(slope: float, x_end: float, rtol: float = 1e-12):
    x0 = 1e-8
    y0 = _series_start(slope, x0)

    def hit_zero(x, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1

    def turning(x, y):
        return y[1]

    turning.terminal = True
    turning.direction = 1

    return solve_ivp(_rhs, (x0, x_end), y0, method="DOP853", rtol=rtol,
                     atol=1e-15, events=(hit_zero, turning), dense_output=True)


def _critical_slope(x_end: float, bracket=(-1.7, -1.5), iterations: int = 60) -> float:
    lo, hi = bracket
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        sol = _shoot_outward(mid, x_end)
        if sol.t_events[0].size:     # crossed zero: slope too negative
            lo = mid
        else:                        # turned upward or survived: too high
            hi = mid
    return 0.5 * (lo + hi)


def _tail_state(beta: float, x: float) -> tuple[float, float]:
    lam = TAIL_EXPONENT
    phi = 144.0 / x**3 * (1.0 + beta * x**-lam)
    dphi = 144.0 * (-3.0 * x**-4 - (3.0 + lam) * beta * x**(-4.0 - lam))
    return phi, dphi


def _integrate_inward(beta: float, x_far: float, x_match: float, rtol: float = 1e-11):
    y0 = _tail_state(beta, x_far)
    return solve_ivp(_rhs, (x_far, x_match), y0, method="DOP853",
                     rtol=rtol, atol=1e-18, dense_output=True)


@dataclass(frozen=True)
class TFSolution:
    """Solved statistical atom: screening function, density, and scale."""

    phi: ArrayF = field(repr=False)
    slope0: float
    Z: float
    density: ArrayF = field(repr=False)
    grid: RadialGrid
    tail_beta: float
    tail_slope_mismatch: float
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    # -- construction ------------------------------------------------------

    @property
    def length_scale(self) -> float:
        return LENGTH_CONST * self.Z ** (-1.0 / 3.0)

    def scaled(self, Z: float) -> "TFSolution":
        """Exact rescaling rho_Z(r) = Z^2 rho_1(Z^{1/3} r) of the tables."""
        if Z <= 0:
            raise ConfigError(f"Z must be positive, got {Z}")
        factor = (Z / self.Z) ** (1.0 / 3.0)
        grid = build_grid(LOGARITHMIC, self.grid.r_min / factor,
                          self.grid.r_max / factor, self.grid.n_points)
        return TFSolution(phi=self.phi.copy(), slope0=self.slope0, Z=float(Z),
                          density=(Z / self.Z) ** 2 * self.density,
                          grid=grid, tail_beta=self.tail_beta,
                          tail_slope_mismatch=self.tail_slope_mismatch)

    # -- basic integrals ----------------------------------------------------

    def _cumulatives(self) -> tuple[ArrayF, ArrayF]:
        """Running integrals (mass inside r, 4 pi int t rho dt inside r)."""
        key = "cum"
        if key not in self._tables:
            r = self.grid.nodes
            w = self.grid.weights
            m0 = np.cumsum(w * 4.0 * np.pi * r**2 * self.density)
            m1 = np.cumsum(w * 4.0 * np.pi * r * self.density)
            self._tables[key] = (m0, m1)
        return self._tables[key]

    def mass(self) -> float:
        return float(self._cumulatives()[0][-1])

    def newton_potential(self, d: ArrayF) -> ArrayF:
        """Potential of the electron cloud: M(d)/d + int_{r>d} 4 pi t rho dt."""
        m0, m1 = self._cumulatives()
        r = self.grid.nodes
        d = np.asarray(d, dtype=float)
        inner = np.interp(d, r, m0, left=0.0)
        outer = m1[-1] - np.interp(d, r, m1, left=0.0)
        return inner / np.where(d > 0, d, np.inf) + outer

    # -- off-center ball objects --------------------------------------------

    def ball_mass(self, d: float, R: float) -> float:
        """Electron number inside the ball of radius R centered at |x| = d."""
        r = self.grid.nodes
        w = self.grid.weights
        if d <= 0:
            m0, _ = self._cumulatives()
            return float(np.interp(R, r, m0, left=0.0, right=m0[-1]))
        t0 = (r**2 + d**2 - R**2) / (2.0 * d * r)
        frac = 0.5 * (1.0 - np.clip(t0, -1.0, 1.0))
        return float(np.sum(w * 4.0 * np.pi * r**2 * self.density * frac))

    def half_radius(self, d: float) -> float:
        """Radius around the point at distance d that encloses half an electron."""
        target = 0.5
        r_hi = self.grid.r_max + d
        if self.ball_mass(d, r_hi) < target:
            raise DomainError(
                f"grid holds {self.ball_mass(d, r_hi):.4f} electrons around "
                f"d={d}; cannot enclose 1/2")
        lo, hi = 0.0, r_hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.ball_mass(d, mid) < target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def near_potential(self, d: float, R: float) -> float:
        """int_{|x-y| <= R} rho(y)/|x-y| dy by the bipolar reduction."""
        r = self.grid.nodes
        w = self.grid.weights
        if d <= 0:
            m0, m1 = self._cumulatives()
            inner = np.interp(R, r, m0, left=0.0, right=m0[-1])
            return float(inner / R + 0.0) if R <= 0 else float(
                np.interp(R, r, m1, left=0.0, right=m1[-1]))
        length = np.maximum(0.0, np.minimum(R, r + d) - np.abs(r - d))
        return float(np.sum(w * 2.0 * np.pi * r * self.density * length) / d)

    def screening_potential(self, d: float) -> float:
        """Cloud potential with the half-electron ball carved out."""
        R = self.half_radius(d)
        d_eval = max(d, self.grid.r_min)
        chi = float(self.newton_potential(np.array([d_eval]))[0]
                    - self.near_potential(d_eval, R))
        return max(chi, 0.0)

    def screening_potential_samples(self, points: ArrayF) -> ArrayF:
        """chi at arbitrary radii through a cached log-spaced table."""
        points = np.asarray(points, dtype=float)
        lo = max(min(points.min(), self.grid.r_min), 1e-300)
        hi = max(points.max(), self.grid.r_min * 10)
        key = ("chi", round(np.log(lo), 3), round(np.log(hi), 3))
        if key not in self._tables:
            d_tab = np.geomspace(lo, hi, 240)
            chi_tab = np.array([self.screening_potential(d) for d in d_tab])
            self._tables[key] = (np.log(d_tab), chi_tab)
        logs, chi_tab = self._tables[key]
        return np.interp(np.log(points), logs, chi_tab)


def solve_tf(x_match: float = 80.0, x_far: float = 1e4, n_grid: int = 4000,
             x_min: float = 1e-6, slope_iterations: int = 60) -> TFSolution:
    """Solve the universal equation for Z = 1 and tabulate on a log grid.

    Shooting determines the critical initial slope; the far tail comes
    from an inward integration started on the decaying asymptote, with its
    amplitude matched to the outward solution at x_match.
    """
    slope0 = _critical_slope(x_match * 1.5, iterations=slope_iterations)
    outward = _shoot_outward(slope0, x_match * 1.02)
    if outward.t_events[0].size or outward.t_events[1].size:
        raise SolverError("outward trajectory left the admissible corridor "
                          f"at the bisected slope {slope0!r}")
    phi_match = float(outward.sol(x_match)[0])

    def mismatch(beta):
        sol = _integrate_inward(beta, x_far, x_match)
        return float(sol.y[0, -1]) - phi_match

    lo, hi = -40.0, -2.0
    if not (mismatch(lo) < 0.0 < mismatch(hi)):
        raise SolverError("tail amplitude bracket [-40, -2] does not straddle "
                          "the matching condition")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mismatch(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)
    inward = _integrate_inward(beta, x_far, x_match)
    slope_gap = abs(float(inward.y[1, -1]) - float(outward.sol(x_match)[1]))

    x_nodes = np.geomspace(x_min, x_far, n_grid)
    phi = np.empty(n_grid)
    inner = x_nodes <= x_match
    phi[inner] = outward.sol(x_nodes[inner])[0]
    phi[~inner] = inward.sol(x_nodes[~inner])[0]
    phi = np.maximum(phi, 0.0)

    r_nodes_scale = LENGTH_CONST  # Z = 1
    grid = build_grid(LOGARITHMIC, x_min * r_nodes_scale, x_far * r_nodes_scale,
                      n_grid)
    r = grid.nodes
    density = (2.0 * phi / r) ** 1.5 / (3.0 * np.pi**2)
    return TFSolution(phi=phi, slope0=slope0, Z=1.0, density=density, grid=grid,
                      tail_beta=beta, tail_slope_mismatch=slope_gap)


# --------------------------------------------------------------------------
# energies

def coulomb_self_energy(tf: TFSolution) -> float:
    """D[rho] = (1/2) iint rho(x) rho(y) / |x-y| dx dy by Newton's theorem."""
    r = tf.grid.nodes
    pot = tf.newton_potential(r)
    return 0.5 * tf.grid.integrate(4.0 * np.pi * r**2 * tf.density * pot)


def coulomb_self_energy_of(density: ArrayF, grid: RadialGrid) -> float:
    """D[rho] for an arbitrary spherically symmetric table."""
    r = grid.nodes
    w = grid.weights
    m0 = np.cumsum(w * 4.0 * np.pi * r**2 * density)
    m1 = np.cumsum(w * 4.0 * np.pi * r * density)
    pot = m0 / r + (m1[-1] - m1)
    return float(0.5 * np.sum(w * 4.0 * np.pi * r**2 * density * pot))


def statistical_atom_energy(tf: TFSolution) -> float:
    """Ground-state energy of the statistical atom: (3/7) phi'(0) Z^{7/3} / b_1."""
    return (3.0 / 7.0) * tf.slope0 / LENGTH_CONST * tf.Z ** (7.0 / 3.0)


def functional_energy(tf: TFSolution) -> float:
    """Kinetic + attraction + repulsion evaluated directly on the tables;
    cross-checks the slope formula."""
    r = tf.grid.nodes
    kin = KINETIC_CONST * tf.grid.integrate(4.0 * np.pi * r**2 * tf.density ** (5.0 / 3.0))
    attr = -tf.Z * tf.grid.integrate(4.0 * np.pi * r * tf.density)
    return kin + attr + coulomb_self_energy(tf)


# --------------------------------------------------------------------------
# correlation-bound probe

@dataclass(frozen=True)
class CorrelationProbeResult:
    draws: int
    violations: int
    min_margin: float


def sample_positions(tf: TFSolution, n_particles: int,
                     rng: np.random.Generator) -> ArrayF:
    """Positions drawn from rho/Z: inverse-CDF radii, isotropic directions."""
    m0, _ = tf._cumulatives()
    cdf = m0 / m0[-1]
    u = rng.random(n_particles)
    radii = np.interp(u, cdf, tf.grid.nodes)
    costh = rng.uniform(-1.0, 1.0, n_particles)
    phi = rng.uniform(0.0, 2.0 * np.pi, n_particles)
    sinth = np.sqrt(1.0 - costh**2)
    return radii[:, None] * np.stack([sinth * np.cos(phi), sinth * np.sin(phi),
                                      costh], axis=1)


def correlation_probe(tf: TFSolution, n_particles: int, n_draws: int,
                      seed: int = 0) -> CorrelationProbeResult:
    """Check sum_{i<j} 1/|x_i - x_j| >= sum_i chi(x_i) - D[rho] on random
    configurations drawn from the atom's own density.

    The inequality is deterministic; any violation indicates a bug in the
    screening potential or the self-energy.
    """
    rng = np.random.default_rng(seed)
    d_self = coulomb_self_energy(tf)
    radii_all = np.empty((n_draws, n_particles))
    pos_all = np.empty((n_draws, n_particles, 3))
    for i in range(n_draws):
        pos = sample_positions(tf, n_particles, rng)
        pos_all[i] = pos
        radii_all[i] = np.linalg.norm(pos, axis=1)
    chi_all = tf.screening_potential_samples(radii_all.ravel()).reshape(
        n_draws, n_particles)
    iu, ju = np.triu_indices(n_particles, k=1)
    diffs = pos_all[:, iu] - pos_all[:, ju]
    inv = 1.0 / np.linalg.norm(diffs, axis=2)
    lhs = inv.sum(axis=1)
    rhs = chi_all.sum(axis=1) - d_self
    margin = lhs - rhs
    return CorrelationProbeResult(draws=n_draws,
                                  violations=int(np.sum(margin < 0.0)),
                                  min_margin=float(margin.min()))


def ball_mass_montecarlo(tf: TFSolution, d: float, R: float, n_samples: int,
                         seed: int = 1) -> tuple[float, float]:
    """Monte-Carlo oracle for the off-center ball mass; returns (mean, stderr)."""
    rng = np.random.default_rng(seed)
    pos = sample_positions(tf, n_samples, rng)
    center = np.array([0.0, 0.0, d])
    inside = np.linalg.norm(pos - center, axis=1) <= R
    p = inside.mean()
    total = tf.mass()
    return total * p, total * np.sqrt(max(p * (1 - p), 1e-12) / n_samples)
