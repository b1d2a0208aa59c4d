"""Radial grids and the physical coupling parameters.

All radial operators act on L^2(R_+, dr) through coefficient vectors
u_i = sqrt(w_i) f(r_i), where w_i is the quadrature weight of node r_i.
With that convention every assembled matrix is plainly symmetric and
eigenvectors are orthonormal in the ordinary dot product.

Lengths are dimensionless: the velocity of light has been scaled out, so
distances are measured in units of 1/c Bohr radii and channel energies in
units of c^2 (rest mass 1).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError

ArrayF = NDArray[np.float64]

UNIFORM = "uniform"
LOGARITHMIC = "logarithmic"


@dataclass(frozen=True)
class RadialGrid:
    """Discretization of (0, r_max] with quadrature weights for int f dr."""

    kind: str
    r_min: float
    r_max: float
    n_points: int
    nodes: ArrayF = field(repr=False)
    weights: ArrayF = field(repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size != self.n_points:
            raise ConfigError("node array inconsistent with n_points")
        if not np.all(np.diff(nodes) > 0) or nodes[0] <= 0:
            raise ConfigError("grid nodes must be strictly increasing and positive")
        if not np.all(np.asarray(self.weights) > 0):
            raise ConfigError("grid weights must be positive")

    @property
    def spacing(self) -> float:
        """Uniform spacing: h in r for 'uniform', dt in log r for 'logarithmic'."""
        if self.kind == UNIFORM:
            return float(self.nodes[1] - self.nodes[0])
        return float(np.log(self.nodes[1]) - np.log(self.nodes[0]))

    def integrate(self, values: ArrayF) -> float:
        """Quadrature of int_0^{r_max} f(r) dr from samples on the nodes."""
        return float(np.dot(self.weights, values))

    def grid_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.kind.encode())
        h.update(np.asarray([self.r_min, self.r_max, self.n_points]).tobytes())
        h.update(self.nodes.tobytes())
        return h.hexdigest()[:16]

    def to_coefficients(self, samples: ArrayF) -> ArrayF:
        """Physical samples f(r_i) -> coefficient vector sqrt(w_i) f(r_i)."""
        return np.sqrt(self.weights) * samples

    def to_samples(self, coefficients: ArrayF) -> ArrayF:
        """Coefficient vector -> physical samples f(r_i)."""
        return coefficients / np.sqrt(self.weights)


def build_grid(kind: str, r_min: float, r_max: float, n_points: int) -> RadialGrid:
    """Construct a radial grid.

    uniform:      nodes i*h + r_min, i = 1..N, h = (r_max - r_min)/N,
                  all weights h (Dirichlet ghosts at r_min and r_max + h).
    logarithmic:  nodes exp(t_i) with t_i uniform on [log r_min, log r_max],
                  weights r_i * dt.
    """
    if n_points < 16:
        raise ConfigError(f"n_points must be >= 16, got {n_points}")
    if kind == UNIFORM:
        if r_min < 0 or r_max <= r_min:
            raise ConfigError(f"need 0 <= r_min < r_max, got [{r_min}, {r_max}]")
        h = (r_max - r_min) / n_points
        nodes = r_min + h * np.arange(1, n_points + 1)
        weights = np.full(n_points, h)
    elif kind == LOGARITHMIC:
        if r_min <= 0 or r_max <= r_min:
            raise ConfigError(f"need 0 < r_min < r_max, got [{r_min}, {r_max}]")
        t = np.linspace(np.log(r_min), np.log(r_max), n_points)
        nodes = np.exp(t)
        weights = nodes * (t[1] - t[0])
    else:
        raise ConfigError(f"unknown grid kind {kind!r}")
    return RadialGrid(kind=kind, r_min=float(r_min), r_max=float(r_max),
                      n_points=int(n_points), nodes=nodes, weights=weights)


@dataclass(frozen=True)
class Coupling:
    """Nuclear coupling gamma = Z/c with the derived singularity exponent.

    sigma_gamma = 1 - sqrt(1 - gamma^2) controls the small-r power of the
    ground-state density.  Either give gamma directly or any two of
    (gamma, z, c); the third is derived.
    """

    gamma: float
    z: float | None = None
    c: float | None = None

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ConfigError(f"gamma must lie in (0,1), got {self.gamma}")
        if self.z is not None and self.c is not None:
            if abs(self.gamma - self.z / self.c) > 1e-12 * self.gamma:
                raise ConfigError(
                    f"inconsistent coupling: gamma={self.gamma}, z/c={self.z / self.c}")

    @classmethod
    def from_parameters(cls, gamma: float | None = None, z: float | None = None,
                        c: float | None = None) -> "Coupling":
        given = sum(x is not None for x in (gamma, z, c))
        if gamma is not None and given == 1:
            return cls(gamma=float(gamma))
        if given != 2:
            raise ConfigError("specify gamma alone or exactly two of (gamma, z, c)")
        if gamma is None:
            return cls(gamma=float(z) / float(c), z=float(z), c=float(c))
        if z is None:
            return cls(gamma=float(gamma), z=float(gamma) * float(c), c=float(c))
        return cls(gamma=float(gamma), z=float(z), c=float(z) / float(gamma))

    @property
    def sigma_gamma(self) -> float:
        return 1.0 - np.sqrt(1.0 - self.gamma**2)
