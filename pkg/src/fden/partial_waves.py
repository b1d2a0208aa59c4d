"""Spin-orbit channels, spherical spinors, and the channel projector.

Conventions
-----------
* kappa is a nonzero integer; j = |kappa| - 1/2 and the orbital quantum
  number is ell = |kappa| - theta(kappa) with theta the Heaviside step
  (theta(kappa) = 1 for kappa > 0).  In particular kappa = +1 carries
  ell = 0.  This differs from the sign convention of several textbooks;
  it is enforced by the tests and used consistently everywhere.
* Spherical harmonics carry the Condon-Shortley phase.  Only
  phase-invariant quantities (norms, densities, summed projectors) are
  contractual; individual phases are an implementation choice.
* Half-integer quantum numbers are passed doubled (m_twice, j_twice) so
  everything stays in exact integer arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import ChannelError, ConfigError, QuantumNumberError

ArrayF = NDArray[np.float64]
ArrayC = NDArray[np.complex128]


def theta_step(kappa: int) -> int:
    """Heaviside step on the integers: 1 for positive argument, else 0."""
    return 1 if kappa > 0 else 0


@dataclass(frozen=True)
class Channel:
    """A spin-orbit channel: kappa with its derived quantum numbers."""

    kappa: int
    ell: int
    j_twice: int
    degeneracy: int

    def __post_init__(self):
        k = self.kappa
        if k == 0:
            raise ChannelError("kappa = 0 does not label a channel")
        if self.j_twice != 2 * abs(k) - 1:
            raise ChannelError(f"j_twice must be 2|kappa|-1, got {self.j_twice}")
        if self.ell != abs(k) - theta_step(k):
            raise ChannelError(f"ell must be |kappa|-theta(kappa), got {self.ell}")
        if self.degeneracy != 2 * abs(k):
            raise ChannelError(f"degeneracy must be 2|kappa|, got {self.degeneracy}")

    @property
    def sign(self) -> int:
        return 1 if self.kappa > 0 else -1

    @property
    def ell_lower(self) -> int:
        """Orbital quantum number of the lower two spinor components."""
        return self.ell + self.sign

    @property
    def n_start(self) -> int:
        """First radial quantum number of the bound series in this channel."""
        return theta_step(-self.kappa)


def channel_numbers(kappa: int) -> Channel:
    """Build the Channel record for a given nonzero integer kappa."""
    if kappa == 0:
        raise ChannelError("kappa = 0 does not label a channel")
    return Channel(kappa=kappa,
                   ell=abs(kappa) - theta_step(kappa),
                   j_twice=2 * abs(kappa) - 1,
                   degeneracy=2 * abs(kappa))


# --------------------------------------------------------------------------
# spherical harmonics (fully normalized, Condon-Shortley phase)

def _legendre_normalized(ell_max: int, x: ArrayF) -> ArrayF:
    """Normalized associated Legendre table N_l^m P_l^m(x) for 0 <= m <= l.

    Returns an array P[l, m, ...] such that Y_{l,m} = P[l, m] * exp(i m phi)
    for m >= 0.  Stable forward recurrence in l at fixed m.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    P = np.zeros((ell_max + 1, ell_max + 1) + x.shape)
    P[0, 0] = np.full(x.shape, np.sqrt(0.25 / np.pi))
    for m in range(ell_max):
        # diagonal step m,m -> m+1,m+1 (carries the Condon-Shortley sign)
        P[m + 1, m + 1] = -np.sqrt((2 * m + 3) / (2.0 * m + 2.0)) * s * P[m, m]
    for m in range(ell_max + 1):
        if m + 1 <= ell_max:
            P[m + 1, m] = np.sqrt(2 * m + 3.0) * x * P[m, m]
        for ell in range(m + 2, ell_max + 1):
            a = np.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m * m))
            b = np.sqrt(((ell - 1.0) ** 2 - m * m) / (4.0 * (ell - 1.0) ** 2 - 1.0))
            P[ell, m] = a * (x * P[ell - 1, m] - b * P[ell - 2, m])
    return P


def spherical_harmonic(ell: int, m: int, theta, phi) -> ArrayC:
    """Y_{ell,m}(theta, phi), normalized to 1 on the sphere.

    Returns zero for |m| > ell (the convention used by every consumer
    in this package).
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if ell < 0 or abs(m) > ell:
        return np.zeros(np.broadcast(theta, phi).shape, dtype=complex)
    P = _legendre_normalized(ell, np.cos(theta))
    if m >= 0:
        return P[ell, m] * np.exp(1j * m * phi)
    return (-1.0) ** (-m) * P[ell, -m] * np.exp(1j * m * phi)


def spherical_spinor(ell: int, m_twice: int, s_sign: int, theta, phi) -> ArrayC:
    """Two-component spin spherical harmonic Omega_{ell, m, s}.

    s_sign = +1 or -1 selects s = +1/2 or -1/2; m = m_twice/2 must be a
    half integer with |m| <= ell + 1/2.
    """
    if ell < 0:
        raise QuantumNumberError(f"ell must be >= 0, got {ell}")
    if s_sign not in (1, -1):
        raise QuantumNumberError(f"s_sign must be +-1, got {s_sign}")
    if m_twice % 2 == 0:
        raise QuantumNumberError(f"m_twice must be odd, got {m_twice}")
    if abs(m_twice) > 2 * ell + 1:
        raise QuantumNumberError(
            f"|m| = {abs(m_twice)}/2 exceeds ell + 1/2 = {ell} + 1/2")
    two_ell_p1 = 2 * ell + 1
    c_up = two_ell_p1 + s_sign * m_twice   # 2(2l+1) * (l + 1/2 + 2 s m)/(2l+1)
    c_dn = two_ell_p1 - s_sign * m_twice
    up = s_sign * np.sqrt(max(c_up, 0) / (2.0 * two_ell_p1)) \
        * spherical_harmonic(ell, (m_twice - 1) // 2, theta, phi)
    dn = np.sqrt(max(c_dn, 0) / (2.0 * two_ell_p1)) \
        * spherical_harmonic(ell, (m_twice + 1) // 2, theta, phi)
    return np.stack([up, dn])


def dirac_spinor(channel: Channel, m_twice: int, sigma: int, theta, phi) -> ArrayC:
    """Four-component angular spinor Phi^sigma_{kappa, m}.

    sigma = +1 puts the spin spherical harmonic (times i sgn kappa) in the
    upper two components; sigma = -1 puts -sgn(kappa) times the partner
    harmonic with flipped spin and orbital number ell + sgn(kappa) in the
    lower two.
    """
    if abs(m_twice) > channel.j_twice or m_twice % 2 == 0:
        raise QuantumNumberError(
            f"m_twice = {m_twice} invalid for j_twice = {channel.j_twice}")
    if sigma not in (1, -1):
        raise QuantumNumberError(f"sigma must be +-1, got {sigma}")
    sgn = channel.sign
    if sigma == 1:
        omega = spherical_spinor(channel.ell, m_twice, sgn, theta, phi)
        top = 1j * sgn * omega
        bottom = np.zeros_like(omega)
    else:
        omega = spherical_spinor(channel.ell_lower, m_twice, -sgn, theta, phi)
        top = np.zeros_like(omega)
        bottom = -sgn * omega
    return np.concatenate([top, bottom])


@dataclass(frozen=True)
class SpinorSample:
    """A four-spinor value at a point of the unit sphere."""

    components: ArrayC
    omega: ArrayF  # unit vector in R^3

    def __post_init__(self):
        v = np.asarray(self.omega, dtype=float)
        if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ConfigError("omega must be a unit vector in R^3 (within 1e-12)")

    @classmethod
    def at_angles(cls, channel: Channel, m_twice: int, sigma: int,
                  theta: float, phi: float) -> "SpinorSample":
        vec = np.array([np.sin(theta) * np.cos(phi),
                        np.sin(theta) * np.sin(phi),
                        np.cos(theta)])
        comps = dirac_spinor(channel, m_twice, sigma, theta, phi)
        return cls(components=np.asarray(comps, dtype=complex), omega=vec)


# --------------------------------------------------------------------------
# quadrature on the sphere and the channel projector

@dataclass(frozen=True)
class SphereQuadrature:
    """Product rule: Gauss-Legendre in cos(theta) x trapezoid in phi."""

    theta: ArrayF
    phi: ArrayF
    weights: ArrayF

    @classmethod
    def build(cls, n_theta: int = 40, n_phi: int = 80) -> "SphereQuadrature":
        x, wx = np.polynomial.legendre.leggauss(n_theta)
        th = np.arccos(x)
        ph = 2.0 * np.pi * np.arange(n_phi) / n_phi
        wph = 2.0 * np.pi / n_phi
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        W = np.outer(wx, np.full(n_phi, wph))
        return cls(theta=TH.ravel(), phi=PH.ravel(), weights=W.ravel())

    @property
    def n_points(self) -> int:
        return self.theta.size

    def integrate(self, values) -> complex:
        return complex(np.dot(self.weights, values))


def _spinor_table(channel: Channel, quad: SphereQuadrature) -> ArrayC:
    """All Phi^sigma_{kappa,m} on the quadrature nodes.

    Shape (2, 2|kappa|, 4, n_points): sigma index (+, -), then m ascending.
    """
    j2 = channel.j_twice
    out = np.zeros((2, channel.degeneracy, 4, quad.n_points), dtype=complex)
    for im, m2 in enumerate(range(-j2, j2 + 1, 2)):
        out[0, im] = dirac_spinor(channel, m2, +1, quad.theta, quad.phi)
        out[1, im] = dirac_spinor(channel, m2, -1, quad.theta, quad.phi)
    return out


def channel_coefficients(g: ArrayC, channel: Channel, quad: SphereQuadrature) -> ArrayC:
    """Angular inner products <Phi^sigma_{kappa,m}, g(r, .)> per radius.

    g has shape (n_r, n_points, 4).  Returns shape (2, 2|kappa|, n_r).
    """
    g = np.asarray(g, dtype=complex)
    if g.ndim != 3 or g.shape[1] != quad.n_points or g.shape[2] != 4:
        raise ConfigError(
            f"field shape {g.shape} does not match quadrature "
            f"({quad.n_points} angular points, 4 spinor components)")
    table = _spinor_table(channel, quad)
    # sum over angular nodes (weighted) and spinor components
    return np.einsum("smtp,p,rpt->smr", table.conj(), quad.weights, g)


def project_channel(g: ArrayC, radii: ArrayF, channel: Channel,
                    m_twice: int, quad: SphereQuadrature) -> tuple[ArrayF, ArrayF]:
    """Reduced radial functions (f_plus, f_minus) of a sampled 4-spinor field.

    The field g(r, omega, tau) is resolved against the channel spinors at
    fixed m; the reduced functions carry the conventional factor r, i.e.
    a pure channel field g = (f+(r)/r) Phi^+ + (f-(r)/r) Phi^- is returned
    exactly as (f+, f-) up to quadrature tolerance.
    """
    j2 = channel.j_twice
    if abs(m_twice) > j2 or m_twice % 2 == 0:
        raise QuantumNumberError(f"m_twice = {m_twice} invalid for channel")
    coeffs = channel_coefficients(g, channel, quad)
    im = (m_twice + j2) // 2
    r = np.asarray(radii, dtype=float)
    if r.size != coeffs.shape[2]:
        raise ConfigError("radius array does not match the field's radial axis")
    return r * coeffs[0, im], r * coeffs[1, im]


def apply_channel_projector(g: ArrayC, channel: Channel,
                            quad: SphereQuadrature) -> ArrayC:
    """The projected field Pi_kappa g sampled on the same grid as g."""
    coeffs = channel_coefficients(g, channel, quad)
    table = _spinor_table(channel, quad)
    return np.einsum("smr,smtp->rpt", coeffs, table)


def unsold_sum(channel: Channel, sigma: int, theta, phi) -> ArrayF:
    """Sum over m of |Phi^sigma_{kappa,m}(omega)|^2 (spinor norm squared).

    Independent of omega and equal to 2|kappa|/(4 pi) for each sigma
    separately; this identity is what collapses the m-sum of the channel
    density to a purely radial expression.
    """
    j2 = channel.j_twice
    total = None
    for m2 in range(-j2, j2 + 1, 2):
        phi_vec = dirac_spinor(channel, m2, sigma, theta, phi)
        contrib = np.sum(np.abs(phi_vec) ** 2, axis=0)
        total = contrib if total is None else total + contrib
    return total
