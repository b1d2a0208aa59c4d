"""Matrix representations of the radial channel operators.

A Dirac channel operator acts on two stacked radial coefficient vectors
(upper components first), so its dense form is 2N x 2N with diagonal
potential blocks +-1 - gamma/r - V(r) and first-derivative off-diagonal
blocks that are exactly skew-symmetric by construction.  Energies are in
units of c^2 with rest mass 1.

Central differences on the radial derivative pollute the spectrum in a
specific, well-understood way: every noded bound state hybridizes with a
node-to-node alternating partner, producing a close pair of raw
eigenvalues that straddles the physical one.  The physical eigenvalue is
recovered as the pair midpoint and the physical eigenvector by rotating
the two-dimensional raw eigenspace to minimize an alternation measure.
Nodeless states (kappa > 0, n = 0) come out unpaired and essentially
exact.  All consumers of "physical" states go through the filters below;
raw eigensystems keep the tight residual/orthonormality contract.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.linalg import eigvals_banded, eigvalsh
from scipy.sparse.linalg import splu

from .eigensolve import EigenSystem, OperatorRef, eigensolve
from .errors import (ConfigError, DegenerateBasisError, PotentialError,
                     SolverError)
from .grids import LOGARITHMIC, UNIFORM, Coupling, RadialGrid, build_grid
from .partial_waves import Channel

ArrayF = NDArray[np.float64]
RadialFunction = Callable[[ArrayF], ArrayF]

DIRAC = "dirac"
CHANDRASEKHAR = "chandrasekhar"
MOMENTUM = "momentum"
FURRY = "furry"

# alternation index above which an eigenvector is treated as spurious
Q_SPURIOUS = 0.15


def _gamma_of(coupling: Coupling | float) -> float:
    if isinstance(coupling, Coupling):
        return coupling.gamma
    g = float(coupling)
    if not (0.0 <= g < 1.0):
        raise ConfigError(f"gamma must lie in [0,1), got {g}")
    return g


def sample_potential(V: Optional[RadialFunction], r: ArrayF) -> ArrayF:
    if V is None:
        return np.zeros_like(r)
    vals = np.asarray(V(r), dtype=float)
    if vals.shape != r.shape:
        raise PotentialError(f"potential returned shape {vals.shape} for {r.shape}")
    if not np.all(np.isfinite(vals)):
        bad = r[~np.isfinite(vals)][:3]
        raise PotentialError(f"potential not finite at nodes {bad}")
    return vals


@dataclass(frozen=True)
class ChannelOperator:
    """Dense symmetric matrix of a radial channel operator."""

    matrix: ArrayF = field(repr=False)
    grid: RadialGrid
    channel: Optional[Channel]
    kind: str
    potential_tag: str = "none"

    def __post_init__(self):
        m = self.matrix
        scale = np.abs(m).max() or 1.0
        if np.abs(m - m.T).max() > 1e-12 * scale:
            raise SolverError(f"{self.kind} operator lost symmetry")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def operator_ref(self, gamma: Optional[float] = None) -> OperatorRef:
        return OperatorRef(kind=self.kind, gamma=gamma,
                           kappa=self.channel.kappa if self.channel else None,
                           grid_hash=self.grid.grid_hash(),
                           potential_tag=self.potential_tag)


# --------------------------------------------------------------------------
# assembly

def skew_derivative_matrix(grid: RadialGrid) -> ArrayF:
    """Exactly skew-symmetric discretization of d/dr on the grid."""
    r = grid.nodes
    n = r.size
    S = np.zeros((n, n))
    idx = np.arange(n - 1)
    if grid.kind == UNIFORM:
        s = np.full(n - 1, 1.0 / (2.0 * grid.spacing))
    else:
        s = 1.0 / (2.0 * grid.spacing * np.sqrt(r[:-1] * r[1:]))
    S[idx, idx + 1] = s
    S[idx + 1, idx] = -s
    return S


def build_dirac_channel(coupling: Coupling | float, channel: Channel,
                        grid: RadialGrid, extra_potential: Optional[RadialFunction] = None,
                        potential_tag: Optional[str] = None) -> ChannelOperator:
    """Dense 2N x 2N radial Dirac operator of the channel.

    The diagonal blocks are +-1 - gamma/r - V(r); the off-diagonal blocks
    -d/dr - kappa/r and its transpose use the exactly skew derivative.
    """
    gamma = _gamma_of(coupling)
    r = grid.nodes
    n = r.size
    v = sample_potential(extra_potential, r)
    pot = -gamma / r - v
    S = skew_derivative_matrix(grid)
    B = -S - channel.kappa * np.diag(1.0 / r)
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = np.diag(1.0 + pot)
    M[n:, n:] = np.diag(-1.0 + pot)
    M[:n, n:] = B
    M[n:, :n] = B.T
    tag = potential_tag or ("coulomb" if extra_potential is None else "coulomb+custom")
    return ChannelOperator(matrix=M, grid=grid, channel=channel, kind=DIRAC,
                           potential_tag=tag)


def radial_kinetic_matrix(ell: int, grid: RadialGrid) -> ArrayF:
    """Symmetric positive matrix of -d^2/dr^2 + ell(ell+1)/r^2, Dirichlet.

    Tridiagonal on the uniform grid; on the logarithmic grid a flux-form
    discretization (also tridiagonal) keeps the matrix consistent with
    the L^2(dr) inner product and positive semidefinite.
    """
    if ell < 0:
        raise ConfigError(f"ell must be >= 0, got {ell}")
    r = grid.nodes
    n = r.size
    T = np.zeros((n, n))
    if grid.kind == UNIFORM:
        h = grid.spacing
        np.fill_diagonal(T, 2.0 / h**2)
        idx = np.arange(n - 1)
        T[idx, idx + 1] = -1.0 / h**2
        T[idx + 1, idx] = -1.0 / h**2
    else:
        dt = grid.spacing
        a = 1.0 / dt - 0.25
        b = -(1.0 / dt + 0.25)
        # interior edges between nodes i and i+1
        r_edge = np.sqrt(r[:-1] * r[1:])
        idx = np.arange(n - 1)
        T[idx, idx] += b * b / r_edge
        T[idx + 1, idx + 1] += a * a / r_edge
        T[idx, idx + 1] += a * b / r_edge
        T[idx + 1, idx] += a * b / r_edge
        # boundary half-edges (Dirichlet ghosts just outside the grid)
        T[0, 0] += a * a / (r[0] * np.exp(-0.5 * dt))
        T[-1, -1] += b * b / (r[-1] * np.exp(0.5 * dt))
    T += np.diag(ell * (ell + 1.0) / r**2)
    return T


def symmetric_function(matrix: ArrayF, fn: Callable[[ArrayF], ArrayF],
                       method: str = "auto") -> ArrayF:
    """Apply a scalar function to a symmetric matrix spectrally."""
    es = eigensolve(matrix, method=method)
    return (es.vectors * fn(es.values)) @ es.vectors.T


def build_scalar_channel(kind: str, ell: int, grid: RadialGrid,
                         mass_shift: float = 0.0,
                         method: str = "auto") -> ChannelOperator:
    """Radial momentum p_ell = sqrt(T) or quasi-relativistic kinetic
    C_ell = sqrt(T+1) - 1, plus an optional additive shift.

    Fractional powers go through the full spectral decomposition of T;
    negative roundoff eigenvalues of T are clamped to zero.
    """
    T = radial_kinetic_matrix(ell, grid)
    if kind == MOMENTUM:
        M = symmetric_function(T, lambda w: np.sqrt(np.maximum(w, 0.0)), method)
    elif kind == CHANDRASEKHAR:
        M = symmetric_function(T, lambda w: np.sqrt(np.maximum(w, 0.0) + 1.0) - 1.0,
                               method)
    else:
        raise ConfigError(f"scalar channel kind must be momentum|chandrasekhar, "
                          f"got {kind!r}")
    if mass_shift:
        M = M + mass_shift * np.eye(M.shape[0])
    M = 0.5 * (M + M.T)
    return ChannelOperator(matrix=M, grid=grid, channel=None, kind=kind,
                           potential_tag=f"ell={ell},shift={mass_shift:g}")


# --------------------------------------------------------------------------
# fast banded path (interleaved layout) for bound-state extraction

def _dirac_banded(gamma: float, kappa: int, grid: RadialGrid,
                  V: Optional[RadialFunction] = None) -> ArrayF:
    """Upper-banded storage (bandwidth 3) of the Dirac channel matrix with
    components interleaved as (upper_0, lower_0, upper_1, lower_1, ...)."""
    r = grid.nodes
    n = r.size
    v = sample_potential(V, r)
    pot = -gamma / r - v
    ab = np.zeros((4, 2 * n))
    ab[3, 0::2] = 1.0 + pot
    ab[3, 1::2] = -1.0 + pot
    ab[2, 1::2] = -kappa / r
    if grid.kind == UNIFORM:
        s = np.full(n - 1, 1.0 / (2.0 * grid.spacing))
    else:
        s = 1.0 / (2.0 * grid.spacing * np.sqrt(r[:-1] * r[1:]))
    ab[0, 3::2] = -s    # (2i, 2i+3):   upper_i with lower_{i+1}
    ab[2, 2::2] = s     # (2i+1, 2i+2): lower_i with upper_{i+1}
    return ab


def _banded_to_csc(ab: ArrayF) -> sp.csc_matrix:
    dim = ab.shape[1]
    data, offs = [], []
    for k in range(ab.shape[0]):
        off = ab.shape[0] - 1 - k
        d = ab[k, off:]
        data.append(d)
        offs.append(off)
        if off:
            data.append(d)
            offs.append(-off)
    return sp.diags(data, offs, shape=(dim, dim), format="csc")


def _deinterleave(vec: ArrayF) -> ArrayF:
    """Interleaved (u0, l0, u1, l1, ...) -> block (u..., l...)."""
    return np.concatenate([vec[0::2], vec[1::2]])


def alternation_index(vec_block: ArrayF) -> float:
    """Node-to-node alternation measure of a block-layout channel vector.

    0 for perfectly smooth, 1 for strictly alternating components.
    """
    n = vec_block.size // 2
    up, lo = vec_block[:n], vec_block[n:]
    num = float(np.sum(np.diff(up) ** 2) + np.sum(np.diff(lo) ** 2))
    den = 4.0 * float(up @ up + lo @ lo)
    return num / den if den else 0.0


@dataclass(frozen=True)
class GapValue:
    """A physical eigenvalue estimate in the spectral gap."""

    value: float
    paired: bool
    width: float  # raw-pair splitting (0 for unpaired values)


def pair_midpoints(raw_values: Sequence[float], ratio: float = 0.2,
                   floor: float = 1e-8) -> list[GapValue]:
    """Collapse straddling ghost pairs of raw eigenvalues to midpoints.

    Two adjacent raw values form a pair when their gap is much smaller
    than both neighboring gaps (factor `ratio`) or below the absolute
    floor.  Pairs are assigned greedily starting from the smallest gaps.
    """
    vals = np.sort(np.asarray(raw_values, dtype=float))
    n = vals.size
    if n == 0:
        return []
    gaps = np.diff(vals)
    used = np.zeros(n, dtype=bool)
    is_pair = np.zeros(max(n - 1, 0), dtype=bool)
    for gi in np.argsort(gaps):
        if used[gi] or used[gi + 1]:
            continue
        left = gaps[gi - 1] if gi > 0 else np.inf
        right = gaps[gi + 1] if gi + 1 < n - 1 else np.inf
        if gaps[gi] <= max(floor, ratio * min(left, right)):
            is_pair[gi] = True
            used[gi] = used[gi + 1] = True
    out = []
    i = 0
    while i < n:
        if i < n - 1 and is_pair[i]:
            out.append(GapValue(value=0.5 * (vals[i] + vals[i + 1]), paired=True,
                                width=float(gaps[i])))
            i += 2
        else:
            out.append(GapValue(value=float(vals[i]), paired=False, width=0.0))
            i += 1
    return out


def gap_values(coupling: Coupling | float, channel: Channel, grid: RadialGrid,
               V: Optional[RadialFunction] = None,
               window: tuple[float, float] = (1e-12, 1.0 - 1e-12)) -> ArrayF:
    """Raw discrete eigenvalues inside the gap window (no filtering)."""
    ab = _dirac_banded(_gamma_of(coupling), channel.kappa, grid, V)
    return eigvals_banded(ab, lower=False, select="v", select_range=window)


@dataclass(frozen=True)
class BoundStates:
    """Filtered bound eigenpairs of a Dirac channel.

    vectors are block-layout coefficient columns, orthonormal; residuals
    are dominated by the ghost-pair splitting, which is recorded.
    """

    values: ArrayF
    vectors: ArrayF = field(repr=False)
    pair_widths: ArrayF
    alternation: ArrayF
    residuals: ArrayF
    channel: Channel
    grid: RadialGrid
    gamma: float

    @property
    def count(self) -> int:
        return self.values.size

    def radial_functions(self, index: int) -> tuple[ArrayF, ArrayF]:
        """Physical samples (f_plus, f_minus) of state `index` on the nodes."""
        n = self.grid.n_points
        sw = np.sqrt(self.grid.weights)
        return self.vectors[:n, index] / sw, self.vectors[n:, index] / sw


def bound_states(coupling: Coupling | float, channel: Channel, grid: RadialGrid,
                 n_states: int, V: Optional[RadialFunction] = None,
                 q_max: float = Q_SPURIOUS) -> BoundStates:
    """Extract the lowest physical bound states of the channel.

    Raw eigenvalues come from banded bisection; ghost pairs are collapsed
    and each target's eigenvector is recovered by block inverse iteration
    followed by an alternation-minimizing rotation within the converged
    subspace.
    """
    gamma = _gamma_of(coupling)
    ab = _dirac_banded(gamma, channel.kappa, grid, V)
    raw = eigvals_banded(ab, lower=False, select="v",
                         select_range=(1e-12, 1.0 - 1e-12))
    mids = pair_midpoints(raw)
    A = _banded_to_csc(ab)
    dim = A.shape[0]
    eye = sp.identity(dim, format="csc")
    rng = np.random.default_rng(0x5EED)
    vals, vecs, widths, alts, resid = [], [], [], [], []
    for gv in mids:
        if len(vals) >= n_states:
            break
        m = 2 if gv.paired else 1
        shift = gv.value + max(1e-9, 0.02 * gv.width)
        try:
            lu = splu((A - shift * eye).tocsc())
        except RuntimeError as exc:  # singular shift: nudge once
            lu = splu((A - (shift + 1e-7) * eye).tocsc())
        X = rng.standard_normal((dim, m))
        for _ in range(5):
            X = lu.solve(X)
            X, _ = np.linalg.qr(X)
        Xb = np.stack([_deinterleave(X[:, j]) for j in range(m)], axis=1)
        # rotate within the span to minimize alternation
        nhalf = dim // 2
        q_form = np.zeros((m, m))
        for blk in (Xb[:nhalf], Xb[nhalf:]):
            d = np.diff(blk, axis=0)
            q_form += d.T @ d
        q_form /= 4.0
        w_q, U = np.linalg.eigh(q_form)
        Xb = Xb @ U
        X = X @ U
        j = 0  # smoothest combination
        qj = float(w_q[j] / (Xb[:, j] @ Xb[:, j]))
        if qj > q_max:
            continue
        av = A @ X[:, j]
        lam = float(X[:, j] @ av)
        vals.append(lam)
        vecs.append(Xb[:, j])
        widths.append(gv.width)
        alts.append(qj)
        resid.append(float(np.linalg.norm(av - lam * X[:, j])))
    if not vals:
        raise DegenerateBasisError(
            f"no physical bound states found for gamma={gamma}, "
            f"kappa={channel.kappa} on {grid.kind} grid N={grid.n_points}")
    order = np.argsort(vals)
    return BoundStates(values=np.asarray(vals)[order],
                       vectors=np.column_stack([vecs[i] for i in order]),
                       pair_widths=np.asarray(widths)[order],
                       alternation=np.asarray(alts)[order],
                       residuals=np.asarray(resid)[order],
                       channel=channel, grid=grid, gamma=gamma)


# --------------------------------------------------------------------------
# positive-subspace basis and Furry restrictions

@dataclass(frozen=True)
class PositiveBasis:
    """Ghost-filtered basis of the positive spectral subspace of a channel.

    values are the physical eigenvalue estimates (pair midpoints), vectors
    the block-layout orthonormal columns spanning the retained subspace.
    """

    values: ArrayF
    vectors: ArrayF = field(repr=False)
    alternation: ArrayF
    n_raw_positive: int
    channel: Channel
    grid: RadialGrid
    gamma: float
    potential_tag: str = "coulomb"

    @property
    def count(self) -> int:
        return self.values.size

    @property
    def bound_mask(self) -> NDArray[np.bool_]:
        return self.values < 1.0

    @property
    def bound_count(self) -> int:
        return int(np.sum(self.bound_mask))


def positive_basis(coupling: Coupling | float, channel: Channel, grid: RadialGrid,
                   V: Optional[RadialFunction] = None,
                   q_max: float = Q_SPURIOUS, method: str = "auto",
                   eigensystem: Optional[EigenSystem] = None) -> PositiveBasis:
    """Full positive-subspace basis from a dense decomposition.

    Ghost partners are removed across the entire positive spectrum: raw
    eigenvalues are partitioned into straddling pairs and singles, each
    pair is rotated to its smooth combination, and only vectors with a
    small alternation index are retained.
    """
    gamma = _gamma_of(coupling)
    op = build_dirac_channel(gamma, channel, grid, V)
    if eigensystem is None:
        es = eigensolve(op.matrix, op.operator_ref(gamma), method=method)
    else:
        es = eigensystem
    w, Z = es.values, es.vectors
    pos = np.where(w > 0.0)[0]
    if pos.size == 0:
        raise DegenerateBasisError("positive subspace is empty")
    groups = pair_midpoints(w[pos])
    n = grid.n_points
    vals, vecs, alts = [], [], []
    ptr = 0
    A = op.matrix
    for gv in groups:
        m = 2 if gv.paired else 1
        idx = pos[ptr:ptr + m]
        ptr += m
        X = Z[:, idx]
        if m == 2:
            q_form = np.zeros((2, 2))
            for blk in (X[:n], X[n:]):
                d = np.diff(blk, axis=0)
                q_form += d.T @ d
            q_form /= 4.0
            w_q, U = np.linalg.eigh(q_form)
            X = X @ U
            q0 = float(w_q[0] / (X[:, 0] @ X[:, 0]))
            if q0 <= q_max:
                v = X[:, 0]
                vals.append(float(v @ (A @ v)))
                vecs.append(v)
                alts.append(q0)
        else:
            q0 = alternation_index(X[:, 0])
            if q0 <= q_max:
                vals.append(float(w[idx[0]]))
                vecs.append(X[:, 0])
                alts.append(q0)
    if not vals:
        raise DegenerateBasisError("no smooth positive vectors retained")
    order = np.argsort(vals)
    return PositiveBasis(values=np.asarray(vals)[order],
                         vectors=np.column_stack([vecs[i] for i in order]),
                         alternation=np.asarray(alts)[order],
                         n_raw_positive=pos.size,
                         channel=channel, grid=grid, gamma=gamma,
                         potential_tag=op.potential_tag)


@dataclass(frozen=True)
class FurryOperator:
    """Restriction of a (possibly perturbed) channel operator to the
    retained positive subspace, expressed in that basis."""

    matrix: ArrayF = field(repr=False)
    basis: PositiveBasis
    kind: str
    potential_tag: str

    @property
    def grid(self) -> RadialGrid:
        return self.basis.grid

    @property
    def channel(self) -> Channel:
        return self.basis.channel

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _project_diagonal(basis: PositiveBasis, samples: ArrayF) -> ArrayF:
    """P^T diag([s; s]) P for a radial multiplication operator."""
    stacked = np.concatenate([samples, samples])
    return basis.vectors.T @ (stacked[:, None] * basis.vectors)


def furry_restriction(basis_or_eigs: PositiveBasis | EigenSystem,
                      V_extra: Optional[RadialFunction] = None,
                      lam: float = 0.0, *,
                      coupling: Coupling | float | None = None,
                      channel: Optional[Channel] = None,
                      grid: Optional[RadialGrid] = None) -> FurryOperator:
    """Matrix of Lambda (D_gamma - 1 - lam V) Lambda on the retained basis.

    With lam = 0 the result is diagonal with entries (eigenvalue - 1).
    Accepts either a prepared PositiveBasis or a raw EigenSystem of an
    unperturbed channel build (then coupling/channel/grid are required to
    run the spurious filter).
    """
    if isinstance(basis_or_eigs, EigenSystem):
        if coupling is None or channel is None or grid is None:
            raise ConfigError("raw EigenSystem needs coupling, channel and grid")
        basis = positive_basis(coupling, channel, grid, eigensystem=basis_or_eigs)
    else:
        basis = basis_or_eigs
    mat = np.diag(basis.values - 1.0)
    tag = "furry"
    if V_extra is not None and lam != 0.0:
        v = sample_potential(V_extra, basis.grid.nodes)
        mat = mat - lam * _project_diagonal(basis, v)
        tag = f"furry-lam={lam:g}"
    mat = 0.5 * (mat + mat.T)
    return FurryOperator(matrix=mat, basis=basis, kind=FURRY, potential_tag=tag)


def restrict_shifted_potential(basis: PositiveBasis, phi: ArrayF) -> FurryOperator:
    """Matrix of Lambda (D_gamma - phi - 1) Lambda for sampled phi(r).

    The massless-picture operators are obtained with
    phi = V + lam U - gamma/r, i.e. by handing the difference between the
    wanted potential and the Coulomb term already inside D_gamma.
    """
    mat = np.diag(basis.values - 1.0) - _project_diagonal(basis, np.asarray(phi))
    mat = 0.5 * (mat + mat.T)
    return FurryOperator(matrix=mat, basis=basis, kind=FURRY,
                         potential_tag="furry-shifted")


def eigmin_sym(matrix: ArrayF) -> float:
    return float(eigvalsh(matrix, subset_by_index=(0, 0))[0])


def suggest_grid(gamma: float, kappa: int, n_states: int = 8,
                 r_min: float = 1e-6, dt: float = 0.012,
                 r_max_floor: float = 0.0) -> RadialGrid:
    """Logarithmic grid sized to hold the lowest n_states bound states.

    The box reaches past the outer turning point of the highest wanted
    state plus a tail margin of thirty decay lengths.
    """
    nprime = n_states + abs(kappa)
    r_max = max(40.0 / gamma, (2.0 * nprime**2 + 30.0 * nprime) / gamma, r_max_floor)
    n = int(np.ceil(np.log(r_max / r_min) / dt))
    return build_grid(LOGARITHMIC, r_min, r_max, n)
