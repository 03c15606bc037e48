"""Presymplectic regime: kernels, constraint chains and the reduced planar flow.

When det Psi = 0 the two-form matrix Omega is singular and the dynamics
equation Omega X = -grad H(z) is only solvable on nested constraint
subspaces.  For quadratic H the whole chain is linear algebra: each
stage adds the rows along which the combined system

    [Omega] X = [-(Hess z + g)]      (solvability)
    [  A  ]     [      0       ]     (tangency to the current stage)

fails to be solvable, and stops when no new independent row appears.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InconsistentSystem, NoKernel, OffConstraint
from .dynamics import HARMONIC, OscillatorModel
from .structure import FieldConfig, build_omega

RANK_TOL_FACTOR = 1e-10


def kernel(omega: np.ndarray, tol_factor: float = RANK_TOL_FACTOR) -> np.ndarray:
    """Orthonormal basis of the null space of Omega (2N x k, possibly k = 0).

    Rank decisions use a singular-value cutoff relative to the largest
    singular value.
    """
    omega = np.asarray(omega, dtype=float)
    _, s, vt = np.linalg.svd(omega)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(omega.shape[0])
    mask = s <= tol_factor * s[0]
    return vt[mask].T


@dataclass(frozen=True)
class LinearConstraints:
    """Affine constraint rows: z admissible iff matrix @ z + offset = 0."""

    matrix: np.ndarray
    offset: np.ndarray

    def residual(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(np.abs(self.matrix @ z + self.offset).max())


def secondary_constraints(cfg: FieldConfig, model: OscillatorModel) -> LinearConstraints:
    """Solvability rows <grad H(z) | Z> = 0 for each kernel direction Z."""
    z_basis = kernel(build_omega(cfg))
    if z_basis.shape[1] == 0:
        raise NoKernel("Omega is nondegenerate; no secondary constraints arise")
    hess = model.hessian(cfg.N)
    g0 = model.gradient_offset(cfg.N)
    return LinearConstraints(z_basis.T @ hess, z_basis.T @ g0)


@dataclass
class ConstraintChain:
    """Nested subspaces M_1 >= M_2 >= ... with the terminal tangent flow.

    subspaces[k] is an orthonormal basis (columns) of the direction space
    of stage k; points[k] a particular point on the stage.  The terminal
    flow is dz/dt = reduced_flow @ z + flow_offset, valid on the terminal
    stage, with any residual gauge freedom spanned by gauge_basis.
    """

    subspaces: list = field(default_factory=list)
    points: list = field(default_factory=list)
    constraints: LinearConstraints | None = None
    reduced_flow: np.ndarray | None = None
    flow_offset: np.ndarray | None = None
    gauge_basis: np.ndarray | None = None
    status: str = "consistent"

    @property
    def dimensions(self) -> list:
        return [b.shape[1] for b in self.subspaces]

    @property
    def terminal_index(self) -> int:
        return len(self.subspaces) - 1

    def terminal_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the flow restricted to the terminal direction space."""
        v = self.subspaces[-1]
        if v.shape[1] == 0:
            return np.array([], dtype=complex)
        restricted = v.T @ self.reduced_flow @ v
        ev = np.linalg.eigvals(restricted)
        return ev[np.lexsort((ev.real, ev.imag))]


def _row_space(rows: np.ndarray, tol_factor: float) -> np.ndarray:
    """Orthonormal spanning rows (empty-safe)."""
    if rows.shape[0] == 0:
        return rows
    _, s, vt = np.linalg.svd(rows, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return rows[:0]
    return vt[s > tol_factor * s[0]]


def gnh_chain(omega: np.ndarray, h_hessian: np.ndarray, h_gradient,
              tol_factor: float = RANK_TOL_FACTOR) -> ConstraintChain:
    """Iterated constraint construction for quadratic Hamiltonian data.

    Inputs are the (possibly singular) two-form matrix, the constant
    Hessian of H and its gradient at the origin.  Raises
    InconsistentSystem (with the partial chain attached) when the
    solvability rows are nowhere satisfiable.
    """
    omega = np.asarray(omega, dtype=float)
    h_hessian = np.asarray(h_hessian, dtype=float)
    g = np.asarray(h_gradient, dtype=float)
    n = omega.shape[0]

    chain = ConstraintChain()
    aug = np.zeros((0, n + 1))  # rows [A | b] of the affine constraints A z + b = 0
    chain.subspaces.append(np.eye(n))
    chain.points.append(np.zeros(n))

    while True:
        a_rows = aug[:, :n]
        stacked = np.vstack([omega, a_rows])
        # Left null vectors of the stacked system generate the conditions
        # under which [Omega; A] X = [-(Hess z + g); 0] is solvable.
        u, s, _ = np.linalg.svd(stacked)
        rank = int(np.sum(s > tol_factor * s[0])) if s.size and s[0] > 0 else 0
        left_null = u[:, rank:].T
        y_omega = left_null[:, :omega.shape[0]]
        new_rows = np.hstack([y_omega @ h_hessian, (y_omega @ g)[:, None]])

        merged = _row_space(np.vstack([aug, new_rows]), tol_factor)
        if merged.shape[0] == aug.shape[0]:
            break

        a_new, b_new = merged[:, :n], merged[:, n]
        rank_a = _row_space(a_new, tol_factor).shape[0]
        if rank_a < merged.shape[0]:
            chain.status = "inconsistent"
            chain.constraints = LinearConstraints(a_new, b_new)
            raise InconsistentSystem(
                "solvability conditions are nowhere satisfied", chain=chain
            )
        aug = merged
        point, *_ = np.linalg.lstsq(a_new, -b_new, rcond=None)
        basis = _row_space(a_new, tol_factor)
        null_basis = _null_of_rows(basis, n)
        chain.subspaces.append(null_basis)
        chain.points.append(point)

    a_rows, b = aug[:, :n], aug[:, n]
    chain.constraints = LinearConstraints(a_rows, b)
    stacked = np.vstack([omega, a_rows])
    pinv = np.linalg.pinv(stacked, rcond=tol_factor)
    proj = pinv[:, :n]
    chain.reduced_flow = -proj @ h_hessian
    chain.flow_offset = -proj @ g
    chain.gauge_basis = _null_of_rows(_row_space(stacked, tol_factor), n)
    if chain.subspaces[-1].shape[1] == 0:
        chain.status = "empty"
    return chain


def _null_of_rows(orth_rows: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis of {z : R z = 0} given orthonormal rows R."""
    if orth_rows.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(orth_rows, full_matrices=True)
    rank = int(np.sum(s > RANK_TOL_FACTOR * s[0]))
    return vt[rank:].T


def gnh_from_model(cfg: FieldConfig, model: OscillatorModel) -> ConstraintChain:
    """Chain for the standard kinetic-plus-potential data of a field config."""
    return gnh_chain(build_omega(cfg), model.hessian(cfg.N),
                     model.gradient_offset(cfg.N))


def degenerate_omega_r(model: OscillatorModel, C: float) -> float:
    """Reduced rotation frequency on the secondary constraint subspace."""
    if model.potential != HARMONIC or model.kappa <= 0:
        raise ValueError("the reduced frequency requires a harmonic potential")
    mk = model.m * model.kappa
    return float(-np.sqrt(mk) * C * model.omega0 / (1.0 + mk * C * C))


def degenerate_flow_n2(model: OscillatorModel, C: float, z0, t,
                       tol: float = 1e-8) -> np.ndarray:
    """Rotating solution on the constraint subspace of the chi = 0 plane.

    Requires B = -1/C and an initial state satisfying the secondary
    constraints p/m + i C kappa q = 0 to within tol.
    """
    z0 = np.asarray(z0, dtype=float)
    q0 = complex(z0[0], z0[1])
    p0 = complex(z0[2], z0[3])
    res = abs(p0 / model.m + 1j * C * model.kappa * q0)
    scale = max(1.0, abs(q0), abs(p0))
    if res > tol * scale:
        raise OffConstraint(
            f"initial state violates the secondary constraints (residual {res:.3e})"
        )
    omega_r = degenerate_omega_r(model, C)
    phase = np.exp(1j * omega_r * np.asarray(t, dtype=float))
    q = phase * q0
    p = phase * p0
    return np.stack([q.real, q.imag, p.real, p.imag], axis=-1)


@dataclass(frozen=True)
class ReducedOscillatorN2:
    """Reduced structure on the secondary constraint subspace.

    bracket_qqdag is the fundamental bracket {q, q*}; the reduced
    Hamiltonian is H_r = h_r_coeff * q* q, generating dq/dt = i omega_r q.
    a_scale normalizes a = a_scale * q* so that {a, a*} = -i.
    """

    C: float
    B: float
    omega_r: float
    bracket_qqdag: complex
    h_r_coeff: float
    a_scale: float

    @property
    def rotation_rate(self) -> complex:
        return 1j * self.omega_r


def reduced_structure_n2(model: OscillatorModel, C: float) -> ReducedOscillatorN2:
    """Reduced bracket, Hamiltonian and ladder normalization at chi = 0 (B = -1/C)."""
    if C == 0.0:
        raise ValueError("C must be nonzero in the degenerate regime")
    B = -1.0 / C
    mk = model.m * model.kappa
    denom = 1.0 + mk * C * C
    return ReducedOscillatorN2(
        C=float(C),
        B=float(B),
        omega_r=degenerate_omega_r(model, C),
        bracket_qqdag=complex(0.0, -2.0 * C / denom**2),
        h_r_coeff=float(denom * model.kappa / 2.0),
        a_scale=float(denom / np.sqrt(2.0 * abs(C))),
    )
