"""Phase-space structure matrices for constant magnetic and dual-magnetic fields.

Coordinates are ordered (q^1..q^N, p_1..p_N) throughout.  The modified
two-form is represented by the 2N x 2N block matrix

    Omega = [[-eF,  I],
             [ -I, rG]],

and the Poisson matrix is Lambda = -Omega^{-1}, assembled from closed-form
blocks built out of Psi = I - rG.eF and Phi = I - eF.rG.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularOmega

TOL_SINGULAR = 1e-10

# 2D orientation: eps_{12} = +1.
EPS2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def cross_matrix(v) -> np.ndarray:
    """Matrix [v]_x such that [v]_x w = v x w."""
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def canonical_j(N: int) -> np.ndarray:
    """Canonical symplectic matrix J = [[0, I], [-I, 0]]."""
    j = np.zeros((2 * N, 2 * N))
    j[:N, N:] = np.eye(N)
    j[N:, :N] = -np.eye(N)
    return j


@dataclass(frozen=True)
class FieldConfig:
    """Dimension N plus the constant coupled field matrices.

    eF lives on q-space (charge times magnetic field), rG on p-space
    (dual charge times dual field).  Both must be antisymmetric N x N.
    """

    N: int
    eF: np.ndarray
    rG: np.ndarray

    def __post_init__(self):
        if int(self.N) < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("eF", "rG"):
            m = np.array(getattr(self, name), dtype=float)
            if m.shape != (self.N, self.N):
                raise ValueError(f"{name} must be {self.N}x{self.N}, got {m.shape}")
            scale = max(1.0, np.abs(m).max())
            if np.abs(m + m.T).max() > 1e-14 * scale:
                raise ValueError(f"{name} is not antisymmetric")
            m.setflags(write=False)
            object.__setattr__(self, name, m)


def field_config_n2(B: float, C: float) -> FieldConfig:
    """Planar fields: pseudoscalars B, C embedded via eps_{12} = +1."""
    return FieldConfig(2, B * EPS2, C * EPS2)


def field_config_n3(Bvec, Cvec) -> FieldConfig:
    """Spatial fields: pseudovectors embedded via the Levi-Civita symbol."""
    return FieldConfig(3, -cross_matrix(Bvec), -cross_matrix(Cvec))


def n2_scalars(cfg: FieldConfig):
    """Recover (B, C) when both blocks are pseudoscalar multiples of eps; else None."""
    if cfg.N != 2:
        return None
    B, C = cfg.eF[0, 1], cfg.rG[0, 1]
    if np.abs(cfg.eF - B * EPS2).max() > 1e-12 * max(1.0, abs(B)):
        return None
    if np.abs(cfg.rG - C * EPS2).max() > 1e-12 * max(1.0, abs(C)):
        return None
    return B, C


def n3_vectors(cfg: FieldConfig):
    """Recover (Bvec, Cvec) for an N=3 config; else None."""
    if cfg.N != 3:
        return None
    bvec = np.array([cfg.eF[1, 2], cfg.eF[2, 0], cfg.eF[0, 1]])
    cvec = np.array([cfg.rG[1, 2], cfg.rG[2, 0], cfg.rG[0, 1]])
    return bvec, cvec


def build_omega(cfg: FieldConfig) -> np.ndarray:
    """Assemble the modified two-form matrix [[-eF, I], [-I, rG]]."""
    N = cfg.N
    omega = np.zeros((2 * N, 2 * N))
    omega[:N, :N] = -cfg.eF
    omega[:N, N:] = np.eye(N)
    omega[N:, :N] = -np.eye(N)
    omega[N:, N:] = cfg.rG
    return omega


@dataclass(frozen=True)
class PsiPhiPair:
    """Factorization matrices Psi = I - rG.eF and Phi = I - eF.rG (Phi = Psi^T)."""

    Psi: np.ndarray
    Phi: np.ndarray
    det_psi: float


def psi_phi(cfg: FieldConfig) -> PsiPhiPair:
    psi = np.eye(cfg.N) - cfg.rG @ cfg.eF
    phi = np.eye(cfg.N) - cfg.eF @ cfg.rG
    return PsiPhiPair(psi, phi, float(np.linalg.det(psi)))


def regularity(cfg: FieldConfig) -> float:
    """det Psi; the structure is symplectic iff this is nonzero."""
    return psi_phi(cfg).det_psi


def _require_regular(cfg: FieldConfig, tol_singular: float) -> PsiPhiPair:
    pair = psi_phi(cfg)
    if abs(pair.det_psi) < tol_singular:
        cond = float(np.linalg.cond(build_omega(cfg)))
        raise SingularOmega(
            f"det Psi = {pair.det_psi:.3e} below tolerance {tol_singular:.1e} "
            f"(cond(Omega) ~ {cond:.3e}); use the constrained module"
        )
    return pair


def _newton_inv(a_ld: np.ndarray, steps: int = 3) -> np.ndarray:
    """Inverse of a longdouble matrix by LAPACK seed plus Newton correction."""
    x = np.linalg.inv(a_ld.astype(float)).astype(np.longdouble)
    ident = np.eye(a_ld.shape[0], dtype=np.longdouble)
    for _ in range(steps):
        x = x + x @ (ident - a_ld @ x)
    return x


def refined_inv(a) -> np.ndarray:
    """Dense float64 inverse driven to its representation limit.

    Matrices here are tiny (N <= 6 in practice) but may be ill conditioned
    near the presymplectic boundary; Newton steps with extended-precision
    residuals remove the usual eps * cond forward-error floor.
    """
    return _newton_inv(np.asarray(a, dtype=np.longdouble)).astype(float)


def poisson_matrix(cfg: FieldConfig, tol_singular: float = TOL_SINGULAR) -> np.ndarray:
    """Poisson matrix Lambda = -Omega^{-1} from the closed-form blocks.

    Block layout: qq = -Psi^{-1} rG, qp = +Psi^{-1}, pq = -Phi^{-1},
    pp = +Phi^{-1} eF.  Products and inverses are carried in extended
    precision before the final rounding: near the admissible singularity
    the entries of Lambda amplify the formation rounding of Psi
    quadratically, which would otherwise dominate the result.  The output
    is cross-checked against a dense inversion of Omega and
    antisymmetrized.
    """
    _require_regular(cfg, tol_singular)
    N = cfg.N
    eF = cfg.eF.astype(np.longdouble)
    rG = cfg.rG.astype(np.longdouble)
    ident = np.eye(N, dtype=np.longdouble)
    psi_inv = _newton_inv(ident - rG @ eF)
    phi_inv = _newton_inv(ident - eF @ rG)
    lam_ld = np.block([
        [-psi_inv @ rG, psi_inv],
        [-phi_inv, phi_inv @ eF],
    ])
    lam = (0.5 * (lam_ld - lam_ld.T)).astype(float)

    dense = -np.linalg.inv(build_omega(cfg))
    err = np.abs(lam - dense).max() / max(1.0, np.abs(lam).max())
    if err > 1e-6:
        raise ArithmeticError(
            f"closed-form Poisson blocks disagree with dense inversion (rel {err:.3e})"
        )
    return lam


def bracket(grad_f, grad_g, lam: np.ndarray) -> float:
    """Poisson bracket {f, g} = (grad f)^T Lambda (grad g) at a point."""
    grad_f = np.asarray(grad_f, dtype=float)
    grad_g = np.asarray(grad_g, dtype=float)
    return float(grad_f @ lam @ grad_g)


def hamiltonian_vector_field(
    cfg: FieldConfig, grad_f, tol_singular: float = TOL_SINGULAR
) -> np.ndarray:
    """Vector field X_f with components solved from the Psi/Phi factorization.

    X_q = Psi^{-1} (df/dp - rG df/dq),  X_p = -Phi^{-1} (df/dq - eF df/dp);
    identical to Lambda . grad_f.
    """
    pair = _require_regular(cfg, tol_singular)
    grad_f = np.asarray(grad_f, dtype=float)
    N = cfg.N
    gq, gp = grad_f[:N], grad_f[N:]
    rhs_q = gp - cfg.rG @ gq
    rhs_p = gq - cfg.eF @ gp
    xq = np.linalg.solve(pair.Psi, rhs_q)
    xq += np.linalg.solve(pair.Psi, rhs_q - pair.Psi @ xq)
    xp = np.linalg.solve(pair.Phi, rhs_p)
    xp += np.linalg.solve(pair.Phi, rhs_p - pair.Phi @ xp)
    return np.concatenate([xq, -xp])
