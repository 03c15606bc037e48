"""Linear Darboux maps bringing the modified two-form to canonical shape.

A map is stored as the matrix T with zeta = T z, accepted when
T^T J T = Omega up to a small residual.  Closed forms cover the planar
and spatial constant-field cases and the single-charge shears; a pivoted
symplectic orthogonalization handles any nondegenerate Omega.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BothChargesNonzero, DegenerateChi, NegativeChi, SingularOmega
from .structure import (
    EPS2,
    TOL_SINGULAR,
    FieldConfig,
    build_omega,
    canonical_j,
    cross_matrix,
    field_config_n2,
    field_config_n3,
)


@dataclass(frozen=True)
class DarbouxMap:
    """Invertible linear map z -> zeta = T z with T^T J T = Omega."""

    T: np.ndarray
    Tinv: np.ndarray
    residual: float
    cond: float

    def apply(self, z) -> np.ndarray:
        return self.T @ np.asarray(z, dtype=float)

    def pull_back(self, zeta) -> np.ndarray:
        return self.Tinv @ np.asarray(zeta, dtype=float)


def verify_darboux(dmap: DarbouxMap, omega: np.ndarray) -> float:
    """Max-abs entry of T^T J T - Omega."""
    N = omega.shape[0] // 2
    return float(np.abs(dmap.T.T @ canonical_j(N) @ dmap.T - omega).max())


def symplectic_deviation(S: np.ndarray) -> float:
    """Max-abs entry of S^T J S - J; zero iff S is symplectic."""
    N = S.shape[0] // 2
    j = canonical_j(N)
    return float(np.abs(S.T @ j @ S - j).max())


def _finish(T: np.ndarray, Tinv: np.ndarray, omega: np.ndarray, bound: float) -> DarbouxMap:
    scale = max(1.0, np.abs(omega).max())
    dmap = DarbouxMap(T, Tinv, 0.0, float(np.linalg.cond(T)))
    res = verify_darboux(dmap, omega)
    inv_err = np.abs(T @ Tinv - np.eye(T.shape[0])).max()
    if res > bound * scale or inv_err > 1e-10 * scale:
        raise ArithmeticError(
            f"constructed map violates its contract (residual {res:.3e}, inverse {inv_err:.3e})"
        )
    return DarbouxMap(T, Tinv, res, dmap.cond)


@dataclass(frozen=True)
class N2Coefficients:
    """Planar regularity data: chi = 1 + CB and the branch scalar u."""

    chi: float
    u: float


def n2_coefficients(B: float, C: float, tol: float = TOL_SINGULAR) -> N2Coefficients:
    chi = 1.0 + C * B
    if chi < -tol:
        raise NegativeChi(
            f"chi = {chi:.6g} < 0: closed form unavailable, use symplectic_gram_schmidt"
        )
    if chi <= tol:
        raise DegenerateChi(f"chi = {chi:.6g} is singular (presymplectic regime)")
    return N2Coefficients(chi, 0.5 * (1.0 + np.sqrt(chi)))


@dataclass(frozen=True)
class N3Coefficients:
    """Spatial regularity data with the mixing scalars gamma, gamma_prime.

    Both scalars are 0/0 forms in theta = C.B at theta = 0; they are
    evaluated through equivalent cancellation-free expressions with the
    finite limits gamma -> -1/8 and gamma_prime -> 3/8.
    """

    theta: float
    chi: float
    u: float
    gamma: float
    gamma_prime: float


def n3_coefficients(Bvec, Cvec, tol: float = TOL_SINGULAR) -> N3Coefficients:
    theta = float(np.dot(Cvec, Bvec))
    chi = 1.0 + theta
    if chi < -tol:
        raise NegativeChi(
            f"chi = {chi:.6g} < 0: closed form unavailable, use symplectic_gram_schmidt"
        )
    if chi <= tol:
        raise DegenerateChi(f"chi = {chi:.6g} is singular (presymplectic regime)")
    rchi = np.sqrt(chi)
    u = 0.5 * (1.0 + rchi)
    ru = np.sqrt(u)
    # gamma = (1 - sqrt(u)) / (theta sqrt(u)) rewritten without the 0/0 form.
    gamma = -1.0 / (2.0 * (rchi + 1.0) * (1.0 + ru) * ru)
    gamma_prime = (2.0 * rchi + 1.0) / (2.0 * (rchi + 1.0) * (rchi + ru) * ru)
    return N3Coefficients(theta, chi, float(u), float(gamma), float(gamma_prime))


def darboux_n2(B: float, C: float, tol: float = TOL_SINGULAR) -> DarbouxMap:
    """Closed-form planar map.

    xi = sqrt(u) (q - (C/2u) eps p),  pi = sqrt(u) (p - (B/2u) eps q),
    with u = (1 + sqrt(chi))/2; the inverse carries the extra 1/sqrt(chi).
    """
    co = n2_coefficients(B, C, tol)
    ru = np.sqrt(co.u)
    ident = np.eye(2)
    half = lambda s: (s / (2.0 * co.u)) * EPS2

    T = ru * np.block([[ident, -half(C)], [-half(B), ident]])
    Tinv = (ru / np.sqrt(co.chi)) * np.block([[ident, half(C)], [half(B), ident]])
    return _finish(T, Tinv, build_omega(field_config_n2(B, C)), 1e-12)


def darboux_n3(Bvec, Cvec, tol: float = TOL_SINGULAR) -> DarbouxMap:
    """Closed-form spatial map.

    xi = sqrt(u) (q + gamma B (C.q) + (1/2u) C x p),
    pi = sqrt(u) (p + gamma (p.B) C + (1/2u) B x q).
    """
    B = np.asarray(Bvec, dtype=float)
    C = np.asarray(Cvec, dtype=float)
    co = n3_coefficients(B, C, tol)
    ru = np.sqrt(co.u)
    ident = np.eye(3)
    bx, cx = cross_matrix(B), cross_matrix(C)
    bc, cb = np.outer(B, C), np.outer(C, B)

    T = ru * np.block([
        [ident + co.gamma * bc, cx / (2.0 * co.u)],
        [bx / (2.0 * co.u), ident + co.gamma * cb],
    ])
    Tinv = (ru / np.sqrt(co.chi)) * np.block([
        [ident + co.gamma_prime * bc, -cx / (2.0 * co.u)],
        [-bx / (2.0 * co.u), ident + co.gamma_prime * cb],
    ])
    return _finish(T, Tinv, build_omega(field_config_n3(B, C)), 1e-9)


def darboux_single_charge(cfg: FieldConfig, which: str) -> DarbouxMap:
    """Shear map when exactly one field block is active.

    "e-only" (rG = 0): pi = p - (1/2) eF q from the linear potential
    eA_k = (1/2) eF_ik q^i.  "r-only" (eF = 0): xi = q - (1/2) rG p.
    """
    if which not in ("e-only", "r-only"):
        raise ValueError(f"which must be 'e-only' or 'r-only', got {which!r}")
    N = cfg.N
    scale = max(1.0, np.abs(cfg.eF).max(), np.abs(cfg.rG).max())
    e_zero = np.abs(cfg.eF).max() <= 1e-14 * scale
    r_zero = np.abs(cfg.rG).max() <= 1e-14 * scale
    if not (e_zero or r_zero):
        raise BothChargesNonzero("neither eF nor rG vanishes; no single-charge shear")
    if which == "e-only" and not r_zero:
        raise ValueError("which='e-only' requires rG = 0")
    if which == "r-only" and not e_zero:
        raise ValueError("which='r-only' requires eF = 0")

    ident = np.eye(N)
    zero = np.zeros((N, N))
    if which == "e-only":
        T = np.block([[ident, zero], [-0.5 * cfg.eF, ident]])
        Tinv = np.block([[ident, zero], [0.5 * cfg.eF, ident]])
    else:
        T = np.block([[ident, -0.5 * cfg.rG], [zero, ident]])
        Tinv = np.block([[ident, 0.5 * cfg.rG], [zero, ident]])
    return _finish(T, Tinv, build_omega(cfg), 1e-12)


def symplectic_gram_schmidt(omega: np.ndarray, tol_singular: float = TOL_SINGULAR) -> DarbouxMap:
    """Generic Darboux map by greedy symplectic orthogonalization.

    Builds a basis (v_1..v_N, w_1..w_N) that is pairwise conjugate under
    Omega by largest-pivot selection, normalizing Omega(v_k, w_k) = 1 and
    projecting the remaining candidates onto the Omega-orthogonal
    complement of each accepted pair (projection applied twice for
    stability).  With S = [v | w], S^T Omega S = J, so T = S^{-1}.
    """
    omega = np.asarray(omega, dtype=float)
    n2 = omega.shape[0]
    N = n2 // 2
    scale = max(1.0, np.abs(omega).max())
    sigma = lambda x, y: float(x @ omega @ y)

    cand = [np.eye(n2)[:, k] for k in range(n2)]
    vs, ws = [], []
    for k in range(N):
        v = max(cand, key=np.linalg.norm)
        v = v / np.linalg.norm(v)
        pivots = [abs(sigma(v, u)) for u in cand]
        jmax = int(np.argmax(pivots))
        if pivots[jmax] < tol_singular * scale:
            raise SingularOmega(
                f"pivot {pivots[jmax]:.3e} below tolerance at pair {k}: Omega is rank deficient"
            )
        w = cand[jmax] / sigma(v, cand[jmax])
        # Balance the pair without changing Omega(v, w) = 1.
        s = np.sqrt(np.linalg.norm(w) / np.linalg.norm(v))
        v, w = v * s, w / s
        vs.append(v)
        ws.append(w)
        for _ in range(2):
            cand = [u - sigma(u, w) * v + sigma(u, v) * w for u in cand]
        cand = sorted(cand, key=np.linalg.norm, reverse=True)[: n2 - 2 * (k + 1)]

    S = np.column_stack(vs + ws)
    T = np.linalg.inv(S)
    return _finish(T, S, omega, 1e-8)
