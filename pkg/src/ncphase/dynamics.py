"""Equations of motion, renormalized frequencies and propagation.

All in-scope Hamiltonians are quadratic, H = p^2/2m + V(q) with V either
(kappa/2) q^2 or -E.q, so the flow is affine: dz/dt = M z + k with
M = Lambda . Hess(H).  The exact propagator uses the matrix exponential;
the implicit midpoint rule provides the generic symplectic step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .darboux import darboux_n2, darboux_n3, n2_coefficients
from .errors import DegenerateChi, SingularOmega, StepRejected
from .structure import (
    TOL_SINGULAR,
    FieldConfig,
    n2_scalars,
    n3_vectors,
    poisson_matrix,
    psi_phi,
)

HARMONIC = "harmonic"
LINEAR = "linear"


@dataclass(frozen=True)
class OscillatorModel:
    """Mass, elasticity (or constant force) and the action scale hbar.

    potential "harmonic" uses V = (kappa/2) |q|^2 (kappa = 0 is the free
    particle); "linear" uses V = -Evec.q.
    """

    m: float
    kappa: float = 0.0
    potential: str = HARMONIC
    Evec: tuple | None = None
    hbar: float = 1.0

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if self.hbar <= 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if self.potential == HARMONIC:
            if self.kappa < 0:
                raise ValueError(f"kappa must be nonnegative, got {self.kappa}")
        elif self.potential == LINEAR:
            if self.Evec is None:
                raise ValueError("linear potential requires Evec")
            object.__setattr__(self, "Evec", tuple(float(e) for e in self.Evec))
        else:
            raise ValueError(f"unknown potential {self.potential!r}")

    @property
    def omega0(self) -> float:
        if self.potential != HARMONIC or self.kappa <= 0:
            raise ValueError("bare frequency requires a harmonic potential with kappa > 0")
        return float(np.sqrt(self.kappa / self.m))

    def hessian(self, N: int) -> np.ndarray:
        h = np.zeros((2 * N, 2 * N))
        if self.potential == HARMONIC:
            h[:N, :N] = self.kappa * np.eye(N)
        h[N:, N:] = np.eye(N) / self.m
        return h

    def gradient_offset(self, N: int) -> np.ndarray:
        g = np.zeros(2 * N)
        if self.potential == LINEAR:
            g[:N] = -np.asarray(self.Evec, dtype=float)
        return g

    def gradient(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        N = z.size // 2
        return self.hessian(N) @ z + self.gradient_offset(N)

    def hamiltonian(self, z) -> float:
        z = np.asarray(z, dtype=float)
        N = z.size // 2
        q, p = z[:N], z[N:]
        if self.potential == HARMONIC:
            v = 0.5 * self.kappa * float(q @ q)
        else:
            v = -float(np.dot(self.Evec, q))
        return float(p @ p) / (2.0 * self.m) + v


def flow_matrix(cfg: FieldConfig, model: OscillatorModel,
                tol_singular: float = TOL_SINGULAR):
    """Affine generator (M, k) of dz/dt = M z + k, M = Lambda . Hess(H)."""
    lam = poisson_matrix(cfg, tol_singular)
    return lam @ model.hessian(cfg.N), lam @ model.gradient_offset(cfg.N)


def equations_of_motion(cfg: FieldConfig, model: OscillatorModel, z,
                        tol_singular: float = TOL_SINGULAR) -> np.ndarray:
    """dz/dt from the Psi/Phi closed form.

    dq/dt = Psi^{-1} (p/m - rG dV/dq),  dp/dt = Phi^{-1} (eF p/m - dV/dq).
    """
    pair = psi_phi(cfg)
    if abs(pair.det_psi) < tol_singular:
        raise SingularOmega(f"det Psi = {pair.det_psi:.3e}: use the constrained module")
    z = np.asarray(z, dtype=float)
    N = cfg.N
    q, p = z[:N], z[N:]
    if model.potential == HARMONIC:
        dv = model.kappa * q
    else:
        dv = -np.asarray(model.Evec, dtype=float)
    dq = np.linalg.solve(pair.Psi, p / model.m - cfg.rG @ dv)
    dp = np.linalg.solve(pair.Phi, cfg.eF @ (p / model.m) - dv)
    return np.concatenate([dq, dp])


@dataclass(frozen=True)
class N2Frequencies:
    """Renormalized planar oscillator data.

    omega0_prime = (omega0 / 2 chi) sqrt((b-c)^2 + 4 chi), the induced
    rotation frequency omegaL_prime = (omega0 / 2 chi)(b-c), and the two
    positive mode frequencies omega_pm = omega0_prime +/- omegaL_prime.
    """

    b: float
    c: float
    chi: float
    u: float
    m_prime: float
    kappa_prime: float
    omega0: float
    omega0_prime: float
    omegaL_prime: float
    omega_plus: float
    omega_minus: float

    @property
    def m_prime_omega0_prime(self) -> float:
        return float(np.sqrt(self.m_prime * self.kappa_prime))


def n2_frequencies(model: OscillatorModel, B: float, C: float,
                   tol: float = TOL_SINGULAR) -> N2Frequencies:
    """Renormalized mass/elasticity and mode frequencies for the planar oscillator."""
    if model.potential != HARMONIC or model.kappa <= 0:
        raise ValueError("frequencies require a harmonic potential with kappa > 0")
    co = n2_coefficients(B, C, tol)
    chi, u = co.chi, co.u
    mk = np.sqrt(model.m * model.kappa)
    b = B / mk
    c = C * mk
    omega0 = model.omega0
    m_prime = model.m * chi / (u * (1.0 + c * c / (4.0 * u * u)))
    kappa_prime = model.kappa * (u / chi) * (1.0 + b * b / (4.0 * u * u))

    d = b - c
    root = np.hypot(d, 2.0 * np.sqrt(chi))
    omega0_prime = omega0 * root / (2.0 * chi)
    omegaL_prime = omega0 * d / (2.0 * chi)
    # Evaluate the smaller mode through the difference-free form; the raw
    # omega0_prime - |omegaL_prime| cancels catastrophically as chi -> 0.
    small = 2.0 * omega0 / (root + abs(d))
    large = omega0 * (root + abs(d)) / (2.0 * chi)
    if d >= 0:
        omega_plus, omega_minus = large, small
    else:
        omega_plus, omega_minus = small, large
    return N2Frequencies(
        b=float(b), c=float(c), chi=float(chi), u=float(u),
        m_prime=float(m_prime), kappa_prime=float(kappa_prime),
        omega0=float(omega0), omega0_prime=float(omega0_prime),
        omegaL_prime=float(omegaL_prime),
        omega_plus=float(omega_plus), omega_minus=float(omega_minus),
    )


@dataclass(frozen=True)
class ShiftModes:
    """Complex normal-mode content of a planar state.

    q(t) = q_coeff_plus A+(t) + q_coeff_minus A-*(t) with
    A+(t) = a_plus exp(-i w+ t) and A-*(t) = a_minus_dag exp(+i w- t);
    p(t) analogously with the p coefficients.
    """

    omega_plus: float
    omega_minus: float
    a_plus: complex
    a_minus_dag: complex
    q_coeff_plus: complex
    q_coeff_minus: complex
    p_coeff_plus: complex
    p_coeff_minus: complex


def shift_modes(model: OscillatorModel, B: float, C: float, z0) -> ShiftModes:
    """Decompose a planar state into the two rotating modes."""
    fr = n2_frequencies(model, B, C)
    mw = fr.m_prime_omega0_prime
    u, chi = fr.u, fr.chi
    bp = B / mw
    cp = C * mw
    ru, rmw = np.sqrt(u), np.sqrt(mw)

    z0 = np.asarray(z0, dtype=float)
    q0 = complex(z0[0], z0[1])
    p0 = complex(z0[2], z0[3])
    a_plus = 0.5 * ru * (rmw * (1.0 - bp / (2 * u)) * q0
                         + 1j * (1.0 + cp / (2 * u)) * p0 / rmw)
    a_minus_dag = 0.5 * ru * (rmw * (1.0 + bp / (2 * u)) * q0
                              - 1j * (1.0 - cp / (2 * u)) * p0 / rmw)

    back = np.sqrt(u / chi)
    q_plus = back * (1.0 - cp / (2 * u)) / rmw
    q_minus = back * (1.0 + cp / (2 * u)) / rmw
    p_plus = -1j * back * (1.0 + bp / (2 * u)) * rmw
    p_minus = 1j * back * (1.0 - bp / (2 * u)) * rmw
    return ShiftModes(fr.omega_plus, fr.omega_minus, a_plus, a_minus_dag,
                      q_plus, q_minus, p_plus, p_minus)


def closed_form_solution_n2(model: OscillatorModel, B: float, C: float,
                            z0, t) -> np.ndarray:
    """Exact planar flow via the rotating modes.

    Accepts scalar or array t; returns shape (4,) or (len(t), 4).
    """
    modes = shift_modes(model, B, C, z0)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    ap = modes.a_plus * np.exp(-1j * modes.omega_plus * t_arr)
    am = modes.a_minus_dag * np.exp(1j * modes.omega_minus * t_arr)
    q = modes.q_coeff_plus * ap + modes.q_coeff_minus * am
    p = modes.p_coeff_plus * ap + modes.p_coeff_minus * am
    out = np.stack([q.real, q.imag, p.real, p.imag], axis=-1)
    return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out


def angular_momentum(zeta) -> float:
    """Planar angular momentum xi^1 pi_2 - xi^2 pi_1 in Darboux variables."""
    zeta = np.asarray(zeta, dtype=float)
    return float(zeta[0] * zeta[3] - zeta[1] * zeta[2])


@dataclass(frozen=True)
class N3ParallelModel:
    """Axis-aligned spatial oscillator: transverse sector renormalized as in
    the planar case, axial sector untouched."""

    m_perp: float
    kappa_perp: float
    omega3: float
    omega_perp: float
    omegaL_prime: float
    omega_plus: float
    omega_minus: float


def n3_parallel_model(model: OscillatorModel, B: float, C: float,
                      tol: float = TOL_SINGULAR) -> N3ParallelModel:
    """Decoupled frequencies when both field vectors point along the z-axis."""
    fr = n2_frequencies(model, B, C, tol)
    return N3ParallelModel(
        m_perp=fr.m_prime, kappa_perp=fr.kappa_prime,
        omega3=model.omega0, omega_perp=fr.omega0_prime,
        omegaL_prime=fr.omegaL_prime,
        omega_plus=fr.omega_plus, omega_minus=fr.omega_minus,
    )


@dataclass(frozen=True)
class Trajectory:
    """Sampled flow with per-sample energy and, when defined, the Darboux
    angular momentum about the third axis."""

    times: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    lambda3: np.ndarray | None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")


def midpoint_transfer(M: np.ndarray, k: np.ndarray, dt: float):
    """One-step implicit midpoint transfer: z' = P z + d.

    P = (I - dt M/2)^{-1} (I + dt M/2); raises StepRejected when the
    resolvent is singular.
    """
    n = M.shape[0]
    a = np.eye(n) - 0.5 * dt * M
    det = np.linalg.det(a)
    if abs(det) < 1e-12:
        spectral = np.abs(np.linalg.eigvals(M)).max()
        suggestion = 1.0 / spectral if spectral > 0 else None
        raise StepRejected(
            f"midpoint resolvent singular at dt = {dt}", suggested_dt=suggestion
        )
    b = np.eye(n) + 0.5 * dt * M
    p = np.linalg.solve(a, b)
    d = np.linalg.solve(a, dt * k)
    return p, d


def _darboux_for_lambda3(cfg: FieldConfig):
    # Lambda3 is reported only where a closed-form chart exists: planar
    # configs and axis-aligned spatial configs.
    try:
        sc = n2_scalars(cfg)
        if sc is not None:
            return darboux_n2(*sc)
        vecs = n3_vectors(cfg)
        if vecs is not None:
            bv, cv = vecs
            if abs(bv[0]) + abs(bv[1]) + abs(cv[0]) + abs(cv[1]) == 0.0:
                return darboux_n3(bv, cv)
    except DegenerateChi:
        return None
    return None


def integrate(cfg: FieldConfig, model: OscillatorModel, z0, dt: float,
              steps: int, method: str = "exact",
              tol_singular: float = TOL_SINGULAR) -> Trajectory:
    """Propagate the affine flow for `steps` steps of size dt.

    method "exact" uses the matrix exponential of the augmented generator
    (variation of constants for the affine part); "midpoint" uses the
    implicit midpoint rule, which is exact on the drift and second order
    on the oscillation.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if method not in ("exact", "midpoint"):
        raise ValueError(f"unknown method {method!r}")
    M, k = flow_matrix(cfg, model, tol_singular)
    n = M.shape[0]
    z0 = np.asarray(z0, dtype=float)

    if method == "exact":
        aug = np.zeros((n + 1, n + 1))
        aug[:n, :n] = M * dt
        aug[:n, n] = k * dt
        phi = expm(aug)
        P, d = phi[:n, :n], phi[:n, n]
    else:
        P, d = midpoint_transfer(M, k, dt)

    states = np.empty((steps + 1, n))
    states[0] = z0
    z = z0
    for i in range(steps):
        z = P @ z + d
        states[i + 1] = z

    times = dt * np.arange(steps + 1)
    energies = np.array([model.hamiltonian(s) for s in states])
    dmap = _darboux_for_lambda3(cfg)
    lambda3 = None
    if dmap is not None:
        N = cfg.N
        zeta = states @ dmap.T.T
        lambda3 = zeta[:, 0] * zeta[:, N + 1] - zeta[:, 1] * zeta[:, N]
    return Trajectory(times, states, energies, lambda3)
