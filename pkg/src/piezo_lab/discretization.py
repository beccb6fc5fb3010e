"""Piecewise-linear finite elements for the coupled beam with tip bodies.

Unknowns are the nodal values at nodes ``1..n``; the clamped node is
eliminated.  The tip velocities are the velocities of node ``n`` in each
field, so the tip masses and feedback gains sit on the last diagonal entry of
each field block.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .model import BeamParameters, ContinuousState, EnergyBreakdown, check

PRESETS = ("static_displacement", "gaussian_velocity", "mode_mix")


@dataclass(frozen=True)
class Mesh:
    n: int
    L: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"mesh needs at least 2 elements, got n={self.n}")
        if not self.L > 0:
            raise ValueError("mesh length must be > 0")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n + 1)


def build_mesh(n: int, L: float = 1.0) -> Mesh:
    return Mesh(n, L)


def element_matrices(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Full (clamped node included) P1 mass and stiffness matrices.

    Element mass is ``h/6 [[2, 1], [1, 2]]`` and element stiffness
    ``1/h [[1, -1], [-1, 1]]``.
    """
    n, h = mesh.n, mesh.h
    main_m = np.full(n + 1, 4.0)
    main_m[[0, -1]] = 2.0
    mass = np.diag(main_m) + np.diag(np.ones(n), 1) + np.diag(np.ones(n), -1)
    main_k = np.full(n + 1, 2.0)
    main_k[[0, -1]] = 1.0
    stiff = np.diag(main_k) - np.diag(np.ones(n), 1) - np.diag(np.ones(n), -1)
    return mass * (h / 6.0), stiff / h


@dataclass(frozen=True, eq=False)
class SemiDiscreteSystem:
    """Mass, damping and stiffness of ``M q'' + D q' + K q = 0``.

    ``fields`` names the field blocks in order; ``tip_dofs`` holds the index
    of each field's tip node.  Instances compare and hash by identity so they
    can key factorisation caches.
    """

    M: np.ndarray
    D: np.ndarray
    K: np.ndarray
    mesh: Mesh
    params: BeamParameters | None
    fields: tuple[str, ...] = ("V", "P")
    M1: np.ndarray | None = field(default=None, repr=False)
    K1: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_dofs(self) -> int:
        return self.M.shape[0]

    @property
    def n_fields(self) -> int:
        return len(self.fields)

    @property
    def tip_dofs(self) -> tuple[int, ...]:
        n = self.mesh.n
        return tuple((k + 1) * n - 1 for k in range(self.n_fields))

    @property
    def damping_gains(self) -> np.ndarray:
        return np.array([self.D[i, i] for i in self.tip_dofs])

    def conservative(self) -> "SemiDiscreteSystem":
        """Same system with the boundary feedback switched off."""
        params = self.params.replace(xi1=0.0, xi2=0.0) if self.params is not None else None
        return SemiDiscreteSystem(self.M, np.zeros_like(self.D), self.K, self.mesh,
                                  params, self.fields, self.M1, self.K1)

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x)
        N = self.n_dofs
        if x.shape[-1] != 2 * N:
            raise ValueError(f"state has length {x.shape[-1]}, expected {2 * N}")
        return x[..., :N], x[..., N:]

    def field_block(self, y: np.ndarray, k: int) -> np.ndarray:
        n = self.mesh.n
        return y[..., k * n:(k + 1) * n]

    def energy(self, x: np.ndarray) -> float:
        """Total discrete energy ``(q'Kq + v'Mv) / 2``."""
        q, v = self.split(x)
        return 0.5 * float(np.real(np.vdot(q, self.K @ q) + np.vdot(v, self.M @ v)))


def assemble(mesh: Mesh, params: BeamParameters) -> SemiDiscreteSystem:
    """Assemble the two-field system for the given constants."""
    check(params)
    if not np.isclose(mesh.L, params.L, rtol=1e-12):
        raise ValueError(f"mesh length {mesh.L} differs from L={params.L}")
    mass, stiff = element_matrices(mesh)
    M1, K1 = mass[1:, 1:], stiff[1:, 1:]
    n = mesh.n
    Z = np.zeros((n, n))
    M = np.block([[params.rho * M1, Z], [Z, params.mu * M1]])
    M[n - 1, n - 1] += params.m1
    M[2 * n - 1, 2 * n - 1] += params.m2
    gb = params.gamma * params.beta
    K = np.block([[params.alpha * K1, -gb * K1], [-gb * K1, params.beta * K1]])
    D = np.zeros((2 * n, 2 * n))
    D[n - 1, n - 1] = params.xi1
    D[2 * n - 1, 2 * n - 1] = params.xi2
    return SemiDiscreteSystem(M, D, K, mesh, params, ("V", "P"), M1, K1)


def assemble_scalar(mesh: Mesh, density: float, stiffness: float,
                    damping: float = 0.0, tip_mass: float = 0.0) -> SemiDiscreteSystem:
    """Single boundary-damped wave field with a tip mass.

    This is what each field of the two-field system reduces to when the
    piezoelectric coupling vanishes.
    """
    if not (density > 0 and stiffness > 0 and damping >= 0 and tip_mass >= 0):
        raise ValueError("density, stiffness must be > 0; damping, tip_mass ≥ 0")
    mass, stiff = element_matrices(mesh)
    M1, K1 = mass[1:, 1:], stiff[1:, 1:]
    n = mesh.n
    M = density * M1
    M[n - 1, n - 1] += tip_mass
    D = np.zeros((n, n))
    D[n - 1, n - 1] = damping
    return SemiDiscreteSystem(M, D, stiffness * K1, mesh, None, ("V",), M1, K1)


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """First-order matrix ``A = [[0, I], [-M^-1 K, -M^-1 D]]`` with weight ``W``.

    ``W = blockdiag(K, M)`` induces the discrete energy norm:
    ``x* W x / 2`` is the energy of ``x``.
    """

    A: np.ndarray
    W: np.ndarray
    system: SemiDiscreteSystem

    @cached_property
    def factors(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower Cholesky factors of ``K`` and ``M``."""
        return (np.linalg.cholesky(self.system.K), np.linalg.cholesky(self.system.M))

    @cached_property
    def weight_factor(self) -> np.ndarray:
        """Upper factor ``F`` with ``F^T F = W``; ``||x||_W = ||F x||_2``."""
        Lk, Lm = self.factors
        return sla.block_diag(Lk.T, Lm.T)

    @cached_property
    def transformed(self) -> np.ndarray:
        """``B = F A F^-1``, the generator in energy-orthonormal coordinates.

        ``B = [[0, G], [-G^T, -Dm]]`` with ``G = Lk^T Lm^-T`` and
        ``Dm = Lm^-1 D Lm^-T``, built from triangular solves only.
        """
        Lk, Lm = self.factors
        G = sla.solve_triangular(Lm, Lk, lower=True).T
        Dm = sla.solve_triangular(Lm, sla.solve_triangular(Lm, self.system.D, lower=True).T,
                                  lower=True).T
        N = self.system.n_dofs
        return np.block([[np.zeros((N, N)), G], [-G.T, -Dm]])

    def inner(self, x: np.ndarray, y: np.ndarray) -> complex:
        """``<x, y>_W = y* W x``."""
        return complex(np.vdot(y, self.W @ x))

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(x, x).real, 0.0)))

    def dissipativity(self, x: np.ndarray) -> tuple[float, float]:
        """``(Re <Ax, x>_W, -sum xi |tip velocity|^2)`` for a state ``x``."""
        x = np.asarray(x)
        lhs = self.inner(self.A @ x, x).real
        _, v = self.system.split(x)
        rhs = -float(sum(self.system.D[i, i] * abs(v[i]) ** 2 for i in self.system.tip_dofs))
        return lhs, rhs


def generator(system: SemiDiscreteSystem) -> GeneratorMatrix:
    N = system.n_dofs
    try:
        cho = sla.cho_factor(system.M)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("mass matrix is not positive definite") from exc
    A = np.zeros((2 * N, 2 * N))
    A[:N, N:] = np.eye(N)
    A[N:, :N] = -sla.cho_solve(cho, system.K)
    A[N:, N:] = -sla.cho_solve(cho, system.D)
    W = sla.block_diag(system.K, system.M)
    return GeneratorMatrix(A, W, system)


def cutoff_frequency(mesh: Mesh, params: BeamParameters) -> float:
    """Highest frequency trusted to follow the continuous spectrum.

    Half the element Nyquist frequency at the slowest wave speed,
    ``0.5 * (pi / h) * c_min``.
    """
    c_min, _ = params.wave_speeds()
    return 0.5 * np.pi / mesh.h * c_min


def _mode_mix(system: SemiDiscreteSystem) -> np.ndarray:
    """Undamped eigenmodes summed with energy coefficients ``1 / omega_k^2``.

    Each mode ``phi_k`` (M-orthonormal, frequency ``omega_k``, signed to
    rise away from the clamped end) enters with
    displacement amplitude ``1 / omega_k^3`` and velocity amplitude
    ``1 / omega_k^2``, so ``sum_k |omega_k c_k|^2`` stays bounded as the mesh
    is refined.  Only modes below the cutoff frequency are used.
    """
    w2, phi = sla.eigh(system.K, system.M)
    omega = np.sqrt(w2)
    if system.params is not None:
        cut = cutoff_frequency(system.mesh, system.params)
    else:
        cut = 0.5 * omega[-1]
    keep = omega <= cut
    phi = phi[:, keep]
    omega = omega[keep]
    # sign convention of a sine series: positive slope at the clamped end,
    # read from the first node of the field that moves there most
    n = system.mesh.n
    first = np.abs(phi[0::n][:system.n_fields])
    lead = np.argmax(first, axis=0) * n
    sgn = np.sign(phi[lead, np.arange(phi.shape[1])])
    phi = phi * np.where(sgn == 0, 1.0, sgn)
    q = phi @ (1.0 / omega ** 3)
    v = phi @ (1.0 / omega ** 2)
    return np.concatenate([q, v])


def project_initial_data(data, system: SemiDiscreteSystem) -> np.ndarray:
    """Turn a preset name or a :class:`ContinuousState` into a state vector.

    Presets
    -------
    static_displacement
        ``V = x / L``, everything else at rest.
    gaussian_velocity
        ``Phi = exp(-50 (x - L/2)^2)`` sampled at the nodes, ``Theta = 0``.
    mode_mix
        Smooth superposition of undamped modes (see :func:`_mode_mix`).
    """
    mesh = system.mesh
    x = mesh.nodes
    nf = system.n_fields
    if isinstance(data, str):
        if data == "mode_mix":
            return _mode_mix(system)
        zero = np.zeros_like(x)
        if data == "static_displacement":
            state = ContinuousState(x / mesh.L, zero, zero, zero)
        elif data == "gaussian_velocity":
            state = ContinuousState(zero, np.exp(-50.0 * (x - mesh.L / 2) ** 2), zero, zero)
        else:
            raise ValueError(f"unknown preset {data!r}; expected one of {PRESETS}")
    elif isinstance(data, ContinuousState):
        state = data
    else:
        raise TypeError("initial data must be a preset name or a ContinuousState")
    if state.V.size != mesh.n + 1:
        raise ValueError(f"nodal data has {state.V.size} samples, mesh has {mesh.n + 1} nodes")
    state.check_clamped()
    state.check_tip()
    q_parts = [state.V[1:], state.P[1:]][:nf]
    v_parts = [state.Phi[1:], state.Theta[1:]][:nf]
    return np.concatenate(q_parts + v_parts)


def to_continuous(x: np.ndarray, system: SemiDiscreteSystem) -> ContinuousState:
    """Nodal fields (clamped node restored) from a two-field state vector."""
    q, v = system.split(x)
    n = system.mesh.n
    z = np.zeros(1, dtype=np.result_type(x))
    V = np.concatenate([z, q[:n]])
    Phi = np.concatenate([z, v[:n]])
    if system.n_fields > 1:
        P = np.concatenate([z, q[n:2 * n]])
        Theta = np.concatenate([z, v[n:2 * n]])
    else:
        P = np.zeros_like(V)
        Theta = np.zeros_like(V)
    return ContinuousState(V, Phi, P, Theta)


def boundary_traces(x: np.ndarray, system: SemiDiscreteSystem):
    """``(V_x(L), P_x(L), u, eta)`` from the last element.

    ``x`` may be a single state or a stack of states (one per row).
    """
    x = np.asarray(x)
    q, v = system.split(x)
    n, h = system.mesh.n, system.mesh.h
    vq = q[..., :n]
    vx = (vq[..., -1] - vq[..., -2]) / h
    u = v[..., n - 1]
    if system.n_fields > 1:
        pq = q[..., n:2 * n]
        px = (pq[..., -1] - pq[..., -2]) / h
        eta = v[..., 2 * n - 1]
    else:
        px = np.zeros_like(vx)
        eta = np.zeros_like(u)
    return vx, px, u, eta


def state_energy(x: np.ndarray, system: SemiDiscreteSystem) -> EnergyBreakdown:
    """Energy breakdown of a discrete two-field state.

    Same quadrature as the weight ``W``: the six components add up to
    ``x* W x / 2``.
    """
    p = system.params
    if p is None:
        raise ValueError("energy breakdown needs a two-field system with parameters")
    q, v = system.split(np.asarray(x))
    n = system.mesh.n
    M1, K1 = system.M1, system.K1
    V, P = q[:n], q[n:]
    Phi, Theta = v[:n], v[n:]
    g = p.gamma * V - P

    def form(mat, a):
        return 0.5 * float(np.real(np.vdot(a, mat @ a)))

    return EnergyBreakdown(
        kinetic_v=p.rho * form(M1, Phi),
        kinetic_p=p.mu * form(M1, Theta),
        elastic=p.alpha1 * form(K1, V),
        magnetic_coupling=p.beta * form(K1, g),
        tip_v=0.5 * p.m1 * abs(Phi[-1]) ** 2,
        tip_p=0.5 * p.m2 * abs(Theta[-1]) ** 2,
    )


def energy_table(states: np.ndarray, system: SemiDiscreteSystem) -> np.ndarray:
    """Vectorised :func:`state_energy` for real states stacked by row.

    Returns an array of shape ``(k, 6)`` in the field order of
    :class:`EnergyBreakdown`.
    """
    p = system.params
    states = np.atleast_2d(states)
    q, v = system.split(states)
    n = system.mesh.n
    M1, K1 = system.M1, system.K1
    V, P = q[:, :n], q[:, n:]
    Phi, Theta = v[:, :n], v[:, n:]
    g = p.gamma * V - P

    def form(mat, a):
        return 0.5 * np.einsum("ki,ki->k", a, a @ mat)

    return np.column_stack([
        p.rho * form(M1, Phi),
        p.mu * form(M1, Theta),
        p.alpha1 * form(K1, V),
        p.beta * form(K1, g),
        0.5 * p.m1 * Phi[:, -1] ** 2,
        0.5 * p.m2 * Theta[:, -1] ** 2,
    ])
