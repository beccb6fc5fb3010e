"""Checkable identities and estimates, the decoupled characteristic-root
oracle, and the energy-decay fitter.

Quadrature conventions: space integrals are exact for piecewise-linear
fields, tip derivatives come from the last element, and time integrals use
the trapezoidal rule on the recorded samples.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from . import linalg
from .discretization import SemiDiscreteSystem, element_matrices, generator
from .model import BeamParameters
from .timestepper import Trajectory


class TailGuardError(ValueError):
    """Decay window reaches into the exponential tail of the discrete model."""

    def __init__(self, t1: float, guard: float):
        super().__init__(f"window end t1={t1:g} exceeds the tail guard 1/(2|abscissa|)={guard:g}")
        self.t1 = t1
        self.guard = guard


# ---------------------------------------------------------------------------
# element-wise quadrature helpers


def _p1_sq(a: np.ndarray, h: float) -> np.ndarray:
    """Per-element ``int |a|^2`` for nodal data ``a`` (last axis = nodes)."""
    a0, a1 = a[..., :-1], a[..., 1:]
    return h / 3.0 * (np.abs(a0) ** 2 + np.real(a0 * np.conj(a1)) + np.abs(a1) ** 2)


def _with_clamp(y: np.ndarray) -> np.ndarray:
    z = np.zeros(y.shape[:-1] + (1,), dtype=y.dtype)
    return np.concatenate([z, y], axis=-1)


def _fields(x: np.ndarray, system: SemiDiscreteSystem):
    """Nodal ``V, Phi, P, Theta`` (clamped node included) of one or many states."""
    q, v = system.split(x)
    n = system.mesh.n
    return (_with_clamp(q[..., :n]), _with_clamp(v[..., :n]),
            _with_clamp(q[..., n:2 * n]), _with_clamp(v[..., n:2 * n]))


# ---------------------------------------------------------------------------
# multiplier inequality


@dataclass(frozen=True)
class MultiplierReport:
    lhs: float
    bound: float
    constant: float
    q_spec: tuple[float, float]
    interval: tuple[float, float]
    satisfied: bool
    T: float

    def as_dict(self) -> dict:
        return asdict(self)


def multiplier_constant(params: BeamParameters, q_spec, interval) -> float:
    """``2 ||q||_inf max{rho, (1 + 2 gamma^2)/alpha1, mu, 2/beta}`` on the interval."""
    m, c = q_spec
    a, b = interval
    qinf = max(abs(m * a + c), abs(m * b + c))
    p = params
    return 2.0 * qinf * max(p.rho, (1.0 + 2.0 * p.gamma ** 2) / p.alpha1, p.mu, 2.0 / p.beta)


def multiplier_check(trajectory: Trajectory, q_spec=None, interval=None, rtol: float = 1e-12) -> MultiplierReport:
    """Evaluate both sides of the boundary multiplier inequality on a run.

    ``q(x) = m x + c`` with ``q_spec = (m, c)`` (default ``(1/L, 0)``).  The
    interval ``[a, b]`` must consist of whole elements; the pointwise
    densities ``I(a, t)`` and ``I(b, t)`` use the derivative of the element
    just inside the interval.  ``satisfied`` allows ``rtol`` of the bound for
    rounding.
    """
    system = trajectory.system
    p = system.params
    if p is None:
        raise ValueError("multiplier check needs a two-field system")
    if trajectory.record_every != 1:
        raise ValueError("trajectory too coarse: record every step (record_every=1) for time quadrature")
    if len(trajectory.times) < 2:
        raise ValueError("trajectory too coarse: need at least two samples")
    mesh = system.mesh
    L, h, n = mesh.L, mesh.h, mesh.n
    q_spec = (1.0 / L, 0.0) if q_spec is None else tuple(float(s) for s in q_spec)
    interval = (0.0, L) if interval is None else tuple(float(s) for s in interval)
    a, b = interval
    ia, ib = a / h, b / h
    if not (0 <= a < b <= L * (1 + 1e-12)) or abs(ia - round(ia)) > 1e-9 or abs(ib - round(ib)) > 1e-9:
        raise ValueError(f"interval {interval} must satisfy 0 <= a < b <= L and lie on mesh nodes")
    ia, ib = int(round(ia)), int(round(ib))
    m, c = q_spec

    V, Phi, P, Theta = _fields(trajectory.states, system)
    vx = np.diff(V, axis=-1) / h
    px = np.diff(P, axis=-1) / h
    s = p.gamma * vx - px
    sl = slice(ia, ib)
    E1 = (p.rho * _p1_sq(Phi, h)[:, sl].sum(axis=1) + p.mu * _p1_sq(Theta, h)[:, sl].sum(axis=1)
          + h * (p.alpha1 * np.abs(vx[:, sl]) ** 2 + p.beta * np.abs(s[:, sl]) ** 2).sum(axis=1))

    def density(node, elem):
        return (p.rho * np.abs(Phi[:, node]) ** 2 + p.alpha1 * np.abs(vx[:, elem]) ** 2
                + p.mu * np.abs(Theta[:, node]) ** 2 + p.beta * np.abs(s[:, elem]) ** 2)

    t = trajectory.times
    flux = (m * b + c) * density(ib, ib - 1) - (m * a + c) * density(ia, ia)
    lhs = abs(trapezoid(flux, t) - m * trapezoid(E1, t))
    const = multiplier_constant(p, q_spec, interval)
    bound = const * (E1[-1] + E1[0])
    ok = bool(lhs <= bound * (1 + rtol) + 1e-300)
    return MultiplierReport(float(lhs), float(bound), float(const), q_spec, interval, ok, float(t[-1]))


# ---------------------------------------------------------------------------
# forcing data and resolvent identity


@dataclass(frozen=True)
class Forcing:
    """Right-hand side ``F = (f1, f2, f3, f4, f5, f6)`` sampled on a mesh.

    ``f1..f4`` are nodal arrays of length ``n + 1`` (clamped node included;
    ``f1`` and ``f3`` must vanish there), ``f5`` and ``f6`` are the tip loads.
    """

    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    f4: np.ndarray
    f5: complex = 0.0
    f6: complex = 0.0

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, k)) for k in ("f1", "f2", "f3", "f4")]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise ValueError("f1..f4 must be 1-D arrays of equal length")
        for k, a in zip(("f1", "f2", "f3", "f4"), arrs):
            object.__setattr__(self, k, a)
        if abs(self.f1[0]) > 0 or abs(self.f3[0]) > 0:
            raise ValueError("f1 and f3 must vanish at the clamped end")

    @classmethod
    def zeros(cls, n: int) -> "Forcing":
        z = np.zeros(n + 1)
        return cls(z, z, z, z)

    @classmethod
    def from_functions(cls, x: np.ndarray, f1, f2, f3, f4, f5=0.0, f6=0.0) -> "Forcing":
        return cls(*(np.asarray(f(x), dtype=complex) * np.ones_like(x) for f in (f1, f2, f3, f4)), f5, f6)

    @property
    def n(self) -> int:
        return self.f1.size - 1

    def norm(self, params: BeamParameters, h: float) -> float:
        """Energy-space norm of the piecewise-linear forcing."""
        p = params
        f1x = np.diff(self.f1) / h
        f3x = np.diff(self.f3) / h
        sq = (p.rho * _p1_sq(self.f2, h).sum() + p.mu * _p1_sq(self.f4, h).sum()
              + h * np.sum(p.alpha1 * np.abs(f1x) ** 2 + p.beta * np.abs(p.gamma * f1x - f3x) ** 2)
              + p.m1 * abs(self.f5) ** 2 + p.m2 * abs(self.f6) ** 2)
        return float(np.sqrt(sq))

    def load(self, system: SemiDiscreteSystem) -> tuple[np.ndarray, np.ndarray]:
        """``(f, b)``: displacement forcing ``f`` and velocity load ``b = M g``."""
        p = system.params
        n = system.mesh.n
        if self.n != n:
            raise ValueError(f"forcing sampled on {self.n} elements, system has {n}")
        mass, _ = element_matrices(system.mesh)
        rows = mass[1:, :]
        b = np.concatenate([p.rho * rows @ self.f2, p.mu * rows @ self.f4]).astype(complex)
        b[n - 1] += p.m1 * self.f5
        b[2 * n - 1] += p.m2 * self.f6
        f = np.concatenate([self.f1[1:], self.f3[1:]]).astype(complex)
        return f, b

    def vector(self, system: SemiDiscreteSystem) -> np.ndarray:
        """State-space vector ``(f, M^-1 b)`` of the forcing."""
        f, b = self.load(system)
        g = sla.cho_solve(sla.cho_factor(system.M), b)
        return np.concatenate([f, g])


def random_forcing(mesh, rng, modes: int = 4, tip: bool = True) -> Forcing:
    """Smooth random forcing built from a few low sine/cosine modes.

    The coefficients are drawn once, so refining ``mesh`` samples the same
    continuous functions if ``rng`` is seeded identically.
    """
    c = rng.standard_normal((4, modes)) + 1j * rng.standard_normal((4, modes))
    c /= (1.0 + np.arange(modes)) ** 2
    tips = rng.standard_normal(2) + 1j * rng.standard_normal(2) if tip else np.zeros(2)
    L = mesh.L
    x = mesh.nodes
    k = np.arange(modes)
    sines = np.sin(np.outer(x, (k + 0.5) * np.pi / L))
    cosines = np.cos(np.outer(x, k * np.pi / L))
    return Forcing(sines @ c[0], cosines @ c[1], sines @ c[2], cosines @ c[3], tips[0], tips[1])


def resolvent_solve(system: SemiDiscreteSystem, lam: float, forcing: Forcing) -> np.ndarray:
    """State ``U`` with ``(i lam - A) U = F``.

    Eliminates the velocity: ``(K - lam^2 M + i lam D) q = b + (i lam M + D) f``
    and ``v = i lam q - f``.
    """
    f, b = forcing.load(system)
    Q = system.K - lam * lam * system.M + 1j * lam * system.D
    try:
        q = linalg.solve(Q, b + (1j * lam * system.M + system.D) @ f)
    except linalg.SingularMatrixError as exc:
        from .spectral import SingularShiftError
        raise SingularShiftError(lam) from exc
    return np.concatenate([q, 1j * lam * q - f])


@dataclass(frozen=True)
class ResolventIdentityReport:
    """Functionals of the resolvent identity with multiplier ``q(x) = x``.

    ``residual = |I_V + I_P - N2 + R1 + R2|`` vanishes for the continuous
    problem.  ``bound_lhs <= bound_rhs`` is the estimate
    ``N2 <= 2 (I_V + I_P) + c^2 ||F||^2``, and ``dissipated <= u_times_f`` is
    ``xi1 |u|^2 + xi2 |eta|^2 <= ||U|| ||F||`` in the discrete energy norm.
    """

    lam: float
    n: int
    I_V: float
    I_P: float
    N2: float
    R1: float
    R2: float
    residual: float
    relative_residual: float
    F_norm: float
    U_norm: float
    constant: float
    bound_lhs: float
    bound_rhs: float
    bound_holds: bool
    dissipated: float
    u_times_f: float
    dissipation_holds: bool

    def as_dict(self) -> dict:
        return asdict(self)


def identity_constant(params: BeamParameters) -> float:
    """``c`` with ``|R1| + |R2| <= c N ||F||`` for ``q(x) = x``."""
    p = params
    return 4.0 * p.L * (np.sqrt(p.rho / p.alpha1)
                        + np.sqrt(p.mu) * (1.0 / np.sqrt(p.beta) + p.gamma / np.sqrt(p.alpha1)))


def resolvent_identity_check(gen_or_system, lam: float, forcing: Forcing) -> ResolventIdentityReport:
    """Solve ``(i lam - A_h) U = F`` and evaluate the identity functionals."""
    system = gen_or_system.system if hasattr(gen_or_system, "system") else gen_or_system
    p = system.params
    mesh = system.mesh
    h, L = mesh.h, mesh.L
    lam = float(lam)
    U = resolvent_solve(system, lam, forcing)
    V, Phi, P, Theta = _fields(U, system)
    vx = np.diff(V) / h
    px = np.diff(P) / h
    s = p.gamma * vx - px
    x = mesh.nodes
    qL = L

    I_V = qL * (p.rho * abs(Phi[-1]) ** 2 + p.alpha1 * abs(vx[-1]) ** 2)
    I_P = qL * (p.mu * abs(Theta[-1]) ** 2 + p.beta * abs(s[-1]) ** 2)
    N2 = float(p.rho * _p1_sq(Phi, h).sum() + p.mu * _p1_sq(Theta, h).sum()
               + h * np.sum(p.alpha1 * np.abs(vx) ** 2 + p.beta * np.abs(s) ** 2))

    # q = x and the nodal fields are linear on each element, derivatives are
    # constant there, so the element integrals below are exact
    f1x = np.diff(forcing.f1) / h
    f3x = np.diff(forcing.f3) / h
    qx_f2 = _xg_int(x, forcing.f2, h)
    qx_f4 = _xg_int(x, forcing.f4, h)
    qx_phi = _xg_int(x, Phi, h)
    qx_theta = _xg_int(x, Theta, h)
    R2 = 2.0 * p.rho * float(np.real(np.sum(qx_f2 * np.conj(vx)) + np.sum(qx_phi * np.conj(f1x))))
    R1 = 2.0 * p.mu * float(np.real(np.sum(qx_f4 * np.conj(px)) + np.sum(qx_theta * np.conj(f3x))))

    residual = abs(I_V + I_P - N2 + R1 + R2)
    F_norm = forcing.norm(p, h)
    scale = max(N2, I_V + I_P, F_norm ** 2, 1e-300)
    c = identity_constant(p)
    rhs = 2.0 * (I_V + I_P) + c * c * F_norm ** 2

    gen = gen_or_system if hasattr(gen_or_system, "W") else None
    Fv = forcing.vector(system)
    W = gen.W if gen is not None else sla.block_diag(system.K, system.M)
    U_w = float(np.sqrt(max(np.real(np.vdot(U, W @ U)), 0.0)))
    F_w = float(np.sqrt(max(np.real(np.vdot(Fv, W @ Fv)), 0.0)))
    _, v = system.split(U)
    diss = float(sum(system.D[i, i] * abs(v[i]) ** 2 for i in system.tip_dofs))
    return ResolventIdentityReport(
        lam, mesh.n, float(I_V), float(I_P), N2, R1, R2, float(residual), float(residual / scale),
        F_norm, U_w, float(c), N2, float(rhs), bool(N2 <= rhs), diss, U_w * F_w,
        bool(diss <= U_w * F_w * (1 + 1e-10) + 1e-300))


def _xg_int(x: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    """Per-element ``int x g(x) dx`` for nodal piecewise-linear ``g``."""
    x0, x1 = x[:-1], x[1:]
    g0, g1 = g[:-1], g[1:]
    return h / 6.0 * (2 * x0 * g0 + x0 * g1 + x1 * g0 + 2 * x1 * g1)


# ---------------------------------------------------------------------------
# static problem


@dataclass(frozen=True)
class StaticSolution:
    state: np.ndarray
    residual: float
    ratio: float
    U_norm: float
    F_norm: float


def static_solve(system: SemiDiscreteSystem, forcing: Forcing | None = None, F=None) -> StaticSolution:
    """Solve ``A_h U = F`` (the zero-frequency problem).

    ``A (q, v) = (v, -M^-1 (K q + D v))`` so ``v = f`` and
    ``K q = -M g - D f``.  ``F`` may be given as a state vector or as a
    :class:`Forcing`.  ``residual`` is ``||A U - F||_W / ||F||_W`` and
    ``ratio`` is ``||U||_W / ||F||_W``.
    """
    if (forcing is None) == (F is None):
        raise ValueError("give exactly one of forcing or F")
    if forcing is not None:
        f, b = forcing.load(system)
        Fv = forcing.vector(system)
    else:
        Fv = np.asarray(F)
        f, g = system.split(Fv)
        b = system.M @ g
    try:
        cho = sla.cho_factor(system.K)
    except np.linalg.LinAlgError as exc:
        raise linalg.SingularMatrixError("stiffness matrix is singular", 0.0) from exc
    rhs = -b - system.D @ f
    q = sla.cho_solve(cho, rhs)
    U = np.concatenate([q, f])
    # residual in structured form: avoids the explicit M^-1 K of A
    w = system.K @ q + system.D @ f + b
    mcho = sla.cho_factor(system.M)
    rn = float(np.sqrt(abs(np.real(np.vdot(w, sla.cho_solve(mcho, w))))))
    gen = generator(system)
    Fn = gen.norm(Fv)
    Un = gen.norm(U)
    if Fn == 0:
        return StaticSolution(U, 0.0, 0.0, Un, 0.0)
    return StaticSolution(U, rn / Fn, Un / Fn, Un, Fn)


# ---------------------------------------------------------------------------
# characteristic-root oracle


class OracleError(RuntimeError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


def _field_constants(params: BeamParameters, field_name: str):
    p = params
    if field_name == "V":
        return p.rho, p.alpha1, p.xi1, p.m1
    if field_name == "P":
        return p.mu, p.beta, p.xi2, p.m2
    raise ValueError("field must be 'V' or 'P'")


def characteristic_function(lam, density, stiffness, damping, mass, L):
    """``sqrt(rho a) cosh z + (xi + m lam) sinh z`` with ``z = lam L sqrt(rho/a)``.

    Zeros are the eigenvalues of the decoupled damped wave with tip mass
    (the trivial factor ``lam`` already removed).
    """
    tau = L * np.sqrt(density / stiffness)
    z = lam * tau
    return np.sqrt(density * stiffness) * np.cosh(z) + (damping + mass * lam) * np.sinh(z)


def _char_derivative(lam, density, stiffness, damping, mass, L):
    tau = L * np.sqrt(density / stiffness)
    z = lam * tau
    imp = np.sqrt(density * stiffness)
    return (imp * tau * np.sinh(z) + mass * np.sinh(z)
            + (damping + mass * lam) * tau * np.cosh(z))


def _newton(lam, args, tol=1e-14, max_iter=50):
    for it in range(max_iter):
        f = characteristic_function(lam, *args)
        d = _char_derivative(lam, *args)
        if d == 0:
            break
        step = f / d
        lam = lam - step
        if abs(step) <= tol * max(1.0, abs(lam)):
            return lam, True
    return lam, False


def characteristic_roots_oracle(params: BeamParameters, field: str = "V", count: int = 10,
                                conjugates: bool = False) -> np.ndarray:
    """Eigenvalues of one decoupled field (requires ``gamma = 0``).

    Returns the ``count`` roots with positive imaginary part of lowest
    frequency (or the ``count`` lowest including conjugate pairs when
    ``conjugates`` is set), sorted by ``|Im|``.

    With a tip mass the undamped roots are bracketed and bisected on the
    imaginary axis, then followed by complex Newton steps while the gain is
    raised to its target value.  Without a tip mass the roots are explicit.
    """
    if params.gamma != 0:
        raise ValueError("the characteristic-root oracle needs gamma = 0")
    if count < 1:
        raise ValueError("count must be >= 1")
    rho, a, xi, m = _field_constants(params, field)
    L = params.L
    tau = L * np.sqrt(rho / a)
    imp = np.sqrt(rho * a)
    n_up = count if not conjugates else (count + 1) // 2
    k = np.arange(n_up)

    if m == 0:
        if np.isclose(xi, imp, rtol=1e-14):
            raise OracleError("no eigenvalues: the boundary gain matches the impedance exactly")
        # tanh z = -imp/xi
        r = imp / xi if xi > 0 else np.inf
        if np.isinf(r):
            base = 0.5j * np.pi
        else:
            base = 0.5 * np.log(complex((1 - r) / (1 + r)))
            if base.imag < 0:
                base += 1j * np.pi
        roots = (base + 1j * np.pi * k) / tau
    else:
        roots = np.empty(n_up, dtype=complex)

        def g(theta):  # conservative equation in theta = omega tau
            return imp * np.cos(theta) - m * (theta / tau) * np.sin(theta)

        for j in range(n_up):
            lo, hi = j * np.pi, j * np.pi + 0.5 * np.pi
            lo = lo if j > 0 else 1e-300
            roots[j] = 1j * brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200) / tau
        if xi > 0:
            steps = 64
            for j in range(n_up):
                lam = roots[j]
                for s in range(1, steps + 1):
                    args = (rho, a, xi * s / steps, m, L)
                    lam, ok = _newton(lam, args)
                    if not ok:
                        raise OracleError(f"Newton failed for root {j} at continuation step {s}", j)
                roots[j] = lam
    roots = np.asarray(roots, dtype=complex)
    if conjugates:
        both = np.concatenate([roots, roots.conj()])
        both = both[np.lexsort((both.imag, np.abs(both.imag)))]
        return both[:count]
    return roots[np.argsort(np.abs(roots.imag), kind="stable")]


# ---------------------------------------------------------------------------
# decay fit


@dataclass(frozen=True)
class DecayFit:
    """Log-log fit of the energy over a window.

    ``sup_tE`` is the maximum of ``t E(t) / E(0)`` over the window and
    ``tE_ratio`` its max/min ratio.  ``guard`` is ``1/(2|abscissa|)`` when an
    abscissa was supplied.  ``exponential_like`` flags data for which a line
    in ``(t, log E)`` fits much better than a line in ``(log t, log E)``.
    """

    window: tuple[float, float]
    exponent: float
    intercept: float
    residual: float
    sup_tE: float
    tE_ratio: float
    guard: float | None
    exponential_like: bool
    samples: int

    def as_dict(self) -> dict:
        return asdict(self)


def decay_fit(trajectory_or_series, window, abscissa: float | None = None, samples: int = 200) -> DecayFit:
    """Fit ``log E = exponent log t + c`` over ``window = (t0, t1)``.

    Accepts a :class:`Trajectory` or a ``(times, energy)`` pair.  The fit
    uses up to ``samples`` log-spaced sample times so late times do not
    dominate.  With ``abscissa`` given, ``t1`` must not exceed
    ``1 / (2 |abscissa|)``; violation raises :class:`TailGuardError`.
    """
    if isinstance(trajectory_or_series, Trajectory):
        t, E = trajectory_or_series.times, trajectory_or_series.energy
    else:
        t, E = (np.asarray(a, dtype=float) for a in trajectory_or_series)
    t0, t1 = (float(w) for w in window)
    if not (0 < t0 < t1):
        raise ValueError("window must satisfy 0 < t0 < t1")
    if t1 > t[-1] * (1 + 1e-12) or t0 < t[0]:
        raise ValueError(f"window {window} is outside the simulated horizon [{t[0]:g}, {t[-1]:g}]")
    guard = None
    if abscissa is not None:
        guard = np.inf if abscissa == 0 else 1.0 / (2.0 * abs(abscissa))
        if t1 > guard:
            raise TailGuardError(t1, guard)
    E0 = E[0]
    if not E0 > 0:
        raise ValueError("initial energy must be positive")
    sel = (t >= t0 * (1 - 1e-12)) & (t <= t1 * (1 + 1e-12))
    ts, Es = t[sel], E[sel]
    if ts.size < 3:
        raise ValueError("fewer than three samples in the window")
    if np.any(Es <= 0):
        raise ValueError("energy must stay positive inside the window")
    if ts.size > samples:
        grid = np.geomspace(ts[0], ts[-1], samples)
        idx = np.unique(np.clip(np.searchsorted(ts, grid), 0, ts.size - 1))
        ft, fE = ts[idx], Es[idx]
    else:
        ft, fE = ts, Es
    lt, lE = np.log(ft), np.log(fE)
    A = np.column_stack([lt, np.ones_like(lt)])
    coef, *_ = np.linalg.lstsq(A, lE, rcond=None)
    res_pow = float(np.sqrt(np.mean((A @ coef - lE) ** 2)))
    B = np.column_stack([ft, np.ones_like(ft)])
    cexp, *_ = np.linalg.lstsq(B, lE, rcond=None)
    res_exp = float(np.sqrt(np.mean((B @ cexp - lE) ** 2)))
    expo = bool(res_exp < 0.1 * res_pow and cexp[0] < 0)
    tE = ts * Es / E0
    return DecayFit((t0, t1), float(coef[0]), float(coef[1]), res_pow, float(tE.max()),
                    float(tE.max() / tE.min()), guard, expo, int(ft.size))
