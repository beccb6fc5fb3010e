"""Model constants, continuous state, and the energy/dissipation formulas.

The beam carries two coupled displacement fields on ``[0, L]``: ``V`` for the
upper plate and ``P`` for the lower one.  Both are clamped at ``x = 0`` and
carry a tip body at ``x = L``.  Everything downstream reports energies in the
terms defined here.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

logger = logging.getLogger(__name__)

_POSITIVE = ("rho", "mu", "alpha1", "beta", "L")
_NONNEGATIVE = ("gamma", "xi1", "xi2", "m1", "m2")


@dataclass(frozen=True)
class BeamParameters:
    """Physical and feedback constants of the beam.

    The default is the unit configuration (every constant equal to one).  It
    is a convenient reference point, not a physically calibrated device.
    """

    rho: float = 1.0
    mu: float = 1.0
    alpha1: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    xi1: float = 1.0
    xi2: float = 1.0
    m1: float = 1.0
    m2: float = 1.0
    L: float = 1.0

    @property
    def alpha(self) -> float:
        return effective_stiffness(self)

    def replace(self, **changes) -> "BeamParameters":
        data = asdict(self)
        unknown = set(changes) - set(data)
        if unknown:
            raise TypeError(f"unknown parameter(s): {sorted(unknown)}")
        data.update(changes)
        return BeamParameters(**data)

    def as_dict(self) -> dict:
        return asdict(self)

    def material_matrix(self) -> np.ndarray:
        """Stress-strain matrix acting on ``(V_x, P_x)``."""
        gb = self.gamma * self.beta
        return np.array([[self.alpha, -gb], [-gb, self.beta]])

    def wave_speeds(self) -> tuple[float, float]:
        """Characteristic speeds ``(c_min, c_max)`` of the coupled system."""
        s = np.diag([1.0 / np.sqrt(self.rho), 1.0 / np.sqrt(self.mu)])
        w = np.linalg.eigvalsh(s @ self.material_matrix() @ s)
        return float(np.sqrt(w[0])), float(np.sqrt(w[-1]))


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return self.ok


class ParameterError(ValueError):
    """Raised when a parameter set violates the model constraints."""

    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__("; ".join(report.errors))


def effective_stiffness(params: BeamParameters) -> float:
    """Return ``alpha = alpha1 + gamma**2 * beta``."""
    return params.alpha1 + params.gamma ** 2 * params.beta


def validate(params: BeamParameters) -> ValidationReport:
    """Check every constraint and collect all violations.

    Zero coupling, zero feedback and zero tip masses are accepted with a
    warning since they describe the decoupled, conservative and massless-tip
    contrast experiments.
    """
    errors = []
    warnings = []
    for f in fields(params):
        value = getattr(params, f.name)
        try:
            value = float(value)
        except (TypeError, ValueError):
            errors.append(f"{f.name} must be a real number")
            continue
        if not np.isfinite(value):
            errors.append(f"{f.name} must be finite")
        elif f.name in _POSITIVE and not value > 0:
            errors.append(f"{f.name} must be > 0")
        elif f.name in _NONNEGATIVE:
            if value < 0:
                errors.append(f"{f.name} must be ≥ 0")
            elif value == 0:
                warnings.append(f"{f.name} is zero")
    for w in warnings:
        logger.debug("parameter warning: %s", w)
    return ValidationReport(tuple(errors), tuple(warnings))


def check(params: BeamParameters) -> BeamParameters:
    report = validate(params)
    if not report.ok:
        raise ParameterError(report)
    return params


def dissipation_rate(u: complex, eta: complex, params: BeamParameters) -> float:
    """Instantaneous energy rate ``-xi1 |u|^2 - xi2 |eta|^2``."""
    return -(params.xi1 * abs(u) ** 2 + params.xi2 * abs(eta) ** 2)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic_v: float
    kinetic_p: float
    elastic: float
    magnetic_coupling: float
    tip_v: float
    tip_p: float

    @property
    def total(self) -> float:
        return (self.kinetic_v + self.kinetic_p + self.elastic
                + self.magnetic_coupling + self.tip_v + self.tip_p)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


@dataclass(frozen=True)
class ContinuousState:
    """Nodal samples of ``(V, Phi, P, Theta)`` plus the tip velocities.

    The field arrays include the clamped node, so they have ``n + 1``
    entries on an ``n``-element mesh.  ``u`` and ``eta`` default to the tip
    samples of ``Phi`` and ``Theta``.
    """

    V: np.ndarray
    Phi: np.ndarray
    P: np.ndarray
    Theta: np.ndarray
    u: complex | None = None
    eta: complex | None = None

    def __post_init__(self):
        for name in ("V", "Phi", "P", "Theta"):
            arr = np.asarray(getattr(self, name))
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            object.__setattr__(self, name, arr)
        sizes = {a.size for a in (self.V, self.Phi, self.P, self.Theta)}
        if len(sizes) != 1:
            raise ValueError("V, Phi, P and Theta must have the same length")
        if self.u is None:
            object.__setattr__(self, "u", self.Phi[-1])
        if self.eta is None:
            object.__setattr__(self, "eta", self.Theta[-1])

    @classmethod
    def zeros(cls, n_nodes: int) -> "ContinuousState":
        z = np.zeros(n_nodes)
        return cls(z, z, z, z)

    def check_clamped(self, atol: float = 0.0) -> None:
        if abs(self.V[0]) > atol or abs(self.P[0]) > atol:
            raise ValueError("state violates the clamped end: V(0) and P(0) must vanish")

    def check_tip(self, rtol: float = 1e-12) -> None:
        scale = max(1.0, abs(self.Phi[-1]), abs(self.Theta[-1]))
        if abs(self.u - self.Phi[-1]) > rtol * scale or abs(self.eta - self.Theta[-1]) > rtol * scale:
            raise ValueError("tip velocities must equal Phi(L) and Theta(L)")


def _p1_mass_form(a: np.ndarray, b: np.ndarray, h: float) -> complex:
    """Exact ``int conj(b) a`` for piecewise-linear nodal data."""
    a0, a1 = a[:-1], a[1:]
    b0, b1 = np.conj(b[:-1]), np.conj(b[1:])
    return h / 6.0 * np.sum(2 * a0 * b0 + a0 * b1 + a1 * b0 + 2 * a1 * b1)


def energy(state: ContinuousState, params: BeamParameters, h: float | None = None) -> EnergyBreakdown:
    """Energy of a nodal state, integrated exactly for piecewise-linear fields.

    ``h`` defaults to ``L / n`` where ``n + 1`` is the number of samples.
    """
    n_nodes = state.V.size
    if n_nodes < 2:
        raise ValueError("need at least two nodes")
    if h is None:
        h = params.L / (n_nodes - 1)
    elif not np.isclose(h * (n_nodes - 1), params.L, rtol=1e-12):
        raise ValueError(f"mesh of {n_nodes} nodes with h={h} does not span L={params.L}")
    state.check_clamped()
    state.check_tip()
    vx = np.diff(state.V) / h
    px = np.diff(state.P) / h
    g = params.gamma * vx - px
    return EnergyBreakdown(
        kinetic_v=0.5 * params.rho * _p1_mass_form(state.Phi, state.Phi, h).real,
        kinetic_p=0.5 * params.mu * _p1_mass_form(state.Theta, state.Theta, h).real,
        elastic=0.5 * params.alpha1 * h * float(np.sum(np.abs(vx) ** 2)),
        magnetic_coupling=0.5 * params.beta * h * float(np.sum(np.abs(g) ** 2)),
        tip_v=0.5 * params.m1 * abs(state.u) ** 2,
        tip_p=0.5 * params.m2 * abs(state.eta) ** 2,
    )


def stress_identity_gap(vx, px, params: BeamParameters) -> np.ndarray:
    """Pointwise gap between the two ways of writing the stored-energy density.

    ``alpha|V_x|^2 - 2 gamma beta Re(V_x conj(P_x)) + beta|P_x|^2`` against
    ``alpha1|V_x|^2 + beta|gamma V_x - P_x|^2``.  Exactly zero in exact
    arithmetic.
    """
    vx = np.asarray(vx)
    px = np.asarray(px)
    lhs = (params.alpha * np.abs(vx) ** 2
           - 2 * params.gamma * params.beta * np.real(vx * np.conj(px))
           + params.beta * np.abs(px) ** 2)
    rhs = params.alpha1 * np.abs(vx) ** 2 + params.beta * np.abs(params.gamma * vx - px) ** 2
    return lhs - rhs
