"""Spectrum, branch asymptotics and imaginary-axis resolvent sweeps.

All norms are energy norms.  Eigenvalues are taken from the generator in
energy-orthonormal coordinates; resolvent norms are ``1 / sigma_min`` of
``i lam - A`` measured in the same geometry.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack
from scipy.optimize import minimize_scalar

from . import linalg
from .banded import bandwidth, interleave_permutation, sym_band_matvec, to_general_band, to_lower_band
from .discretization import GeneratorMatrix, assemble, build_mesh, cutoff_frequency, generator
from .model import BeamParameters

logger = logging.getLogger(__name__)

DEFAULT_BAND = (10.0, 60.0)


class SingularShiftError(np.linalg.LinAlgError):
    """``i lam - A`` is exactly singular: an eigenvalue sits on the imaginary axis."""

    def __init__(self, lam: float):
        super().__init__(f"i*lambda - A is singular at lambda={lam!r}")
        self.lam = lam


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("PIEZO_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items, threads=None):
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares line ``log y = slope * log x + intercept``."""

    slope: float
    intercept: float
    band: tuple[float, float]
    residual: float
    count: int

    @property
    def exponent(self) -> float:
        return self.slope

    @property
    def constant(self) -> float:
        return float(np.exp(self.intercept))

    def as_dict(self) -> dict:
        return {"slope": self.slope, "exponent": self.slope, "intercept": self.intercept, "constant": self.constant,
                "band": list(self.band), "residual": self.residual, "count": self.count}


def fit_power_law(x, y, band, min_points: int = 2) -> PowerLawFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = band
    sel = (x >= lo) & (x <= hi)
    if np.count_nonzero(sel) < min_points:
        raise ValueError(f"only {np.count_nonzero(sel)} points in band [{lo}, {hi}], need {min_points}")
    if np.any(y[sel] <= 0):
        raise ValueError("power-law fit needs positive values")
    lx, ly = np.log(x[sel]), np.log(y[sel])
    coef, res, *_ = np.polyfit(lx, ly, 1, full=True)
    rms = float(np.sqrt(res[0] / lx.size)) if res.size else 0.0
    return PowerLawFit(float(coef[0]), float(coef[1]), (float(lo), float(hi)), rms, int(lx.size))


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues sorted by ``|Im|`` (then ``Im``) with summary numbers.

    ``spectral_abscissa`` is the largest real part over the whole discrete
    spectrum.  ``resolved_abscissa`` only looks at ``|Im| <= cutoff``, the
    part of the spectrum the mesh resolves; above it the discrete spectrum
    contains nearly undamped artefacts of the discretisation.
    """

    eigenvalues: np.ndarray
    spectral_abscissa: float
    resolved_abscissa: float
    cutoff: float
    branch_fit: PowerLawFit | None = None

    @classmethod
    def from_eigenvalues(cls, ev, cutoff: float = np.inf, band=None) -> "SpectrumReport":
        ev = np.asarray(ev, dtype=complex)
        ev = ev[np.lexsort((ev.imag, np.abs(ev.imag)))]
        resolved = ev[np.abs(ev.imag) <= cutoff]
        rep = cls(ev, float(ev.real.max()),
                  float(resolved.real.max()) if resolved.size else float("nan"), float(cutoff))
        if band is not None:
            try:
                fit = branch_asymptote(rep, band)
            except ValueError as exc:
                logger.debug("no branch fit in band %s: %s", band, exc)
            else:
                rep = cls(rep.eigenvalues, rep.spectral_abscissa, rep.resolved_abscissa,
                          rep.cutoff, fit)
        return rep

    def upper(self) -> np.ndarray:
        """Eigenvalues with ``Im > 0`` in increasing ``Im``."""
        ev = self.eigenvalues[self.eigenvalues.imag > 0]
        return ev[np.argsort(ev.imag)]


def spectrum(gen: GeneratorMatrix, band=DEFAULT_BAND) -> SpectrumReport:
    """Eigenvalues of the generator in energy-orthonormal coordinates."""
    ev = linalg.eig(gen.transformed)
    params = gen.system.params
    cut = cutoff_frequency(gen.system.mesh, params) if params is not None else np.inf
    if band is not None and band[1] > cut:
        band = None
    return SpectrumReport.from_eigenvalues(ev, cut, band)


def branch_asymptote(report: SpectrumReport, band) -> PowerLawFit:
    """Fit ``log(-Re lam)`` against ``log Im lam`` for eigenvalues in ``band``.

    With tip masses the damping of high modes falls off like ``omega^-2``.
    """
    lo, hi = band
    if hi > report.cutoff:
        raise ValueError(f"band upper end {hi} exceeds the resolved cutoff {report.cutoff:.4g}")
    ev = report.upper()
    ev = ev[(ev.imag >= lo) & (ev.imag <= hi)]
    if ev.size < 5:
        raise ValueError(f"only {ev.size} eigenvalues in band [{lo}, {hi}], need 5")
    if np.any(ev.real >= 0):
        raise ValueError("eigenvalues in band are not strictly damped")
    return fit_power_law(ev.imag, -ev.real, band, min_points=5)


class _Pencil:
    """Banded quadratic pencil ``Q(lam) = K - lam^2 M + i lam D``.

    Applies the resolvent of ``A`` and its energy-adjoint with banded LU
    solves, so one shift costs ``O(n)`` instead of a dense factorisation.
    Vectors live in the node-interleaved ordering; the energy norm does not
    depend on the ordering.
    """

    def __init__(self, gen: GeneratorMatrix):
        s = gen.system
        perm = interleave_permutation(s.n_fields, s.mesh.n)
        P = np.ix_(perm, perm)
        M, K = s.M[P], s.K[P]
        self.b = max(bandwidth(M), bandwidth(K), 1)
        self.N = M.shape[0]
        self.mband = to_lower_band(M, self.b)
        self.kband = to_lower_band(K, self.b)
        self.d = np.diag(s.D)[perm]
        self._mgen = to_general_band(M, self.b, self.b)
        self._kgen = to_general_band(K, self.b, self.b)
        self.kchol = sla.cholesky_banded(self.kband, lower=True)
        self.mchol = sla.cholesky_banded(self.mband, lower=True)

    def factor(self, lam: float):
        ab = (self._kgen - lam * lam * self._mgen).astype(complex)
        ab[2 * self.b] += 1j * lam * self.d
        lu, piv, info = lapack.zgbtrf(ab, self.b, self.b)
        if info > 0:
            raise SingularShiftError(lam)
        return lu, piv

    def _solve(self, fac, rhs, trans=0):
        x, info = lapack.zgbtrs(fac[0], self.b, self.b, rhs, fac[1], trans=trans)
        return x

    def _m(self, X):
        return sym_band_matvec(self.mband, X)

    def _k(self, X):
        return sym_band_matvec(self.kband, X)

    def apply(self, fac, lam, X):
        """``(i lam - A)^-1 X`` for state vectors stacked as columns."""
        N = self.N
        f, g = X[:N], X[N:]
        rhs = self._m(g + 1j * lam * f) + self.d[:, None] * f
        q = self._solve(fac, rhs)
        return np.vstack([q, 1j * lam * q - f])

    def apply_adjoint(self, fac, lam, Y):
        """Euclidean adjoint ``(i lam - A)^-* Y``."""
        N = self.N
        w1, w2 = Y[:N], Y[N:]
        s = self._solve(fac, w1 - 1j * lam * w2, trans=2)
        ms = self._m(s)
        return np.vstack([self.d[:, None] * s - 1j * lam * ms - w2, ms])

    def weight(self, X):
        N = self.N
        return np.vstack([self._k(X[:N]), self._m(X[N:])])

    def weight_inv(self, X):
        N = self.N
        return np.vstack([sla.cho_solve_banded((self.kchol, True), X[:N]),
                          sla.cho_solve_banded((self.mchol, True), X[N:])])


def _w_orthonormalize(pen: _Pencil, Z):
    G = Z.conj().T @ pen.weight(Z)
    G = 0.5 * (G + G.conj().T)
    try:
        C = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(G)
        keep = w > w.max() * 1e-14
        return Z @ (V[:, keep] / np.sqrt(w[keep]))
    return sla.solve_triangular(C, Z.conj().T, lower=True).conj().T


def _resolvent_norm_banded(pen: _Pencil, lam: float, block: int = 8, tol: float = 1e-12,
                           max_iter: int = 500) -> float:
    fac = pen.factor(lam)
    rng = np.random.default_rng(12345)
    n2 = 2 * pen.N
    p = min(block, n2)
    X = rng.standard_normal((n2, p)) + 1j * rng.standard_normal((n2, p))
    X = _w_orthonormalize(pen, X)
    prev = None
    for it in range(max_iter):
        Y = pen.apply(fac, lam, X)
        H = Y.conj().T @ pen.weight(Y)
        theta, C = np.linalg.eigh(0.5 * (H + H.conj().T))
        sigma = float(np.sqrt(max(theta[-1], 0.0)))
        if not np.isfinite(sigma):
            raise SingularShiftError(lam)
        if prev is not None and abs(sigma - prev) <= tol * sigma:
            return sigma
        prev = sigma
        Z = pen.weight_inv(pen.apply_adjoint(fac, lam, pen.weight(Y @ C[:, ::-1])))
        X = _w_orthonormalize(pen, Z)
    raise linalg.ConvergenceError(f"resolvent norm at lambda={lam} did not converge", max_iter)


def _resolvent_norm_dense(gen: GeneratorMatrix, lam: float) -> float:
    B = gen.transformed
    s = linalg.smallest_singular_value(1j * lam * np.eye(B.shape[0]) - B)
    if s == 0.0:
        raise SingularShiftError(lam)
    return 1.0 / s


class ResolventEvaluator:
    """``lam -> ||(i lam - A)^-1||`` in the energy norm for one generator."""

    def __init__(self, gen: GeneratorMatrix, method: str = "banded"):
        if method not in ("banded", "dense"):
            raise ValueError("method must be 'banded' or 'dense'")
        self.gen = gen
        self.method = method

    @cached_property
    def _pencil(self):
        return _Pencil(self.gen)

    def __call__(self, lam: float) -> float:
        lam = float(lam)
        if self.method == "dense":
            return _resolvent_norm_dense(self.gen, lam)
        return _resolvent_norm_banded(self._pencil, lam)


def resolvent_norm(gen: GeneratorMatrix, lam: float, method: str = "banded") -> float:
    return ResolventEvaluator(gen, method)(lam)


@dataclass(frozen=True)
class ResolventSweep:
    lambdas: np.ndarray
    norms: np.ndarray
    peak_lambdas: np.ndarray
    peak_norms: np.ndarray
    growth_fit: PowerLawFit | None

    @property
    def sigma_min(self) -> np.ndarray:
        return 1.0 / self.norms


def _refine_peak(evaluate, lo, hi, guess=None):
    if guess is not None:
        lo, hi = min(lo, guess), max(hi, guess)

    def neg(lam):
        try:
            return -np.log(evaluate(lam))
        except SingularShiftError:
            return -np.inf
    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 * max(abs(hi), 1.0), "maxiter": 25})
    lam, val = float(res.x), float(np.exp(-res.fun))
    if guess is not None:
        g = evaluate(guess)
        if g > val:
            lam, val = float(guess), g
    return lam, val


def resolvent_sweep(gen: GeneratorMatrix, lambdas, band=DEFAULT_BAND, report: SpectrumReport | None = None,
                    refine: bool = True, method: str = "banded", threads: int | None = None) -> ResolventSweep:
    """Resolvent norms on ``i * lambdas`` plus the envelope of peak values.

    Peaks are located from the grid's local maxima and from the eigenvalues
    whose imaginary parts fall inside the grid (a fixed grid almost always
    misses the narrow resonance peaks of lightly damped modes), then
    polished with a bounded scalar search.  ``growth_fit`` is the power law
    of the peak envelope over ``band``.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0 or np.any(lambdas < 0):
        raise ValueError("lambda grid must be a non-empty list of non-negative reals")
    evaluate = ResolventEvaluator(gen, method)
    norms = np.array(_map(evaluate, list(lambdas), threads))
    peaks = []
    if refine:
        if report is None:
            report = spectrum(gen, band=None)
        lo, hi = lambdas.min(), lambdas.max()
        seeds = []
        for k in range(1, lambdas.size - 1):
            if norms[k] >= norms[k - 1] and norms[k] >= norms[k + 1]:
                seeds.append((lambdas[k - 1], lambdas[k + 1], None))
        for z in report.upper():
            if lo <= z.imag <= hi and z.real < 0:
                w = 3.0 * abs(z.real)
                seeds.append((max(lo, z.imag - w), min(hi, z.imag + w), float(z.imag)))
        peaks = _map(lambda s: _refine_peak(evaluate, *s), seeds, threads)
        peaks.sort()
        merged = []
        for lam, val in peaks:
            if merged and abs(lam - merged[-1][0]) <= 1e-6 * max(lam, 1.0):
                if val > merged[-1][1]:
                    merged[-1] = (lam, val)
            else:
                merged.append((lam, val))
        peaks = merged
    pl = np.array([p[0] for p in peaks])
    pn = np.array([p[1] for p in peaks])
    fit = None
    if band is not None and pl.size:
        try:
            fit = fit_power_law(pl, pn, band, min_points=3)
        except ValueError as exc:
            logger.debug("no growth fit: %s", exc)
    return ResolventSweep(lambdas, norms, pl, pn, fit)


def abscissa_trend(params: BeamParameters, n_list, threads: int | None = None):
    """``[(n, resolved spectral abscissa)]`` for each mesh size."""
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n list must be strictly increasing")

    def one(n):
        gen = generator(assemble(build_mesh(n, params.L), params))
        return n, spectrum(gen, band=None).resolved_abscissa
    return _map(one, n_list, threads)
