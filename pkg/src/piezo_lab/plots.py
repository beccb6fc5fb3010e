"""Static SVG figures for trajectories and reports."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("energy_decay_loglog", "spectrum_scatter", "resolvent_sweep", "abscissa_trend")

plt.rcParams["svg.hashsalt"] = "piezo-lab"


class EmptyReportError(ValueError):
    pass


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def energy_decay_loglog(times, energy, path, fit=None):
    """Energy against time on log-log axes with a slope -1 guide."""
    t = np.asarray(times, dtype=float)
    E = np.asarray(energy, dtype=float)
    keep = (t > 0) & (E > 0)
    if not keep.any():
        raise EmptyReportError("no positive (t, E) samples to plot")
    t, E = t[keep], E[keep]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(t, E, lw=1.2, label="E(t)")
    t_ref = np.array([t[0], t[-1]])
    mid = len(t) // 2
    ax.loglog(t_ref, E[mid] * t[mid] / t_ref, "k--", lw=0.9, label="slope -1 guide")
    if fit is not None:
        t0, t1 = fit.window
        tt = np.geomspace(t0, t1, 50)
        ax.loglog(tt, np.exp(fit.intercept) * tt ** fit.exponent, "r-", lw=1.5,
                  label=f"fit exponent {fit.exponent:.3f}")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend()
    _save(fig, path)


def spectrum_scatter(eigenvalues, path, cutoff=None):
    ev = np.asarray(eigenvalues)
    if ev.size == 0:
        raise EmptyReportError("no eigenvalues to plot")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.scatter(ev.real, ev.imag, s=6)
    ax.axvline(0.0, color="k", lw=0.6)
    if cutoff is not None and np.isfinite(cutoff):
        for s in (1, -1):
            ax.axhline(s * cutoff, color="gray", ls=":", lw=0.8)
    ax.set_xlabel("Re λ")
    ax.set_ylabel("Im λ")
    _save(fig, path)


def resolvent_sweep(lambdas, norms, path, peak_lambdas=None, peak_norms=None, fit=None):
    lam = np.asarray(lambdas, dtype=float)
    nr = np.asarray(norms, dtype=float)
    if lam.size == 0:
        raise EmptyReportError("empty resolvent sweep")
    pos = lam > 0
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(lam[pos], nr[pos], lw=0.8, label="grid")
    if peak_lambdas is not None and len(peak_lambdas):
        ax.loglog(peak_lambdas, peak_norms, "o", ms=3, label="peaks")
    if fit is not None:
        lo, hi = fit.band
        ll = np.geomspace(lo, hi, 50)
        ax.loglog(ll, np.exp(fit.intercept) * ll ** fit.slope, "r-", lw=1.5,
                  label=f"envelope exponent {fit.slope:.3f}")
    ax.set_xlabel("λ")
    ax.set_ylabel("‖(iλ − A)⁻¹‖")
    ax.legend()
    _save(fig, path)


def abscissa_trend(ns, abscissae, path):
    ns = np.asarray(ns, dtype=float)
    ab = np.asarray(abscissae, dtype=float)
    if ns.size == 0:
        raise EmptyReportError("empty abscissa trend")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if np.all(ab < 0):
        ax.loglog(ns, -ab, "o-")
        ax.set_ylabel("−(spectral abscissa)")
    else:
        ax.semilogx(ns, ab, "o-")
        ax.set_ylabel("spectral abscissa")
    ax.set_xlabel("elements n")
    _save(fig, path)
