"""Desk-scale invariant suites behind ``piezo-lab verify``.

Each suite returns a dict with at least ``passed`` and the measured
quantities it judged.  Sizes are kept small so ``verify --suite all`` runs in
well under a minute; the full-size experiments live in the acceptance tests.
"""
from __future__ import annotations

import numpy as np

from .config import ExperimentConfig
from .discretization import assemble, assemble_scalar, build_mesh, generator, project_initial_data
from .spectral import spectrum
from .timestepper import run, run_conservative
from .verification import (characteristic_roots_oracle, multiplier_check, random_forcing,
                           resolvent_identity_check, static_solve)


def _system(cfg: ExperimentConfig, n=None, params=None):
    p = cfg.params if params is None else params
    return assemble(build_mesh(n or cfg.n_elements, p.L), p)


def energy(cfg: ExperimentConfig, steps: int = 2000) -> dict:
    s = _system(cfg)
    tr = run(s, project_initial_data(cfg.initial_condition, s), dt=cfg.dt, n_steps=steps,
             backend=cfg.backend)
    step_res = float(np.max(np.abs(tr.step_residual())))
    bal = float(np.max(np.abs(tr.balance_residual())))
    mono = bool(np.all(np.diff(tr.step_energy) <= 1e-14 * tr.step_energy[0]))
    return {"passed": step_res <= 1e-10 and bal <= 1e-10 and mono, "max_step_residual": step_res,
            "max_balance_residual": bal, "non_increasing": mono, "steps": steps}


def conservative(cfg: ExperimentConfig, steps: int = 2000) -> dict:
    s = _system(cfg)
    tr = run_conservative(s, project_initial_data(cfg.initial_condition, s), dt=cfg.dt, n_steps=steps,
                          backend=cfg.backend)
    drift = float(np.max(np.abs(tr.step_energy - tr.step_energy[0])) / tr.step_energy[0])
    return {"passed": drift <= 1e-10, "max_relative_drift": drift, "steps": steps}


def dissipativity(cfg: ExperimentConfig, vectors: int = 100) -> dict:
    gen = generator(_system(cfg, n=min(cfg.n_elements, 40)))
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(vectors):
        x = rng.standard_normal(gen.A.shape[0])
        lhs, rhs = gen.dissipativity(x)
        worst = max(worst, abs(lhs - rhs) / max(gen.norm(x) ** 2, 1e-300))
    return {"passed": worst <= 1e-12, "max_relative_error": worst, "vectors": vectors}


def oracle(cfg: ExperimentConfig, n: int = 100) -> dict:
    p = cfg.params.replace(gamma=0.0)
    rep = spectrum(generator(_system(cfg, n=n, params=p)), band=None)
    ev = rep.eigenvalues[:6]
    roots = np.concatenate([characteristic_roots_oracle(p, f, 6, conjugates=True) for f in ("V", "P")])
    err = float(max(np.min(np.abs(roots - e)) / abs(e) for e in ev))
    return {"passed": err <= 1e-3, "max_relative_error": err, "n": n, "eigenvalues": len(ev)}


def multiplier(cfg: ExperimentConfig, t_end: float = 2.0) -> dict:
    s = _system(cfg, n=min(cfg.n_elements, 50))
    out = []
    for sys_ in (s, s.conservative()):
        tr = run(sys_, project_initial_data(cfg.initial_condition, sys_), t_end=t_end, record_every=1,
                 backend=cfg.backend)
        r = multiplier_check(tr)
        out.append({"lhs": r.lhs, "bound": r.bound, "satisfied": r.satisfied})
    return {"passed": all(o["satisfied"] for o in out), "runs": out}


def identity(cfg: ExperimentConfig, lam: float = 5.0, n_list=(25, 50, 100)) -> dict:
    res, bounds = [], []
    for n in n_list:
        s = _system(cfg, n=n)
        F = random_forcing(s.mesh, np.random.default_rng(cfg.seed))
        r = resolvent_identity_check(s, lam, F)
        res.append(r.residual)
        bounds.append(r.bound_holds and r.dissipation_holds)
    dec = all(b < a for a, b in zip(res, res[1:]))
    return {"passed": dec and all(bounds), "residuals": res, "decreasing": dec, "bounds_hold": all(bounds)}


def static(cfg: ExperimentConfig, n_list=(25, 50, 100)) -> dict:
    res, ratios = [], []
    for n in n_list:
        s = _system(cfg, n=n)
        r = static_solve(s, random_forcing(s.mesh, np.random.default_rng(cfg.seed)))
        res.append(r.residual)
        ratios.append(r.ratio)
    var = float((max(ratios) - min(ratios)) / max(ratios))
    return {"passed": max(res) <= 1e-10 and var <= 0.1, "residuals": res, "ratios": ratios, "variation": var}


def decoupling(cfg: ExperimentConfig, steps: int = 500) -> dict:
    p = cfg.params.replace(gamma=0.0)
    n = min(cfg.n_elements, 50)
    mesh = build_mesh(n, p.L)
    s = assemble(mesh, p)
    x0 = project_initial_data(cfg.initial_condition, s)
    dt = cfg.dt
    tr = run(s, x0, dt=dt, n_steps=steps, backend=cfg.backend)
    dt = tr.dt
    sv = assemble_scalar(mesh, p.rho, p.alpha1, p.xi1, p.m1)
    sp = assemble_scalar(mesh, p.mu, p.beta, p.xi2, p.m2)
    q, v = s.split(x0)
    tv = run(sv, np.concatenate([q[:n], v[:n]]), dt=dt, n_steps=steps, backend=cfg.backend)
    tp = run(sp, np.concatenate([q[n:], v[n:]]), dt=dt, n_steps=steps, backend=cfg.backend)
    glued = np.hstack([tv.states[:, :n], tp.states[:, :n], tv.states[:, n:], tp.states[:, n:]])
    err = float(np.max(np.abs(glued - tr.states)))
    return {"passed": err <= 1e-12, "max_abs_difference": err, "steps": steps}


SUITES = {
    "energy": energy,
    "conservative": conservative,
    "dissipativity": dissipativity,
    "oracle": oracle,
    "multiplier": multiplier,
    "identity": identity,
    "static": static,
    "decoupling": decoupling,
}


def run_suites(cfg: ExperimentConfig, names) -> dict:
    if names in ("all", None):
        names = list(SUITES)
    elif isinstance(names, str):
        names = [names]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(", ".join(unknown))
    results = {name: SUITES[name](cfg) for name in names}
    return {"passed": all(r["passed"] for r in results.values()), "suites": results}
