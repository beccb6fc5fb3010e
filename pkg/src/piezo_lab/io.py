"""Deterministic CSV and JSON writers.

Floats are written with 17 significant digits (``%.17g``) so files
round-trip exactly and re-runs are byte-identical.  Non-finite floats become
``null`` in JSON and ``nan``/``inf``/``-inf`` in CSV.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__

TRAJECTORY_HEADER = ("step", "t", "E_total", "E_kin_v", "E_kin_p", "E_elastic", "E_magnetic",
                     "E_tip_v", "E_tip_p", "u", "eta", "Vx_L", "Px_L", "cum_dissipation")

# formulas each output relies on, by descriptive name
FORMULAS = {
    "simulate": {
        "energy": "quadratic energy: kinetic + elastic + coupling + tip kinetic terms",
        "dissipation": "dE/dt = -xi1 |u|^2 - xi2 |eta|^2",
        "integrator": "implicit midpoint, exact discrete energy ledger",
    },
    "spectrum": {
        "generator": "A = [[0, I], [-M^-1 K, -M^-1 D]] in energy-orthonormal coordinates",
        "branch_fit": "log(-Re lambda) vs log|Im lambda|",
    },
    "resolvent": {
        "resolvent": "||(i lambda - A)^-1|| in the energy norm",
        "growth_fit": "log peak norm vs log lambda",
    },
    "abscissa-trend": {"abscissa": "max Re lambda over |Im lambda| <= cutoff"},
    "decay": {"decay_fit": "log E vs log t over the window; tail guard t1 <= 1/(2|abscissa|)"},
    "multiplier-check": {
        "multiplier": "boundary multiplier inequality with q(x) = m x + c",
        "constant": "M = 2 ||q||_inf max{rho, (1 + 2 gamma^2)/alpha1, mu, 2/beta}",
    },
    "resolvent-identity": {
        "identity": "I_V + I_P - N^2 = -R1 - R2 with q(x) = x",
        "estimate": "N^2 <= 2 (I_V + I_P) + c^2 ||F||^2",
        "dissipation": "xi1 |u|^2 + xi2 |eta|^2 <= ||U|| ||F||",
    },
    "static-solve": {"static": "A U = F, zero-frequency resolvent"},
    "verify": {"suites": "energy, conservative, dissipativity, oracle, multiplier, identity, static, decoupling"},
}


def fmt_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_scalar(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return fmt_float(x) if math.isfinite(x) else "null"
    if isinstance(x, str):
        return _json_string(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _json_string(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def to_json(obj, indent: int | None = 2, _level: int = 0) -> str:
    """Serialize with sorted keys and fixed float formatting.

    Complex numbers become ``{"re": .., "im": ..}``; arrays become lists.
    """
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        obj = {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [(_json_string(str(k)), to_json(v, indent, _level + 1)) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        if indent is None:
            return "{" + ", ".join(f"{k}: {v}" for k, v in items) + "}"
        pad = " " * (indent * (_level + 1))
        end = " " * (indent * _level)
        return "{\n" + ",\n".join(f"{pad}{k}: {v}" for k, v in items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [to_json(v, indent, _level + 1) for v in obj]
        if indent is None or all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(parts) + "]"
        pad = " " * (indent * (_level + 1))
        end = " " * (indent * _level)
        return "[\n" + ",\n".join(pad + p for p in parts) + "\n" + end + "]"
    return _json_scalar(obj)


def metadata(config, command: str) -> dict:
    return {
        "artifact": "piezo-lab",
        "version": __version__,
        "command": command,
        "config": config.as_dict() if hasattr(config, "as_dict") else config,
        "formulas": FORMULAS.get(command, {}),
    }


def write_json(path, payload: dict, meta: dict | None = None) -> None:
    doc = dict(payload)
    if meta is not None:
        doc["metadata"] = meta
    Path(path).write_text(to_json(doc) + "\n", encoding="utf-8")


def write_csv(path, header, rows, meta: dict | None = None) -> None:
    """CSV with an optional leading ``# {json}`` metadata line."""
    lines = []
    if meta is not None:
        lines.append("# " + to_json(meta, indent=None))
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(str(int(v)) if isinstance(v, (int, np.integer)) else fmt_float(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def trajectory_rows(trajectory):
    comps = trajectory.energy_components
    total = comps.sum(axis=1)
    steps = np.arange(len(trajectory.times)) * trajectory.record_every
    for k in range(len(trajectory.times)):
        vx, px, u, eta = trajectory.traces[k]
        yield (int(steps[k]), trajectory.times[k], total[k], *comps[k], u, eta, vx, px,
               trajectory.cumulative_dissipation[k])


def read_csv(path):
    """``(metadata or None, header, float array)`` of a file from :func:`write_csv`."""
    meta = None
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if first.startswith("# "):
            meta = json.loads(first[2:])
            header = fh.readline().strip().split(",")
        else:
            header = first.strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return meta, header, data
