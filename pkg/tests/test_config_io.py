import json
import math

import numpy as np
import pytest

from piezo_lab import io, plots
from piezo_lab.config import ConfigError, ExperimentConfig, from_dict, load_config
from piezo_lab.timestepper import run

from conftest import make_system


def test_minimal_config_defaults():
    cfg = from_dict({"n_elements": 100, "t_end": 50})
    assert cfg.n_elements == 100 and cfg.t_end == 50
    assert cfg.params == ExperimentConfig().params


def test_bad_value_named():
    with pytest.raises(ConfigError) as info:
        from_dict({"rho": -1})
    assert "rho" in info.value.problems


def test_unknown_key_named():
    with pytest.raises(ConfigError) as info:
        from_dict({"rho_typo": 1.0})
    assert info.value.problems == {"rho_typo": "unknown key"}


def test_all_problems_reported_together():
    with pytest.raises(ConfigError) as info:
        from_dict({"rho": -1, "mu": "x", "n_elements": 1, "window": [5], "extra": 0, "backend": "gpu"})
    assert set(info.value.problems) == {"rho", "mu", "n_elements", "window", "extra", "backend"}
    d = info.value.as_dict()
    assert d["error"] == "config"
    json.dumps(d)


@pytest.mark.parametrize("raw", [{"dt": 0}, {"t_end": -1}, {"record_every": 0}, {"lmin": 5, "lmax": 1},
                                 {"n_list": [100, 50]}, {"band": [60, 10]}, {"points": 1.5},
                                 {"initial_condition": "kick"}, {"gamma": True}])
def test_rejections(raw):
    with pytest.raises(ConfigError):
        from_dict(raw)


def test_replace_revalidates():
    cfg = ExperimentConfig()
    assert cfg.replace(n_elements=20).n_elements == 20
    with pytest.raises(ConfigError):
        cfg.replace(xi1=-1.0)


def test_load_config(tmp_path):
    assert load_config(None) == ExperimentConfig()
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"gamma": 0.0, "window": [1, 2]}))
    cfg = load_config(p)
    assert cfg.gamma == 0.0 and cfg.window == (1.0, 2.0)
    p.write_text("{bad")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(p)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(p)


def test_to_json_rules():
    text = io.to_json({"b": 1.0, "a": [complex(1, -2), float("nan"), math.inf, 0.1], "c": None, "d": True})
    doc = json.loads(text)
    assert list(doc) == ["a", "b", "c", "d"]
    assert doc["a"] == [{"im": -2.0, "re": 1.0}, None, None, 0.1]
    assert io.fmt_float(0.1) == "0.10000000000000001"
    assert io.fmt_float(float("nan")) == "nan"
    assert io.to_json({"x": np.float64(1.5), "y": np.arange(2)}, indent=None) == '{"x": 1.5, "y": [0, 1]}'


def test_trajectory_csv_roundtrip(tmp_path):
    s = make_system(10)
    tr = run(s, np.linspace(0.1, 1, 40), n_steps=20, record_every=5)
    path = tmp_path / "t.csv"
    io.write_csv(path, io.TRAJECTORY_HEADER, io.trajectory_rows(tr), io.metadata(ExperimentConfig(), "simulate"))
    meta, header, data = io.read_csv(path)
    assert tuple(header) == io.TRAJECTORY_HEADER
    assert meta["command"] == "simulate" and meta["formulas"]
    np.testing.assert_array_equal(data[:, 0], [0, 5, 10, 15, 20])
    np.testing.assert_array_equal(data[:, 2], tr.energy)
    np.testing.assert_array_equal(data[:, -1], tr.cumulative_dissipation)


@pytest.mark.parametrize("kind", plots.KINDS)
def test_plots_deterministic(tmp_path, kind):
    x = np.linspace(1, 50, 40)
    y = 1 / x

    def draw(path):
        if kind == "energy_decay_loglog":
            plots.energy_decay_loglog(x, y, path)
        elif kind == "spectrum_scatter":
            plots.spectrum_scatter(-0.1 + 1j * np.concatenate([x, -x]), path, cutoff=40)
        elif kind == "resolvent_sweep":
            plots.resolvent_sweep(x, x ** 2, path, x[::5], x[::5] ** 2)
        else:
            plots.abscissa_trend([50, 100, 200], [-1e-3, -3e-4, -1e-4], path)
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    draw(a)
    draw(b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().lstrip().startswith("<?xml")


def test_decay_plot_has_guide(tmp_path):
    path = tmp_path / "d.svg"
    t = np.linspace(0, 20, 201)
    plots.energy_decay_loglog(t, 1 / (1 + t), path)
    assert "slope -1 guide" in path.read_text()


def test_empty_plots(tmp_path):
    with pytest.raises(plots.EmptyReportError):
        plots.spectrum_scatter([], tmp_path / "x.svg")
    with pytest.raises(plots.EmptyReportError):
        plots.energy_decay_loglog([0.0], [0.0], tmp_path / "x.svg")
