import csv
import json
import os

import numpy as np
import pytest

from wkbflow import reduced as tier3
from wkbflow.errors import ConfigInvalid
from wkbflow.experiments import compare as cmp
from wkbflow.experiments.checks import run_suite
from wkbflow.experiments.cli import main
from wkbflow.experiments.config import config_from_string, load_config, parse_number
from wkbflow.experiments.presets import build_initial
from wkbflow.experiments.runner import run, simulate
from wkbflow.snapshot import read_snapshot
from wkbflow.torus import TorusGrid

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")

SMALL = """
[run]
tier = {tier}
t_end = {t_end}
output_dir = {out}
diag_every = 5
snapshot_every = 10
[grid]
n_x = 32
n_theta = 16
[wave]
eps = 1/8
[initial]
preset = {preset}
"""


def write_cfg(tmp_path, tier="base", preset="rest", t_end=0.2, extra=""):
    out = tmp_path / "out"
    text = SMALL.format(tier=tier, t_end=t_end, out=out, preset=preset) + extra
    path = tmp_path / f"{tier}.ini"
    path.write_text(text)
    return str(path), out


class TestConfig:
    def test_parse_number(self):
        assert parse_number("1/16") == 1 / 16
        assert parse_number("2.5e-3") == 2.5e-3
        with pytest.raises(ConfigInvalid):
            parse_number("abc")

    def test_shipped_configs_load(self):
        for name in sorted(os.listdir(CONFIGS)):
            cfg = load_config(os.path.join(CONFIGS, name))
            assert cfg.tier in ("base", "extended", "reduced")

    def test_defaults_and_values(self):
        cfg = config_from_string("[run]\ntier = reduced\ncfl = 0.3\n[wave]\neps = 1/32\n"
                                 "[initial]\npreset = wave_packet\naction = 0.01\n")
        assert cfg.tier == "reduced" and cfg.cfl_value == 0.3 and cfg.eps == 1 / 32
        assert cfg.initial["action"] == 0.01
        assert cfg.grid.n_x == (128,)

    @pytest.mark.parametrize("text", [
        "[run]\nbogus = 1\n",
        "[nonsense]\n",
        "[run]\ntier = quantum\n",
        "[run]\ndt = 0.1\ncfl = 0.2\n",
        "[run]\ndt = -1\n",
        "[initial]\npreset = nope\n",
        "[initial]\npreset = rest\naction = 1\n",
        "[grid]\nn_x = x\n",
        "[hamiltonian]\nhamiltonian = polytropic\n",
        "[hamiltonian]\nc_s = -1\n",
        "[wave]\neps = 0\n",
    ])
    def test_invalid(self, text):
        with pytest.raises(ConfigInvalid):
            config_from_string(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            load_config(str(tmp_path / "missing.ini"))


class TestPresets:
    def test_tiers_consistent(self):
        g = TorusGrid(1, (2 * np.pi,), (64,), 16)
        init = {"preset": "wave_packet", "action": 0.02, "mean_amplitude": 0.05}
        P = load_config(os.path.join(CONFIGS, "reduced_packet.ini")).params
        red = build_initial("reduced", g, P, 1 / 8, init)
        ext = build_initial("extended", g, P, 1 / 8, init)
        base = build_initial("base", g, P, 1 / 8, init)
        assert np.allclose(ext.rho.harmonics[..., 0].real, red.rho_bar.values, atol=1e-14)
        I = tier3.wave_action_from_fluctuations(red.rho_bar, _rho_hat(ext), red.S).values
        assert np.max(np.abs(I - red.action.values)) < 1e-12
        # sampling at theta = S/eps keeps the mass up to the packet's spectrum at k/eps
        m3 = g.integrate(red.rho_bar.values)
        assert abs(g.integrate(base.rho.values) / m3 - 1) < 1e-5

    def test_winding_must_match_eps(self):
        g = TorusGrid(1, (2 * np.pi,), (32,), 16)
        with pytest.raises(ConfigInvalid):
            build_initial("extended", g, load_config(os.path.join(CONFIGS, "base_acoustic.ini")).params,
                          0.3, {"preset": "wave_packet"})

    def test_amplitude_guard(self):
        g = TorusGrid(1, (2 * np.pi,), (32,), 16)
        P = load_config(os.path.join(CONFIGS, "base_acoustic.ini")).params
        with pytest.raises(ConfigInvalid):
            build_initial("extended", g, P, 1 / 2, {"preset": "wave_packet", "action": 5.0})


def _rho_hat(ext):
    from wkbflow.slow_manifold import split_state
    return split_state(ext).rho_hat


class TestRunner:
    def test_rest_run_artifacts(self, tmp_path):
        path, out = write_cfg(tmp_path)
        code, report = run(load_config(path))
        assert code == 0 and report["status"] == "ok"
        with open(out / "base_timeseries.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "mass", "momentum", "energy", "circulation"]
        data = np.array(rows[1:], dtype=float)
        assert data[-1, 0] == pytest.approx(0.2, abs=1e-14)
        for col in range(1, 5):
            assert np.ptp(data[:, col]) < 1e-12
        assert len(rows[1][1].replace("-", "").replace(".", "")) >= 15
        grid, fields = read_snapshot(report["snapshots"][-1])
        assert grid.n_x == (32,) and set(fields) >= {"rho", "p"}
        assert json.load(open(out / "base_report.json"))["status"] == "ok"

    @pytest.mark.parametrize("tier", ["extended", "reduced"])
    def test_packet_runs(self, tmp_path, tier):
        path, out = write_cfg(tmp_path, tier=tier, preset="wave_packet", t_end=0.1)
        code, report = run(load_config(path))
        assert code == 0
        with open(out / f"{tier}_timeseries.csv") as fh:
            header = next(csv.reader(fh))
        assert header[:3] == ["t", "mass", "momentum"] and "min_grad_S" in header

    def test_deterministic_bytes(self, tmp_path):
        outs = []
        for i in range(2):
            d = tmp_path / str(i)
            d.mkdir()
            path, out = write_cfg(d, preset="random_smooth", extra="")
            run(load_config(path))
            outs.append((out / "base_timeseries.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_solver_error_reported(self, tmp_path):
        path, out = write_cfg(tmp_path, extra="")
        cfg = load_config(path)
        cfg.dt = 5.0
        cfg.t_end = 10.0
        code, report = run(cfg)
        assert code == 3 and report["status"] == "solver_error"
        assert report["error"]["field"] == "dt"

    def test_simulate_fixed_dt_lands_on_t_end(self, tmp_path):
        path, _ = write_cfg(tmp_path)
        cfg = load_config(path)
        cfg.dt = 0.03
        state, rows, cols = simulate(cfg)
        assert state.t == 0.2


class TestCli:
    def test_run_ok(self, tmp_path, capsys):
        path, out = write_cfg(tmp_path)
        assert main(["run-base", "--config", path]) == 0
        assert (out / "base_timeseries.csv").exists()

    def test_output_dir_override(self, tmp_path):
        path, _ = write_cfg(tmp_path, tier="base", preset="wave_packet", t_end=0.05)
        assert main(["run-reduced", "--config", path, "--output-dir", str(tmp_path / "o2")]) == 0
        assert (tmp_path / "o2" / "reduced_timeseries.csv").exists()

    def test_config_error(self, tmp_path, capsys):
        p = tmp_path / "bad.ini"
        p.write_text("[run]\nbogus = 1\n")
        assert main(["run-base", "--config", str(p)]) == 2
        assert "run.bogus" in capsys.readouterr().err

    def test_solver_error(self, tmp_path):
        path, _ = write_cfg(tmp_path, extra="")
        text = open(path).read().replace("t_end = 0.2", "t_end = 10\ndt = 5")
        open(path, "w").write(text)
        assert main(["run-base", "--config", path]) == 3

    def test_check_suite(self, tmp_path):
        out = tmp_path / "ops.json"
        assert main(["check", "operators", "--output", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["passed"] and all({"name", "value", "threshold", "passed"} <= set(e)
                                     for e in rep["entries"])

    def test_convergence_threshold_miss(self, tmp_path):
        path, _ = write_cfg(tmp_path, preset="acoustic", t_end=0.1)
        assert main(["convergence", "--config", path, "--levels", "3", "--min-order", "50"]) == 4

    def test_convergence_order(self, tmp_path):
        path, _ = write_cfg(tmp_path, preset="random_smooth", t_end=0.5)
        out = tmp_path / "conv.json"
        assert main(["convergence", "--config", path, "--levels", "4", "--output", str(out)]) == 0
        assert min(json.loads(out.read_text())["observed_orders"]) > 3.5

    def test_compare_mismatch(self, tmp_path):
        a, _ = write_cfg(tmp_path, preset="wave_packet")
        b = tmp_path / "b.ini"
        b.write_text(open(a).read().replace("preset = wave_packet", "preset = rest"))
        assert main(["compare", "--config", a, "--config-reduced", str(b)]) == 2


class TestCompare:
    def test_box_filter_and_resample(self):
        g = TorusGrid(1, (2 * np.pi,), (64,), 8)
        x = g.coords[0]
        f = np.cos(3 * x)
        w = 0.4
        assert np.allclose(cmp.box_filter(f, g, w), np.sinc(3 * w / (2 * np.pi)) * f, atol=1e-14)
        assert np.allclose(cmp.resample(f, 64, 32), np.cos(3 * x[::2]), atol=1e-14)

    def test_wave_free_floor(self):
        setup = cmp.CompareSetup(length=2 * np.pi, n_x=64, n_theta=8, t_end=0.2, n_checkpoints=2,
                                 initial={"preset": "wave_packet", "action": 0.0,
                                          "mean_amplitude": 0.05})
        rep = cmp.compare(setup, [1 / 8, 1 / 16])
        # only the time-integration error of the two tiers' step sequences remains
        assert all(r["error"] < 1e-8 for r in rep["rows"])
        assert "engineering" in rep["threshold_note"]

    def test_thread_cap(self, monkeypatch):
        monkeypatch.setenv("WKBFLOW_THREADS", "1")
        assert cmp.max_workers() == 1
        setup = cmp.CompareSetup(length=2 * np.pi, n_x=64, n_theta=8, t_end=0.1, n_checkpoints=1,
                                 initial={"preset": "wave_packet", "action": 0.05})
        serial = cmp.compare(setup, [1 / 8, 1 / 16])
        monkeypatch.setenv("WKBFLOW_THREADS", "4")
        parallel = cmp.compare(setup, [1 / 8, 1 / 16])
        assert [r["error"] for r in serial["rows"]] == [r["error"] for r in parallel["rows"]]


def test_check_report_shape():
    rep = run_suite("hamiltonian")
    assert rep["suite"] == "hamiltonian" and rep["passed"]
