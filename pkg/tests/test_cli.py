import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from dipolecavity import cli
from dipolecavity.emission import ll_factor
from dipolecavity.errors import ColumnNotFound, ConfigError

BASE = {
    "scenario": "molecule-in-vacuum",
    "emitter": {"k0": 1.0, "alpha0": 1e-3},
    "geometry": {"R0": 0.05, "R1": 0.2},
    "media": {"eps1": 1.05},
}


def _write(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def _cfg(**changes):
    cfg = json.loads(json.dumps(BASE))
    cfg.update(changes)
    return cfg


class TestConfig:
    def test_r1_below_r0_names_key(self):
        with pytest.raises(ConfigError) as exc:
            cli.load_config(_cfg(geometry={"R0": 0.2, "R1": 0.1}))
        assert exc.value.key == "geometry.R1"
        assert "geometry.R1" in str(exc.value)

    @pytest.mark.parametrize("cfg, key", [
        (_cfg(scenario="nope"), "scenario"),
        (_cfg(colour="red"), "colour"),
        (_cfg(emitter={"k0": 1.0}), "emitter.alpha0"),
        (_cfg(emitter={"k0": -1.0, "alpha0": 1e-3}), "emitter.k0"),
        (_cfg(emitter={"k0": 1.0, "alpha0": "big"}), "emitter.alpha0"),
        (_cfg(geometry={"R0": 0.05, "R1": 0.2, "R2": 1.0}), "geometry.R2"),
        (_cfg(media={}), "media.eps1"),
        (_cfg(scenario="molecule-in-medium"), "media.eps2"),
        (_cfg(numerics={"method": "guess"}), "numerics.method"),
        (_cfg(scenario="bare-cavity", media={"eps2": 2.0},
              numerics={"method": "paper-expansion"}), "numerics.method"),
        (_cfg(output={"format": "xlsx"}), "output.format"),
        (_cfg(sweep=[{"path": "media.eps3", "values": [1.0]}]), "sweep[0].path"),
        (_cfg(sweep=[{"path": "media.eps1", "values": []}]), "sweep[0].values"),
        (_cfg(sweep=[{"path": "media.eps1", "start": 1.0, "stop": 2.0, "num": 0}]),
         "sweep[0].num"),
    ])
    def test_errors_name_the_key(self, cfg, key):
        with pytest.raises(ConfigError) as exc:
            cli.load_config(cfg)
        assert exc.value.key == key

    def test_sweep_is_cartesian_first_outermost(self):
        cfg = _cfg(sweep=[{"path": "media.eps1", "values": [1.01, 1.02]},
                          {"path": "geometry.R1", "start": 0.1, "stop": 0.2, "num": 3}])
        pts = cli.load_config(cfg)["points"]
        assert len(pts) == 6
        assert [p["media.eps1"] for p in pts] == [1.01] * 3 + [1.02] * 3
        assert [p["geometry.R1"] for p in pts[:3]] == pytest.approx([0.1, 0.15, 0.2])

    def test_dimensionless_radii_and_dipole(self):
        cfg = _cfg(emitter={"k0": 2.0, "mu": 1e-29}, geometry={"kR0": 0.1, "kR1": 0.4})
        p = cli.load_config(cfg)["points"][0]
        assert p["geometry.R0"] == pytest.approx(0.05) and p["geometry.R1"] == pytest.approx(0.2)
        assert p["emitter.alpha0"] > 0

    def test_bad_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            cli.load_config(bad)
        with pytest.raises(ConfigError):
            cli.load_config(tmp_path / "missing.json")

    def test_worker_env(self, monkeypatch):
        monkeypatch.delenv(cli.WORKERS_ENV, raising=False)
        assert cli.worker_count() == 1
        monkeypatch.setenv(cli.WORKERS_ENV, "3")
        assert cli.worker_count() == 3
        monkeypatch.setenv(cli.WORKERS_ENV, "many")
        with pytest.raises(ConfigError):
            cli.worker_count()


class TestRun:
    def test_eps1_sweep(self, tmp_path):
        cfg = _cfg(sweep=[{"path": "media.eps1", "start": 1.01, "stop": 1.1, "num": 10}])
        out = tmp_path / "sweep.csv"
        assert cli.run(_write(tmp_path, cfg), str(out)) == 0
        rows = cli.read_results(out)
        assert len(rows) == 10
        rates = np.array([r["Gamma_over_Gamma0"] for r in rows])
        assert np.all(np.abs(rates - 1.0) < 0.05)
        assert np.all(np.diff(rates) < 0) or np.all(np.diff(rates) > 0)

    def test_vacuum_row(self, tmp_path):
        cfg = _cfg(media={"eps1": 1.0, "eps2": 1.0})
        out = tmp_path / "vac.csv"
        assert cli.run(_write(tmp_path, cfg), str(out)) == 0
        (row,) = cli.read_results(out)
        assert row["Gamma_over_Gamma0"] == pytest.approx(1.0, abs=1e-8)
        assert row["k_res"] == pytest.approx(1.0, abs=1e-8)
        assert row["error"] == ""

    def test_file_layout(self, tmp_path):
        out = tmp_path / "r.csv"
        cli.run(_write(tmp_path, _cfg()), str(out))
        raw = out.read_bytes()
        raw.decode("utf-8")
        lines = raw.decode("utf-8").splitlines()
        assert lines[0] == cli.SCHEMA_TAG + cli.SCHEMA_VERSION
        assert lines[1].startswith(cli.TIMESTAMP_TAG)
        header = next(csv.reader([lines[2]]))
        assert tuple(header) == cli.COLUMNS
        cell = next(csv.reader([lines[3]]))[header.index("k_res")]
        mantissa = cell.split("e")[0].replace("-", "").replace(".", "")
        assert len(mantissa) == 17

    def test_output_path_from_config(self, tmp_path):
        cfg = _cfg(output={"path": "from_cfg.json", "format": "json"})
        assert cli.run(_write(tmp_path, cfg)) == 0
        data = json.loads((tmp_path / "from_cfg.json").read_text(encoding="utf-8"))
        assert data["schema"] == cli.SCHEMA_VERSION
        assert len(data["rows"]) == 1

    def test_failed_row_exit_one(self, tmp_path, capsys):
        cfg = _cfg(geometry={"R0": 0.05, "R1": 0.4}, media={"eps1": 5.0})
        out = tmp_path / "fail.csv"
        assert cli.run(_write(tmp_path, cfg), str(out)) == 1
        (row,) = cli.read_results(out)
        assert row["error"].startswith("ResummationDiverges")
        assert row["k_res"] is None
        assert "failed: 1" in capsys.readouterr().out

    def test_scenarios(self, tmp_path):
        for scen, media in (("bare-cavity", {"eps2": 2.25}),
                            ("molecule-in-medium", {"eps1": 1.5, "eps2": 2.25})):
            cfg = _cfg(scenario=scen, media=media, geometry={"R0": 1e-3, "R1": 1e-3})
            out = tmp_path / f"{scen}.csv"
            assert cli.run(_write(tmp_path, cfg, f"{scen}.json"), str(out)) == 0
            (row,) = cli.read_results(out)
            assert row["Gamma_P_over_Gamma0"] == pytest.approx(ll_factor(2.25), rel=1e-4)
            assert math.isnan(row["Gamma_over_Gamma0"])


class TestDeterminism:
    def test_identical_modulo_timestamp(self, tmp_path, monkeypatch):
        cfg = _cfg(sweep=[{"path": "media.eps1", "values": [1.02, 1.04, 1.06]}])
        path = _write(tmp_path, cfg)
        texts = []
        for i, workers in enumerate(("1", "2")):
            monkeypatch.setenv(cli.WORKERS_ENV, workers)
            out = tmp_path / f"out{i}.csv"
            assert cli.run(path, str(out)) == 0
            texts.append(out.read_text(encoding="utf-8"))
        assert cli.strip_timestamp(texts[0]) == cli.strip_timestamp(texts[1])
        assert cli.TIMESTAMP_TAG not in cli.strip_timestamp(texts[0])

    def test_row_round_trip(self, tmp_path):
        out = tmp_path / "r.csv"
        cli.run(_write(tmp_path, _cfg()), str(out))
        (row,) = cli.read_results(out)
        again = cli.evaluate_point(cli.load_config(cli.config_from_row(row))["points"][0])
        for c in cli.NUMERIC_COLUMNS:
            if row[c] is None or (isinstance(row[c], float) and math.isnan(row[c])):
                continue
            assert again[c] == pytest.approx(row[c], rel=1e-12, abs=1e-300)


class TestPlot:
    def _results(self, tmp_path, xs, ys):
        rows = []
        for i, (x, y) in enumerate(zip(xs, ys)):
            p = cli.load_config(_cfg(scenario="bare-cavity", media={"eps2": 1.0}))["points"][0]
            row = {c: p.get(c) for c in cli.INPUT_COLUMNS}
            row.update({"media.eps2": x, "Gamma_P_over_Gamma0": y, "error": "", "warnings": ""})
            rows.append(row)
        path = tmp_path / "res.csv"
        cli.write_results(rows, path)
        return path

    def test_sorted_and_stable(self, tmp_path):
        path = self._results(tmp_path, [2.0, 1.0, 2.0, 1.5], [1.0, 2.0, 3.0, 4.0])
        out = tmp_path / "curve.txt"
        assert cli.emit_plot_data(path, "media.eps2", "Gamma_P_over_Gamma0", out) == 4
        pairs = [tuple(map(float, ln.split())) for ln in out.read_text().splitlines()]
        assert pairs == [(1.0, 2.0), (1.5, 4.0), (2.0, 1.0), (2.0, 3.0)]

    def test_ll_curve(self, tmp_path):
        eps = [2.25, 1.2, 1.8]
        path = self._results(tmp_path, eps, [ll_factor(e) for e in eps])
        out = tmp_path / "curve.txt"
        cli.emit_plot_data(path, "media.eps2", "Gamma_P_over_Gamma0", out)
        data = np.loadtxt(out)
        np.testing.assert_allclose(data[:, 1], [ll_factor(e) for e in data[:, 0]], rtol=1e-15)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        cli.write_results([], path)
        out = tmp_path / "curve.txt"
        with pytest.warns(UserWarning):
            assert cli.emit_plot_data(path, "media.eps2", "k_res", out) == 0
        assert out.read_text() == ""

    def test_missing_column(self, tmp_path):
        path = self._results(tmp_path, [1.0], [1.0])
        with pytest.raises(ColumnNotFound):
            cli.emit_plot_data(path, "media.eps9", "k_res", tmp_path / "c.txt")


class TestMain:
    def test_exit_codes(self, tmp_path, capsys):
        good = _write(tmp_path, _cfg(), "good.json")
        bad = _write(tmp_path, _cfg(geometry={"R0": 0.2, "R1": 0.1}), "bad.json")
        assert cli.main(["run", str(good), "-o", str(tmp_path / "g.csv")]) == 0
        assert cli.main(["run", str(bad)]) == 2
        assert "geometry.R1" in capsys.readouterr().err
        assert cli.main(["plot", str(tmp_path / "g.csv"), "--x", "nope", "--y", "k_res",
                         "-o", str(tmp_path / "p.txt")]) == 2
        assert cli.main(["plot", str(tmp_path / "g.csv"), "--x", "media.eps1", "--y", "k_res",
                         "-o", str(tmp_path / "p.txt")]) == 0

    def test_module_entry_point(self, tmp_path):
        bad = _write(tmp_path, _cfg(geometry={"R0": 0.2, "R1": 0.1}), "bad.json")
        proc = subprocess.run([sys.executable, "-m", "dipolecavity", "run", str(bad)],
                              capture_output=True, text=True)
        assert proc.returncode == 2
        assert "geometry.R1" in proc.stderr

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2
