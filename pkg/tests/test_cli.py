from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest

from edge_dynamics import data_gen as dg
from edge_dynamics.cli import (EXIT_DATA, EXIT_OK, EXIT_PARAM, bundled_manifests, main,
                               parse_manifest)
from edge_dynamics.csvio import column, read_csv, write_columns, write_csv

SMALL_TRAIN = ["train", "--d", "20", "--m", "5", "--n", "8", "--steps", "300", "--n-test", "50"]


def footer(path) -> dict:
    out = {}
    for line in path.read_text().splitlines():
        if line.startswith("# ") and "=" in line:
            k, v = line[2:].split("=", 1)
            out[k] = v
    return out


class TestCsvIo:
    def test_round_trip(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["# tool=x"], ["a", "b", "flag"],
                         [(1, np.float64(0.1), "ok"), (2, 1e-300, "neg_inf")], ["done=1"])
        meta, header, rows = read_csv(path)
        assert meta["tool"] == "x" and meta["done"] == "1"
        assert header == ["a", "b", "flag"]
        assert column(header, rows, "b") == [0.1, 1e-300]
        assert column(header, rows, "flag") == ["ok", "neg_inf"]
        assert "np.float64" not in path.read_text()

    def test_columns_match_rows(self, tmp_path):
        a = np.arange(5)
        b = np.linspace(0, 1, 5) ** 3
        write_csv(tmp_path / "r.csv", ["# m=1"], ["a", "b"], zip(a.tolist(), b.tolist()), ["x=2"])
        write_columns(tmp_path / "c.csv", ["# m=1"], ["a", "b"], [a, b], ["x=2"])
        assert (tmp_path / "r.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()


class TestOrbit:
    def test_period_two(self, tmp_path, capsys):
        assert main(["orbit", "--a", "1.2", "--z0", "1.9", "--steps", "200", "--out", str(tmp_path),
                     "--svg"]) == EXIT_OK
        path = tmp_path / "orbit.csv"
        meta, header, rows = read_csv(path)
        assert header == ["step", "z", "abs_z"]
        assert meta["tool"] == "edge-dynamics orbit" and meta["a"] == "1.2"
        assert len(rows) == 201
        f = footer(path)
        assert f["phase"].startswith("Periodic (period 2")
        assert f["parameter_phase"] == "Periodic"
        assert (tmp_path / "orbit.svg").read_text().startswith("<svg")
        assert "Periodic" in capsys.readouterr().out

    def test_divergence_in_footer(self, tmp_path):
        assert main(["orbit", "--a", "2.1", "--z0", "0.1", "--out", str(tmp_path)]) == EXIT_OK
        f = footer(tmp_path / "orbit.csv")
        assert f["diverged"] == "1"
        assert int(f["divergence_step"]) > 0
        assert f["phase"].startswith("Divergent")

    def test_invalid_a(self, tmp_path, capsys):
        assert main(["orbit", "--a", "0", "--out", str(tmp_path)]) == EXIT_PARAM
        assert "--a must be > 0" in capsys.readouterr().err

    def test_deterministic(self, tmp_path):
        for sub in ("x", "y"):
            main(["orbit", "--a", "1.7", "--steps", "500", "--out", str(tmp_path / sub)])
        assert (tmp_path / "x" / "orbit.csv").read_bytes() == (tmp_path / "y" / "orbit.csv").read_bytes()


class TestBifurcation:
    def test_two_cells(self, tmp_path):
        assert main(["bifurcation", "--a-min", "1.0", "--a-max", "1.2", "--steps", "2",
                     "--burn-in", "100", "--keep", "10", "--out", str(tmp_path), "--svg"]) == EXIT_OK
        _, header, rows = read_csv(tmp_path / "bifurcation.csv")
        assert header == ["a", "z"]
        assert sorted({r[0] for r in rows}) == [1.0, 1.2]
        _, header, rows = read_csv(tmp_path / "lyapunov.csv")
        assert header == ["a", "lyapunov", "flag"]
        assert len(rows) == 2
        assert (tmp_path / "lyapunov.svg").exists()

    def test_flags(self, tmp_path):
        main(["bifurcation", "--a-min", "0.5", "--a-max", "2.5", "--steps", "2", "--burn-in", "10",
              "--keep", "20", "--out", str(tmp_path)])
        _, header, rows = read_csv(tmp_path / "lyapunov.csv")
        assert column(header, rows, "flag") == ["neg_inf", "diverged"]

    def test_bad_grid(self, tmp_path):
        assert main(["bifurcation", "--a-min", "1.5", "--a-max", "1.0", "--out", str(tmp_path)]) == EXIT_PARAM


class TestTrain:
    def test_quadnet_monotone(self, tmp_path):
        assert main(SMALL_TRAIN + ["--target-amax", "0.3", "--out", str(tmp_path), "--svg"]) == EXIT_OK
        meta, header, rows = read_csv(tmp_path / "train.csv")
        assert header == ["step", "train_loss", "sharpness", "test_loss_raw", "test_loss_avg"]
        loss = np.array(column(header, rows, "train_loss"))
        live = loss[:-1] > 1e-28
        assert np.all(np.diff(loss)[live] <= 0)
        f = footer(tmp_path / "train.csv")
        assert float(f["a_max"]) == pytest.approx(0.3)
        assert f["phase"].startswith("Monotonic")
        _, zh, zrows = read_csv(tmp_path / "z.csv")
        assert zh == ["step", "i", "z_i"] and len(zrows) == 301 * 8
        for name in ("train_loss.svg", "sharpness.svg", "test_loss.svg"):
            assert (tmp_path / name).exists()

    def test_divergence_is_not_an_error(self, tmp_path):
        assert main(SMALL_TRAIN + ["--target-amax", "2.5", "--out", str(tmp_path)]) == EXIT_OK
        f = footer(tmp_path / "train.csv")
        assert f["diverged"] == "1" and f["phase"].startswith("Divergent")

    def test_pr_single_point(self, tmp_path):
        assert main(["train", "--model", "pr", "--n", "1", "--d", "10", "--gamma", "2", "--c", "0",
                     "--target-amax", "1.2", "--steps", "2000", "--out", str(tmp_path)]) == EXIT_OK
        f = footer(tmp_path / "train.csv")
        assert f["phase"].startswith("Periodic (period 2")

    def test_deterministic(self, tmp_path):
        for sub in ("x", "y"):
            main(SMALL_TRAIN + ["--noise-var", "0.25", "--target-amax", "1.6", "--out", str(tmp_path / sub)])
        for name in ("train.csv", "z.csv"):
            assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()

    def test_saved_dataset(self, tmp_path):
        ds = dg.make_dataset(dg.ORTHONORMAL, 8, 20, 5, 0.0, 2)
        dg.save_dataset(ds, tmp_path / "ds.csv")
        assert main(["train", "--dataset", str(tmp_path / "ds.csv"), "--target-amax", "0.9",
                     "--steps", "50", "--out", str(tmp_path / "o")]) == EXIT_OK
        assert main(["train", "--dataset", str(tmp_path / "none.csv"), "--target-amax", "0.9",
                     "--out", str(tmp_path / "o")]) == EXIT_DATA

    def test_corrupt_dataset(self, tmp_path, capsys):
        (tmp_path / "bad.csv").write_text("# kind=gaussian\n# seed=0\n")
        assert main(["train", "--dataset", str(tmp_path / "bad.csv"), "--eta", "1",
                     "--out", str(tmp_path)]) == EXIT_DATA
        assert "missing header field" in capsys.readouterr().err

    def test_gaussian_eta_fraction(self, tmp_path):
        assert main(["train", "--data", "gaussian", "--d", "20", "--m", "3", "--n", "40",
                     "--eta-fraction", "0.6", "--trial-steps", "100", "--steps", "100",
                     "--out", str(tmp_path)]) == EXIT_OK
        f = footer(tmp_path / "train.csv")
        assert f["orthogonal"] == "0" and f["phase"].startswith("n/a")
        _, header, rows = read_csv(tmp_path / "train.csv")
        assert all(np.isnan(column(header, rows, "sharpness")))

    @pytest.mark.parametrize("extra", [["--target-amax", "-1"], ["--eta", "0"],
                                       ["--target-amax", "1", "--noise-var", "-1"],
                                       ["--target-amax", "1", "--n", "30"]])
    def test_parameter_errors(self, tmp_path, extra):
        assert main(SMALL_TRAIN + extra + ["--out", str(tmp_path)]) == EXIT_PARAM

    def test_needs_step_size(self, tmp_path):
        assert main(SMALL_TRAIN + ["--out", str(tmp_path)]) == EXIT_PARAM


class TestPhase:
    def test_chaotic(self, capsys):
        assert main(["phase", "--a", "1.6"]) == EXIT_OK
        out = capsys.readouterr().out.strip()
        assert out.startswith("Chaotic (witness x0=")
        assert out.endswith("a* estimate 1.5981)")

    def test_catapult(self, capsys):
        main(["phase", "--a", "0.9"])
        assert capsys.readouterr().out.startswith("Catapult")

    def test_trajectory(self, tmp_path, capsys):
        main(["orbit", "--a", "1.2", "--z0", "0.1", "--steps", "2000", "--out", str(tmp_path)])
        capsys.readouterr()
        assert main(["phase", "--trajectory", str(tmp_path / "orbit.csv")]) == EXIT_OK
        assert capsys.readouterr().out.startswith("Periodic (period 2")

    def test_missing_file(self, tmp_path):
        assert main(["phase", "--trajectory", str(tmp_path / "nope.csv")]) == EXIT_DATA

    def test_bad_a(self):
        assert main(["phase", "--a", "-1"]) == EXIT_PARAM
        assert main(["phase", "--a", "1.2", "--a-star", "3"]) == EXIT_PARAM


class TestSweep:
    def test_bundled(self):
        assert {"orthogonal", "nonorthogonal", "cubic_map"} <= set(bundled_manifests())

    def test_orthogonal_grid_has_45_runs(self):
        from importlib import resources
        text = (resources.files("edge_dynamics") / "manifests" / "orthogonal.ini").read_text()
        entries = parse_manifest(text)
        assert len(entries) == 45
        assert all(argv[0] == "train" for _, argv in entries)
        names = {n for n, _ in entries}
        for amax in ("0.3", "0.9", "1.0", "1.2", "1.6"):
            assert f"m25_noise0.25_amax{amax}" in names

    def test_parse_manifest(self, tmp_path):
        text = ("[DEFAULT]\ncommand = orbit\nsteps = 50\n\n"
                "[one]\na = 1.2\nsvg = true\n\n[two]\na = 0.5\nsvg = false\n"
                "[three]\ncommand = train\ndataset = data/x.csv\n")
        entries = dict(parse_manifest(text, tmp_path))
        assert entries["one"] == ["orbit", "--a", "1.2", "--svg", "--steps", "50"]
        assert "--svg" not in entries["two"]
        assert str(tmp_path / "data/x.csv") in entries["three"]

    def test_runs_entries(self, tmp_path, capsys):
        manifest = tmp_path / "m.ini"
        manifest.write_text("[DEFAULT]\ncommand = orbit\nsteps = 100\n\n[p2]\na = 1.2\n\n[bad]\na = -1\n")
        code = main(["sweep", str(manifest), "--out", str(tmp_path / "out"), "--threads", "1"])
        assert code == EXIT_PARAM
        _, header, rows = read_csv(tmp_path / "out" / "summary.csv")
        status = dict(zip(column(header, rows, "entry"), column(header, rows, "status")))
        assert status == {"p2": "ok", "bad": "failed"}
        assert (tmp_path / "out" / "p2" / "orbit.csv").exists()
        assert main(["sweep", str(manifest), "--only", "p2", "--out", str(tmp_path / "o2"),
                     "--threads", "1"]) == EXIT_OK

    def test_empty_manifest(self, tmp_path):
        (tmp_path / "empty.ini").write_text("")
        assert main(["sweep", str(tmp_path / "empty.ini"), "--out", str(tmp_path / "o")]) == EXIT_OK

    def test_missing_dataset(self, tmp_path, capsys):
        manifest = tmp_path / "m.ini"
        manifest.write_text("[x]\ncommand = train\ndataset = missing.csv\neta = 1\n")
        code = main(["sweep", str(manifest), "--out", str(tmp_path / "o"), "--threads", "1"])
        assert code == EXIT_DATA
        assert "missing.csv" in capsys.readouterr().out

    def test_missing_manifest(self, tmp_path):
        assert main(["sweep", str(tmp_path / "nope.ini")]) == EXIT_DATA

    def test_worker_pool_matches_serial(self, tmp_path):
        manifest = tmp_path / "m.ini"
        manifest.write_text("[DEFAULT]\ncommand = orbit\nsteps = 300\n\n[a]\na = 1.2\n[b]\na = 1.7\n")
        main(["sweep", str(manifest), "--out", str(tmp_path / "s"), "--threads", "1"])
        main(["sweep", str(manifest), "--out", str(tmp_path / "p"), "--threads", "2"])
        for name in ("a", "b"):
            assert (tmp_path / "s" / name / "orbit.csv").read_bytes() == \
                (tmp_path / "p" / name / "orbit.csv").read_bytes()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "edge_dynamics", "phase", "--a", "0.5"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.startswith("Monotonic")


def test_short_orbit_is_inconclusive(tmp_path, capsys):
    assert main(["orbit", "--a", "1.2", "--steps", "5", "--out", str(tmp_path)]) == 0
    assert "inconclusive" in capsys.readouterr().out
    assert main(["orbit", "--a", "3.0", "--z0", "2.5", "--steps", "5", "--out", str(tmp_path)]) == 0
    assert "Divergent" in capsys.readouterr().out
