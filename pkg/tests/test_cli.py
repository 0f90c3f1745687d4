import csv
import json
import os
from pathlib import Path

import numpy as np
import pytest

from v2vchan.channel import load_tensor
from v2vchan.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from v2vchan.scenarios import data_path


@pytest.fixture
def run_dir(tmp_path):
    """A small, fast free-space-ish run: ground-only scene, short drive."""
    scene = {
        "ground": {"extent": [-200, -200, 200, 200], "material": "asphalt"},
    }
    scene_path = tmp_path / "scene.json"
    scene_path.write_text(json.dumps(scene))

    def traj(path, x0, vx):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t", "x", "y", "z", "vx", "vy", "vz"])
            for k in range(11):
                t = k * 0.01
                w.writerow([t, x0 + vx * t, 0.0, 1.5, vx, 0.0, 0.0])

    traj(tmp_path / "tx.csv", 0.0, 0.0)
    traj(tmp_path / "rx.csv", 60.0, -10.0)
    cfg = {
        "scene": str(scene_path),
        "tx_trajectory": str(tmp_path / "tx.csv"),
        "rx_trajectory": str(tmp_path / "rx.csv"),
        "output_dir": str(tmp_path / "out"),
        "n_freq_bins": 129,
        "fine_dt": 1e-3,
        "coarse_trace_dt": 0.01,
        "max_order": 1,
        "enable_diffuse": False,
        "n_avg": 5,
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    return tmp_path, cfg_path


class TestTraceCommand:
    def test_trace_writes_one_dump_per_step(self, run_dir):
        tmp, cfg = run_dir
        assert main(["trace", "-c", str(cfg)]) == EXIT_OK
        dumps = sorted((tmp / "out" / "trace").glob("paths_*.csv"))
        assert len(dumps) == 11
        for d in dumps:
            rows = d.read_text().strip().splitlines()
            assert rows[0].startswith("snapshot_t,kind,order,length_m,delay_s,gain_db")
            los_rows = [r for r in rows[1:] if ",los," in r]
            assert len(los_rows) == 1

    def test_rerun_byte_identical(self, run_dir):
        tmp, cfg = run_dir
        assert main(["trace", "-c", str(cfg)]) == EXIT_OK
        first = {p.name: p.read_bytes() for p in (tmp / "out" / "trace").glob("*.csv")}
        assert main(["trace", "-c", str(cfg)]) == EXIT_OK
        second = {p.name: p.read_bytes() for p in (tmp / "out" / "trace").glob("*.csv")}
        assert first == second


class TestSynthesizeCommand:
    def test_tensor_written_with_header(self, run_dir):
        tmp, cfg = run_dir
        assert main(["synthesize", "-c", str(cfg)]) == EXIT_OK
        t = load_tensor(tmp / "out" / "channel.v2vc")
        assert t.n_time == 100            # 0.1 s / 1 ms
        assert (t.m_rx, t.m_tx) == (4, 4)
        assert t.n_bins == 129
        assert t.carrier_frequency == 5.9e9
        assert (tmp / "out" / "los_labels.csv").exists()

    def test_tensor_reread_bit_identical(self, run_dir):
        tmp, cfg = run_dir
        main(["synthesize", "-c", str(cfg)])
        a = (tmp / "out" / "channel.v2vc").read_bytes()
        main(["synthesize", "-c", str(cfg)])
        b = (tmp / "out" / "channel.v2vc").read_bytes()
        assert a == b


class TestAnalyzeCommand:
    def test_documented_outputs_exactly(self, run_dir):
        tmp, cfg = run_dir
        main(["synthesize", "-c", str(cfg)])
        out = tmp / "metrics"
        assert main(["analyze", str(tmp / "out" / "channel.v2vc"), "-c", str(cfg),
                     "-o", str(out)]) == EXIT_OK
        expected = {"gain.csv", "delay_spread.csv", "doppler_spread.csv",
                    "eigenvalues.csv", "correlation_tx.csv", "correlation_rx.csv",
                    "apdp.csv", "dsd.csv"}
        assert {p.name for p in out.iterdir()} == expected

    def test_static_run_zero_doppler(self, run_dir, tmp_path):
        # both vehicles parked: static channel, Doppler spread ~ 0
        tmp, cfg = run_dir
        doc = json.loads(cfg.read_text())
        rx = Path(doc["rx_trajectory"])
        rows = rx.read_text().splitlines()
        hdr, first = rows[0], rows[1].split(",")
        static_rows = [hdr]
        for k in range(11):
            static_rows.append(",".join([str(k * 0.01), first[1], first[2], first[3],
                                         "0.0", "0.0", "0.0"]))
        rx.write_text("\n".join(static_rows) + "\n")
        main(["synthesize", "-c", str(cfg)])
        out = tmp / "m2"
        main(["analyze", str(tmp / "out" / "channel.v2vc"), "-c", str(cfg), "-o", str(out)])
        rows = (out / "doppler_spread.csv").read_text().strip().splitlines()[1:]
        for r in rows:
            val = float(r.split(",")[1])
            assert val < 1.0  # Hz

    def test_gain_matches_friis(self, run_dir):
        # antenna-free variant: isotropic arrays, ground displaced far below
        # so its specular point misses the small polygon -> pure free space
        tmp, cfg = run_dir
        doc = json.loads(cfg.read_text())
        scene = {"ground": {"vertices": [[-1, -1, -500], [1, -1, -500],
                                         [1, 1, -500], [-1, 1, -500]],
                            "material": "asphalt"}}
        (tmp / "fs.json").write_text(json.dumps(scene))
        doc["scene"] = str(tmp / "fs.json")
        doc["array_type"] = "isotropic"
        doc["output_dir"] = str(tmp / "fsout")
        fs_cfg = tmp / "fs_run.json"
        fs_cfg.write_text(json.dumps(doc))
        main(["synthesize", "-c", str(fs_cfg)])
        out = tmp / "m3"
        main(["analyze", str(tmp / "fsout" / "channel.v2vc"), "-c", str(fs_cfg),
              "-o", str(out)])
        rows = (out / "gain.csv").read_text().strip().splitlines()[1:]
        lam = 299792458.0 / 5.9e9
        for row in rows:
            t0, g0 = (float(x) for x in row.split(","))
            d = 60.0 - 10.0 * t0
            friis = 20 * np.log10(lam / (4 * np.pi * d))
            assert abs(g0 - friis) < 0.1

    def test_malformed_tensor_exit_3(self, run_dir):
        tmp, cfg = run_dir
        bad = tmp / "bad.v2vc"
        bad.write_bytes(b"JUNKJUNKJUNK")
        assert main(["analyze", str(bad), "-c", str(cfg)]) == EXIT_DATA


class TestCompareCommand:
    def _metrics(self, run_dir, out_name):
        tmp, cfg = run_dir
        main(["synthesize", "-c", str(cfg)])
        out = tmp / out_name
        main(["analyze", str(tmp / "out" / "channel.v2vc"), "-c", str(cfg), "-o", str(out)])
        return tmp, cfg, out

    def test_self_compare_all_zero(self, run_dir):
        tmp, cfg, out = self._metrics(run_dir, "mA")
        rep = tmp / "rep"
        assert main(["compare", str(out), str(out), "-o", str(rep)]) == EXIT_OK
        rows = list(csv.reader((rep / "report.csv").open()))[1:]
        assert rows, "report should have rows"
        for name, seg, mu, sigma, n in rows:
            assert float(mu) == 0.0
            assert float(sigma) == 0.0

    def test_shifted_gain_mean_error(self, run_dir):
        tmp, cfg, out = self._metrics(run_dir, "mB")
        shifted = tmp / "mB_shift"
        shifted.mkdir()
        for p in out.iterdir():
            if p.name == "gain.csv":
                rows = p.read_text().strip().splitlines()
                new = [rows[0]]
                for r in rows[1:]:
                    t, v = r.split(",")
                    new.append(f"{t},{float(v) - 3.0}")
                (shifted / p.name).write_text("\n".join(new) + "\n")
            else:
                (shifted / p.name).write_bytes(p.read_bytes())
        rep = tmp / "rep2"
        assert main(["compare", str(out), str(shifted), "-o", str(rep)]) == EXIT_OK
        rows = list(csv.reader((rep / "report.csv").open()))[1:]
        gain_rows = [r for r in rows if r[0] == "gain"]
        assert gain_rows
        for r in gain_rows:
            assert float(r[2]) == pytest.approx(3.0, abs=1e-9)

    def test_report_rows_match_parameter_list(self, run_dir):
        tmp, cfg, out = self._metrics(run_dir, "mC")
        rep = tmp / "rep3"
        main(["compare", str(out), str(out), "-o", str(rep)])
        rows = list(csv.reader((rep / "report.csv").open()))[1:]
        names = [r[0] for r in rows]
        expected = (["gain", "delay_spread", "doppler_spread"]
                    + [f"lambda_{i}" for i in (1, 2, 3, 4)]
                    + [f"tx_rho_{ij}" for ij in ("12", "13", "14", "23", "24", "34")]
                    + [f"rx_rho_{ij}" for ij in ("12", "13", "14", "23", "24", "34")])
        # every expected parameter appears (segments may drop NaN-only cells)
        assert set(names) == set(expected)

    def test_missing_metric_named_error(self, run_dir, capsys):
        tmp, cfg, out = self._metrics(run_dir, "mD")
        empty = tmp / "empty"
        empty.mkdir()
        assert main(["compare", str(out), str(empty), "-o", str(tmp / "rep4")]) == EXIT_CONFIG
        assert "gain.csv" in capsys.readouterr().err


class TestBundledIntersection:
    def test_los_rows_flip_once_at_corner_clear(self, tmp_path):
        # visibility oracle on the bundled scene: no LOS rows before the
        # corner clears (~4.05 s), exactly one per dump after
        cfg = {
            "scene": str(data_path("intersection_plain.json")),
            "tx_trajectory": str(data_path("tx_trajectory.csv")),
            "rx_trajectory": str(data_path("rx_trajectory.csv")),
            "output_dir": str(tmp_path / "out"),
            "coarse_trace_dt": 0.2,
            "fine_dt": 0.02,
            "max_order": 1,
            "enable_diffuse": False,
        }
        p = tmp_path / "run.json"
        p.write_text(json.dumps(cfg))
        assert main(["trace", "-c", str(p)]) == EXIT_OK
        dumps = sorted((tmp_path / "out" / "trace").glob("paths_*.csv"))
        assert len(dumps) == 31
        los_counts = []
        for d in dumps:
            rows = d.read_text().strip().splitlines()[1:]
            los_counts.append(sum(1 for r in rows if ",los," in r))
        assert all(c in (0, 1) for c in los_counts)
        flips = sum(1 for a, b in zip(los_counts, los_counts[1:]) if a != b)
        assert flips == 1
        assert los_counts[0] == 0 and los_counts[-1] == 1


class TestSceneValidate:
    def test_ok(self, capsys):
        assert main(["scene-validate", str(data_path("intersection_plain.json"))]) == EXIT_OK
        assert "21 surfaces" in capsys.readouterr().out

    def test_bad_file_exit_3(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{nope")
        assert main(["scene-validate", str(p)]) == EXIT_DATA


class TestConfigHandling:
    def test_missing_config_file(self):
        assert main(["trace", "-c", "/nonexistent/run.json"]) == EXIT_CONFIG

    def test_unknown_keys_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"scene": "x", "warp_speed": 9}))
        assert main(["trace", "-c", str(p)]) == EXIT_CONFIG

    def test_flag_overrides_config(self, run_dir):
        tmp, cfg = run_dir
        alt = tmp / "alt_out"
        assert main(["trace", "-c", str(cfg), "-o", str(alt)]) == EXIT_OK
        assert (alt / "trace").exists()

    def test_bad_value_exit_2(self, run_dir):
        tmp, cfg = run_dir
        doc = json.loads(cfg.read_text())
        doc["max_order"] = 9
        bad = tmp / "bad.json"
        bad.write_text(json.dumps(doc))
        assert main(["trace", "-c", str(bad)]) == EXIT_CONFIG

    def test_missing_scene_exit_2(self, run_dir):
        tmp, cfg = run_dir
        doc = json.loads(cfg.read_text())
        doc["scene"] = str(tmp / "no_such.json")
        bad = tmp / "bad2.json"
        bad.write_text(json.dumps(doc))
        assert main(["trace", "-c", str(bad)]) == EXIT_CONFIG

    def test_workers_env_default(self, monkeypatch):
        from v2vchan.pipeline import default_workers
        monkeypatch.setenv("V2VCHAN_WORKERS", "3")
        assert default_workers() == 3
        monkeypatch.setenv("V2VCHAN_WORKERS", "junk")
        assert default_workers() == 1

    def test_workers_flag_same_result(self, run_dir):
        tmp, cfg = run_dir
        main(["trace", "-c", str(cfg), "-o", str(tmp / "w1"), "--workers", "1"])
        main(["trace", "-c", str(cfg), "-o", str(tmp / "w2"), "--workers", "2"])
        a = {p.name: p.read_bytes() for p in (tmp / "w1" / "trace").glob("*.csv")}
        b = {p.name: p.read_bytes() for p in (tmp / "w2" / "trace").glob("*.csv")}
        assert a == b
