import json
import os
import subprocess
import sys
import xml.etree.ElementTree as ET

from ampcap.io import read_csv

PARETO_HEADER = ("eta", "capacity", "g_s", "g_l", "L", "lambda", "mu", "p_out", "status")


def run(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "ampcap", *map(str, args)], capture_output=True, text=True, cwd=cwd, timeout=900
    )


def write_config(path, **doc):
    path.write_text(json.dumps(doc))
    return path


def test_help_lists_subcommands():
    r = run("--help")
    assert r.returncode == 0
    for cmd in ("trace", "psd", "gain-profile", "verify"):
        assert cmd in r.stdout


def test_trace_quick_writes_tables(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path / "c.json", psd_etas=[1.0])
    r = run("trace", "--quick", "--config", cfg, "--out", out, "--emit-svg")
    assert r.returncode == 0, r.stderr
    t = read_csv(out / "pareto.csv")
    assert t.header == PARETO_HEADER
    assert len(t.rows) == 6
    assert t.column("eta")[0] == 0.0
    caps = t.column("capacity")
    assert all(b <= a * (1 + 1e-9) for a, b in zip(caps, caps[1:]))
    assert (out / "psd_1.csv").exists()
    meta = json.loads((out / "meta.json").read_text())
    assert meta["kind"] == "ampcap-meta"
    assert set(meta["versions"]) == {"ampcap", "numpy", "scipy"}
    ET.parse(out / "pareto.svg")


def test_empty_eta_grid_is_config_error(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path / "c.json", eta_grid=[])
    r = run("trace", "--config", cfg, "--out", out)
    assert r.returncode == 2
    assert "eta_grid" in r.stderr
    assert not out.exists()


def test_unknown_key_is_config_error(tmp_path):
    cfg = write_config(tmp_path / "c.json", P=0.1)
    r = run("trace", "--config", cfg, "--out", tmp_path / "out")
    assert r.returncode == 2
    assert "P" in r.stderr


def test_out_dir_under_a_file(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    r = run("gain-profile", "--g-s", 1, "--g-l", 1, "--out", blocker / "sub")
    assert r.returncode == 2
    assert "not writable" in r.stderr


def test_strict_exits_on_infeasible(tmp_path):
    cfg = write_config(tmp_path / "c.json", eta_grid=[0.0, 1e7], grid={"samples": 512}, multistart=2)
    r = run("trace", "--config", cfg, "--out", tmp_path / "a")
    assert r.returncode == 0
    assert read_csv(tmp_path / "a" / "pareto.csv").column("status")[1] == "Infeasible"
    r = run("trace", "--config", cfg, "--out", tmp_path / "b", "--strict")
    assert r.returncode == 1


def test_gain_profile_command(tmp_path):
    r = run("gain-profile", "--g-s", 0.5, "--g-l", 0.2, "--L", 7.0, "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    t = read_csv(tmp_path / "gain_profile.csv")
    assert t.header == ("omega", "gain")
    assert len(t.rows) == 4096


def test_psd_command(tmp_path):
    cfg = write_config(tmp_path / "c.json", grid={"samples": 512}, multistart=2)
    r = run("psd", "--config", cfg, "--eta", 0, 100, "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    for name in ("psd_0.csv", "psd_100.csv"):
        t = read_csv(tmp_path / name)
        assert t.header == ("omega", "phi_s")
        assert min(t.column("phi_s")) >= 0


def test_verify_quick_passes():
    r = run("verify", "--quick")
    assert r.returncode == 0, r.stdout + r.stderr
    assert "all checks passed" in r.stdout


def test_verify_detects_injected_fault():
    code = (
        "import sys, ampcap.circuit as C\n"
        "orig = C.power_gain\n"
        "C.power_gain = lambda *a, **k: -orig(*a, **k)\n"
        "from ampcap.cli import main\n"
        "sys.exit(main(['verify', '--quick']))\n"
    )
    r = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, timeout=900)
    assert r.returncode == 3
    assert "nodal analysis vs closed form" in r.stdout
    assert "FAIL" in r.stdout


def test_repeated_runs_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "c.json", scenario="B", n_eta=4, multistart=2, band_samples=1024)
    for d in ("r1", "r2"):
        assert run("trace", "--config", cfg, "--out", tmp_path / d).returncode == 0
    names = sorted(os.listdir(tmp_path / "r1"))
    assert names == sorted(os.listdir(tmp_path / "r2"))
    for n in names:
        assert (tmp_path / "r1" / n).read_bytes() == (tmp_path / "r2" / n).read_bytes(), n


def test_meta_json_reloads_as_config(tmp_path):
    cfg = write_config(tmp_path / "c.json", scenario="B", eta_grid=[0.0, 10.0], multistart=2, band_samples=1024)
    assert run("trace", "--config", cfg, "--out", tmp_path / "a").returncode == 0
    r = run("trace", "--config", tmp_path / "a" / "meta.json", "--out", tmp_path / "b")
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "a" / "pareto.csv").read_bytes() == (tmp_path / "b" / "pareto.csv").read_bytes()
