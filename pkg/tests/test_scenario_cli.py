import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import airy_evolve.airy_special as airy_special
import airy_evolve.numeric_propagator as npmod
import airy_evolve.operator_algebra as operator_algebra
from airy_evolve.errors import ConfigurationError, MissingKeyError
from airy_evolve.scenario_cli import (
    CSV_COLUMNS,
    ENV_OUT,
    batch,
    fmt,
    load_scenario,
    main,
    parse_scenario,
    resolve_out_dir,
    run_scenario,
    selfcheck,
    to_json,
)

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
COARSE = Path(__file__).parent / "coarse_dt.toml"

MINIMAL = """
physics.hbar = 1.0
physics.mass = 1.0
physics.b = 1.0
grid.n = 1024
grid.x_min = -30
grid.x_max = 30
time.t_end = 0.5
"""

SMALL = MINIMAL + """
time.dt = 1e-2
snapshots = [0.1, 0.2, 0.3, 0.4, 0.5]
"""


class TestParse:
    def test_minimal_document(self):
        s = parse_scenario(MINIMAL)
        assert s.force.kind == "zero"
        assert s.scheme.kind == "split_step_strang" and s.scheme.dt == 1e-3
        assert s.snapshot_times == (0.5,)
        lo, hi = s.trusted_window
        assert s.aperture.window_lo <= lo < hi <= s.aperture.window_hi

    def test_full_document(self):
        s = load_scenario(SCENARIOS / "free_space.toml")
        assert s.grid.n == 4096 and s.grid.dx == pytest.approx(120 / 4096)
        assert s.trusted_window == (-10.0, 10.0)
        assert (s.aperture.window_lo, s.aperture.window_hi, s.aperture.ramp_width) == (-40, 40, 8)
        assert s.snapshot_times == (0.5, 1.0, 1.5, 2.0)

    def test_nested_tables_equivalent(self):
        nested = "snapshots = [0.5]\n[physics]\nhbar = 1.0\nmass = 1.0\nb = 1.0\n[grid]\nn = 1024\nx_min = -30\nx_max = 30\n[time]\nt_end = 0.5\n"
        assert parse_scenario(nested) == parse_scenario(MINIMAL)

    def test_small_grid(self):
        with pytest.raises(ConfigurationError, match="n ≥ 16"):
            parse_scenario(MINIMAL.replace("grid.n = 1024", "grid.n = 8"))

    def test_sinusoid_missing_omega(self):
        doc = MINIMAL + 'force.kind = "sinusoid"\nforce.f0 = 1.0\n'
        with pytest.raises(MissingKeyError) as info:
            parse_scenario(doc)
        assert info.value.key == "force.omega"
        assert "force.omega" in str(info.value)

    def test_missing_required(self):
        with pytest.raises(MissingKeyError, match="time.t_end"):
            parse_scenario(MINIMAL.replace("time.t_end = 0.5", ""))

    @pytest.mark.parametrize(
        "extra, message",
        [
            ("typo.key = 1", "unknown keys"),
            ("window.lo = -25", "aperture window"),
            ("snapshots = [0.7]", "within"),
            ("snapshots = [0.3, 0.1]", "sorted"),
            ("time.dt = 0.3", "lattice"),
            ('force.kind = "gravity"', "unknown kind"),
            ('time.scheme = "euler"', "unknown scheme"),
            ("aperture.ramp = -1", "ramp_width"),
        ],
    )
    def test_invalid(self, extra, message):
        with pytest.raises(ConfigurationError, match=message):
            parse_scenario(MINIMAL + extra + "\n")

    def test_malformed(self):
        with pytest.raises(ConfigurationError):
            parse_scenario("physics.hbar = = 1")

    def test_berry_balazs_document(self):
        doc = MINIMAL.replace("physics.b = 1.0", 'physics.convention = "berry_balazs_B"\nphysics.B = 1.0')
        doc = doc.replace("physics.hbar = 1.0", "physics.hbar = 0.7")
        s = parse_scenario(doc)
        assert s.constants.f_b == 0.5


class TestFormatting:
    def test_seventeen_digits(self):
        assert fmt(0.1) == "0.10000000000000001"
        assert float(fmt(1 / 3)) == 1 / 3
        assert fmt(None) == "nan"

    def test_json_round_trip(self):
        data = {"a": [0.1, 2, None, True], "b": {"c": "x", "d": 1e-300}}
        assert json.loads(to_json(data)) == data
        assert "0.10000000000000001" in to_json(data)


class TestRun:
    def test_free_desk_scenario(self, tmp_path):
        status = run_scenario(load_scenario(SCENARIOS / "free_space.toml"), tmp_path)
        assert status == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["status"] == 0
        assert max(s["max_abs_dev"] for s in summary["snapshots"]) <= 1e-3
        assert summary["fitted_acceleration"] == pytest.approx(0.5, abs=5e-3)

    def test_coarse_time_step_fails(self, tmp_path):
        assert run_scenario(load_scenario(COARSE), tmp_path) == 1
        summary = json.loads((tmp_path / "summary.json").read_text())
        failed = [c for c in summary["checks"] if not c["passed"]]
        assert failed and all(c["value"] > c["threshold"] for c in failed if c["value"] is not None)

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert run_scenario(parse_scenario(SMALL), blocker / "out") == 3

    def test_divergence(self, tmp_path, monkeypatch, capsys):
        real = npmod._Stepper.advance

        def poisoned(self, psi, t):
            out = real(self, psi, t)
            if t > 0.25:
                out = out * np.inf
            return out

        monkeypatch.setattr(npmod._Stepper, "advance", poisoned)
        assert run_scenario(parse_scenario(SMALL), tmp_path) == 2
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["diverged_at_step"] == 27
        assert "step 27" in capsys.readouterr().err

    def test_csv_layout(self, tmp_path):
        run_scenario(parse_scenario(SMALL), tmp_path)
        rows = list(csv.reader(io.StringIO((tmp_path / "trajectory.csv").read_text())))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 6
        assert [float(r[0]) for r in rows[1:]] == [0.1, 0.2, 0.3, 0.4, 0.5]
        x0 = float(rows[-1][3])
        assert x0 == pytest.approx(0.5 * 0.5 ** 2 / 2)

    def test_deterministic(self, tmp_path):
        s = parse_scenario(SMALL)
        run_scenario(s, tmp_path / "a", dump_fields=True)
        run_scenario(s, tmp_path / "b", dump_fields=True)
        files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        assert files
        for rel in files:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_field_dump(self, tmp_path):
        s = parse_scenario(SMALL)
        run_scenario(s, tmp_path, dump_fields=True)
        dumps = sorted((tmp_path / "fields").glob("*.csv"))
        assert len(dumps) == 5
        rows = list(csv.reader(io.StringIO(dumps[0].read_text())))
        assert rows[0] == ["x", "re", "im", "abs2"]
        assert len(rows) == s.grid.n + 1
        x, re, im, abs2 = map(float, rows[1 + s.grid.n // 2])
        assert abs2 == pytest.approx(re ** 2 + im ** 2, rel=1e-15)

    def test_output_dir_precedence(self, monkeypatch):
        s = parse_scenario(MINIMAL)
        monkeypatch.setenv(ENV_OUT, "/env/dir")
        assert resolve_out_dir(s) == "/env/dir"
        assert resolve_out_dir(s, "cli") == "cli"
        s2 = parse_scenario(MINIMAL + 'output.dir = "from_file"\n')
        assert resolve_out_dir(s2) == "from_file"
        monkeypatch.delenv(ENV_OUT)
        assert resolve_out_dir(s) == "airy_evolve_out"

    def test_env_var_used_by_cli(self, tmp_path, monkeypatch):
        path = tmp_path / "small.toml"
        path.write_text(SMALL)
        monkeypatch.setenv(ENV_OUT, str(tmp_path / "envout"))
        assert main(["run", str(path)]) == 0
        assert (tmp_path / "envout" / "summary.json").exists()

    def test_bad_file_is_config_error(self, tmp_path):
        assert main(["run", str(tmp_path / "missing.toml")]) == 3
        bad = tmp_path / "bad.toml"
        bad.write_text(MINIMAL.replace("grid.n = 1024", "grid.n = 8"))
        assert main(["run", str(bad), "--out", str(tmp_path)]) == 3


class TestSelfcheck:
    def test_fresh_build_passes(self):
        buf = io.StringIO()
        assert selfcheck(buf) == 0
        lines = buf.getvalue().splitlines()
        assert lines and all(line.startswith("pass") for line in lines)

    def test_detects_flipped_shift_factor(self, monkeypatch):
        real = operator_algebra.zassenhaus

        def flipped(a, b, max_order=3):
            f = real(a, b, max_order)
            ex = list(f.exponents)
            ex[2] = -ex[2]
            return operator_algebra.FactorList(tuple(ex), f.truncation_order, f.exact)

        monkeypatch.setattr(operator_algebra, "zassenhaus", flipped)
        buf = io.StringIO()
        assert selfcheck(buf) == 1
        failed = [l for l in buf.getvalue().splitlines() if l.startswith("FAIL")]
        assert any("shift factor" in l for l in failed)
        assert not any("ai(0)" in l for l in failed)

    def test_detects_value_error_at_origin(self, monkeypatch):
        real = airy_special.ai

        def off(x):
            v = real(x)
            return v + 1e-6 if np.ndim(x) == 0 and x == 0 else v

        monkeypatch.setattr(airy_special, "ai", off)
        buf = io.StringIO()
        assert selfcheck(buf) == 1
        failed = [l for l in buf.getvalue().splitlines() if l.startswith("FAIL")]
        assert [l for l in failed] == ["FAIL  ai(0) oracle"]


class TestBatch:
    def test_batch_runs_each_file(self, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        (src / "one.toml").write_text(SMALL)
        (src / "two.toml").write_text(SMALL.replace("time.dt = 1e-2", "time.dt = 5e-3"))
        assert batch(src, jobs=2, out_dir=tmp_path / "out") == 0
        assert (tmp_path / "out" / "one" / "summary.json").exists()
        assert (tmp_path / "out" / "two" / "trajectory.csv").exists()

    def test_batch_reports_worst_status(self, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        (src / "good.toml").write_text(SMALL)
        (src / "coarse.toml").write_text(COARSE.read_text())
        assert batch(src, jobs=1, out_dir=tmp_path / "out") == 1

    def test_empty_directory(self, tmp_path):
        assert batch(tmp_path) == 3


def test_console_entry_point(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    proc = subprocess.run(
        [sys.executable, "-m", "airy_evolve", "run", str(path), "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "airy_evolve", "selfcheck"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "FAIL" not in proc.stdout


@pytest.mark.parametrize("name", ["constant_force", "cancellation", "sinusoid"])
def test_shipped_scenarios_pass(tmp_path, name):
    assert run_scenario(load_scenario(SCENARIOS / f"{name}.toml"), tmp_path) == 0
