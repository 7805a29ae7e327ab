"""Wire formats round-trip and the CLI surface (files, exit codes, bytes)."""

import json
import math
import subprocess
import sys
from fractions import Fraction

from excursion import formats
from excursion.cantor import build_levels_auto
from excursion.cf import (
    PartialQuotientStream,
    RealHandle,
    jb_ladder,
    ladder_from_stream,
)
from excursion.cli import main, parse_real
from excursion.lattice import divergence_certificate


def run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "excursion.cli", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


class TestFormats:
    def test_ladder_round_trip(self):
        lad = ladder_from_stream(PartialQuotientStream.named("golden"), 6)
        text = formats.ladder_to_text(lad)
        assert text.splitlines()[0] == "ladder v1 seed=-1"
        back = formats.ladder_from_text(text)
        assert back.entries == lad.entries and back.seed == lad.seed

    def test_stream_round_trip(self):
        s = PartialQuotientStream(1, [2, 2, 2])
        text = formats.stream_to_text(s)
        assert text == "cf v1: 1; 2 2 2\n"
        back = formats.stream_from_text(text)
        assert back.prefix(8) == [1, 2, 2, 2]

    def test_levels_round_trip(self):
        start = ladder_from_stream(PartialQuotientStream(0, [2]), 2)
        base = jb_ladder(1, 6, start)
        _, levels = build_levels_auto(base, 2, branch_cap=2, delta=1)
        text = formats.levels_to_json(levels)
        back = formats.levels_from_json(text)
        assert back == levels

    def test_divergence_round_trip_schema(self):
        x = RealHandle.named("sqrt2")
        y = RealHandle.named("golden")
        rep = divergence_certificate([x, y], Fraction(1, 2), 12.0)
        doc = json.loads(formats.divergence_to_json(rep))
        assert set(doc) == {
            "horizon",
            "delta",
            "threshold",
            "verdict",
            "t0",
            "violated_at",
            "events",
        }
        assert doc["delta"] == "1/2"
        assert len(doc["events"]) == len(rep.events)

    def test_sig12(self):
        assert formats.sig12(math.pi) == "3.14159265359"
        assert formats.sig12(0.01) == "0.01"


class TestParseReal:
    def test_named_and_literals(self):
        assert parse_real("sqrt2").ladder(entries=3).heights == [1, 2, 5]
        assert parse_real("3/7").exact_value() == Fraction(3, 7)
        assert parse_real("0.625").exact_value() == Fraction(5, 8)
        assert parse_real("cf:1;2,2,2").exact_value() == Fraction(17, 12)


class TestCLI:
    def test_dim_upper_values(self, tmp_path):
        res = run_cli(["dim-upper", "--n", "2", "--delta", "0.0078125"], tmp_path)
        assert res.returncode == 0
        assert res.stdout.strip() == "1.75"
        res = run_cli(["dim-upper", "--n", "3", "--delta", "1/2359296"], tmp_path)
        assert res.stdout.strip() == "2.75"

    def test_min_height(self, tmp_path):
        res = run_cli(
            ["min-height", "--lo", "0.6", "--hi", "0.7", "--open-lo", "--open-hi"],
            tmp_path,
        )
        assert res.stdout.strip() == "2/3"

    def test_certify_identical_violates_with_exit_2(self, tmp_path):
        res = run_cli(
            [
                "certify",
                "--x",
                "golden",
                "--y",
                "golden",
                "--delta",
                "0.5",
                "--T",
                "20",
                "--out",
                "cert.json",
            ],
            tmp_path,
        )
        assert res.returncode == 2
        assert "violated" in res.stdout
        doc = json.loads((tmp_path / "cert.json").read_text())
        assert doc["verdict"] == "violated-at"

    def test_wfunc_excess_column_within_bounds(self, tmp_path):
        res = run_cli(
            [
                "wfunc",
                "--x",
                "sqrt2",
                "--t0",
                "0",
                "--t1",
                "12",
                "--step",
                "0.01",
                "--out",
                "sweep.csv",
                "--plot",
                "sweep.png",
            ],
            tmp_path,
        )
        assert res.returncode == 0
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "t,w_lattice,tent,excess"
        bound = 2 * math.log(2) + 1e-9
        for ln in lines[1:]:
            excess = float(ln.split(",")[3])
            assert -1e-9 <= excess <= bound
        assert (tmp_path / "sweep.png").stat().st_size > 1000

    def test_usage_error_exits_1(self, tmp_path):
        res = run_cli(["wfunc", "--t0", "0"], tmp_path)
        assert res.returncode == 1
        res = run_cli(["no-such-command"], tmp_path)
        assert res.returncode == 1

    def test_module_error_exits_2_with_json_body(self, tmp_path):
        res = run_cli(
            ["count-floor", "--lo", "0", "--hi", "1", "--open-lo", "--open-hi",
             "--q", "3", "--b", "1"],
            tmp_path,
        )
        assert res.returncode == 2
        body = json.loads(res.stderr.strip().splitlines()[-1])
        assert body["error"] == "CertificationError"

    def test_cantor_pipeline(self, tmp_path):
        res = run_cli(
            ["cantor-build", "--delta", "1", "--depth", "2", "--out", "levels.json"],
            tmp_path,
        )
        assert res.returncode == 0
        res = run_cli(["cantor-verify", "--levels", "levels.json"], tmp_path)
        assert res.returncode == 0
        assert "certified" in res.stdout
        res = run_cli(
            ["dim-lower", "--levels", "levels.json", "--out", "dims.csv"], tmp_path
        )
        assert res.returncode == 0
        lines = (tmp_path / "dims.csv").read_text().splitlines()
        assert lines[0] == "j,quotient"

    def test_main_callable_directly(self, tmp_path):
        out = tmp_path / "b.csv"
        code = main(
            ["count-band", "--lo", "0", "--hi", "1", "--h", "10", "--out", str(out)]
        )
        assert code == 0
        assert "100" in out.read_text()

    def test_threaded_sweep_bytes_match_serial(self, tmp_path):
        import os
        import subprocess as sp

        args = [
            sys.executable, "-m", "excursion.cli", "wfunc",
            "--x", "sqrt3", "--t0", "0", "--t1", "9", "--step", "0.01",
        ]
        env1 = dict(os.environ, EXCURSION_THREADS="1")
        env4 = dict(os.environ, EXCURSION_THREADS="4")
        sp.run([*args, "--out", "one.csv"], cwd=tmp_path, env=env1, check=True)
        sp.run([*args, "--out", "four.csv"], cwd=tmp_path, env=env4, check=True)
        assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "four.csv").read_bytes()

    def test_byte_identical_reruns(self, tmp_path):
        args = [
            "cover-audit",
            "--delta",
            "1/8",
            "--s",
            "1.75",
            "--a-max",
            "80",
            "--sample",
            "3",
            "--seed",
            "9",
        ]
        run_cli([*args, "--out", "a.json"], tmp_path)
        run_cli([*args, "--out", "b.json"], tmp_path)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
