import json
import math

import numpy as np
import pytest

from qnet.cli import main, parse_config

PI = math.pi

STRAIGHT = """
[network]
fermi_level = 20.0
s_max = 6

[wells.w]
a = 2.0
b = 1.0
mass = 0.5

[wires.L]
width = 1.0
mass_par = 0.5
mass_perp = 0.5
well = w
edge = left
offset = 0.0

[wires.R]
width = 1.0
mass_par = 0.5
mass_perp = 0.5
well = w
edge = right
offset = 0.0

[run]
lambda_min = 12.9
lambda_max = 36.4
points = 20
svg = true
"""

DEMO_TABLE = """# qnet-spectral-table v1
# lam_cut 40
# wells w
0 5 0.5 0.7 1
"""

DEMO = """
[network]
fermi_level = 5.0
s_max = 2

[wells.w]
a = 1.0
b = 2.1
mass = 0.5

[wires.m]
width = 2.0943951023931953
mass_par = 0.5
mass_perp = 0.5
well = w
edge = left
offset = 0.0

[run]
spectral_table = {table}
n_scan = 128
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def read_csv(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestConfigParsing:
    def test_full_round(self, tmp_path):
        cfg = write(tmp_path, "c.ini", STRAIGHT)
        net, run = parse_config(cfg)
        assert net.fermi_level == 20.0
        assert len(net.wires) == 2 and len(net.wells) == 1
        assert run.points == 20 and run.svg

    def test_missing_field_located(self, tmp_path):
        bad = STRAIGHT.replace("width = 1.0\nmass_par = 0.5\nmass_perp = 0.5\nwell = w\nedge = left\noffset = 0.0\n",
                               "mass_par = 0.5\nmass_perp = 0.5\nwell = w\nedge = left\n", 1)
        cfg = write(tmp_path, "bad.ini", bad)
        from qnet.errors import ConfigError
        with pytest.raises(ConfigError, match=r"wires\.L"):
            parse_config(cfg)


class TestCommands:
    def test_scatter_straight_through(self, tmp_path):
        cfg = write(tmp_path, "c.ini", STRAIGHT)
        rc = main(["--config", str(cfg), "--command", "scatter", "--out", str(tmp_path / "o")])
        assert rc == 0
        header, rows = read_csv(tmp_path / "o" / "scatter.csv")
        t_col = header.index("t[R:1][L:1]")
        d_col = header.index("unitarity_defect")
        for row in rows:
            assert float(row[t_col]) > 0.9999
            assert float(row[d_col]) < 1e-10
        assert (tmp_path / "o" / "scatter.svg").read_text().startswith("<svg")

    def test_eigen_scalar_demo(self, tmp_path):
        table = write(tmp_path, "table.txt", DEMO_TABLE)
        cfg = write(tmp_path, "demo.ini", DEMO.format(table=table))
        rc = main(["--config", str(cfg), "--command", "eigen", "--out", str(tmp_path / "o")])
        assert rc == 0
        doc = json.loads((tmp_path / "o" / "eigen.json").read_text())
        assert len(doc["roots"]) == 1
        assert doc["roots"][0]["lambda"] == pytest.approx(4.5272, abs=2e-4)
        assert doc["roots"][0]["residual"] <= 1e-8

    def test_empty_sweep_range_fails(self, tmp_path, capsys):
        bad = STRAIGHT.replace("lambda_min = 12.9", "lambda_min = 36.4")
        cfg = write(tmp_path, "bad.ini", bad)
        rc = main(["--config", str(cfg), "--command", "scatter", "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_sweep_outside_band_fails(self, tmp_path):
        bad = STRAIGHT.replace("lambda_max = 36.4", "lambda_max = 45.0")
        cfg = write(tmp_path, "bad.ini", bad)
        rc = main(["--config", str(cfg), "--command", "scatter", "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_dn_dump(self, tmp_path):
        cfg = write(tmp_path, "c.ini", STRAIGHT.replace("points = 20", "points = 3"))
        rc = main(["--config", str(cfg), "--command", "dn", "--out", str(tmp_path / "o")])
        assert rc == 0
        header, rows = read_csv(tmp_path / "o" / "dn.csv")
        assert header == ["lambda", "block", "i", "j", "value"]
        blocks = {r[1] for r in rows}
        assert {"pp", "pm", "mm", "tail_delta"} <= blocks

    def test_jump_start(self, tmp_path):
        cfg = write(tmp_path, "c.ini", STRAIGHT + "\n")
        rc = main(["--config", str(cfg), "--command", "jump-start", "--out", str(tmp_path / "o")])
        assert rc == 0
        doc = json.loads((tmp_path / "o" / "jumpstart.json").read_text())
        assert doc["pointwise_match"] < 1e-12
        assert doc["k0_of_beta"]["im"] > 0


class TestDeterminism:
    def test_byte_identical_runs(self, tmp_path):
        cfg = write(tmp_path, "c.ini", STRAIGHT)
        for out, threads in (("a", "1"), ("b", "1"), ("c", "4")):
            rc = main(["--config", str(cfg), "--command", "scatter",
                       "--out", str(tmp_path / out), "--threads", threads])
            assert rc == 0
        ref_csv = (tmp_path / "a" / "scatter.csv").read_bytes()
        ref_svg = (tmp_path / "a" / "scatter.svg").read_bytes()
        for out in ("b", "c"):
            assert (tmp_path / out / "scatter.csv").read_bytes() == ref_csv
            assert (tmp_path / out / "scatter.svg").read_bytes() == ref_svg

    def test_seventeen_digit_serialization(self, tmp_path):
        cfg = write(tmp_path, "c.ini", STRAIGHT)
        main(["--config", str(cfg), "--command", "scatter", "--out", str(tmp_path / "o")])
        _, rows = read_csv(tmp_path / "o" / "scatter.csv")
        # full-precision round trip: reading back reproduces the float exactly
        val = rows[3][1]
        assert float(val) == float(f"{float(val):.17g}")
