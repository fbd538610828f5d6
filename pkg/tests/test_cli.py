import csv
import subprocess
import sys

import pytest

from agvsched.cli import (
    EXIT_INVALID,
    EXIT_OK,
    SUMMARY_COLUMNS,
    ConfigError,
    config_keys,
    format_config,
    main,
    parse_config,
    parse_config_text,
)
from agvsched.link_adaptation import waterfall_rows, write_bler_table
from agvsched.scheduler import PolicyKind
from agvsched.simulator import SimConfig


def read_summary(d):
    with open(d / "summary.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def test_default_sweep_has_105_rows(tmp_path):
    assert main(["--steps", "5", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_summary(tmp_path)
    assert len(rows) == 7 * 3 * 5
    assert list(rows[0]) == list(SUMMARY_COLUMNS)
    keys = [(float(r["lambda"]), r["policy"], int(r["seed"])) for r in rows]
    assert keys == sorted(keys)
    assert (tmp_path / "manifest.txt").exists()


def test_sweep_is_byte_identical(tmp_path):
    args = ["--steps", "300", "--lambda", "6e-3", "--seeds", "0,1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b"), "--workers", "2"]) == EXIT_OK
    a = (tmp_path / "a" / "summary.csv").read_bytes()
    b = (tmp_path / "b" / "summary.csv").read_bytes()
    assert a == b


def test_trace_files(tmp_path):
    assert main(["--steps", "12", "--lambda", "4e-3", "--seeds", "0",
                 "--policy", "maxsnr", "--trace", "--out", str(tmp_path)]) == EXIT_OK
    traces = list(tmp_path.glob("trace_*.csv"))
    assert len(traces) == 1
    lines = traces[0].read_text().splitlines()
    assert lines[0] == "tick,n_active,n_scheduled,rb_used,ru_pct,fallbacks"
    assert len(lines) == 13


def test_config_file_and_print(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nn_rb = 30\nradio.tx_power = 23.0\ngains.kx = 5\npolicy = maxsnr\n")
    assert main(["--config", str(cfg), "--print-config"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "n_rb = 30" in out and "radio.tx_power = 23.0" in out and "gains.kx = 5" in out


def test_format_roundtrip():
    cfg = SimConfig(n_rb=40, eps_th=0.03, policy=PolicyKind.ERROR_FIRST)
    assert parse_config_text(format_config(cfg)) == cfg


def test_config_errors_are_itemised(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n_rb = -3\nbogus = 1\narrival_rate = abc\nn_rb = 4\nradio.bandwidth = 0\n")
    assert main(["--config", str(cfg)]) == EXIT_INVALID
    err = capsys.readouterr().err
    for frag in ("unknown key 'bogus'", "arrival_rate", "repeats line 1",
                 "n_rb", "radio.bandwidth"):
        assert frag in err


def test_parse_config_collects_all():
    with pytest.raises(ConfigError) as info:
        parse_config_text("eps_th = 0\nn_max = 0\nnot a pair\n")
    assert len(info.value.problems) >= 3


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "nope.cfg")
    assert main(["--config", str(tmp_path / "nope.cfg")]) == EXIT_INVALID


def test_bad_cli_values(tmp_path):
    assert main(["--lambda", "0.5", "--out", str(tmp_path)]) == EXIT_INVALID
    assert main(["--seeds", "-1", "--out", str(tmp_path)]) == EXIT_INVALID
    assert main(["--steps", "0", "--out", str(tmp_path)]) == EXIT_INVALID
    with pytest.raises(SystemExit) as info:
        main(["--policy", "random"])
    assert info.value.code == EXIT_INVALID


def test_bad_bler_table(tmp_path, capsys):
    t = tmp_path / "t.csv"
    t.write_text("mcs_id,modulation_order,code_rate,snr_db,bler\n0,8,1/3,0,0.5\n")
    assert main(["--bler-table", str(t), "--out", str(tmp_path)]) == EXIT_INVALID
    assert "row 2" in capsys.readouterr().err


def test_custom_bler_table_relative_to_config(tmp_path):
    write_bler_table(tmp_path / "tab.csv", waterfall_rows())
    (tmp_path / "c.cfg").write_text("bler_table = tab.csv\n")
    cfg = parse_config(tmp_path / "c.cfg")
    assert cfg.bler_table == str((tmp_path / "tab.csv").resolve())
    out = tmp_path / "o"
    assert main(["--config", str(tmp_path / "c.cfg"), "--steps", "5", "--lambda", "2e-3",
                 "--seeds", "0", "--out", str(out)]) == EXIT_OK


def test_config_keys_cover_nested():
    keys = config_keys()
    assert "radio.reference_distance" in keys and "gains.ktheta" in keys
    assert "radio.sample_time" not in keys


def test_module_entry_point_version():
    r = subprocess.run([sys.executable, "-m", "agvsched.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert "agvsched" in r.stdout
