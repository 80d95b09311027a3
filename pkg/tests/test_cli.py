import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from nslab import __version__
from nslab.cli import main
from nslab.config import ConfigError, SCHEMAS, default_config, parse_config
from nslab.io import read_csv, read_snapshot, write_csv, write_snapshot

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestConfig:
    def test_every_shipped_config_validates(self):
        names = set()
        for path in sorted(CONFIGS.glob("*.toml")):
            names.add(parse_config(path.read_text(), str(path)).scenario)
        assert names == set(SCHEMAS)

    def test_defaults_merge_and_override(self):
        cfg = parse_config('scenario = "nse-evolve"\n[physics]\nG = 3\n')
        assert cfg["physics"]["G"] == 3.0 and isinstance(cfg["physics"]["G"], float)
        assert cfg["grid"] == SCHEMAS["nse-evolve"]["grid"]
        assert cfg.output == "runs/nse-evolve"

    def test_round_trip_preserves_hash(self):
        cfg = parse_config('scenario = "sce-misstep"\nseed = 4\n[evolution]\nt = 2.5\n')
        again = parse_config(cfg.to_toml())
        assert again.as_dict() == cfg.as_dict()
        assert again.content_hash() == cfg.content_hash()
        assert cfg.content_hash() != default_config("sce-misstep").content_hash()

    @pytest.mark.parametrize("text,line,fragment", [
        ("", 1, "empty"),
        ('scenario = "nope"\n', 1, "unknown scenario"),
        ('scenario = "nse-ground"\n\n[solver]\nitol = 1e-9\nbogus = 1\n', 5, "unknown key"),
        ('scenario = "nse-ground"\n[physics]\nmass = "heavy"\n', 3, "must be a number"),
        ('scenario = "nse-ground"\n[physics]\nmass = -1.0\n', 3, "> 0"),
        ('scenario = "nse-evolve"\n[grid]\nn = 48\n', 3, "power of two"),
        ('scenario = "nse-evolve"\n[grid]\nbc = "open"\n', 3, "one of"),
        ('scenario = "nse-evolve"\n[grid]\ndim = 1\n', 3, "isolated"),
        ('scenario = "kernel-verify"\n[poisson\n', 2, "parse error"),
        ('output = "x"\n', 1, "missing required key"),
    ])
    def test_errors_carry_line_numbers(self, text, line, fragment):
        with pytest.raises(ConfigError) as info:
            parse_config(text, "cfg.toml")
        assert info.value.line == line
        assert fragment in str(info.value)
        assert str(info.value).startswith(f"cfg.toml:{line}:")


class TestCommands:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_list_scenarios(self, capsys):
        assert main(["list-scenarios"]) == 0
        out = capsys.readouterr().out
        for name in SCHEMAS:
            assert name in out

    def test_validate(self, tmp_path, capsys):
        p = write(tmp_path, 'scenario = "fock-sectors"\n')
        assert main(["validate", str(p), "--echo"]) == 0
        out = capsys.readouterr().out
        assert "ok (fock-sectors" in out and "[lattice]" in out

    def test_empty_config_exits_2(self, tmp_path, capsys):
        assert main(["validate", str(write(tmp_path, ""))]) == 2
        assert main(["run", str(write(tmp_path, ""))]) == 2
        assert "empty" in capsys.readouterr().err

    def test_unknown_key_reports_line(self, tmp_path, capsys):
        p = write(tmp_path, 'scenario = "fock-sectors"\n[lattice]\nsites = 4\ncolour = 1\n')
        assert main(["run", str(p)]) == 2
        assert f"{p}:4:" in capsys.readouterr().err

    def test_domain_error_exits_2(self, tmp_path, capsys):
        p = write(tmp_path, 'scenario = "fock-sectors"\n[physics]\nsigma = 1.0\n')
        assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
        assert "two lattice spacings" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.toml")]) == 2

    def test_kernel_verify_run(self, tmp_path, capsys):
        p = write(tmp_path, 'scenario = "kernel-verify"\n')
        out = tmp_path / "run"
        assert main(["run", str(p), "--out", str(out)]) == 0
        index = json.loads((out / "index.json").read_text())
        assert index["passed"] and index["scenario"] == "kernel-verify"
        assert index["config_sha1"] == parse_config(p.read_text()).content_hash()
        for f in index["files"]:
            assert (out / f).exists()
        assert parse_config((out / "config.toml").read_text()).as_dict() == index["config"]
        assert "PASS" in capsys.readouterr().out

    def test_failed_assertion_exits_1(self, tmp_path, capsys):
        p = write(tmp_path, 'scenario = "sce-misstep"\n[evolution]\nt = 1.0\n'
                            '[assert]\nthreshold = 10.0\n')
        assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 1
        io = capsys.readouterr()
        assert "FAIL" in io.out and "assertion failed" in io.err
        assert not json.loads((tmp_path / "o" / "index.json").read_text())["passed"]

    def test_runs_are_deterministic(self, tmp_path):
        p = write(tmp_path, 'scenario = "fock-sectors"\n')
        for d in ("a", "b"):
            assert main(["run", str(p), "--out", str(tmp_path / d), "-q"]) == 0
        csvs = sorted((tmp_path / "a").glob("*.csv"))
        assert csvs
        for f in csvs:
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_plot_is_byte_stable(self, tmp_path, capsys):
        p = write(tmp_path, 'scenario = "kernel-verify"\n')
        out = tmp_path / "run"
        main(["run", str(p), "--out", str(out), "-q"])
        assert main(["plot", str(out)]) == 0
        svgs = sorted(out.glob("*.svg"))
        assert svgs
        first = [s.read_bytes() for s in svgs]
        main(["plot", str(out)])
        assert [s.read_bytes() for s in svgs] == first

    def test_plot_without_run_warns(self, tmp_path, caplog):
        assert main(["plot", str(tmp_path)]) == 0
        assert "nothing to plot" in caplog.text

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "nslab", "list-scenarios"],
                           capture_output=True, text=True)
        assert r.returncode == 0 and "hydrogen-wrong-nse" in r.stdout


class TestIO:
    def test_snapshot_roundtrip(self, tmp_path):
        amp = np.random.default_rng(0).normal(size=(4, 4, 4)) * (1 + 2j)
        write_snapshot(tmp_path / "s.bin", amp, t=1.5)
        head, back = read_snapshot(tmp_path / "s.bin")
        assert head["t"] == 1.5 and head["shape"] == [4, 4, 4]
        assert np.array_equal(back, amp)

    def test_csv_roundtrip(self, tmp_path):
        write_csv(tmp_path / "t.csv", ["a", "b", "c"], [[1, 0.1, "x"], [2, 1e-300, "y"]])
        cols = read_csv(tmp_path / "t.csv")
        assert cols["b"].tolist() == [0.1, 1e-300]
        assert cols["c"].tolist() == ["x", "y"]
        with pytest.raises(ValueError):
            write_csv(tmp_path / "u.csv", ["a"], [[1, 2]])

    def test_thread_setting(self, monkeypatch):
        from nslab.kernels import fft_workers
        monkeypatch.setenv("NSLAB_THREADS", "3")
        assert fft_workers() == 3
        monkeypatch.delenv("NSLAB_THREADS")
        assert fft_workers() == 1
