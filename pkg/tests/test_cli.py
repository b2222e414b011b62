import csv
import os
from io import StringIO

import pytest
from rich.console import Console

from mcfft.ui.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, run


def _console():
    return Console(file=StringIO(), width=200)


def _run(tmp_path, *argv):
    console = _console()
    code = run([*argv, "--log-dir", str(tmp_path / "logs")], console)
    return code, console.file.getvalue()


def _rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class TestBuild:
    def test_arch3_register_sections(self, tmp_path):
        code, output = _run(tmp_path, "build", "--arch", "3", "--out", str(tmp_path))
        assert code == EXIT_OK
        assert "Registers per section" in output

        totals = {}
        for row in _rows(tmp_path / "registers.csv"):
            totals[row["section"]] = totals.get(row["section"], 0) + int(row["registers"])
        assert sorted(totals.values()) == sorted([16, 14, 16, 6])

    def test_raw_reordering_is_not_instantiated(self, tmp_path):
        _run(tmp_path, "build", "--arch", "1", "--out", str(tmp_path))
        rows = _rows(tmp_path / "registers.csv")
        assert {row["instantiated"] for row in rows if "REOC" in row["block"]} == {"0"}

    def test_multi_channel_build(self, tmp_path):
        code, _ = _run(tmp_path, "build", "--arch", "3", "--channels", "4", "--out", str(tmp_path))
        assert code == EXIT_OK
        rows = _rows(tmp_path / "interleavers.csv")
        assert rows[0]["interleaver_registers"] == "48"
        assert rows[0]["fft_registers"] == ""

    def test_four_channel_datapath(self, tmp_path):
        code, output = _run(tmp_path, "build", "--channels", "4", "--out", str(tmp_path))
        assert code == EXIT_OK
        assert "FoldedCore(N=16, N_f=32" in output
        assert {row["arch"] for row in _rows(tmp_path / "registers.csv")} == {"1"}
        assert [row["arch"] for row in _rows(tmp_path / "interleavers.csv")] == ["3"]


class TestUsageErrors:
    def test_unsupported_channel_count(self, tmp_path):
        code, output = _run(tmp_path, "build", "--channels", "3")
        assert code == EXIT_USAGE
        assert "--channels" in output

    def test_bad_on_off(self, tmp_path):
        assert _run(tmp_path, "verify", "--natural-order", "maybe")[0] == EXIT_USAGE

    def test_missing_command(self, tmp_path):
        assert run([], _console()) == EXIT_USAGE

    def test_arch2_size(self, tmp_path):
        assert _run(tmp_path, "build", "--arch", "2", "--points", "32")[0] == EXIT_USAGE

    def test_verify_needs_a_datapath(self, tmp_path):
        code, output = _run(tmp_path, "verify", "--arch", "3", "--channels", "4")
        assert code == EXIT_USAGE
        assert "datapath" in output

    def test_trace_needs_a_datapath(self, tmp_path):
        code, _ = _run(tmp_path, "trace", "--arch", "3", "--channels", "8", "--points", "64")
        assert code == EXIT_USAGE


class TestVerify:
    def test_all_architectures_pass(self, tmp_path):
        code, _ = _run(tmp_path, "verify", "--frames", "16", "--out", str(tmp_path))
        assert code == EXIT_OK
        rows = _rows(tmp_path / "verify.csv")
        assert {row["arch"] for row in rows} == {"1", "2", "3"}
        assert {row["outcome"] for row in rows} == {"PASS"}

    def test_natural_order(self, tmp_path):
        code, _ = _run(
            tmp_path, "verify", "--arch", "3", "--frames", "16", "--natural-order", "on"
        )
        assert code == EXIT_OK

    def test_single_channel_utilization(self, tmp_path):
        code, _ = _run(
            tmp_path,
            "verify", "--arch", "1", "--channels", "1", "--frames", "16", "--out", str(tmp_path),
        )
        assert code == EXIT_OK
        rows = {row["check"]: row for row in _rows(tmp_path / "verify.csv")}
        assert rows["utilization fft.A"]["measured"] == "0.5"

    def test_four_channels(self, tmp_path):
        code, _ = _run(
            tmp_path, "verify", "--channels", "4", "--frames", "16", "--out", str(tmp_path)
        )
        assert code == EXIT_OK
        rows = {row["check"]: row for row in _rows(tmp_path / "verify.csv")}
        assert {row["arch"] for row in rows.values()} == {"1"}
        assert rows["utilization fft.A"]["measured"] == "1.0"
        assert rows["throughput (samples/cycle)"]["measured"] == "2.0"


class TestTrace:
    def test_dsd_block_exchange(self, tmp_path):
        code, _ = _run(
            tmp_path, "trace", "--dsd", "1", "--cycles", "8", "--frames", "1", "--out", str(tmp_path)
        )
        assert code == EXIT_OK
        rows = _rows(tmp_path / "trace-dsd1.csv")
        samples = {
            (int(row["cycle"]), row["port"]): (row["channel"], row["index"])
            for row in rows
            if row["bubble"] == "0"
        }
        assert {int(row["cycle"]) for row in rows} == set(range(8))
        # crossed cycles pass channel 0 through, the others channel 1
        assert samples[(1, "dsd.out0")] == ("0", "1")
        assert samples[(1, "dsd.out1")] == ("0", "0")
        assert samples[(2, "dsd.out0")] == ("1", "1")
        assert samples[(2, "dsd.out1")] == ("1", "0")
        assert (0, "dsd.out0") not in samples

    def test_zero_cycles(self, tmp_path):
        code, _ = _run(tmp_path, "trace", "--dsd", "2", "--cycles", "0", "--out", str(tmp_path))
        assert code == EXIT_OK
        with open(tmp_path / "trace-dsd2.csv") as f:
            lines = f.read().splitlines()
        assert len(lines) == 1
        assert lines[0] == "cycle,port,re,im,channel,frame,index,bubble"

    def test_same_seed_same_trace(self, tmp_path):
        contents = []
        for run_dir in ("a", "b"):
            out = tmp_path / run_dir
            code, _ = _run(
                tmp_path, "trace", "--arch", "3", "--frames", "2", "--seed", "5", "--out", str(out)
            )
            assert code == EXIT_OK
            contents.append((out / "trace-arch3.csv").read_text())
        assert contents[0] == contents[1]


class TestReport:
    def test_tables(self, tmp_path):
        code, _ = _run(tmp_path, "report", "--channels", "4", "--arch", "3", "--out", str(tmp_path))
        assert code == EXIT_OK
        comparison = {
            row["circuit"]: row for row in _rows(tmp_path / "interleaver-comparison.csv")
        }
        assert comparison["memory banks"]["memory"] == "64"
        interleaver = comparison["arch3 interleaver"]
        assert (interleaver["memory"], interleaver["latency"]) == ("48", "12")
        summary = _rows(tmp_path / "register-summary.csv")
        assert [(r["pre"], r["fft"], r["post"], r["reorder"]) for r in summary] == [
            ("16", "14", "16", "6")
        ]

    def test_log_file(self, tmp_path):
        _run(tmp_path, "report", "--arch", "1")
        log = (tmp_path / "logs" / "mcfft.log").read_text()
        assert "mcfft report" in log
        assert "Built Architecture 1" in log


class TestLogs:
    def test_show_and_clear(self, tmp_path):
        _run(tmp_path, "report", "--arch", "3")
        code, output = _run(tmp_path, "logs")
        assert code == EXIT_OK
        assert "Built Architecture 3" in output
        assert "bytes" in output

        assert _run(tmp_path, "logs", "--clear")[0] == EXIT_OK
        assert (tmp_path / "logs" / "mcfft.log").read_text() == ""
