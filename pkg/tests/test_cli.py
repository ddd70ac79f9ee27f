import os
import signal
import subprocess
import sys
import time
from pathlib import Path

import pytest

from sefrag.cli import main

KEY = "000102030405060708090a0b0c0d0e0f"
OTHER_KEY = "ffeeddccbbaa99887766554433221100"


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture
def sample(tmp_path):
    src = tmp_path / "sample.bin"
    src.write_bytes(bytes(range(256)) * 300 + b"tail")
    return src


class TestProtectRecover:
    def test_round_trip_bitwise(self, sample, tmp_path, capsys):
        assert run_cli("protect", sample, "--key-hex", KEY, "--out-dir", tmp_path / "w") == 0
        record = capsys.readouterr().out.strip()
        assert len(record) == 32 and bytes.fromhex(record)
        out = tmp_path / "back.bin"
        assert (
            run_cli(
                "recover",
                tmp_path / "w" / "sample.puf",
                tmp_path / "w" / "sample.prf",
                "--key-hex",
                KEY,
                "--out",
                out,
            )
            == 0
        )
        assert out.read_bytes() == sample.read_bytes()

    def test_missing_input_exits_2(self, tmp_path):
        assert run_cli("protect", tmp_path / "absent.bin", "--key-hex", KEY) == 2

    def test_dicom_mode_on_plain_file_exits_3(self, sample, tmp_path):
        assert run_cli("protect", sample, "--key-hex", KEY, "--mode", "dicom") == 3

    def test_wrong_key_exits_4_and_leaves_no_file(self, sample, tmp_path):
        run_cli("protect", sample, "--key-hex", KEY, "--out-dir", tmp_path / "w")
        out = tmp_path / "nope.bin"
        code = run_cli(
            "recover",
            tmp_path / "w" / "sample.puf",
            tmp_path / "w" / "sample.prf",
            "--key-hex",
            OTHER_KEY,
            "--out",
            out,
        )
        assert code == 4
        assert not out.exists()

    def test_swapped_arguments_exit_3(self, sample, tmp_path):
        run_cli("protect", sample, "--key-hex", KEY, "--out-dir", tmp_path / "w")
        code = run_cli(
            "recover",
            tmp_path / "w" / "sample.prf",
            tmp_path / "w" / "sample.puf",
            "--key-hex",
            KEY,
            "--out",
            tmp_path / "x.bin",
        )
        assert code == 3

    def test_no_key_flag_exits_2(self, sample):
        assert run_cli("protect", sample) == 2

    def test_bad_key_hex_exits_2(self, sample):
        assert run_cli("protect", sample, "--key-hex", "zz") == 2

    def test_passphrase_file_round_trip(self, sample, tmp_path):
        pw = tmp_path / "pw.txt"
        pw.write_bytes(b"correct horse\n")
        assert (
            run_cli(
                "protect", sample, "--passphrase-file", pw, "--out-dir", tmp_path / "w"
            )
            == 0
        )
        out = tmp_path / "back.bin"
        # salt travels in the private container, so the passphrase alone suffices
        assert (
            run_cli(
                "recover",
                tmp_path / "w" / "sample.puf",
                tmp_path / "w" / "sample.prf",
                "--passphrase-file",
                pw,
                "--out",
                out,
            )
            == 0
        )
        assert out.read_bytes() == sample.read_bytes()

    def test_prompted_passphrase(self, sample, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr("getpass.getpass", lambda prompt="": "spoken secret")
        assert run_cli("protect", sample, "--passphrase", "--out-dir", tmp_path / "w") == 0
        out = tmp_path / "back.bin"
        assert (
            run_cli(
                "recover",
                tmp_path / "w" / "sample.puf",
                tmp_path / "w" / "sample.prf",
                "--passphrase",
                "--out",
                out,
            )
            == 0
        )
        assert out.read_bytes() == sample.read_bytes()

    def test_cross_record_pair_exits_4(self, tmp_path, capsys):
        a = tmp_path / "a.bin"
        b = tmp_path / "b.bin"
        a.write_bytes(os.urandom(500))
        b.write_bytes(os.urandom(500))
        run_cli("protect", a, "--key-hex", KEY, "--out-dir", tmp_path / "w")
        run_cli("protect", b, "--key-hex", KEY, "--out-dir", tmp_path / "w")
        code = run_cli(
            "recover",
            tmp_path / "w" / "a.puf",
            tmp_path / "w" / "b.prf",
            "--key-hex",
            KEY,
            "--out",
            tmp_path / "x.bin",
        )
        assert code == 4


class TestAnalysisCommands:
    def test_entropy_of_zero_file(self, tmp_path, capsys):
        path = tmp_path / "zeros.bin"
        path.write_bytes(bytes(4096))
        assert run_cli("entropy", path) == 0
        assert capsys.readouterr().out.strip() == "0.0000"

    def test_entropy_of_sealed_payload(self, tmp_path, capsys):
        src = tmp_path / "pattern.bin"
        src.write_bytes(b"patient record 1234\n" * 13108)
        run_cli("protect", src, "--key-hex", KEY, "--out-dir", tmp_path)
        capsys.readouterr()
        assert run_cli("entropy", tmp_path / "pattern.puf") == 0
        assert float(capsys.readouterr().out) > 7.99

    def test_entropy_of_private_container_parses(self, sample, tmp_path, capsys):
        run_cli("protect", sample, "--key-hex", KEY, "--out-dir", tmp_path / "w")
        capsys.readouterr()
        assert run_cli("entropy", tmp_path / "w" / "sample.prf") == 0
        assert 0.0 <= float(capsys.readouterr().out) <= 8.0

    def test_entropy_of_empty_file_exits_5(self, tmp_path):
        path = tmp_path / "empty.bin"
        path.write_bytes(b"")
        assert run_cli("entropy", path) == 5

    def test_pdf_has_256_rows(self, sample, tmp_path):
        out = tmp_path / "dist.csv"
        assert run_cli("pdf", sample, "--out", out) == 0
        assert len(out.read_text().strip().splitlines()) == 256


class TestBenchCommand:
    def test_bench_reports_counters(self, tmp_path, capsys):
        csv = tmp_path / "timings.csv"
        assert run_cli("bench", "--size-mb", 1, "--iterations", 1, "--csv", csv) == 0
        table = capsys.readouterr().out
        assert "hash invocations     33793" in table
        assert "selected bytes       131072" in table
        assert len(csv.read_text().strip().splitlines()) == 2

    def test_bench_size_zero_exits_2(self):
        assert run_cli("bench", "--size-mb", 0) == 2


class TestStoreCommands:
    @pytest.fixture
    def sealed(self, sample, tmp_path, capsys):
        run_cli("protect", sample, "--key-hex", KEY, "--out-dir", tmp_path / "w")
        record = capsys.readouterr().out.strip()
        return record, tmp_path / "w" / "sample.puf", tmp_path / "w" / "sample.prf"

    def test_put_then_get_both_fragments(self, sealed, tmp_path, capsys):
        record, puf, prf = sealed
        store = tmp_path / "store"
        assert run_cli("put", puf, prf, "--store", store) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == record
        ids = dict(line.split()[:2] for line in lines[1:])
        for kind, path in (("puf", puf), ("prf", prf)):
            out = tmp_path / f"fetched.{kind}"
            assert run_cli("get", ids[kind], "--store", store, "--out", out) == 0
            assert out.read_bytes() == path.read_bytes()

    def test_get_unknown_id_exits_5(self, tmp_path):
        assert run_cli("get", "00" * 32, "--store", tmp_path / "s", "--out", tmp_path / "x") == 5

    def test_put_swapped_fragments_exits_3(self, sealed, tmp_path):
        _, puf, prf = sealed
        assert run_cli("put", prf, puf, "--store", tmp_path / "store") == 3

    def test_sharing_lifecycle(self, sealed, tmp_path, capsys):
        record, puf, prf = sealed
        store = tmp_path / "store"
        run_cli("put", puf, prf, "--store", store)
        capsys.readouterr()

        def decision_for(party, *extra):
            assert run_cli("request", record, "--as", party, "--store", store, *extra) == 0
            return capsys.readouterr().out.strip().splitlines()[0]

        assert decision_for("stranger") == "PufOnly"
        assert run_cli("grant", record, "stranger", "--as", "owner-1", "--store", store) == 0
        assert decision_for("stranger") == "Full"
        assert run_cli("revoke", record, "stranger", "--as", "owner-1", "--store", store) == 0
        assert decision_for("stranger") == "PufOnly"
        assert decision_for("dr-lee", "--role", "doctor") == "Full"
        assert decision_for("impostor", "--role", "owner") == "Denied"

    def test_grant_by_non_owner_exits_4(self, sealed, tmp_path):
        record, puf, prf = sealed
        store = tmp_path / "store"
        assert run_cli("grant", record, "x", "--as", "owner-1", "--store", store) == 0
        assert run_cli("grant", record, "y", "--as", "owner-2", "--store", store) == 4

    def test_request_out_dir_releases_only_permitted(self, sealed, tmp_path, capsys):
        record, puf, prf = sealed
        store = tmp_path / "store"
        run_cli("put", puf, prf, "--store", store)
        capsys.readouterr()
        out = tmp_path / "released"
        assert run_cli("request", record, "--as", "peer", "--store", store, "--out-dir", out) == 0
        assert capsys.readouterr().out.strip() == "PufOnly"
        assert (out / f"{record}.puf").exists()
        assert not (out / f"{record}.prf").exists()

    def test_request_out_dir_for_unplaced_record_exits_5(self, tmp_path):
        code = run_cli(
            "request", "11" * 16, "--as", "p", "--store", tmp_path / "s", "--out-dir", tmp_path / "o"
        )
        assert code == 5

    def test_bad_record_id_exits_2(self, tmp_path):
        assert run_cli("request", "not-hex", "--as", "p", "--store", tmp_path / "s") == 2
        assert run_cli("request", "abcd", "--as", "p", "--store", tmp_path / "s") == 2


class TestServeCommand:
    def test_serve_put_get_and_clean_shutdown(self, sample, tmp_path):
        proc = subprocess.Popen(
            [sys.executable, "-m", "sefrag", "serve", "--bind", "127.0.0.1:0", "--root", str(tmp_path / "srv")],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        try:
            addr = proc.stdout.readline().strip()
            assert addr.startswith("127.0.0.1:")

            run_cli("protect", sample, "--key-hex", KEY, "--out-dir", tmp_path / "w")
            store = tmp_path / "store"
            assert (
                run_cli(
                    "put",
                    tmp_path / "w" / "sample.puf",
                    tmp_path / "w" / "sample.prf",
                    "--store",
                    store,
                    "--remote",
                    addr,
                )
                == 0
            )
            # the public fragment went over the wire, not onto the local disk
            assert not (store / "cloud").exists()
            assert any((tmp_path / "srv").rglob("*"))
        finally:
            proc.send_signal(signal.SIGTERM)
            assert proc.wait(timeout=10) == 0

    def test_unreachable_remote_exits_6(self, sample, tmp_path):
        run_cli("protect", sample, "--key-hex", KEY, "--out-dir", tmp_path / "w")
        code = run_cli(
            "put",
            tmp_path / "w" / "sample.puf",
            tmp_path / "w" / "sample.prf",
            "--store",
            tmp_path / "store",
            "--remote",
            "127.0.0.1:1",
        )
        assert code == 6

    def test_bad_bind_address_exits_2(self, tmp_path):
        assert run_cli("serve", "--bind", "nonsense", "--root", tmp_path) == 2
