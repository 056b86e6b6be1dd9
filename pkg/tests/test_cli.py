import csv
import json

import pytest

import rnsckks.cli as cli


def run(argv):
    return cli.main(argv)


class TestSelftest:
    def test_default_passes(self, capsys):
        assert run(["selftest", "--preset", "default"]) == 0
        out = capsys.readouterr().out
        assert "transform: PASS" in out
        assert "roundtrip: PASS" in out
        assert "homomorphism: PASS" in out

    @pytest.mark.parametrize("backend", ["gemm", "segmented"])
    def test_other_backends(self, backend, capsys):
        assert run(["selftest", "--ntt-backend", backend]) == 0

    def test_fault_injection_fails(self, capsys, monkeypatch):
        monkeypatch.setattr(cli, "INJECT_TWIDDLE_FAULT", True)
        assert run(["selftest"]) == 1
        assert "transform: FAIL" in capsys.readouterr().out

    def test_bad_preset_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["selftest", "--preset", "bogus"])
        assert exc.value.code == 2


class TestBench:
    def test_csv_schema_and_rate_identity(self, tmp_path):
        out = tmp_path / "b.csv"
        assert run(["bench", "--ops", "ntt,hadd", "--batch-sizes", "1,4",
                    "--reps", "2", "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        assert [r["op"] for r in rows] == ["ntt", "ntt", "hadd", "hadd"]
        assert list(rows[0]) == cli.CSV_FIELDS
        for r in rows:
            rate = float(r["batch"]) * 1000.0 / float(r["wall_ms_median"])
            assert abs(rate - float(r["ops_per_sec"])) / rate < 0.01

    def test_json_output(self, tmp_path):
        out = tmp_path / "b.json"
        assert run(["bench", "--ops", "ntt", "--batch-sizes", "2",
                    "--reps", "1", "--out", str(out)]) == 0
        rows = json.loads(out.read_text())
        assert rows[0]["op"] == "ntt"

    def test_unknown_op_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run(["bench", "--ops", "quantum"])
        assert exc.value.code == 2


class TestSweepN:
    def test_rows_per_n(self, tmp_path):
        out = tmp_path / "s.csv"
        assert run(["sweep-n", "--n-values", "1024,2048",
                    "--batch-sizes", "2", "--reps", "1",
                    "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        assert [int(r["n"]) for r in rows] == [1024, 2048]

    def test_empty_list_header_only(self, tmp_path):
        out = tmp_path / "s.csv"
        assert run(["sweep-n", "--n-values", "", "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines == [",".join(cli.CSV_FIELDS)]

    def test_bad_n_rejected(self, capsys):
        assert run(["sweep-n", "--n-values", "1000"]) == 2


class TestWorkload:
    def test_length_one(self, capsys):
        assert run(["workload-dotproduct", "--length", "1"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["op_counts"] == {"hmult": 1, "rescale": 1,
                                       "hrotate": 0, "hadd": 0}
        assert report["relative_error"] < 2 ** -18

    def test_length_128(self, capsys):
        assert run(["workload-dotproduct", "--length", "128"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["relative_error"] < 2 ** -15
        assert report["op_counts"]["hrotate"] == 7

    def test_zero_vectors(self, monkeypatch, capsys):
        import numpy as np
        real = np.random.default_rng

        class ZeroRng:
            def __init__(self, inner):
                self._r = inner

            def uniform(self, lo, hi, size=None):
                return np.zeros(size)

            def __getattr__(self, name):
                return getattr(self._r, name)

        monkeypatch.setattr(np.random, "default_rng",
                            lambda seed=None: ZeroRng(real(seed)))
        run(["workload-dotproduct", "--length", "8"])
        report = json.loads(capsys.readouterr().out)
        assert abs(report["got"]) < 2 ** -18

    def test_too_long_vector(self, capsys):
        assert run(["workload-dotproduct", "--length", "99999"]) == 2
