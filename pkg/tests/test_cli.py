from __future__ import annotations

import json

import pytest

from maxplus_lyapunov.cli import RunConfig, convergence_table, main, run


def by_method(report):
    return {e.method: e for e in report["estimates"]}


@pytest.fixture
def matrix_file(tmp_path):
    path = tmp_path / "a.txt"
    path.write_text("1 3\n0 2\n")
    return str(path)


def test_run_open_tandem_all():
    report = run(RunConfig(preset="open_tandem", k=5000, replications=10, methods=("all",)))
    est = by_method(report)
    assert est["Triangular"].lambda_ == 1.0
    mc = est["MonteCarlo"]
    assert abs(mc.lambda_ - 1.0) <= mc.half_width
    assert report["config"]["preset"] == "open_tandem" and report["config"]["seed"] == 20240917
    assert report["kingman"]["ok"] and report["discrepancy"][0]["beyond_99ci"] is False


def test_run_matrix_spectral_radius(matrix_file):
    report = run(RunConfig(matrix=matrix_file, methods=("spectral_radius",)))
    assert by_method(report)["SpectralRadius"].lambda_ == 2.0


def test_run_fork_join_both_methods():
    det = [f"det({v})" for v in range(1, 6)]
    report = run(RunConfig(preset="fork_join_5", preset_args={"services": det}, k=2000, replications=2,
                           methods=("decomp", "mc")))
    est = by_method(report)
    assert est["BackwardSkeleton"].lambda_ == 5.0 and est["MonteCarlo"].lambda_ == 5.0


def test_convergence_fixed_matrix(matrix_file):
    rows = convergence_table(RunConfig(matrix=matrix_file, replications=2), [10, 100, 1000])
    drifts = [abs(r["lambda"] - 2.0) for r in rows]
    assert drifts == sorted(drifts, reverse=True)
    assert rows[-1]["drift"] == 0.0


def test_convergence_identity(tmp_path):
    path = tmp_path / "eye.txt"
    path.write_text("0 -inf\n-inf 0\n")
    rows = convergence_table(RunConfig(matrix=str(path), replications=2), [10, 100])
    assert all(r["lambda"] == 0.0 for r in rows)


def test_convergence_closed_tandem():
    rows = convergence_table(RunConfig(preset="closed_tandem", replications=20), [100, 10_000])
    assert abs(rows[-1]["lambda"] - 1.5) <= 3 * rows[-1]["stderr"] + 1.5 / 10_000
    with pytest.raises(ValueError):
        convergence_table(RunConfig(preset="closed_tandem"), [100, 10])


def test_byte_identical_outputs(tmp_path):
    for fmt in ("csv", "json", "table"):
        outs = []
        for i in range(2):
            out = tmp_path / f"r0.{fmt}"
            code = main(["--preset", "closed_tandem", "--k", "500", "--reps", "4", "--format", fmt,
                         "--out", str(out)])
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
    payload = json.loads((tmp_path / "r0.json").read_text())
    assert payload["config"]["k"] == 500 and payload["config"]["expectation_samples"] == 100_000
    header = (tmp_path / "r0.csv").read_text().splitlines()[0]
    assert header == "method,lambda,stderr,ci_lo,ci_hi,k,reps,seed"


def test_preset_arguments(capsys):
    code = main(["--preset", "round_robin", "--queues", "2", "--arrival", "det(5)", "--services", "det(1),det(1)",
                 "--method", "decomp", "--format", "csv"])
    assert code == 0
    out = capsys.readouterr().out
    assert "BackwardSkeleton,10.0" in out


def test_exit_codes(tmp_path, capsys):
    assert main(["--spec", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"nodes": [{"id": 0, "service": "gamma(2)"}], "arcs": []}')
    assert main(["--spec", str(bad)]) == 2
    cyclic = tmp_path / "cyclic.json"
    cyclic.write_text(json.dumps({"nodes": [{"id": 0, "c": 0, "service": "exp(1)"},
                                            {"id": 1, "c": 0, "service": "exp(1)"}],
                                  "arcs": [[0, 1], [1, 0]]}))
    assert main(["--spec", str(cyclic)]) == 3
    nil = tmp_path / "nil.txt"
    nil.write_text("-inf -inf\n3 -inf\n")
    assert main(["--matrix", str(nil), "--k", "10", "--reps", "2"]) == 4
    assert main(["--matrix", str(nil), "--k", "10", "--reps", "2", "--override-existence"]) == 0
    assert main(["--preset", "open_tandem", "--reps", "1"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["--preset", "open_tandem", "--method", "bogus"])
    assert exc.value.code == 2
    capsys.readouterr()
