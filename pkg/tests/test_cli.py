import json
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from schatten.cli import main
from schatten.linops import SparseSym
from schatten.matgen import load_matrix_market, write_matrix_market
from schatten.montecarlo import schatten_exact


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == 0 and out.lstrip().startswith("{") else out), err


def test_exact_hand_sums(capsys):
    assert run(capsys, "exact", "--matrix", "synth:linear:100", "--p", "1")[1]["value"] == 5550
    assert run(capsys, "exact", "--matrix", "synth:clustered:100", "--p", "1")[1]["value"] == 2080
    assert run(capsys, "exact", "--matrix", "eye:9", "--p", "2")[1]["value"] == pytest.approx(3.0)


def test_exact_non_spsd(capsys):
    code, _, err = run(capsys, "exact", "--matrix", "diag:1,-2", "--p", "2")
    assert code == 2 and "negative" in err


def test_estimate_identity(capsys):
    code, out, _ = run(capsys, "estimate", "--matrix", "eye:16", "--p", "4", "--M", "7",
                       "--dist", "rademacher", "--seed", "5")
    assert code == 0 and out["value"] == 2.0
    for key in ("schema_version", "value", "p", "method", "M", "N", "matvecs", "seed", "elapsed_s"):
        assert key in out


def test_estimate_deterministic(capsys):
    args = ("estimate", "--matrix", "synth:exponential:30", "--p", "3", "--M", "40", "--seed", "12")
    a, b = run(capsys, *args)[1], run(capsys, *args)[1]
    a.pop("elapsed_s"), b.pop("elapsed_s")
    assert a == b


def test_estimate_threads_invariant(capsys):
    args = ("estimate", "--matrix", "synth:linear:30", "--p", "2", "--M", "50", "--seed", "1")
    a = run(capsys, *args, "--threads", "1")[1]["value"]
    assert run(capsys, *args, "--threads", "4")[1]["value"] == a


def test_non_integer_p_hint(capsys):
    code, _, err = run(capsys, "estimate", "--matrix", "eye:3", "--p", "2.5", "--M", "3", "--seed", "1")
    assert code == 1 and "--method cheby" in err


def test_seed_required_non_interactive(capsys):
    code, _, err = run(capsys, "estimate", "--matrix", "eye:3", "--p", "2", "--M", "3")
    assert code == 1 and "--seed" in err


@pytest.mark.parametrize("argv", [
    ["estimate", "--matrix", "eye:3", "--p", "2", "--M", "0", "--seed", "1"],
    ["estimate", "--matrix", "bogus:3", "--p", "2", "--M", "3", "--seed", "1"],
    ["estimate", "--matrix", "eye:3", "--p", "2", "--M", "3", "--seed", "-4"],
    ["estimate", "--matrix", "eye:3", "--p", "3", "--M", "3", "--seed", "1", "--method", "cheby"],
    ["bounds", "--epsilon", "2", "--delta", "0.1"],
    ["bounds", "--epsilon", "0.1"],
    ["bounds", "--epsilon", "0.1", "--p", "3"],
    ["coeffs", "--q", "2", "--interval", "0,1", "--N", "3"],
    ["nosuchcommand"],
])
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as info:
        raise SystemExit(main(argv))
    assert info.value.code == 1


def test_cheby_estimate_with_interval(capsys, caplog):
    code, out, err = run(capsys, "estimate", "--matrix", "synth:linear:50", "--p", "3",
                         "--M", "20", "--method", "cheby", "--N", "4", "--interval", "6,55",
                         "--seed", "2")
    assert code == 0 and out["matvecs"] == 80 and out["N"] == 4
    assert "cheaper" in caplog.text  # N >= p/2


def test_strict_spectrum_violation(capsys):
    code, _, err = run(capsys, "estimate", "--matrix", "synth:linear:20", "--p", "3", "--M", "5",
                       "--method", "cheby", "--N", "6", "--interval", "6,10", "--seed", "1",
                       "--strict")
    assert code == 2


@pytest.fixture
def ill_conditioned_file(tmp_path):
    """Sparse SPD matrix with condition number ~1e13, written as Matrix Market."""
    n = 200
    T = sp.diags([-np.ones(n - 1), 2.1 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    S = sp.diags(np.logspace(-6, 0, n))
    path = tmp_path / "ill.mtx"
    write_matrix_market(path, SparseSym.from_scipy(S @ T @ S))
    return path


def test_ill_conditioned_file_cheby(capsys, ill_conditioned_file):
    code, out, _ = run(capsys, "estimate", "--matrix", f"mm:{ill_conditioned_file}", "--p", "80",
                       "--M", "300", "--method", "cheby", "--N", "10", "--seed", "3")
    assert code == 0 and out["matvecs"] == 3000
    exact = schatten_exact(load_matrix_market(ill_conditioned_file), 80)
    assert out["value"] == pytest.approx(exact, rel=0.05)


def test_asymmetric_file_exit_2(capsys, tmp_path):
    p = tmp_path / "bad.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1.0\n2 1 2.0\n")
    assert run(capsys, "exact", "--matrix", f"mm:{p}", "--p", "2")[0] == 2
    assert run(capsys, "exact", "--matrix", f"mm:{tmp_path / 'missing.mtx'}", "--p", "2")[0] == 1


def test_bounds(capsys):
    assert run(capsys, "bounds", "--epsilon", "1", "--delta", "0.7357588823", "--variant", "mc")[1]["M"] == 8
    assert run(capsys, "bounds", "--epsilon", "0.5", "--delta", "0.01", "--variant", "cheby")[1]["M"] == 1526
    out = run(capsys, "bounds", "--epsilon", "0.1", "--p", "10", "--kappa", "1.41421356")[1]
    assert out["N"] == 8 and "M" not in out


def test_experiment(capsys, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"matrix": "eye:6", "p": 2, "M_grid": [1, 4], "R": 3,
                                "distribution": "rademacher", "output": str(tmp_path / "env")}))
    assert main(["experiment", "--plan", str(plan)]) == 0
    lines = (tmp_path / "env.csv").read_text().splitlines()
    assert len(lines) == 3 and all(line.split(",")[5] == "0.0" for line in lines[1:])
    assert json.loads((tmp_path / "env.json").read_text())["schema_version"] == 1


def test_experiment_rejects_duplicates(capsys, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"matrix": "eye:6", "p": 2, "M_grid": [4, 4]}))
    code, _, err = run(capsys, "experiment", "--plan", str(plan))
    assert code == 1 and "duplicates" in err


def test_oed_small(capsys, tmp_path):
    dense = tmp_path / "g.mtx"
    code, out, _ = run(capsys, "oed", "--nx", "30", "--nt", "20", "--p", "2", "--M", "100000",
                       "--seed", "1", "--exact", "--export-dense", str(dense))
    assert code == 0 and out["rel_err"] < 0.02
    assert load_matrix_market(dense).dim == 30


def test_oed_misaligned(capsys):
    code, _, err = run(capsys, "oed", "--nt", "30", "--p", "1", "--seed", "1")
    assert code == 1 and "observation time" in err


def test_oed_cg_failure(capsys, monkeypatch):
    import schatten.oed as oed
    orig = oed.PosteriorCovOp.__init__

    def starved(self, model, **kw):
        orig(self, model, **{**kw, "maxiter": 1})
    monkeypatch.setattr(oed.PosteriorCovOp, "__init__", starved)
    code, _, err = run(capsys, "oed", "--nx", "30", "--nt", "20", "--p", "1", "--M", "2",
                       "--seed", "1", "--solver", "cg")
    assert code == 2 and "CG" in err


def test_gen_and_coeffs(capsys, tmp_path):
    out = tmp_path / "t.mtx"
    assert run(capsys, "gen", "--matrix", "trefethen:20", "--out", str(out))[0] == 0
    assert load_matrix_market(out).to_dense()[0, 0] == 2
    code, d, _ = run(capsys, "coeffs", "--q", "1", "--interval", "1,3", "--N", "2")
    assert code == 0 and d["coeffs"] == pytest.approx([2, 1, 0], abs=1e-14)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "schatten", "bounds", "--epsilon", "0.2",
                          "--delta", "0.1"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["M"] == 600
