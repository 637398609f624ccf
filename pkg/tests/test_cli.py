import csv
import json

from varstokes.cli import build_config, main, make_parser


def run(args):
    return main(args)


def test_config_precedence(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("n=8\nmu=const:1\n# comment\ntol=1e-6\n")
    args = make_parser().parse_args(
        ["verify", "--config", str(cfgfile), "--n", "4", "--out", str(tmp_path)]
    )
    cfg = build_config(args)
    assert cfg.n == 4  # flag beats file
    assert cfg.mu == "const:1"  # file beats default
    assert cfg.tol == 1e-6
    assert cfg.R == 2.0  # default


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense-line\n")
    assert run(["verify", "--config", str(bad), "--out", str(tmp_path)]) == 2
    bad.write_text("unknown_key=3\n")
    assert run(["verify", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert run(["verify", "--mu", "two-phase:1", "--out", str(tmp_path)]) == 2
    assert run(["verify", "--n", "6", "--out", str(tmp_path)]) == 2


def test_verify_default_passes_and_is_deterministic(tmp_path):
    out1 = tmp_path / "a"
    assert run(["verify", "--out", str(out1), "--n", "4"]) == 0
    first = (out1 / "verify.json").read_bytes()
    assert run(["verify", "--out", str(out1), "--n", "4"]) == 0
    assert (out1 / "verify.json").read_bytes() == first
    rep = json.loads((out1 / "verify.json").read_text())
    assert rep["all_pass"] is True
    assert {"config", "checks", "spectrum"} <= set(rep)
    for chk in rep["checks"]:
        assert {"name", "residual", "tolerance", "passed"} <= set(chk)


def test_verify_zero_tolerance_fails(tmp_path):
    assert run(["verify", "--out", str(tmp_path), "--n", "4", "--tol", "0"]) == 1
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["all_pass"] is False
    assert any(not c["passed"] for c in rep["checks"])


def test_verify_dumps_mesh(tmp_path):
    assert run(["verify", "--out", str(tmp_path), "--n", "4", "--dump-mesh"]) == 0
    assert (tmp_path / "mesh.txt").exists()


def test_dirichlet_zero_data(tmp_path):
    assert run(
        ["dirichlet", "--out", str(tmp_path), "--n", "4", "--datum", "zero",
         "--force", "zero", "--method", "both"]
    ) == 0
    with open(tmp_path / "solution.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 26
    for row in rows:
        for key, val in row.items():
            if key.startswith("u"):
                assert float(val) == 0.0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["variational"]["trace_error"] == 0.0


def test_dirichlet_stokeslet_oracle_columns(tmp_path):
    assert run(
        ["dirichlet", "--out", str(tmp_path), "--n", "4", "--mu", "const:1",
         "--datum", "stokeslet", "--method", "variational"]
    ) == 0
    with open(tmp_path / "solution.csv") as fh:
        header = fh.readline().strip().split(",")
    assert "ux_oracle" in header and "ux_variational" in header
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert "oracle_agreement_rel" in summary


def test_dirichlet_orthogonality_exit_code(tmp_path):
    code = run(
        ["dirichlet", "--out", str(tmp_path), "--n", "4", "--datum", "normal-riesz",
         "--method", "potential"]
    )
    assert code == 2


def test_convergence_small_levels(tmp_path):
    assert run(
        ["convergence", "--out", str(tmp_path), "--levels", "4,8", "--seed", "1"]
    ) == 0
    with open(tmp_path / "rates.csv") as fh:
        rows = list(csv.DictReader(fh))
    cases = {r["case"] for r in rows}
    assert {"curl-bump", "stokeslet-truncation"} <= cases
    bump = [r for r in rows if r["case"] == "curl-bump"]
    assert len(bump) == 2
    assert float(bump[1]["order_l2"]) > 1.0
    trunc = [r for r in rows if r["case"] == "stokeslet-truncation"]
    assert len(trunc) == 2
    assert float(trunc[1]["probe_rel_err"]) <= 0.7 * float(trunc[0]["probe_rel_err"])


def test_infsup_report(tmp_path):
    assert run(["infsup", "--out", str(tmp_path), "--levels", "4,8"]) == 0
    rep = json.loads((tmp_path / "infsup.json").read_text())
    assert rep["pairs"]["p2q0"]["flag"] == "STABLE"
    assert rep["pairs"]["p2q0"]["drift"] <= 0.3
    # coercivity constant of the viscous block on Ker B, coarse level
    assert rep["pairs"]["p2q0"]["levels"][0]["lambda_h"] > 0
    assert rep["pairs"]["p1p1"]["flag"] == "UNSTABLE"
    assert rep["pairs"]["synthetic_zero"]["beta_h"] == 0.0
