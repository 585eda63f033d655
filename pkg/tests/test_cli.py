import csv
import json
import math

import pytest

from robust_rdf.cli import CSV_COLUMNS, ConfigError, main, parse_floats, parse_matrix

BERN = """
[problem]
nominal = 0.9, 0.1
distortion = hamming
[solve]
s = {s}
lambda = {lam}
[run]
seed = 0
units = bits
"""


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def test_parse_helpers():
    assert parse_floats("1, 2 3") == [1.0, 2.0, 3.0]
    assert parse_floats("linspace(0, 1, 3)") == [0.0, 0.5, 1.0]
    assert parse_floats("geomspace(1, 100, 3)") == pytest.approx([1.0, 10.0, 100.0])
    assert parse_matrix("0 1; 1 0").tolist() == [[0, 1], [1, 0]]
    with pytest.raises(ConfigError):
        parse_matrix("0 1; 1")
    with pytest.raises(ConfigError):
        parse_floats("a, b")


def test_solve_known_point(tmp_path, capsys):
    cfg = write(tmp_path, BERN.format(s=math.log(9), lam=1))
    code, out = run(capsys, ["solve", "--config", cfg])
    rec = json.loads(out)
    assert code == 0
    assert rec["rate"] == pytest.approx(0.3422825, abs=1e-6)
    for key in ("q_star", "mu_star", "Q_star", "distortion_D", "radius_Gamma", "converged",
                "optimality_certified", "newton_iterations"):
        assert key in rec


def test_solve_units_and_overrides(tmp_path, capsys):
    cfg = write(tmp_path, BERN.format(s=1.0, lam=1))
    _, out_bits = run(capsys, ["solve", "--config", cfg, "--s", str(math.log(9))])
    _, out_nats = run(capsys, ["solve", "--config", cfg, "--s", str(math.log(9)), "--units", "nats"])
    b, n = json.loads(out_bits), json.loads(out_nats)
    assert b["rate"] * math.log(2) == pytest.approx(n["rate"], rel=1e-12)
    assert b["newton_iterations"] == n["newton_iterations"]


def test_solve_out_of_domain_and_zero_s(tmp_path, capsys):
    cfg = write(tmp_path, BERN.format(s=1.0, lam=1e-6))
    code, out = run(capsys, ["solve", "--config", cfg])
    assert code == 3 and json.loads(out)["error"] == "out-of-domain"
    assert "lambda" in json.loads(out)["message"]
    code, out = run(capsys, ["solve", "--config", cfg, "--s", "0", "--lambda", "1"])
    assert code == 0 and json.loads(out)["rate"] == 0.0


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "missing.ini")]) == 2
    bad = write(tmp_path, "[problem]\nnominal = 0.5, 0.6\n")
    assert main(["solve", "--config", bad]) == 2
    nogrid = write(tmp_path, BERN.format(s=1, lam=1), "b.ini")
    assert main(["sweep", "--config", nogrid]) == 2
    units = write(tmp_path, BERN.format(s=1, lam=1).replace("units = bits", "units = furlongs"), "c.ini")
    assert main(["solve", "--config", units]) == 2


SWEEP = """
[problem]
nominal = 0.9, 0.1
[grid]
s = {s}
lambda = {lam}
[run]
units = {units}
"""


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_sweep_csv_schema_and_determinism(tmp_path, capsys):
    cfg = write(tmp_path, SWEEP.format(s="0.5, 1.5, 3", lam="0.2, 1, 5", units="bits"))
    code, _ = run(capsys, ["sweep", "--config", cfg, "--out", str(tmp_path / "a")])
    assert code == 0
    code, _ = run(capsys, ["sweep", "--config", cfg, "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    rows = read_csv(tmp_path / "a" / "sweep.csv")
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 10
    assert (tmp_path / "a" / "sweep.svg").read_text().startswith("<svg")


def test_sweep_units_scale_only_rate_and_gamma(tmp_path, capsys):
    for units in ("bits", "nats"):
        cfg = write(tmp_path, SWEEP.format(s="1, 2", lam="0.5, 2", units=units), f"{units}.ini")
        run(capsys, ["sweep", "--config", cfg, "--out", str(tmp_path / units)])
    b = read_csv(tmp_path / "bits" / "sweep.csv")[1:]
    n = read_csv(tmp_path / "nats" / "sweep.csv")[1:]
    for rb, rn in zip(b, n):
        for col in ("s", "lambda", "D", "newton_iterations", "converged", "optimality_certified"):
            i = CSV_COLUMNS.index(col)
            assert rb[i] == rn[i]
        for col in ("rate", "Gamma"):
            i = CSV_COLUMNS.index(col)
            assert float(rb[i]) * math.log(2) == pytest.approx(float(rn[i]), rel=1e-12, abs=1e-15)


def test_sweep_single_cell_and_flagged_failures(tmp_path, capsys):
    cfg = write(tmp_path, SWEEP.format(s="1", lam="1", units="bits"))
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "one")]) == 0
    assert len(read_csv(tmp_path / "one" / "sweep.csv")) == 2
    capsys.readouterr()
    cfg = write(tmp_path, SWEEP.format(s="1", lam="1e-6, 1e-5, 1", units="bits"), "f.ini")
    code, out = run(capsys, ["sweep", "--config", cfg, "--out", str(tmp_path / "f")])
    # only one of three cells converges
    assert code == 3
    assert len(json.loads(out)["flagged"]) == 2


def test_bernoulli_command(capsys):
    code, out = run(capsys, ["bernoulli", "--beta0", "0.1", "--D", "0.05", "--Gamma", "0"])
    rec = json.loads(out)
    assert code == 0
    h = lambda b: -b * math.log2(b) - (1 - b) * math.log2(1 - b)  # noqa: E731
    assert rec["rate"] == pytest.approx(h(0.1) - h(0.05), abs=1e-12)
    assert set(rec) == {"beta0", "D", "Gamma", "beta_star", "lambda", "rate"}
    assert main(["bernoulli", "--beta0", "0.1", "--D", "0.7", "--Gamma", "0"]) == 2


def test_check_command(tmp_path, capsys):
    cfg = write(tmp_path, BERN.format(s=math.log(9), lam=1))
    code, out = run(capsys, ["check", "--config", cfg])
    rep = json.loads(out)
    assert code == 0 and rep["checked"] == 1 and rep["max_gap_nats"] <= 1e-3
    cfg = write(tmp_path, BERN.format(s=math.log(9), lam=1) + "[check]\nperturb = 0.1\n", "p.ini")
    code, out = run(capsys, ["check", "--config", cfg])
    assert code == 4 and json.loads(out)["violations"] == 1


def test_check_gamma_zero_point(tmp_path, capsys):
    cfg = write(tmp_path, BERN.format(s=math.log(19), lam=1e9))
    code, out = run(capsys, ["check", "--config", cfg])
    assert code == 0 and abs(json.loads(out)["max_gap_nats"]) < 1e-6


PFR = """
[problem]
nominal = 0.9, 0.1
[pfr]
mode = {mode}
sources = {sources}
channel = {channel}
trials = 20000
N = 2
{extra}
[run]
seed = 3
"""


def test_pfr_trivial_and_finite(tmp_path, capsys):
    cfg = write(tmp_path, PFR.format(mode="finite", sources="0.8, 0.2", channel="0.3 0.7; 0.3 0.7", extra=""))
    code, out = run(capsys, ["pfr", "--config", cfg])
    rec = json.loads(out)
    assert code == 0 and rec["empirical_H_KA"] == 0.0 and rec["bound"] == pytest.approx(4.0)
    cfg = write(tmp_path, PFR.format(mode="finite", sources="0.9, 0.1; 0.6, 0.4", channel="bsc(0.1)", extra=""),
                "f.ini")
    code, out = run(capsys, ["pfr", "--config", cfg])
    rec = json.loads(out)
    assert code == 0 and rec["passed"] and rec["slack"] >= 3
    assert set(rec["constants"]) == {"finite_set", "kl_ball"}


def test_pfr_block_and_kl(tmp_path, capsys):
    cfg = write(tmp_path, PFR.format(mode="block", sources="0.9, 0.1; 0.6, 0.4", channel="bsc(0.1)", extra=""))
    code, out = run(capsys, ["pfr", "--config", cfg])
    assert code == 0 and json.loads(out)["block_length"] == 2
    kl = PFR.format(mode="kl", sources="", channel="bsc(0.1)", extra="Gamma = 0.1\nmu = 0.8, 0.2")
    code, out = run(capsys, ["pfr", "--config", write(tmp_path, kl, "k.ini")])
    assert code == 0 and json.loads(out)["Gamma"] == pytest.approx(0.1 / math.log(2))


def test_pfr_support_violation_exit_4(tmp_path, capsys):
    cfg = write(tmp_path, PFR.format(mode="finite", sources="1, 0; 0.5, 0.5", channel="1 0; 0 1",
                                     extra="rule = index\nsource_index = 1"))
    code, out = run(capsys, ["pfr", "--config", cfg])
    assert code == 4 and json.loads(out)["error"] == "support"


def test_pfr_channel_from_solve(tmp_path, capsys):
    cfg = write(tmp_path, BERN.format(s=math.log(9), lam=1) + "[pfr]\nchannel = solve\ntrials = 10000\n")
    code, out = run(capsys, ["pfr", "--config", cfg])
    assert code == 0 and json.loads(out)["passed"]
