import csv
import json

import pytest

from hjhomog.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from hjhomog.config import validate

MONOTONE_RATE = {
    "hamiltonian": {"builtin": "MONOTONE"},
    "rate": {"mode": "rate", "c": 0.0, "target": 0.0, "eps_list": [0.25, 0.125, 0.0625, 0.03125]},
}


def run(tmp_path, cfg, command, *flags, name="out"):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    out = tmp_path / name
    code = main([command, "--config", str(path), "--out", str(out), *flags])
    return code, out


def load(path):
    return json.loads(path.read_text(encoding="utf-8"))


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_effective_ex32(tmp_path):
    cfg = {"hamiltonian": {"builtin": "EX32"}, "effective": {"theta_range": [-14, 14], "count": 57, "c": 0.0}}
    code, out = run(tmp_path, cfg, "effective", "--plot")
    assert code == EXIT_OK
    doc = load(out / "levelset.json")
    validate(doc, "levelset")
    assert abs(doc["theta_minus"] + 10) <= 0.05 and abs(doc["theta_plus"] - 10) <= 0.05
    assert not doc["singleton"] and doc["certificate"] is None
    assert rows(out / "curve.csv")[0] == ["theta", "hbar", "residual"]
    assert (out / "curve.svg").read_text().startswith("<?xml")
    # every default is materialised into the output
    assert doc["config"]["grid"]["points"] == 256 and doc["config"]["tol"] == 1e-6


def test_effective_monotone_singleton(tmp_path):
    cfg = {"hamiltonian": {"builtin": "MONOTONE"}, "effective": {"c": 0.5}}
    code, out = run(tmp_path, cfg, "effective")
    doc = load(out / "levelset.json")
    assert code == EXIT_OK and doc["singleton"]
    assert abs(doc["theta_minus"] - 0.5) <= 0.05
    assert doc["certificate"]["verdict"] == "certified-singleton"


def test_malformed_expression(tmp_path, capsys):
    cfg = {"hamiltonian": {"expr": "0.5*p1^2 + cos(2*pi*x1 - 1 + u"}}
    code, out = run(tmp_path, cfg, "effective")
    err = capsys.readouterr().err
    assert code == EXIT_CONFIG and "^" in err
    assert not out.exists()


@pytest.mark.parametrize(
    "cfg",
    [
        {"hamiltonian": {"builtin": "NOPE"}},
        {"hamiltonian": {"builtin": "MONOTONE"}, "order": "third"},
        {"hamiltonian": {"builtin": "MONOTONE"}, "effective": {"theta_range": [1, -1]}},
        {"hamiltonian": {"builtin": "MONOTONE"}, "solve": {"eps": 0.3}},
    ],
)
def test_config_errors(tmp_path, capsys, cfg):
    command = "solve" if "solve" in cfg else "effective"
    code, _ = run(tmp_path, cfg, command)
    assert code == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_config_and_bad_usage(tmp_path):
    assert main(["effective"]) == EXIT_CONFIG
    assert main(["bogus"]) == EXIT_CONFIG
    assert main(["effective", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_solve_monotone(tmp_path):
    cfg = {"hamiltonian": {"builtin": "MONOTONE"}, "solve": {"eps": 0.0625, "c": 0.0}}
    code, out = run(tmp_path, cfg, "solve", "--plot")
    assert code == EXIT_OK
    doc = load(out / "probe.json")
    validate(doc, "probe")
    assert doc["verdict"] == "certified-unique" and doc["settled"]
    table = rows(out / "solution.csv")
    assert table[0] == ["x", "u"] and len(table) == 1 + 16 * 256
    assert (out / "solution.svg").exists()


def test_solve_ex32(tmp_path):
    cfg = {"hamiltonian": {"builtin": "EX32"},
           "solve": {"eps": 0.0625, "interval": {"theta_minus": -10.0, "theta_plus": 10.0}}}
    code, out = run(tmp_path, cfg, "solve")
    doc = load(out / "probe.json")
    assert code == EXIT_OK and doc["verdict"] == "inconclusive"
    assert (out / "envelope.csv").exists() and doc["envelope"]["contained"]
    assert rows(out / "envelope.csv")[0] == ["x", "lower", "upper"]


def test_solve_ex32_strict_is_numeric_failure(tmp_path, capsys):
    cfg = {"hamiltonian": {"builtin": "EX32"},
           "solve": {"eps": 0.0625, "strict": True, "interval": {"theta_minus": -10.0, "theta_plus": 10.0}}}
    code, _ = run(tmp_path, cfg, "solve")
    assert code == EXIT_NUMERIC and "trace" in capsys.readouterr().err


def test_solve_free_u(tmp_path):
    cfg = {"hamiltonian": {"builtin": "FREE_U"}, "solve": {"eps": 0.125, "envelope": False}}
    code, out = run(tmp_path, cfg, "solve")
    assert code == EXIT_OK
    assert all(abs(float(r[1])) <= 1e-6 for r in rows(out / "solution.csv")[1:])
    assert load(out / "probe.json")["verdict"] == "certified-unique"


def test_mather_pendulum(tmp_path):
    code, out = run(tmp_path, {"hamiltonian": {"builtin": "PENDULUM"}}, "mather", "--plot")
    assert code == EXIT_OK
    doc = load(out / "diagnostic.json")
    validate(doc, "diagnostic")
    assert abs(doc["c_value"]) <= 1e-2
    table = rows(out / "measure.csv")
    assert table[0] == ["x", "v", "weight"]
    heavy = max(table[1:], key=lambda r: float(r[2]))
    x, v = float(heavy[0]), float(heavy[1])
    assert min(x, 1 - x) <= 1 / 16 and abs(v) <= 0.5
    assert (out / "marginal.svg").exists()


@pytest.mark.parametrize("name,status", [("EX31N", "ordinal-found"), ("MONOTONE", "empty-certified")])
def test_mather_diagnostic_status(tmp_path, name, status):
    code, out = run(tmp_path, {"hamiltonian": {"builtin": name}}, "mather")
    assert code == EXIT_OK and load(out / "diagnostic.json")["status"] == status


def test_mather_second_order(tmp_path):
    code, out = run(tmp_path, {"hamiltonian": {"builtin": "PENDULUM1"}, "order": "second"}, "mather")
    assert code == EXIT_OK
    assert load(out / "diagnostic.json")["status"] == "density"
    assert (out / "marginal.csv").exists()


def test_rate_monotone(tmp_path):
    code, out = run(tmp_path, MONOTONE_RATE, "rate", "--plot")
    assert code == EXIT_OK
    doc = load(out / "summary.json")
    validate(doc, "summary")
    assert doc["pass"] is True and doc["slope"] >= 0.7
    assert rows(out / "rate.csv")[0] == ["eps", "sup_error", "lipschitz", "iterations"]
    assert (out / "rate.svg").exists()


def test_rate_three_eps(tmp_path):
    cfg = json.loads(json.dumps(MONOTONE_RATE))
    cfg["rate"]["eps_list"] = [0.25, 0.125, 0.0625]
    code, out = run(tmp_path, cfg, "rate")
    assert code == EXIT_CONFIG and not (out / "summary.json").exists()


def test_rate_ex32_without_singleton_is_numeric_failure(tmp_path):
    cfg = {"hamiltonian": {"builtin": "EX32"}, "rate": {"mode": "rate", "c": 0.0}}
    code, _ = run(tmp_path, cfg, "rate")
    assert code == EXIT_NUMERIC


def test_envelope_sweep_ex32(tmp_path):
    cfg = {"hamiltonian": {"builtin": "EX32"},
           "rate": {"mode": "envelope", "eps_list": [0.125, 0.0625, 0.03125],
                    "interval": {"theta_minus": -10.0, "theta_plus": None}}}
    code, out = run(tmp_path, cfg, "rate")
    assert code == EXIT_OK
    doc = load(out / "summary.json")
    validate(doc, "summary")
    assert doc["containment"] and doc["plus_unbounded"] and not doc["minus_unbounded"]
    assert rows(out / "envelope_sweep.csv")[0][0] == "eps"


def test_outputs_are_deterministic(tmp_path):
    _, a = run(tmp_path, MONOTONE_RATE, "rate", name="a")
    _, b = run(tmp_path, MONOTONE_RATE, "rate", name="b")
    assert (a / "rate.csv").read_bytes() == (b / "rate.csv").read_bytes()
    sa, sb = load(a / "summary.json"), load(b / "summary.json")
    assert sa == sb
    text = (a / "summary.json").read_text(encoding="utf-8")
    assert "\r" not in text and list(json.loads(text)) == sorted(json.loads(text))


def test_seed_flag_is_recorded(tmp_path):
    code, out = run(tmp_path, {"hamiltonian": {"builtin": "MONOTONE"}}, "effective", "--seed", "7")
    assert code == EXIT_OK and load(out / "levelset.json")["config"]["seed"] == 7


def test_examples(tmp_path, capsys):
    assert main(["examples"]) == EXIT_OK
    listing = capsys.readouterr().out
    for name in ("PENDULUM", "EX31N", "EX32", "MONOTONE", "FREE_U"):
        assert name in listing
    assert main(["examples", "--out", str(tmp_path)]) == EXIT_OK
    doc = load(tmp_path / "examples.json")
    validate(doc, "examples")
    assert "EX32" in doc
