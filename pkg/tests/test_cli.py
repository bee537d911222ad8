import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from lossylie.cli import RunConfig, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = {
    "modes": 2,
    "max_total": 2,
    "sigma": [0.0, 0.0],
    "gamma": [0.0, 0.0],
    "kappa": [1.0],
    "initial_state": {"type": "fock", "occupations": [1, 1]},
    "t_final": 2.0,
    "samples": 41,
    "solver": "oracle",
}


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def write_config(tmp_path, **overrides):
    cfg = {**BASE, **overrides}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    rows = list(csv.reader(Path(path).read_text().splitlines()))
    return rows[0], np.array(rows[1:], dtype=float)


def test_evolve_header_and_hermitian_dip(tmp_path):
    out = tmp_path / "traj.csv"
    code, _, err = run(["evolve", "--config", str(write_config(tmp_path)), "--out", str(out)])
    assert code == 0, err
    header, data = read_csv(out)
    assert header == ["t", "trace", "n_1", "n_2", "G_12", "purity"]
    assert data.shape == (41, 6)
    np.testing.assert_allclose(data[:, 4], np.cos(2 * data[:, 0]) ** 2, atol=1e-8)


def test_fifteen_significant_digits(tmp_path):
    out = tmp_path / "traj.csv"
    run(["evolve", "--config", str(write_config(tmp_path)), "--out", str(out)])
    line = out.read_text().splitlines()[2]
    assert line.split(",")[0] == f"{2.0 / 40:.15g}"


def test_output_is_deterministic(tmp_path):
    cfg = write_config(tmp_path, gamma=[0.5, 0.1])
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["evolve", "--config", str(cfg), "--out", str(a)])
    run(["evolve", "--config", str(cfg), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("solver", ["eigen", "weinorman"])
def test_other_solvers(tmp_path, solver):
    out = tmp_path / "traj.csv"
    code, _, err = run(["evolve", "--config", str(write_config(tmp_path, solver=solver)), "--out", str(out)])
    assert code == 0, err
    _, data = read_csv(out)
    np.testing.assert_allclose(data[:, 4], np.cos(2 * data[:, 0]) ** 2, atol=1e-8)


def test_all_writes_sidecar(tmp_path):
    out = tmp_path / "traj.csv"
    code, _, err = run(["evolve", "--config", str(write_config(tmp_path, solver="all")), "--out", str(out)])
    assert code == 0, err
    report = json.loads((tmp_path / "traj.csv.compare.json").read_text())
    assert report["agree"] is True
    assert set(report["max_trace_distance"]) == {"oracle-eigen", "oracle-weinorman", "eigen-weinorman"}
    assert max(report["max_trace_distance"].values()) < 1e-6


def test_compare_prints_json(tmp_path):
    code, out, err = run(["compare", "--config", str(CONFIGS / "kappa_ramp.json")])
    assert code == 0, err
    report = json.loads(out)
    assert report["skipped"] == {"eigen": "time-dependent parameters"}
    assert report["max_trace_distance"]["oracle-weinorman"] < 1e-6


def test_mixture_config(tmp_path):
    state = {"type": "mixture", "terms": [{"weight": 0.5, "occupations": [1, 0]}, {"weight": 0.5, "occupations": [0, 2]}]}
    out = tmp_path / "t.csv"
    code, _, err = run(["evolve", "--config", str(write_config(tmp_path, initial_state=state)), "--out", str(out)])
    assert code == 0, err
    _, data = read_csv(out)
    assert data[0, 2] == pytest.approx(0.5) and data[0, 3] == pytest.approx(1.0)


def test_three_modes_have_all_pairs(tmp_path):
    cfg = write_config(
        tmp_path, modes=3, sigma=[0, 0, 0], gamma=[0.1, 0, 0], kappa=[1.0, 0.5],
        initial_state={"type": "fock", "occupations": [1, 0, 1]}, samples=5,
    )
    out = tmp_path / "t.csv"
    assert run(["evolve", "--config", str(cfg), "--out", str(out)])[0] == 0
    header, _ = read_csv(out)
    assert header == ["t", "trace", "n_1", "n_2", "n_3", "G_12", "G_13", "G_23", "purity"]


@pytest.mark.parametrize(
    "overrides",
    [
        {"samples": 0},
        {"kappa": []},
        {"kappa": [{"times": [0.0, 1.0], "values": [1.0]}]},
        {"kappa": [{"times": [0.5, 1.0], "values": [1.0, 2.0]}]},
        {"gamma": [-0.1, 0.0]},
        {"initial_state": {"type": "fock", "occupations": [2, 1]}},
        {"initial_state": {"type": "mixture", "terms": [{"weight": 0.5, "occupations": [1, 1]}]}},
        {"initial_state": {"type": "coherent"}},
        {"solver": "magic"},
        {"tolerances": {"rtol": -1}},
        {"t_final": -1.0},
        {"bogus_key": 1},
    ],
)
def test_config_errors_exit_1(tmp_path, overrides):
    code, _, err = run(["evolve", "--config", str(write_config(tmp_path, **overrides)), "--out", str(tmp_path / "x.csv")])
    assert code == 1
    assert err.startswith("error kind=ConfigError exit=1 message=")
    assert err.count("\n") == 1


def test_malformed_json_exit_1(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run(["evolve", "--config", str(p), "--out", str(tmp_path / "x.csv")])[0] == 1


def test_eigen_at_exceptional_point_exit_2(tmp_path):
    cfg = write_config(tmp_path, gamma=[2.0, 0.0], solver="eigen")
    code, _, err = run(["evolve", "--config", str(cfg), "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "ExceptionalPointError" in err


def test_integrator_failure_exit_2(tmp_path):
    cfg = write_config(tmp_path, tolerances={"max_steps": 2})
    code, _, err = run(["evolve", "--config", str(cfg), "--out", str(tmp_path / "x.csv")])
    assert code == 2 and "IntegrationError" in err


def test_spectrum(tmp_path):
    code, out, _ = run(["spectrum", "--config", str(write_config(tmp_path, gamma=[1.0, 0.0]))])
    assert code == 0
    rep = json.loads(out)
    lam = sorted((complex(*z) for z in rep["lambdas"]), key=lambda z: z.imag)
    assert lam[0] == pytest.approx(-0.5 - 0.8660254037844386j)
    assert len(rep["eigenvalue_multiset"]) == 8
    assert len(rep["exponents"]) == 36
    re = [e["value"][0] for e in rep["exponents"]]
    assert all(a >= b - 1e-12 for a, b in zip(re, re[1:]))


def test_spectrum_broken_phase():
    code, out, _ = run(["spectrum", "--config", str(CONFIGS / "broken_phase.json")])
    assert code == 0
    assert json.loads(out)["slowest_nonzero_exponent"][0] == pytest.approx(-0.5)


def test_spectrum_single_mode(tmp_path):
    cfg = write_config(tmp_path, modes=1, sigma=[0.2], gamma=[0.3], kappa=[], initial_state={"type": "fock", "occupations": [1]})
    code, out, _ = run(["spectrum", "--config", str(cfg)])
    assert code == 0
    key = lambda z: (z.real, z.imag)
    ms = sorted((complex(*z) for z in json.loads(out)["eigenvalue_multiset"]), key=key)
    lam = -0.3 - 0.2j
    assert ms == pytest.approx(sorted([lam, -lam, lam.conjugate(), -lam.conjugate()], key=key))


def test_spectrum_ep_exit_2(tmp_path):
    assert run(["spectrum", "--config", str(write_config(tmp_path, gamma=[2.0, 0.0]))])[0] == 2


def test_hom_scan(tmp_path):
    out = tmp_path / "dip.csv"
    code, _, _ = run(["hom-scan", "--kappa", "1", "--gammas", "0,1,1.999,2.5", "--out", str(out)])
    assert code == 0
    header, data = read_csv(out)
    assert header == ["gamma_over_kappa", "kappa_t_dip", "Gamma_min", "pt_broken"]
    assert data[0, 1] == pytest.approx(math.pi / 4, abs=1e-5)
    assert data[1, 1] == pytest.approx(0.76100, abs=1e-4)
    assert data[2, 1] == pytest.approx(1 / math.sqrt(2), abs=1e-2)
    np.testing.assert_array_equal(data[:, 3], [0, 0, 0, 1])


@pytest.mark.parametrize("argv", [["hom-scan", "--kappa", "0", "--gammas", "1", "--out", "x"],
                                  ["hom-scan", "--kappa", "1", "--gammas", "a,b", "--out", "x"],
                                  ["structure", "--modes", "0"],
                                  ["nonsense"], []])
def test_argument_errors_exit_1(argv):
    assert run(argv)[0] == 1


@pytest.mark.parametrize("n, dims", [(1, [3, 1, 2, 0, 0]), (2, [12, 4, 2, 3, 3])])
def test_structure_json(n, dims):
    code, out, _ = run(["structure", "--modes", str(n)])
    assert code == 0
    rep = json.loads(out)
    d = rep["dims"]
    assert [d["total"], d["nilpotent"], d["abelian"], d["sl_left"], d["sl_right"]] == dims
    assert rep["closure_residual"] <= 1e-10 and rep["jacobi_residual"] <= 1e-10


def test_structure_text():
    code, out, _ = run(["structure", "--modes", "2", "--format", "text"])
    assert code == 0 and "nilpotent      4" in out


def test_shipped_configs_parse():
    for path in CONFIGS.glob("*.json"):
        RunConfig.from_dict(json.loads(path.read_text()))
