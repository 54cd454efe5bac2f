import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import armle
from armle.cli import main

AR1_KERNEL = '{"family": "ar1", "params": {"a": 0.5}}'
WHITE_KERNEL = '{"family": "white", "params": {}}'


@pytest.fixture(autouse=True)
def quiet_env(monkeypatch):
    monkeypatch.setenv("ARMLE_QUIET", "1")


def _simulate_file(tmp_path, name, theta, kernel_json, n, seed):
    path = tmp_path / name
    code = main(
        [
            "simulate",
            "--theta",
            ",".join(repr(v) for v in theta),
            "--kernel",
            kernel_json,
            "--n",
            str(n),
            "--seed",
            str(seed),
            "--out",
            str(path),
        ]
    )
    assert code == 0
    return path


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def test_simulate_stdout_schema(capsys):
    assert main(["simulate", "--theta", "0.5", "--kernel", WHITE_KERNEL, "--n", "5"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[0] == "t,x"
    assert len(lines) == 6
    assert [row.split(",")[0] for row in lines[1:]] == ["1", "2", "3", "4", "5"]


def test_simulate_matches_library_and_round_trips(tmp_path):
    path = _simulate_file(tmp_path, "sim.csv", (0.4, 0.2), AR1_KERNEL, 40, 9)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    got = np.array([float(r["x"]) for r in rows])
    expected = armle.simulate_series((0.4, 0.2), armle.ar1(0.5), 40, 9)
    np.testing.assert_array_equal(got, expected)


def test_simulate_deterministic(capsys):
    argv = ["simulate", "--theta", "0.3", "--kernel", AR1_KERNEL, "--n", "20", "--seed", "7"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_simulate_lag_one_autocorrelation(capsys):
    assert (
        main(["simulate", "--theta", "0.5", "--kernel", WHITE_KERNEL, "--n", "20000"])
        == 0
    )
    lines = capsys.readouterr().out.strip().split("\n")[1:]
    x = np.array([float(line.split(",")[1]) for line in lines])
    acf1 = float(x[1:] @ x[:-1] / (x @ x))
    assert acf1 == pytest.approx(0.5, abs=0.02)


# ---------------------------------------------------------------------------
# filter / validate-kernel
# ---------------------------------------------------------------------------


def test_filter_dumps_pacf_and_variances(capsys):
    assert main(["filter", "--kernel", AR1_KERNEL, "--n", "6"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0] == "n,beta,sigma2"
    beta, sigma2 = armle.pacf_and_variances(armle.ar1(0.5), 6)
    for m, line in enumerate(lines[1:]):
        idx, b, s2 = line.split(",")
        assert int(idx) == m + 1
        assert float(b) == beta[m]
        assert float(s2) == sigma2[m]
    # ar1 closed form: beta_1 = a, beta_m = 0 afterwards; sigma_1 = 1.
    assert float(lines[1].split(",")[1]) == 0.5
    assert float(lines[1].split(",")[2]) == 1.0
    assert float(lines[2].split(",")[1]) == 0.0
    assert float(lines[2].split(",")[2]) == 0.75
    assert float(lines[3].split(",")[2]) == 0.75


def test_validate_kernel_json(capsys):
    assert main(["validate-kernel", "--kernel", AR1_KERNEL, "--horizon", "64"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] is True
    assert doc["horizon"] == 64
    assert doc["min_sigma2"] > 0.0


# ---------------------------------------------------------------------------
# estimate / test / lan
# ---------------------------------------------------------------------------


def test_estimate_recovers_theta(tmp_path, capsys):
    path = _simulate_file(tmp_path, "x.csv", (0.5,), WHITE_KERNEL, 2000, 1)
    assert (
        main(["estimate", "--in", str(path), "--p", "1", "--kernel", WHITE_KERNEL]) == 0
    )
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {
        "theta_hat",
        "stderr",
        "gram_over_n",
        "cond",
        "n",
        "p",
        "log_likelihood",
    }
    assert doc["n"] == 2000
    assert doc["p"] == 1
    assert abs(doc["theta_hat"][0] - 0.5) < 0.1
    assert len(doc["stderr"]) == 1
    assert doc["stderr"][0] > 0.0
    assert np.array(doc["gram_over_n"]).shape == (1, 1)


def test_estimate_matches_library(tmp_path, capsys):
    path = _simulate_file(tmp_path, "x.csv", (0.3, 0.2), AR1_KERNEL, 300, 5)
    assert (
        main(["estimate", "--in", str(path), "--p", "2", "--kernel", AR1_KERNEL]) == 0
    )
    doc = json.loads(capsys.readouterr().out)
    x = armle.simulate_series((0.3, 0.2), armle.ar1(0.5), 300, 5)
    ref = armle.mle(armle.filter_observations(x, armle.ar1(0.5), 2))
    np.testing.assert_allclose(doc["theta_hat"], ref.theta_hat, rtol=1e-12)
    np.testing.assert_allclose(doc["stderr"], ref.stderr, rtol=1e-12)


def test_test_at_the_estimate_accepts(tmp_path, capsys):
    path = _simulate_file(tmp_path, "x.csv", (0.4,), WHITE_KERNEL, 500, 3)
    assert (
        main(["estimate", "--in", str(path), "--p", "1", "--kernel", WHITE_KERNEL]) == 0
    )
    theta_hat = json.loads(capsys.readouterr().out)["theta_hat"][0]
    assert (
        main(
            [
                "test",
                "--in",
                str(path),
                "--kernel",
                WHITE_KERNEL,
                "--theta0",
                repr(theta_hat),
            ]
        )
        == 0
    )
    doc = json.loads(capsys.readouterr().out)
    assert doc["statistic"] == pytest.approx(0.0, abs=1e-9)
    assert doc["reject"] is False
    assert doc["pvalue"] > 0.99


def test_test_far_null_rejects_with_exit_zero(tmp_path, capsys):
    path = _simulate_file(tmp_path, "x.csv", (0.5,), WHITE_KERNEL, 1500, 2)
    assert (
        main(
            [
                "test",
                "--in",
                str(path),
                "--kernel",
                WHITE_KERNEL,
                "--theta0",
                "-0.5",
                "--alpha",
                "0.05",
            ]
        )
        == 0
    )
    doc = json.loads(capsys.readouterr().out)
    assert doc["reject"] is True
    assert doc["pvalue"] < 1e-6
    assert doc["critical"] == pytest.approx(3.8414588206941285, abs=1e-9)


def test_lan_identity_via_cli(tmp_path, capsys):
    path = _simulate_file(tmp_path, "x.csv", (0.3,), AR1_KERNEL, 200, 8)
    assert (
        main(
            [
                "lan",
                "--in",
                str(path),
                "--kernel",
                AR1_KERNEL,
                "--theta0",
                "0.3",
                "--u",
                "0.7",
            ]
        )
        == 0
    )
    doc = json.loads(capsys.readouterr().out)
    x = armle.simulate_series((0.3,), armle.ar1(0.5), 200, 8)
    fpath = armle.filter_observations(x, armle.ar1(0.5), 1)
    s, i, r = armle.lan_decomposition(fpath, (0.3,), (0.7,))
    assert doc["score_term"] == pytest.approx(s, rel=1e-12)
    assert doc["info_term"] == pytest.approx(i, rel=1e-12)
    assert doc["remainder"] == pytest.approx(r, rel=1e-10, abs=1e-12)
    assert doc["delta_loglik"] == pytest.approx(s + i + r, rel=1e-10, abs=1e-12)


def test_round_trip_within_three_stderr(tmp_path, capsys):
    # simulate -> estimate must recover theta within 3 plug-in standard
    # errors on every one of 20 fixed seeds.
    theta = 0.5
    misses = []
    for seed in range(20):
        path = _simulate_file(
            tmp_path, f"rt{seed}.csv", (theta,), AR1_KERNEL, 600, seed
        )
        assert (
            main(["estimate", "--in", str(path), "--p", "1", "--kernel", AR1_KERNEL])
            == 0
        )
        doc = json.loads(capsys.readouterr().out)
        err = abs(doc["theta_hat"][0] - theta)
        if err > 3.0 * doc["stderr"][0]:
            misses.append((seed, err, doc["stderr"][0]))
    assert not misses


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


def _experiment_config(tmp_path, **overrides):
    obj = {
        "experiment": "clt",
        "theta": [0.3],
        "kernel": {"family": "ar1", "params": {"a": 0.5}},
        "sample_sizes": [150, 300],
        "replicates": 8,
        "seed": 11,
    }
    obj.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(obj))
    return path


def test_experiment_end_to_end(tmp_path, capsys):
    cfg = _experiment_config(tmp_path)
    out_dir = tmp_path / "out"
    assert (
        main(["experiment", "--config", str(cfg), "--out-dir", str(out_dir)]) == 0
    )
    doc = json.loads(capsys.readouterr().out)
    assert doc["experiment"] == "clt"
    assert doc["passed"] is True
    for name in ("report.json", "raw.csv", "curves.csv"):
        assert (out_dir / name).is_file()
    with open(out_dir / "report.json") as fh:
        on_disk = json.load(fh)
    assert on_disk == doc
    with open(out_dir / "raw.csv", newline="") as fh:
        raw = list(csv.DictReader(fh))
    assert len(raw) == 16
    assert set(raw[0]) == {"replicate", "n", "ok", "scaled_1"}


def test_experiment_deterministic_across_jobs(tmp_path, capsys):
    cfg = _experiment_config(tmp_path)
    out1, out2, out3 = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for out_dir, jobs in ((out1, "1"), (out2, "1"), (out3, "2")):
        assert (
            main(
                [
                    "experiment",
                    "--config",
                    str(cfg),
                    "--out-dir",
                    str(out_dir),
                    "--jobs",
                    jobs,
                ]
            )
            == 0
        )
        capsys.readouterr()
    raw1 = (out1 / "raw.csv").read_bytes()
    assert (out2 / "raw.csv").read_bytes() == raw1
    assert (out3 / "raw.csv").read_bytes() == raw1
    assert (out2 / "curves.csv").read_bytes() == (out1 / "curves.csv").read_bytes()
    docs = []
    for out_dir in (out1, out2, out3):
        with open(out_dir / "report.json") as fh:
            doc = json.load(fh)
        doc.pop("runtime_seconds")
        docs.append(doc)
    assert docs[1] == docs[0]
    assert docs[2] == docs[0]


def test_experiment_progress_lines(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("ARMLE_QUIET")
    cfg = _experiment_config(tmp_path, replicates=10)
    assert (
        main(["experiment", "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
        == 0
    )
    err = capsys.readouterr().err
    assert "config: " in err
    assert "[clt] replicate 10/10" in err


# ---------------------------------------------------------------------------
# exit codes and config echo
# ---------------------------------------------------------------------------


def test_usage_errors_exit_2(capsys, tmp_path):
    assert main(["no-such-command"]) == 2
    assert main(["simulate", "--theta", "0.5"]) == 2  # missing required args
    assert (
        main(["simulate", "--theta", "0.5", "--kernel", "{bad json", "--n", "5"]) == 2
    )
    assert (
        main(["simulate", "--theta", "abc", "--kernel", WHITE_KERNEL, "--n", "5"]) == 2
    )
    assert (
        main(
            ["simulate", "--theta", "0.5", "--kernel", WHITE_KERNEL, "--n", "0"]
        )
        == 2
    )
    assert (
        main(
            [
                "simulate",
                "--theta",
                "0.5",
                "--p",
                "2",
                "--kernel",
                WHITE_KERNEL,
                "--n",
                "5",
            ]
        )
        == 2
    )
    capsys.readouterr()


def test_lan_dimension_mismatch_exits_2(tmp_path, capsys):
    path = _simulate_file(tmp_path, "x.csv", (0.3,), WHITE_KERNEL, 50, 1)
    code = main(
        [
            "lan",
            "--in",
            str(path),
            "--kernel",
            WHITE_KERNEL,
            "--theta0",
            "0.3",
            "--u",
            "0.1,0.2",
        ]
    )
    assert code == 2
    capsys.readouterr()


def test_data_errors_exit_3(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert (
        main(["estimate", "--in", str(missing), "--p", "1", "--kernel", WHITE_KERNEL])
        == 3
    )
    no_x = tmp_path / "no_x.csv"
    no_x.write_text("t,y\n1,0.5\n")
    assert (
        main(["estimate", "--in", str(no_x), "--p", "1", "--kernel", WHITE_KERNEL]) == 3
    )
    bad_cell = tmp_path / "bad.csv"
    bad_cell.write_text("t,x\n1,0.5\n2,oops\n")
    assert (
        main(["estimate", "--in", str(bad_cell), "--p", "1", "--kernel", WHITE_KERNEL])
        == 3
    )
    empty = tmp_path / "empty.csv"
    empty.write_text("t,x\n")
    assert (
        main(["estimate", "--in", str(empty), "--p", "1", "--kernel", WHITE_KERNEL])
        == 3
    )
    capsys.readouterr()


def test_short_series_exits_3(tmp_path, capsys):
    short = tmp_path / "short.csv"
    short.write_text("t,x\n1,0.4\n2,0.1\n")
    assert (
        main(["estimate", "--in", str(short), "--p", "3", "--kernel", WHITE_KERNEL])
        == 3
    )
    capsys.readouterr()


def test_degeneracy_exits_4(tmp_path, capsys):
    assert (
        main(["simulate", "--theta", "1.5", "--kernel", WHITE_KERNEL, "--n", "10"]) == 4
    )
    zeros = tmp_path / "zeros.csv"
    zeros.write_text("t,x\n" + "".join(f"{t},0.0\n" for t in range(1, 31)))
    assert (
        main(["estimate", "--in", str(zeros), "--p", "1", "--kernel", WHITE_KERNEL])
        == 4
    )
    capsys.readouterr()


def test_experiment_config_errors(tmp_path, capsys):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    assert (
        main(["experiment", "--config", str(bad_json), "--out-dir", str(tmp_path)])
        == 3
    )
    assert (
        main(
            [
                "experiment",
                "--config",
                str(tmp_path / "missing.json"),
                "--out-dir",
                str(tmp_path),
            ]
        )
        == 3
    )
    zero_reps = _experiment_config(tmp_path, replicates=0)
    assert (
        main(["experiment", "--config", str(zero_reps), "--out-dir", str(tmp_path)])
        == 3
    )
    unstable = _experiment_config(tmp_path, theta=[1.2])
    assert (
        main(["experiment", "--config", str(unstable), "--out-dir", str(tmp_path)])
        == 4
    )
    capsys.readouterr()


def test_config_echo_and_quiet(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("ARMLE_QUIET")
    assert main(["filter", "--kernel", WHITE_KERNEL, "--n", "3"]) == 0
    err = capsys.readouterr().err
    assert err.startswith("config: ")
    echoed = json.loads(err.split("\n")[0][len("config: ") :])
    assert echoed["command"] == "filter"
    assert echoed["n"] == 3
    monkeypatch.setenv("ARMLE_QUIET", "1")
    assert main(["filter", "--kernel", WHITE_KERNEL, "--n", "3"]) == 0
    assert capsys.readouterr().err == ""


def test_output_to_file(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert (
        main(
            [
                "validate-kernel",
                "--kernel",
                WHITE_KERNEL,
                "--horizon",
                "16",
                "--out",
                str(out),
            ]
        )
        == 0
    )
    assert capsys.readouterr().out == ""
    doc = json.loads(out.read_text())
    assert doc["passed"] is True


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def test_module_and_console_entry_points(tmp_path):
    argv_tail = ["simulate", "--theta", "0.5", "--kernel", WHITE_KERNEL, "--n", "4"]
    env = {"ARMLE_QUIET": "1", "PATH": "/usr/local/bin:/usr/bin:/bin"}
    module = subprocess.run(
        [sys.executable, "-m", "armle"] + argv_tail,
        capture_output=True,
        text=True,
        env=env,
    )
    assert module.returncode == 0
    assert module.stdout.startswith("t,x\n")
    console = subprocess.run(
        ["armle"] + argv_tail, capture_output=True, text=True, env=env
    )
    assert console.returncode == 0
    assert console.stdout == module.stdout