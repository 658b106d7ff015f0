import numpy as np
import pytest

from uacv.cli import EXIT_CONVERGENCE, EXIT_OK, EXIT_SINGULAR, EXIT_USAGE, main
from uacv.criteria import assess, normal_quantile
from uacv.estimation import Dataset, fit
from uacv.io import fmt, read_report, write_dataset
from uacv.models import Threshold
from uacv.simulation import generate_sample, run_replications, small_design


def write_csv(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def small_sample(tmp_path):
    data = generate_sample(small_design(n=3000), 0)
    path = tmp_path / "small.csv"
    write_dataset(path, data)
    return str(path), data


def run(args, tmp_path, name="out.csv"):
    out = tmp_path / name
    code = main(args + ["--out", str(out)])
    return code, (read_report(out) if out.exists() else None)


def test_fit_gaussian_mean_only(tmp_path):
    path = write_csv(tmp_path / "d.csv", "y\n1.5\n2.0\n4.0\n")
    code, rep = run(["fit", path, "--model", "gaussian-linear"], tmp_path)
    assert code == EXIT_OK
    assert rep[("model.theta", "beta0")] == pytest.approx(2.5, rel=1e-6)
    assert rep[("model", "converged")] == 1
    assert rep[("model", "p")] == 2


def test_fit_threshold_matches_library(small_sample, tmp_path):
    path, data = small_sample
    code, _ = run(["fit", path, "--model", "threshold"], tmp_path)
    assert code == EXIT_OK
    lines = (tmp_path / "out.csv").read_text().splitlines()
    lp = Threshold(2, 4)
    f = fit(lp, data)
    report = assess(lp, data, f)
    assert f"model,uacv,{fmt(report.uacv)}" in lines
    assert f"model,aic_d,{fmt(report.psi_bar + f.p / data.n)}" in lines
    for lab, v in zip(lp.labels, f.theta_hat):
        assert f"model.theta,{lab},{fmt(v)}" in lines


def test_missing_cell_reports_row(tmp_path, caplog):
    path = write_csv(tmp_path / "bad.csv", "y,x1\n1.0,0.5\n2.0,\n3.0,1.0\n")
    assert main(["fit", path, "--model", "gaussian-linear"]) == EXIT_USAGE
    assert "data row 1" in caplog.text and "x1" in caplog.text


def test_compare_self_is_zero(small_sample, tmp_path):
    path, _ = small_sample
    code, rep = run(["compare", path, "--model", "threshold", "--model", "threshold"], tmp_path)
    assert code == EXIT_OK
    assert rep[("comparison", "d_uacv")] == 0.0
    assert rep[("comparison", "lower")] == 0.0 and rep[("comparison", "upper")] == 0.0
    assert rep[("comparison", "magnitude")] == "negligible"
    assert rep[("comparison", "better")] == "tie"


def test_compare_threshold_against_linear(small_sample, tmp_path):
    path, data = small_sample
    code, rep = run(["compare", path, "--model", "threshold", "--model", "gaussian-linear",
                     "--assessment", "discretized", "--alpha", "0.1"], tmp_path)
    assert code == EXIT_OK
    d = rep[("comparison", "d_uacv")]
    assert d == pytest.approx(-0.287, abs=0.04)
    assert d == pytest.approx(rep[("model1", "uacv")] - rep[("model2", "uacv")], abs=2e-6)
    half = normal_quantile(0.95) * rep[("comparison", "omega_hat")] / np.sqrt(data.n)
    assert rep[("comparison", "lower")] == pytest.approx(d - half, rel=1e-5)
    assert rep[("comparison", "upper")] == pytest.approx(d + half, rel=1e-5)
    assert rep[("comparison", "better")] == "model1"
    assert rep[("comparison", "magnitude")] == "large"
    assert rep[("comparison", "omega_hat")] < min(rep[("comparison", "kappa_model1")],
                                                  rep[("comparison", "kappa_model2")])


def test_loocv_check_toy(tmp_path):
    path = write_csv(tmp_path / "toy.csv", "y\n0.0\n2.0\n")
    code, rep = run(["loocv-check", path, "--model", "squared-error"], tmp_path)
    assert code == EXIT_OK
    assert rep[("loocv", "exact_cv")] == pytest.approx(4.0)
    assert rep[("loocv", "uacv")] == pytest.approx(3.0)
    assert rep[("loocv", "gap")] == pytest.approx(1.0)


def test_loocv_gap_two_point_scaling(tmp_path):
    rng = np.random.default_rng(5)
    gaps = {}
    for n in (250, 1000):
        x = rng.normal(size=(n, 2))
        y = 1 + x @ [0.5, -1.0] + rng.normal(size=n)
        path = tmp_path / f"g{n}.csv"
        write_dataset(path, Dataset(y, x))
        code, rep = run(["loocv-check", str(path), "--model", "gaussian-linear"], tmp_path)
        assert code == EXIT_OK and rep[("loocv", "cold_restarts")] == 0
        gaps[n] = abs(rep[("loocv", "gap")])
    constant = gaps[250] * 250**2
    assert gaps[1000] < 10 * constant / 1000**2


def test_loocv_guard(tmp_path, caplog):
    path = write_csv(tmp_path / "d.csv", "y\n" + "\n".join(str(v) for v in range(10)) + "\n")
    assert main(["loocv-check", path, "--model", "gaussian-linear", "--max-n", "5"]) == EXIT_USAGE
    assert "max-n" in caplog.text


def test_loocv_report_deterministic_across_threads(tmp_path):
    rng = np.random.default_rng(2)
    path = tmp_path / "d.csv"
    write_dataset(path, Dataset(rng.normal(size=60), rng.normal(size=(60, 2))))
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["loocv-check", str(path), "--model", "gaussian-linear", "--out", str(a)]) == 0
    assert main(["loocv-check", str(path), "--model", "gaussian-linear", "--threads", "4",
                 "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_matches_library_and_is_reproducible(tmp_path):
    args = ["simulate", "--design", "small", "--reps", "2", "--mc-size", "20000"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b), "--threads", "2"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert "# seed=20130101" in text and "PCG64" in text
    table = run_replications(small_design(replications=2, mc_size=20000))
    body = [l for l in text.splitlines() if not l.startswith("#")]
    assert body[0] == "model,ECE,UACV,AIC_d,AIC,bias_UACV,bias_AIC_d,bias_AIC"
    for line, row in zip(body[1:], table.rows()):
        assert line == ",".join(fmt(c) for c in row)


def test_simulate_seed_changes_output(tmp_path):
    base = ["simulate", "--design", "small", "--reps", "1", "--mc-size", "5000"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(base + ["--out", str(a)])
    main(base + ["--seed", "7", "--out", str(b)])
    assert a.read_text() != b.read_text()


def test_simulate_failure_exit_code(tmp_path):
    design = tmp_path / "tiny.yaml"
    design.write_text("preset: large\nn: 20\nreplications: 10\nmc_size: 1000\n")
    code = main(["simulate", "--design", str(design), "--out", str(tmp_path / "o.csv")])
    assert code == EXIT_CONVERGENCE
    assert "failures=" in (tmp_path / "o.csv").read_text()


def test_singular_exit_code(tmp_path, caplog):
    path = write_csv(tmp_path / "d.csv", "y,x1,x2\n1,1,2\n2,2,4\n3,3,6\n5,4,8\n")
    assert main(["fit", path, "--model", "squared-error"]) == EXIT_SINGULAR
    assert "penalized" in caplog.text


def test_usage_errors(tmp_path):
    path = write_csv(tmp_path / "d.csv", "y\n1\n2\n")
    assert main(["fit", path]) == EXIT_USAGE
    assert main(["compare", path, "--model", "gaussian-linear"]) == EXIT_USAGE
    assert main(["fit", path, "--model", "logit"]) == EXIT_USAGE
    assert main(["fit", path, "--model", "gaussian-linear", "--alpha", "2"]) == EXIT_USAGE
    assert main(["nonsense"]) == EXIT_USAGE
    assert main(["simulate"]) == EXIT_USAGE


def test_config_file_with_flag_override(tmp_path):
    path = write_csv(tmp_path / "d.csv", "y,x1\n1.0,0.1\n2.5,0.4\n2.0,1.2\n4.1,2.0\n3.3,1.1\n")
    cfg = tmp_path / "run.yaml"
    cfg.write_text(f"dataset: {path}\nmodels:\n  - name: gaussian-linear\n    assessment: crps\n"
                   f"alpha: 0.2\nout: {tmp_path / 'from_config.csv'}\n")
    assert main(["fit", "--config", str(cfg)]) == EXIT_OK
    rep = read_report(tmp_path / "from_config.csv")
    assert "crps" in rep[("model", "model")]
    code, rep2 = run(["fit", "--config", str(cfg), "--assessment", "continuous"], tmp_path)
    assert code == EXIT_OK
    assert "crps" not in rep2[("model", "model")]
    assert rep2[("model", "psi_bar")] != rep[("model", "psi_bar")]


def test_penalty_flag(tmp_path):
    path = write_csv(tmp_path / "d.csv", "y,x1\n1.0,0.1\n2.5,0.4\n2.0,1.2\n4.1,2.0\n3.3,1.1\n")
    code, plain = run(["fit", path, "--model", "gaussian-linear"], tmp_path, "a.csv")
    code2, pen = run(["fit", path, "--model", "gaussian-linear", "--penalty", "ridge:5"],
                     tmp_path, "b.csv")
    assert code == code2 == EXIT_OK
    assert abs(pen[("model.theta", "beta1")]) < abs(plain[("model.theta", "beta1")])
    assert "aic" not in {k for _, k in pen}
