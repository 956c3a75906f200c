import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from icsqr import center, mahalanobis_sq_explicit
from icsqr.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, SCHEMA_NAMES, load_schema, main, resolve_seed
from icsqr.dataio import DatasetFile, read_dataset, write_matrix
from icsqr.experiments import DEFAULT_SEED, IcaSpec, MixtureSpec, gen_ica, gen_mixture


def validate(path, schema):
    jsonschema.validate(json.loads(path.read_text()), load_schema(schema))


def read_csv(path):
    return np.genfromtxt(path, delimiter=",", skip_header=1)


def error_of(capsys):
    err = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(err)


@pytest.fixture(scope="module")
def crabs_like(tmp_path_factory):
    """200 x 5 log-scale morphometric stand-in with a two-group structure."""
    rng = np.random.default_rng(11)
    size = rng.normal(0, 0.25, 200)
    group = np.repeat([0.0, 1.0], 100)
    loadings = np.array([1.0, 0.9, 1.1, 1.05, 0.95])
    x = np.log([16, 13, 32, 36, 14])[:, None] + np.outer(loadings, size)
    x[1] += 0.08 * group
    x += rng.normal(0, 0.02, x.shape)
    d = tmp_path_factory.mktemp("crabs")
    path = d / "crabs.csv"
    write_matrix(path, x.T, ["FL", "RW", "CL", "CW", "BD"])
    scaled = d / "crabs_scaled.csv"
    write_matrix(scaled, (x * np.logspace(-4.5, 4.5, 5)[:, None]).T, ["FL", "RW", "CL", "CW", "BD"])
    return path, scaled


def test_schemas_load():
    for name in SCHEMA_NAMES:
        jsonschema.Draft202012Validator.check_schema(load_schema(name))
    with pytest.raises(KeyError):
        load_schema("nope")


# -- gen -----------------------------------------------------------------------------


def test_gen_mixture_roundtrip_and_determinism(tmp_path, capsys):
    out = tmp_path / "mix.csv"
    assert main(["gen", "mixture", "--n", "300", "--seed", "5", "--out", str(out)]) == EXIT_OK
    spec = MixtureSpec(n=300, seed=5)
    ds = read_dataset(DatasetFile(out))
    assert np.array_equal(ds.x, gen_mixture(spec))
    assert ds.names == ("x1", "x2", "x3", "x4")
    side = out.with_suffix(".json")
    validate(side, "gen")
    assert len(json.loads(side.read_text())["labels"]) == 300
    first = out.read_bytes(), side.read_bytes()
    again = tmp_path / "again.csv"
    main(["gen", "mixture", "--n", "300", "--seed", "5", "--out", str(again)])
    assert (again.read_bytes(), again.with_suffix(".json").read_bytes()) == first


def test_gen_null_mixture_and_ica(tmp_path):
    assert main(["gen", "mixture", "--n", "200", "--delta", "0", "--out", str(tmp_path / "m.csv")]) == EXIT_OK
    out = tmp_path / "ica.csv"
    assert main(["gen", "ica", "--n", "150", "--sources", "uniform,laplace", "--scales", "2,3", "--out", str(out)]) == 0
    x, mixing = gen_ica(IcaSpec(n=150, sources=("uniform", "laplace"), seed=DEFAULT_SEED, scales=(2.0, 3.0)))
    assert np.array_equal(read_dataset(DatasetFile(out)).x, x)
    side = json.loads(out.with_suffix(".json").read_text())
    validate(out.with_suffix(".json"), "gen")
    assert side["mixing"] == mixing.tolist()


@pytest.mark.parametrize(
    "args",
    [
        ["gen", "mixture", "--n", "20"],
        ["gen", "mixture", "--epsilon", "1.5"],
        ["gen", "ica", "--sources", "cauchy"],
        ["gen", "ica", "--scales", "1,2"],
        ["gen", "other"],
        ["gen", "mixture", "--n", "0"],
    ],
)
def test_gen_invalid(tmp_path, capsys, args):
    assert main(args + ["--out", str(tmp_path / "x.csv")]) == EXIT_USAGE
    err = error_of(capsys)
    assert err["exit_code"] == EXIT_USAGE
    jsonschema.validate(err, load_schema("error"))


def test_seed_precedence(monkeypatch):
    monkeypatch.delenv("ICS_SEED", raising=False)
    assert resolve_seed(None) == DEFAULT_SEED
    monkeypatch.setenv("ICS_SEED", "42")
    assert resolve_seed(None) == 42
    assert resolve_seed(7) == 7


def test_env_seed_used_by_gen(tmp_path, monkeypatch):
    monkeypatch.setenv("ICS_SEED", "9")
    main(["gen", "mixture", "--n", "200", "--out", str(tmp_path / "a.csv")])
    main(["gen", "mixture", "--n", "200", "--seed", "9", "--out", str(tmp_path / "b.csv")])
    main(["gen", "mixture", "--n", "200", "--seed", "10", "--out", str(tmp_path / "c.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


def test_bad_env_seed(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ICS_SEED", "abc")
    assert main(["gen", "mixture", "--out", str(tmp_path / "a.csv")]) == EXIT_USAGE


# -- run -----------------------------------------------------------------------------


def test_run_outputs(tmp_path, crabs_like):
    out = tmp_path / "run"
    assert main(["run", str(crabs_like[0]), "--out", str(out)]) == EXIT_OK
    eig = read_csv(out / "eigenvalues.csv")
    assert eig.shape == (5, 2) and np.array_equal(eig[:, 0], np.arange(1, 6))
    unmixing = np.genfromtxt(out / "unmixing.csv", delimiter=",", skip_header=1)[:, 1:]
    scores = np.genfromtxt(out / "scores.csv", delimiter=",", skip_header=1)[:, 1:]
    assert unmixing.shape == (5, 5) and scores.shape == (200, 5)
    x = read_dataset(DatasetFile(crabs_like[0])).x
    assert np.allclose(unmixing @ center(x).xc, scores.T, atol=1e-8)
    assert (out / "unmixing.csv").read_text().startswith("component,FL,RW,CL,CW,BD\nic1,")
    validate(out / "rank.json", "rank")
    validate(out / "diagnostics.json", "diagnostics")


def test_run_both_agree(tmp_path, crabs_like):
    out = tmp_path / "both"
    assert main(["run", str(crabs_like[0]), "--algorithm", "both", "--out", str(out)]) == EXIT_OK
    a = read_csv(out / "qr" / "eigenvalues.csv")[:, 1]
    b = read_csv(out / "eigen" / "eigenvalues.csv")[:, 1]
    assert np.allclose(a, b, rtol=1e-9)
    validate(out / "comparison.json", "comparison")


def test_run_ill_conditioned_eigen_fails(tmp_path, crabs_like, capsys):
    assert main(["run", str(crabs_like[1]), "--algorithm", "eigen", "--out", str(tmp_path / "e")]) == EXIT_NUMERICAL
    err = error_of(capsys)
    jsonschema.validate(err, load_schema("error"))
    assert err["error"] == "SingularCovariance"
    assert "reciprocal condition number" in err["message"]
    assert {"smallest_eigenvalue", "rcond", "index"} <= set(err)


def test_run_ill_conditioned_qr_stable(tmp_path, crabs_like):
    main(["run", str(crabs_like[0]), "--out", str(tmp_path / "a")])
    assert main(["run", str(crabs_like[1]), "--out", str(tmp_path / "b")]) == EXIT_OK
    a = read_csv(tmp_path / "a" / "eigenvalues.csv")[:, 1]
    b = read_csv(tmp_path / "b" / "eigenvalues.csv")[:, 1]
    assert np.allclose(a, b, rtol=1e-6)


def test_run_both_partial_failure(tmp_path, crabs_like, capsys):
    out = tmp_path / "both"
    assert main(["run", str(crabs_like[1]), "--algorithm", "both", "--out", str(out)]) == EXIT_NUMERICAL
    validate(out / "eigen" / "error.json", "error")
    assert (out / "qr" / "eigenvalues.csv").exists()
    assert not (out / "comparison.json").exists()


def test_run_json_format(tmp_path, crabs_like):
    out = tmp_path / "j"
    assert main(["run", str(crabs_like[0]), "--format", "json", "--alpha", "-1", "--out", str(out)]) == EXIT_OK
    validate(out / "result.json", "result")
    doc = json.loads((out / "result.json").read_text())
    assert len(doc["scores"]) == 200 and not (out / "eigenvalues.csv").exists()
    assert json.loads((out / "diagnostics.json").read_text())["scatter_pair"] == "cov-covAxis"


def test_run_rank_deficient_reduces(tmp_path):
    rng = np.random.default_rng(4)
    base = rng.laplace(size=(3, 300))
    x = np.vstack([base, base[0] + base[1]])
    path = tmp_path / "dep.csv"
    write_matrix(path, x.T, ["a", "b", "c", "d"])
    assert main(["run", str(path), "--out", str(tmp_path / "r")]) == EXIT_OK
    assert json.loads((tmp_path / "r" / "rank.json").read_text())["q"] == 3
    assert np.genfromtxt(tmp_path / "r" / "unmixing.csv", delimiter=",", skip_header=1).shape == (3, 5)
    assert main(["run", str(path), "--reduction", "none", "--out", str(tmp_path / "n")]) == EXIT_NUMERICAL


@pytest.mark.parametrize(
    "content, extra",
    [
        ("a,b\n1,2\n3\n", []),
        ("a,b\n1,2\n3,zz\n", []),
        ("a,b\n1,2\n3,nan\n", []),
        ("a,b\n1,2\n3,4\n5,6\n", ["--rank-epsilon", "2"]),
        ("a,b\n1,2\n3,4\n5,6\n", ["--bogus"]),
    ],
)
def test_run_usage_errors(tmp_path, capsys, content, extra):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    assert main(["run", str(path), "--out", str(tmp_path / "o"), *extra]) == EXIT_USAGE
    assert error_of(capsys)["exit_code"] == EXIT_USAGE


def test_run_missing_file_and_no_args(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(["run"]) == EXIT_USAGE


# -- distances ---------------------------------------------------------------------------


def test_distances_outlier(tmp_path, capsys):
    rng = np.random.default_rng(8)
    x = rng.standard_normal((6, 300))
    x[:, 41] = 10.0 * np.ones(6) / np.sqrt(6)
    path = tmp_path / "o.csv"
    write_matrix(path, x.T, [f"v{j}" for j in range(6)])
    out = tmp_path / "d"
    assert main(["distances", str(path), "-k", "1", "--top", "3", "--out", str(out)]) == EXIT_OK
    table = read_csv(out / "distances.csv")
    assert np.array_equal(table[:, 0], np.arange(1, 301))
    assert table[41, 2] == 1 and np.argmax(table[:, 1]) == 41
    assert "42" in capsys.readouterr().out.splitlines()[1]
    assert (out / "distances.svg").read_text().lstrip().startswith("<?xml")


def test_distances_constant_weight_matches_mahalanobis(tmp_path, crabs_like):
    out = tmp_path / "d"
    assert main(["distances", str(crabs_like[0]), "--constant-weight", "-k", "5", "--out", str(out)]) == EXIT_OK
    d = read_csv(out / "distances.csv")[:, 1]
    ref = mahalanobis_sq_explicit(center(read_dataset(DatasetFile(crabs_like[0])).x))
    assert np.array_equal(np.argsort(d), np.argsort(ref))
    assert np.allclose(d, ref, rtol=1e-8)


def test_distances_k_too_large(tmp_path, crabs_like, capsys):
    assert main(["distances", str(crabs_like[0]), "-k", "6", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["distances", str(crabs_like[0]), "-k", "0", "--out", str(tmp_path)]) == EXIT_USAGE


# -- sweep ---------------------------------------------------------------------------------


def test_sweep_default_grid(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["sweep", "--out", str(out)]) == EXIT_OK
    validate(out / "sweep.json", "sweep")
    doc = json.loads((out / "sweep.json").read_text())
    assert len(doc["rows"]) == 16 * 2 * 2
    for pair in ("cov-cov4", "cov-covAxis"):
        eig = [r for r in doc["rows"] if r["pair"] == pair and r["algorithm"] == "eigen"]
        k_star = next(r["k"] for r in eig if r["status"] == "SINGULAR_ERROR")
        assert 6 <= k_star <= 10
        assert all(r["status"] == "OK" for r in doc["rows"] if r["pair"] == pair and r["algorithm"] == "qr")
    header = (out / "sweep.csv").read_text().splitlines()[0]
    assert header == "k,pair,algorithm,status,eig_1,eig_2,eig_3,eig_4,kappa"
    assert "first failure at k=" in capsys.readouterr().out


def test_sweep_single_point_and_svg_determinism(tmp_path):
    args = ["sweep", "--grid", "4", "--n", "1000", "--alphas", "1", "--algorithms", "qr"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    assert len((tmp_path / "a" / "sweep.csv").read_text().splitlines()) == 2
    for name in ("sweep.csv", "sweep.json", "sweep.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_grid_and_data_options(tmp_path):
    data = tmp_path / "base.csv"
    write_matrix(data, gen_mixture(MixtureSpec(n=500)).T, ["a", "b", "c", "d"])
    out = tmp_path / "s"
    assert main(["sweep", "--grid", "0:4:2", "--data", str(data), "--algorithms", "eigen,qr", "--out", str(out)]) == 0
    doc = json.loads((out / "sweep.json").read_text())
    assert doc["grid"] == [0.0, 2.0, 4.0] and doc["base"]["kind"] == "array"


@pytest.mark.parametrize("args", [["--grid", "0:4:0"], ["--grid", "a:b"], ["--algorithms", "svd"], ["--n", "20"]])
def test_sweep_usage_errors(tmp_path, args):
    assert main(["sweep", *args, "--out", str(tmp_path)]) == EXIT_USAGE


# -- bench ----------------------------------------------------------------------------------


def test_bench(tmp_path, capsys):
    out = tmp_path / "b"
    assert main(["bench", "--n", "300", "--p", "6", "--reps", "2", "--out", str(out)]) == EXIT_OK
    validate(out / "bench.json", "bench")
    rows = (out / "bench.csv").read_text().splitlines()
    assert rows[0] == "algorithm,median_s,min_s,flops_estimate" and len(rows) == 3
    assert "ratio qr/eigen" in capsys.readouterr().out
    assert main(["bench", "--reps", "0", "--out", str(out)]) == EXIT_USAGE
    assert main(["bench", "--n", "5", "--p", "5", "--out", str(out)]) == EXIT_USAGE


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "icsqr.cli", "run", str(tmp_path / "missing.csv"), "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == EXIT_USAGE
    assert json.loads(proc.stderr)["error"] == "ParseError"
    version = subprocess.run([sys.executable, "-m", "icsqr.cli", "--version"], capture_output=True, text=True)
    assert version.returncode == 0 and "0.1.0" in version.stdout
