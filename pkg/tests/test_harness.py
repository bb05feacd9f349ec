import os
import subprocess
import sys

import numpy as np
import pytest

from sega.harness import (ConfigError, emit_plot, load_config, parse_config, run_experiment,
                          trajectory_2d)
from sega.harness.cli import main
from sega.harness.config import apply_override, config_hash
from sega.harness.plot import PlotError
from sega.trace import Trace

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")

SMALL = """
[problem]
type = "synthetic"
n = 6
spectrum = 3

[run]
name = "small"
K = 200
seeds = [0, 1]
record_every = 50

[output]
dir = "{out}"

[[method]]
name = "sega"
solver = "sega"
stepsize = {{ kind = "simple_uniform" }}

[[method]]
name = "cd"
solver = "cd"
stepsize = {{ kind = "inverse_nL" }}

[[method]]
name = "rds"
solver = "rds"
sketch = {{ kind = "gaussian" }}
stepsize = {{ kind = "inverse_nL" }}

[[method]]
name = "pgd"
solver = "pgd"
stepsize = {{ kind = "inverse_L" }}
K = 10
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL.format(out=(tmp_path / "out").as_posix()))
    return path


@pytest.mark.parametrize("text,field", [
    ('[problem]\ntype="synthetic"\nn=4\n', "method"),
    ('[problem]\ntype="nope"\n[[method]]\nname="a"\nsolver="sega"\n', "problem.type"),
    ('[problem]\ntype="synthetic"\nn=4\nfoo=1\n[[method]]\nname="a"\nsolver="sega"\n', "problem.foo"),
    ('[problem]\ntype="synthetic"\nn=4\n[[method]]\nname="a"\nsolver="sega"\nsketch={kind="x"}\n',
     "method[0].sketch.kind"),
    ('[problem]\ntype="synthetic"\nn=4\n[run]\nK=-1\n[[method]]\nname="a"\nsolver="sega"\n', "run.K"),
    ('[problem]\ntype="synthetic"\nn="4"\n[[method]]\nname="a"\nsolver="sega"\n', "problem.n"),
    ('[problem]\ntype="synthetic"\nn=4\n[[method]]\nname="a"\nsolver="sega"\n[[method]]\nname="a"\n'
     'solver="cd"\n', "method[1].name"),
    ('[problem]\ntype="synthetic"\nn=4\n[[method]]\nsolver="sega"\n', "method[0].name"),
    ('[problem\n', "invalid TOML"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert field in str(info.value)


def test_defaults_and_overrides():
    text = '[problem]\ntype="synthetic"\nn=4\n[[method]]\nname="a"\nsolver="sega"\n'
    cfg = parse_config(text, ["run.K=7", "method.a.stepsize.alpha=0.5", "method.0.mode=bias",
                              "run.name=hello"], seed=9)
    assert cfg["run"]["K"] == 7 and cfg["run"]["seeds"] == [9]
    assert cfg["method"][0]["stepsize"]["alpha"] == 0.5
    assert cfg["method"][0]["mode"] == "bias"
    assert cfg["run"]["name"] == "hello"
    assert cfg["cost"]["X"] == 0.0 and cfg["regularizer"]["kind"] == "zero"
    with pytest.raises(ConfigError):
        apply_override({}, "noequals")
    with pytest.raises(ConfigError):
        apply_override({"method": [{"name": "a"}]}, "method.b.K=1")
    assert config_hash(cfg) == config_hash(parse_config(text, ["run.K=7", "method.a.stepsize.alpha=0.5",
                                                               "method.0.mode=bias", "run.name=hello"],
                                                        seed=9))


@pytest.mark.parametrize("name", sorted(f for f in os.listdir(CONFIGS) if f.endswith(".toml")))
def test_shipped_configs_validate(name):
    cfg = load_config(os.path.join(CONFIGS, name))
    assert cfg["method"]


def test_run_experiment_writes_traces(small_cfg):
    cfg = load_config(small_cfg)
    res = run_experiment(cfg)
    assert len(res) == 8
    for r in res:
        assert os.path.exists(r.path)
        assert r.trace.metadata["config_hash"] == config_hash(cfg)
    sega = [r for r in res if r.method == "sega"][0].trace
    assert list(sega["k"]) == [0, 50, 100, 150, 200]
    pgd = [r for r in res if r.method == "pgd"][0].trace
    assert pgd["k"][-1] == 10 and pgd["oracle_calls"][-1] == 60


def test_zero_iterations_single_row(small_cfg):
    res = run_experiment(load_config(small_cfg, ["run.K=0", "method.pgd.K=0"], seed=0), write=False)
    assert all(len(r.trace) == 1 for r in res)


def test_same_seed_same_bodies(small_cfg):
    a = run_experiment(load_config(small_cfg), write=False)
    b = run_experiment(load_config(small_cfg), write=False)
    for x, y in zip(a, b):
        assert Trace.body(x.trace.to_csv()) == Trace.body(y.trace.to_csv())


def test_problem_path_resolved_relative_to_config():
    cfg = load_config(os.path.join(CONFIGS, "logistic.toml"))
    assert os.path.isabs(cfg["problem"]["path"]) and os.path.exists(cfg["problem"]["path"])


def test_cd_with_ball_is_a_config_error(small_cfg):
    cfg = load_config(small_cfg, ["regularizer.kind=\"ball\""])
    with pytest.raises(ConfigError, match="separable"):
        run_experiment(cfg, write=False)


def test_trajectory_paths(tmp_path):
    cfg = load_config(os.path.join(CONFIGS, "paths_2d.toml"), [f'output.dir="{tmp_path.as_posix()}"'])
    text = trajectory_2d(cfg, 0)
    assert text == trajectory_2d(cfg, 0)
    rows = [ln.split(",") for ln in text.splitlines() if not ln.startswith("#")][1:]
    last = {m: np.array([float(x1), float(x2)]) for m, _, x1, x2 in rows}
    from sega.harness.experiments import build_problem, build_regularizer
    from sega.problems import reference_solution

    pb = build_problem(cfg["problem"], 0)
    xs = reference_solution(pb, build_regularizer(cfg["regularizer"], 2)).x_star
    assert np.linalg.norm(last["sega"] - xs) <= 1e-6
    assert np.linalg.norm(last["projected_cd"] - xs) >= 0.1
    assert abs(np.linalg.norm(last["projected_cd"]) - 1.0) <= 1e-9
    bad = load_config(os.path.join(CONFIGS, "ball_pgd.toml"))
    with pytest.raises(ConfigError):
        trajectory_2d(bad, 0)


def test_trajectory_exact_gradient_first_step():
    from sega.harness.experiments import iterate_path
    from sega.problems import QuadraticForm
    from sega.sketch import SketchDistribution

    pb = QuadraticForm([[2.0, 0.5], [0.5, 1.0]], [1.0, 0.0], x0=[1.0, 1.0])
    g0 = pb.full_gradient(pb.x0)
    xs = iterate_path(pb, SketchDistribution.uniform(2), 0.1, K=1, h0=g0)
    np.testing.assert_allclose(xs[1], pb.x0 - 0.1 * g0)


def test_plot(small_cfg, tmp_path):
    res = run_experiment(load_config(small_cfg))
    paths = [r.path for r in res if r.method in ("sega", "cd")]
    out = tmp_path / "p.svg"
    labels = emit_plot(paths, str(out), x="oracle")
    assert labels == ["sega", "cd"]
    svg = out.read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    first = svg
    emit_plot(paths, str(out), x="oracle")
    assert out.read_text() == first
    with pytest.raises(PlotError):
        emit_plot([], str(out))
    with pytest.raises(PlotError):
        emit_plot(paths, str(out), x="time")
    with pytest.raises(PlotError):
        emit_plot(paths, str(out), y="nope")


def test_plot_schema_mismatch(tmp_path):
    a = Trace({"method": "a"})
    a.append(k=0, oracle_calls=0, f_gap=1.0)
    b = Trace({"method": "b"}, extra_columns=["extra"])
    b.append(k=0, oracle_calls=0, f_gap=1.0)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    a.to_csv(pa)
    b.to_csv(pb)
    with pytest.raises(PlotError, match="schema"):
        emit_plot([str(pa), str(pb)], str(tmp_path / "o.svg"))


def test_cli_exit_codes(small_cfg, tmp_path, capsys):
    assert main(["run", str(small_cfg), "--seed", "3", "--override", "run.K=20", "--quiet"]) == 0
    csvs = sorted(str(p) for p in (tmp_path / "out").glob("small_sega_seed3.csv"))
    assert len(csvs) == 1
    assert main(["plot", *csvs, "--x", "iter", "--out", str(tmp_path / "f.svg")]) == 0
    assert main(["run", str(tmp_path / "missing.toml")]) == 2
    assert main(["run", str(small_cfg), "--override", "run.K=-3"]) == 2
    assert main(["plot", "--out", str(tmp_path / "g.svg")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["plot", *csvs, "--x", "bogus", "--out", "x.svg"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_cli_verify_subprocess():
    proc = subprocess.run([sys.executable, "-m", "sega", "verify"], capture_output=True, text=True,
                          timeout=300)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert proc.stdout.count("PASS") == 8


def test_cli_verify_failure_exit_code(monkeypatch):
    import sega.verify as v

    monkeypatch.setattr(v, "CHECKS", [lambda rng: v.CheckResult("forced", False, "x")])
    assert main(["verify"]) == 3
