"""Preconditioner benchmark equipment."""

import numpy as np
import pytest

from firls.bench import (
    bench_preconditioners,
    iterations_to_tolerance,
    og_bench_system,
    residual_at,
    tv_bench_system,
    write_bench_csv,
)
from firls.exceptions import ConfigError
from firls.pcg import PcgConfig, pcg_solve


def test_residual_at_holds_after_early_convergence():
    trace = np.array([1e-1, 1e-3, 1e-7])
    assert residual_at(trace, 2) == 1e-3
    assert residual_at(trace, 3) == 1e-7
    # A run that stopped early keeps reporting its final residual.
    assert residual_at(trace, 200) == 1e-7
    assert residual_at(np.array([]), 10) == 0.0


def test_unknown_matrix_rejected():
    with pytest.raises(ConfigError):
        bench_preconditioners("circulant")


@pytest.mark.parametrize("maker,kwargs", [
    (og_bench_system, dict(side=16, warmup_outer=2)),
    (tv_bench_system, dict(side=16, warmup_outer=1)),
])
def test_bench_system_structure(maker, kwargs):
    system = maker(seed=0, **kwargs)
    assert set(system.preconditioners) == {"none", "jacobi", "proposed"}
    N = system.rhs.shape[0]
    assert N == 256
    x = np.random.default_rng(0).standard_normal(N)
    # The batch apply agrees with the single apply.
    single = system.apply_system(x)
    batch = system.apply_system_batch(x[None, :])[0]
    np.testing.assert_allclose(batch, single, rtol=1e-5, atol=1e-8)
    # The system is SPD: symmetry and positivity spot checks.
    y = np.random.default_rng(1).standard_normal(N)
    lhs = float(system.apply_system(x) @ y)
    rhs = float(x @ system.apply_system(y))
    assert abs(lhs - rhs) / max(abs(lhs), 1e-30) < 1e-6
    assert float(x @ system.apply_system(x)) > 0


def test_lockstep_traces_match_single_method_runs():
    system = tv_bench_system(side=16, seed=3)
    iterations = 30
    traces = bench_preconditioners("tv", side=16, seed=3, iterations=iterations)
    for name, pinv in system.preconditioners.items():
        cfg = PcgConfig(max_iterations=iterations,
                        relative_residual_tolerance=1e-15,
                        record_residual_trace=True)
        try:
            single = pcg_solve(system.apply_system, pinv,
                               system.rhs, cfg=cfg).residual_trace
        except Exception:
            continue
        head = min(len(single), len(traces[name]), 10)
        np.testing.assert_allclose(traces[name][:head], single[:head],
                                   rtol=1e-6)


def test_proposed_wins_on_small_tv_system():
    traces = bench_preconditioners("tv", side=32, seed=0, iterations=60)
    assert residual_at(traces["proposed"], 20) < residual_at(traces["none"], 60)


def test_iterations_to_tolerance():
    system = tv_bench_system(side=16, warmup_outer=1, seed=0)
    it_prop = iterations_to_tolerance(
        system.apply_system, system.preconditioners["proposed"], system.rhs,
        tol=1e-6,
    )
    it_none = iterations_to_tolerance(
        system.apply_system, system.preconditioners["none"], system.rhs,
        tol=1e-6,
    )
    assert 0 < it_prop <= it_none


def test_write_bench_csv(tmp_path):
    traces = {"none": np.array([0.5, 0.25]), "proposed": np.array([0.1])}
    path = tmp_path / "bench.csv"
    write_bench_csv(path, traces, {"matrix": "tv", "seed": 0})
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config:")
    assert lines[1] == "iter,residual_none,residual_proposed"
    row2 = lines[2].split(",")
    assert row2[0] == "1"
    assert [float(v) for v in row2[1:]] == [0.5, 0.1]
    # The shorter converged trace holds its last value.
    row3 = lines[3].split(",")
    assert row3[0] == "2"
    assert [float(v) for v in row3[1:]] == [0.25, 0.1]
