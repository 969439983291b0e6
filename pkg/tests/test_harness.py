from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mbsvrn.harness import (
    RateProbe,
    RateRecord,
    RunKey,
    RunResult,
    SweepSpec,
    data_passes,
    derive_seed,
    execute_runs,
    halting_monitor,
    iter_run_keys,
    probe_policy,
    rate_per_pass,
    robustness_curve,
    summarize,
    t_max_grid,
    tune_config,
)
from mbsvrn.objective import Objective
from mbsvrn.solvers import Method, SolverConfig, run, solve_reference

from conftest import random_dataset


@pytest.fixture(scope="module")
def problem():
    obj = Objective(random_dataset(200, 4, seed=31), mu=0.05)
    ref = solve_reference(obj)
    return obj, ref


def test_data_passes_examples():
    assert data_passes(1000, 1000) == 1.0
    assert data_passes(1000 + 2 * 10 * 100, 1000) == 3.0


def test_rate_per_pass_examples():
    assert rate_per_pass(1e-4, 1.0, 4.0) == pytest.approx(0.1, rel=1e-15)
    assert rate_per_pass(0.37, 0.37, 7.5) == 1.0
    assert rate_per_pass(0.25, 1.0, 2.0) == 0.5
    assert rate_per_pass(0.0, 1.0, 2.0) == 0.0
    with pytest.raises(ValueError):
        rate_per_pass(0.1, 0.0, 1.0)


def test_probe_policy_examples():
    assert probe_policy(1, 10**6) == 200
    assert probe_policy(10**3, 10**4) == 5
    assert probe_policy(600, 1000) == 1
    assert probe_policy(1000, 1000) == 1


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 10**7), b=st.integers(1, 10**7))
def test_probe_policy_formula(n, b):
    b = min(b, n)
    assert probe_policy(b, n) == min(200, max(1, n // (2 * b)))


@pytest.mark.parametrize(
    "seq, halt, rho",
    [
        ([0.9, 0.8, 0.85, 0.87], True, 0.8),
        ([0.9, 0.8, 0.7], False, 0.7),
        ([0.9, 1.2], True, 0.9),
        ([0.9, 0.95, 0.8, 0.85], False, 0.8),
    ],
)
def test_halting_monitor_examples(seq, halt, rho):
    dec = halting_monitor(seq)
    assert dec.halt is halt
    if halt:
        assert min(x for x in seq if x <= 1.0) == rho


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.001, 2.0), min_size=1, max_size=30))
def test_halting_never_reports_above_probes(seq):
    # feed the sequence as a run would, stopping at the first halt
    for k in range(1, len(seq) + 1):
        dec = halting_monitor(seq[:k])
        assert dec.rho_min <= min(seq[:k])
        if dec.halt:
            break


def test_halting_accepts_records():
    recs = [RateRecord(1.0 + i, r, i, 0, 0.1) for i, r in enumerate([0.5, 0.6, 0.7])]
    assert halting_monitor(recs).halt


def test_rate_probe_reproduces_pass_formula(problem):
    obj, ref = problem
    b, t_max = 3, 40
    probe = RateProbe(obj.n, ref.f)
    cfg = SolverConfig(Method.MBSVRN, b=b, h=50, eta=0.5, t_max=t_max, max_outer=3, probe_every=4)
    run(obj, cfg, probe)
    assert probe.records
    for r in probe.records:
        # exact rational 1 + 2bt/n, rounded once
        assert r.w == float(1 + Fraction(2 * b * r.t, obj.n))
        assert r.rho > 0


def test_rho_scale_invariant():
    errors = [0.5, 0.2, 0.05, 0.01]
    for c in (1e-6, 3.0, 1e5):
        rho = [rate_per_pass(e, errors[0], w) for e, w in zip(errors[1:], (1.5, 2.0, 2.5))]
        rho_c = [rate_per_pass(c * e, c * errors[0], w) for e, w in zip(errors[1:], (1.5, 2.0, 2.5))]
        np.testing.assert_allclose(rho, rho_c, rtol=1e-14)


def test_t_max_grid_and_keys():
    spec = SweepSpec(method="mbsvrn", b_grid=(10, 1000), h_grid=(5,))
    assert t_max_grid(spec, 1000, 10) == [25, 50, 100, 200, 400]
    assert t_max_grid(spec, 1000, 1000) == [1, 2, 4]
    sn = SweepSpec(method="sn", b_grid=(1,), h_grid=(5, 7), runs_per_config=2)
    assert sn.cells(100) == [(5, 100), (7, 100)]
    assert t_max_grid(sn, 100, 100) == [1]
    assert len(list(iter_run_keys(sn, 100))) == 2 * len(sn.eta_grid) * 2


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(method="svrg", h_grid=(3,))
    with pytest.raises(ValueError):
        SweepSpec(eta_grid=())
    with pytest.raises(ValueError):
        SweepSpec(runs_per_config=0)


def test_derive_seed_is_stable():
    a = derive_seed(7, RunKey(1, 2, 3, 4, 5))
    assert a == derive_seed(7, (1, 2, 3, 4, 5))
    assert a != derive_seed(8, (1, 2, 3, 4, 5))
    assert a != derive_seed(7, (1, 2, 3, 4, 6))
    assert 0 <= a < 2**64


def _result(h, b, eta, t_max, run, rho):
    return RunResult(RunKey(h, b, -1, -1, run), eta, t_max, 0, rho, 1.0, "ok")


def test_summarize_single_config_and_ties():
    one = summarize([_result(1, 2, 0.5, 3, r, x) for r, x in enumerate([0.2, 0.4])])
    tr = one[(1, 2)]
    assert (tr.best_eta, tr.best_t_max, tr.best_rho) == (0.5, 3, pytest.approx(0.3))
    assert tr.std_rho == pytest.approx(0.1)
    tied = summarize([_result(1, 2, e, t, 0, 0.3) for e in (1.0, 0.5) for t in (8, 4)])[(1, 2)]
    assert (tied.best_eta, tied.best_t_max) == (0.5, 4)


def test_summarize_all_diverged_flag():
    tr = summarize([_result(0, 4, e, 2, 0, 1.0) for e in (0.1, 0.2)])[(0, 4)]
    assert tr.all_diverged and tr.best_rho == 1.0 and tr.best_eta == 0.1


def test_tune_config_single_grid_point(problem):
    obj, ref = problem
    spec = SweepSpec(method="mbsvrn", b_grid=(4,), h_grid=(50,), eta_grid=(0.5,),
                     t_max_multipliers=(1.0,), runs_per_config=3, pass_budget=10)
    tr = tune_config(obj, 50, 4, spec, ref.f, x_star=ref.x)
    assert tr.best_eta == 0.5 and tr.best_t_max == 50
    assert tr.best_rho == pytest.approx(np.mean(tr.per_run_rhos))
    assert tr.measured_alpha >= 1.0


def test_dominated_eta_does_not_change_best(problem):
    obj, ref = problem
    base = SweepSpec(method="mbsvrn", b_grid=(4,), h_grid=(50,), eta_grid=(0.25, 0.5),
                     t_max_multipliers=(1.0,), runs_per_config=2, pass_budget=10)
    wider = SweepSpec(**{**base.__dict__, "eta_grid": (0.25, 0.5, 1e4)})
    a = tune_config(obj, 50, 4, base, ref.f)
    b = tune_config(obj, 50, 4, wider, ref.f)
    assert b.scores[(1e4, 50)] == 1.0
    assert a.best_rho == b.best_rho


def test_tune_config_deterministic(problem):
    obj, ref = problem
    spec = SweepSpec(method="svrg", b_grid=(8,), h_grid=(0,), eta_grid=(0.5, 1.0),
                     t_max_multipliers=(0.5, 1.0), runs_per_config=2, pass_budget=8, master_seed=3)
    a = tune_config(obj, 0, 8, spec, ref.f)
    b = tune_config(obj, 0, 8, spec, ref.f)
    assert a.scores == b.scores and a.per_run_rhos == b.per_run_rhos


def test_parallel_matches_serial(problem):
    obj, ref = problem
    spec = SweepSpec(method="mbsvrn", b_grid=(4, 16), h_grid=(30,), eta_grid=(0.5,),
                     t_max_multipliers=(1.0,), runs_per_config=2, pass_budget=6)
    keys = list(iter_run_keys(spec, obj.n))
    serial = [r.rho_min for r in execute_runs(obj, ref.f, spec, keys, workers=1)]
    parallel = [r.rho_min for r in execute_runs(obj, ref.f, spec, keys, workers=2)]
    assert serial == parallel


def test_robustness_curve_limiting_cells(problem):
    obj, ref = problem
    n = obj.n
    eta = (0.25, 1.0)
    curve = robustness_curve(obj, SweepSpec(method="mbsvrn", b_grid=(n,), h_grid=(n,), eta_grid=eta,
                                            t_max_multipliers=(1.0,), runs_per_config=2,
                                            pass_budget=10), ref.f)
    sn = tune_config(obj, n, n, SweepSpec(method="sn", b_grid=(n,), h_grid=(n,), eta_grid=eta,
                                          runs_per_config=2, pass_budget=10), ref.f)
    assert curve[(n, n)].scores == sn.scores
    spec0 = SweepSpec(method="mbsvrn", b_grid=(8,), h_grid=(0,), eta_grid=eta, runs_per_config=2,
                      pass_budget=10)
    svrg = tune_config(obj, 0, 8, SweepSpec(**{**spec0.__dict__, "method": Method.SVRG}), ref.f)
    assert robustness_curve(obj, spec0, ref.f)[(0, 8)].scores == svrg.scores


def test_failed_runs_do_not_abort(problem):
    obj, ref = problem
    # h beyond n makes the solver reject its config inside the run
    spec = SweepSpec(method="mbsvrn", b_grid=(4,), h_grid=(50,), eta_grid=(0.5,),
                     t_max_multipliers=(1.0,), runs_per_config=1)
    out = list(execute_runs(obj, ref.f, spec, [RunKey(10**6, 4, 0, 0, 0)]))
    assert out[0].status == "failed" and out[0].rho_min == 1.0 and out[0].error


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="on the regenerated desk-scale instance every step in "
                                       "[2^-10, 2] diverges for SVRG; the stable optimum sits near 2^-30")
def test_svrg_tuned_eta_near_two_to_minus_six():
    from mbsvrn.dataset import SyntheticSpec, generate_synthetic

    obj = Objective(generate_synthetic(SyntheticSpec(n=50_000, d=64, kappa=6000.0, seed=0)), 1e-2)
    ref = solve_reference(obj)
    spec = SweepSpec(method="svrg", b_grid=(16, 4096), h_grid=(0,),
                     eta_grid=tuple(2.0**k for k in range(-40, 2)), runs_per_config=1)
    for b in spec.b_grid:
        best = tune_config(obj, 0, b, spec, ref.f).best_eta
        assert 2.0**-8 <= best <= 2.0**-4
