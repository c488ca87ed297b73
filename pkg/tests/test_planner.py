import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from semalloc.allocator import resource_residuals
from semalloc.errors import DomainError, InfeasibleError
from semalloc.link import success_prob
from semalloc.planner import (
    baseline_fcr, baseline_fra, baseline_msr, crra, crraus, make_solution, optimal_ratios,
    phi_total, phi_user, ratio_grid, sum_rate_allocation,
)
from semalloc.scenario import Scenario, desk_preset, random_scenario
from semalloc.task_perf import TaskPerfModel, eta, fixture

RESNET = fixture("resnet0dB")
FLAT = TaskPerfModel((0.0, 0.0, 1.0, 0.0))


def single(a=2.0, b=1.0, delta=1.0, eps=1.0):
    return Scenario(U=1, a=[a], b=[b], delta=[delta], B_min=0.01, B_max=1.0, P_min=0.01, P_max=1.0,
                    level_weights=[eps], assignment=[[1.0]])


def pair(**kw):
    base = dict(U=2, a=[20.0, 20.0], b=[100.0, 100.0], delta=[1.0, 1.0], B_min=0.05, B_max=2.0,
                P_min=0.05, P_max=2.0, level_weights=[1.0], assignment=[[1.0], [1.0]])
    base.update(kw)
    return Scenario(**base)


def test_phi_user_examples():
    s = single()
    assert phi_user(s, RESNET, [1.0], [1.0], [1.0], 0) == pytest.approx(eta(RESNET, 1.0), rel=1e-12)
    assert phi_user(s, FLAT, [1.0], [1.0], [0.5], 0) == pytest.approx(0.3173105078629141, abs=1e-12)
    assert phi_user(s, RESNET, [1.0], [1.0], [0.5], 0) == pytest.approx(0.2947, abs=1e-4)
    assert phi_user(s, FLAT, [1.0], [1.0], [0.5], 0, surrogate=True) == pytest.approx(np.exp(-0.5))


def test_phi_total_examples():
    s = single(eps=0.6)
    sol = make_solution(s, FLAT, [0.5], [1], [1.0], [1.0])
    sol.phi_per_user = np.array([0.5])
    assert phi_total(s, sol) == pytest.approx(0.3)
    sol = make_solution(pair(), RESNET, [0.5, 0.5], [0, 0], [1.0, 1.0], [1.0, 1.0])
    assert sol.phi_total == 0.0
    sol.beta = np.array([1, 1])
    sol.phi_per_user = np.array([0.4, 0.2])
    assert phi_total(pair(), sol) == pytest.approx(0.6)


def test_solution_total_is_consistent():
    s = desk_preset()
    sol = crra(s, RESNET)
    assert sol.phi_total == pytest.approx(np.sum(sol.beta * s.weights * sol.phi_per_user), abs=1e-12)
    assert phi_total(s, sol) == pytest.approx(sol.phi_total, abs=1e-12)


def test_grid():
    g = ratio_grid(0.01)
    assert g[0] == 0.01 and g[-1] == 0.99 and g.size == 99
    with pytest.raises(DomainError):
        ratio_grid(0.3)


def test_optimal_ratio_examples():
    s = single(b=1e12)
    assert optimal_ratios(s, RESNET, [1.0], [1.0]).tolist() == [0.01]
    s = pair()
    o = optimal_ratios(s, RESNET, [1.0, 1.0], [1.0, 1.0])
    assert o[0] == o[1]
    s = single(a=20.0, b=100.0)
    o = optimal_ratios(s, RESNET, [1.0], [1.0])[0]
    assert 0.01 < o < 0.99


def test_optimal_ratio_is_grid_argmax():
    s = single(a=20.0, b=100.0)
    grid = ratio_grid(0.01)
    vals = [phi_user(s, RESNET, [1.0], [1.0], [o], 0, surrogate=True) for o in grid]
    assert optimal_ratios(s, RESNET, [1.0], [1.0])[0] == grid[int(np.argmax(vals))]


@settings(max_examples=40)
@given(st.floats(2.0, 40.0), st.floats(5.0, 1000.0), st.floats(0.2, 2.0))
def test_coarse_grid_within_one_step_of_fine_grid(a, b, d):
    s = single(a=a, b=b, delta=d)
    coarse = optimal_ratios(s, RESNET, [1.0], [1.0], 0.01)[0]
    fine = optimal_ratios(s, RESNET, [1.0], [1.0], 0.001)[0]
    assert abs(coarse - fine) <= 0.01 + 1e-12


def test_crra_single_user_matches_brute_force():
    s = single(a=20.0, b=100.0)
    sol = crra(s, RESNET)
    grid = ratio_grid(0.01)
    vals = [phi_user(s, RESNET, [1.0], [1.0], [o], 0, surrogate=True) for o in grid]
    assert sol.o[0] == grid[int(np.argmax(vals))]
    assert sol.B[0] == pytest.approx(1.0, abs=1e-7) and sol.P[0] == pytest.approx(1.0, abs=1e-7)
    assert sol.phi_surrogate == pytest.approx(max(vals), abs=1e-7)


def test_crra_symmetric():
    sol = crra(pair(), RESNET)
    assert sol.o[0] == sol.o[1]
    assert sol.B[0] == pytest.approx(sol.B[1], rel=1e-7)


@settings(max_examples=12, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10_000))
def test_crra_rounds_never_decrease_and_respect_constraints(seed):
    s = random_scenario(np.random.default_rng(seed))
    sol = crra(s, RESNET)
    assert np.all(np.diff(sol.history) >= -1e-9)
    assert max(resource_residuals(s, sol.B, sol.P).values()) <= 1e-8
    assert np.all((sol.o > 0) & (sol.o < 1))


def test_crraus_matches_crra_when_everyone_fits():
    s = desk_preset()
    a = crraus(s, RESNET)
    b = crra(s, RESNET)
    assert a.beta.tolist() == [1, 1, 1, 1]
    assert abs(a.phi_total - b.phi_total) <= 1e-6


def test_crraus_picks_heavier_user_when_one_fits():
    s = pair(B_min=1.0, B_max=1.5, P_min=1.0, P_max=1.5, level_weights=[0.2, 0.8],
             assignment=[[0, 1], [1, 0]], user_selection=True)
    sol = crraus(s, RESNET)
    assert sol.beta.tolist() == [1, 0]
    assert sol.B[1] == 0.0
    s = pair(B_min=1.0, B_max=1.0, P_min=1.0, P_max=1.0, level_weights=[0.2, 0.8],
             assignment=[[1, 0], [0, 1]], user_selection=True)
    assert crraus(s, RESNET).beta.tolist() == [0, 1]


def test_crraus_single_user_is_crra():
    s = single(a=20.0, b=100.0, eps=0.6)
    a, b = crraus(s, RESNET), crra(s, RESNET)
    assert a.beta.tolist() == [1]
    assert a.phi_total == pytest.approx(b.phi_total, abs=1e-9)


@settings(max_examples=8, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10_000))
def test_crraus_rounds_never_decrease_under_selection(seed):
    rng = np.random.default_rng(seed)
    base = random_scenario(rng)
    from dataclasses import replace
    s = replace(base, B_min=base.B_max / (base.U - 0.5), user_selection=True)
    sol = crraus(s, RESNET)
    assert np.all(np.diff(sol.history) >= -1e-9)
    on = sol.beta > 0
    assert sol.B[on].sum() <= s.B_max * (1 + 1e-8) and sol.P[on].sum() <= s.P_max * (1 + 1e-8)
    assert np.all(sol.B[on] >= s.B_min * (1 - 1e-8))


def test_baselines_on_symmetric_users():
    s = pair()
    for fn in (baseline_fra, baseline_msr):
        sol = fn(s, RESNET)
        np.testing.assert_allclose(sol.B, [1.0, 1.0], rtol=1e-6)
        np.testing.assert_allclose(sol.P, [1.0, 1.0], rtol=1e-6)
    assert np.all(baseline_fcr(desk_preset(), RESNET).o == 0.8)


def test_sum_rate_prefers_stronger_channel():
    s = pair(delta=[1.0, 0.5])
    B, P = sum_rate_allocation(s)
    assert B[0] > B[1] and P[0] > P[1]
    assert B.sum() == pytest.approx(2.0, rel=1e-8)


def test_baselines_require_room_for_everyone():
    s = desk_preset(B_min=2.0, user_selection=True)
    for fn in (baseline_fcr, baseline_fra, baseline_msr, crra):
        with pytest.raises(InfeasibleError):
            fn(s, RESNET)


@settings(max_examples=10, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10_000))
def test_crra_dominates_baselines(seed):
    s = random_scenario(np.random.default_rng(seed))
    c = crra(s, RESNET).phi_surrogate
    for fn in (baseline_fcr, baseline_fra, baseline_msr):
        assert c >= fn(s, RESNET).phi_surrogate - 1e-6
