import numpy as np
import pytest

from semalloc.errors import DomainError
from semalloc.task_perf import (
    FIXTURES, PerfPointSet, TaskPerfModel, eta, fit_loss, fit_loss_grad, fit_perf_model, fixture,
    load_model, read_points_csv, rmse, save_model, write_points_csv,
)


def test_resnet_0db_values():
    m = fixture("resnet0dB")
    assert eta(m, 0.5) == pytest.approx(0.9287, abs=5e-4)
    # the two terms nearly cancel at o = 1; expanding the tabulated digits
    # gives 0.9482*e^-0.04151 - 2.893e-16*e^35.68
    assert eta(m, 1.0) == pytest.approx(0.0039643, abs=1e-6)
    # zero compression keeps the large-ratio term negligible
    assert eta(m, 0.0) == pytest.approx(0.9482, abs=1e-9)


def test_every_fixture_is_a_probability_curve():
    o = np.linspace(0, 1, 201)
    for name, m in FIXTURES.items():
        v = eta(m, o)
        assert np.all((v >= 0) & (v <= 1)), name
        assert 0.02 <= m.rmse <= 0.06


def test_clamp():
    m = TaskPerfModel((0.0, 0.0, 2.0, 0.0))
    assert eta(m, 0.3) == 1.0
    m = TaskPerfModel((-5.0, 0.0, 0.0, 0.0))
    assert eta(m, 0.3) == 0.0


def test_domain():
    m = fixture("vgg0dB")
    with pytest.raises(DomainError):
        eta(m, 1.2)
    with pytest.raises(DomainError):
        TaskPerfModel((1.0, 2.0, 3.0))
    with pytest.raises(KeyError):
        fixture("alexnet")


def test_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    D = PerfPointSet(np.linspace(0, 1, 30), rng.uniform(0, 1, 30))
    z = np.array([-1e-3, 4.0, 0.9, -0.05])
    g = fit_loss_grad(TaskPerfModel(z), D)
    for k in range(4):
        h = 1e-6 * max(1.0, abs(z[k]))
        zp, zm = z.copy(), z.copy()
        zp[k] += h
        zm[k] -= h
        fd = (fit_loss(TaskPerfModel(zp), D) - fit_loss(TaskPerfModel(zm), D)) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_fit_constant_target():
    D = PerfPointSet(np.linspace(0, 1, 50), np.full(50, 0.7))
    m = fit_perf_model(D)
    assert rmse(m, D) < 1e-4


def test_fit_recovers_noiseless_curve():
    truth = TaskPerfModel((-1e-16, 36.0, 0.9, -0.02))
    o = np.linspace(0, 1, 101)
    D = PerfPointSet(o, eta(truth, o))
    m = fit_perf_model(D)
    grid = np.linspace(0, 1, 1001)
    assert np.max(np.abs(eta(m, grid) - eta(truth, grid))) <= 0.01


def test_fit_rejects_bad_settings():
    D = PerfPointSet([0.1, 0.2], [0.5, 0.5])
    with pytest.raises(DomainError):
        fit_perf_model(D, step=0.0)


def test_point_set_validation():
    with pytest.raises(DomainError):
        PerfPointSet([0.1, 0.2], [0.5])
    with pytest.raises(DomainError):
        PerfPointSet([1.5], [0.5])


def test_file_round_trips(tmp_path):
    D = PerfPointSet([0.1, 0.5, 0.9], [0.9, 0.8, 0.1])
    write_points_csv(D, tmp_path / "p.csv")
    E = read_points_csv(tmp_path / "p.csv")
    assert np.array_equal(D.o, E.o) and np.array_equal(D.eta_star, E.eta_star)
    m = fixture("vgg5dB")
    save_model(m, tmp_path / "m.json")
    assert load_model(tmp_path / "m.json") == m
