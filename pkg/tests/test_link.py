import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semalloc.errors import DomainError
from semalloc.link import (
    LinkParams, UserLink, g_term, gain_threshold, monte_carlo_success, q_approx, q_exact,
    success_prob, transmission_delay, transmission_rate,
)


def test_rate_examples():
    assert transmission_rate(1.0, 1.0, 1.0, 1.0) == pytest.approx(1.0)
    assert transmission_rate(2e6, 1.0, 0.0, 1e-20) == 0.0
    assert transmission_rate(1.0, 3.0, 1.0, 1.0) == pytest.approx(2.0)


def test_rate_rejects_bad_inputs():
    with pytest.raises(DomainError):
        transmission_rate(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        transmission_rate(1.0, -1.0, 1.0, 1.0)


def test_delay():
    assert transmission_delay(10.0, 5.0) == 2.0
    assert transmission_delay(0.0, 0.0) == 0.0
    assert transmission_delay(1.0, 0.0) == math.inf


def test_q_functions():
    assert q_exact(0.0) == pytest.approx(0.5)
    assert q_exact(1.0) == pytest.approx(0.15865525393145707, abs=1e-15)
    assert q_approx(0.0) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        q_approx(-1.0)


@given(st.floats(0.0, 30.0))
def test_q_approx_bounds_tail(x):
    # Chernoff bound: Q(x) <= exp(-x^2/2)/2 for x >= 0
    assert q_exact(x) <= q_approx(x) * (1 + 1e-12)


def test_success_prob_reference_point():
    p = LinkParams(2.0, 1.0, 1.0)
    assert success_prob(p, 0.5) == pytest.approx(0.3173105078629141, abs=1e-12)
    assert g_term(p, 0.5) == pytest.approx(math.exp(-0.5), abs=1e-15)


def test_payload_free_link_always_succeeds():
    p = LinkParams(50.0, 0.1, 0.2)
    assert success_prob(p, 1.0) == 1.0
    assert g_term(p, 1.0) == 1.0


def test_huge_load_clamps_to_zero():
    p = LinkParams(1e6, 1.0, 1.0)
    assert success_prob(p, 0.1) == 0.0
    assert g_term(p, 0.1) == 0.0


def test_ratio_domain():
    p = LinkParams(2.0, 1.0, 1.0)
    for o in (0.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            success_prob(p, o)


@given(st.floats(0.1, 40.0), st.floats(0.05, 50.0), st.floats(0.1, 3.0), st.floats(0.01, 0.99))
def test_success_prob_in_unit_interval_and_monotone_in_ratio(a, b, d, o):
    p = LinkParams(a, b, d)
    v = success_prob(p, o)
    assert 0.0 <= v <= 1.0
    assert success_prob(p, min(o + 0.005, 1.0)) >= v - 1e-15
    # surrogate tracks 2Q from above for arguments >= 0
    assert g_term(p, o) >= v - 1e-15


def test_monte_carlo_is_seeded():
    p = LinkParams(2.0, 1.0, 1.0)
    a = monte_carlo_success(p, 0.5, 50_000, seed=3)
    b = monte_carlo_success(p, 0.5, 50_000, seed=3)
    assert a == b
    assert abs(a - 0.3173105) < 0.01


def test_gain_threshold_matches_definition():
    p = LinkParams(2.0, 1.0, 1.0)
    assert gain_threshold(p, 0.5) == pytest.approx(1.0)
    assert gain_threshold(LinkParams(5000.0, 1.0, 1.0), 0.0) == math.inf


def test_user_link_recovers_payload():
    u = UserLink(bandwidth=1e6, power=0.1, gain_spread=1.0, data_bits=8e5)
    p = u.params(N0=1e-20, t0=1e-2, o=0.2)
    assert p.a * (1 - 0.2) == pytest.approx(8e5 / (1e6 * 1e-2))
    assert p.b == pytest.approx(0.1 / (1e-20 * 1e6))


def test_link_params_validation():
    with pytest.raises(DomainError):
        LinkParams(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        LinkParams(1.0, math.inf, 1.0)
