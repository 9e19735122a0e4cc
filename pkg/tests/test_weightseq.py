from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_vekua import weightseq as wsq
from torus_vekua.errors import DomainError, ResourceError


def brute_log_assoc(ws, eps, t, j_max=400):
    j = np.arange(j_max + 1)
    return float(np.min(ws.log_m_array(j_max) + wsq.log_factorial(j) - j * math.log(eps * t)))


def test_gevrey_log_m_values():
    assert wsq.make_gevrey(1).log_m(7) == 0
    assert wsq.make_gevrey(2).log_m(3) == pytest.approx(math.log(6))
    assert wsq.make_gevrey(3).log_m(4) == pytest.approx(2 * math.log(24))


def test_gevrey_rejects_s_below_one():
    with pytest.raises(DomainError):
        wsq.make_gevrey(0.5)


@pytest.mark.parametrize("s,H", [(1, 1), (1.5, 2), (2, 2), (3, 4)])
def test_gevrey_stability_constant(s, H):
    assert wsq.make_gevrey(s).H == H


def test_validate_gevrey_and_constant():
    rep = wsq.validate(wsq.make_gevrey(2), 32)
    assert rep.ok and math.isfinite(rep.H_estimate)
    rep = wsq.validate(wsq.make_table([0.0] * 20), 19)
    assert rep.ok and rep.H_estimate == 1.0


def test_validate_flags_m1_not_one():
    rep = wsq.validate(wsq.make_table([0.0, math.log(2), 2 * math.log(2), 3 * math.log(2)], H=4), 3)
    assert not rep.normalized
    assert any("property i" in f for f in rep.failures)


def test_json_round_trip():
    ws = wsq.make_gevrey(2.5)
    back = wsq.from_json(ws.to_json())
    assert back.H == ws.H and back.log_m(9) == pytest.approx(ws.log_m(9))
    tab = wsq.make_table([0.0, 0.0, 0.5, 1.5], H=3)
    assert wsq.from_json(tab.to_json()).log_m(3) == 1.5


def test_table_index_past_end():
    with pytest.raises(ResourceError):
        wsq.make_table([0.0, 0.0, 0.1]).log_m(np.array([5]))


def test_log_assoc_inf_examples():
    for s in (1, 2, 3):
        assert wsq.log_assoc_inf(wsq.make_gevrey(s), 1.0, 1.0) == 0.0
    val = wsq.log_assoc_inf(wsq.make_gevrey(2), 1.0, 100.0)
    assert val == pytest.approx(-15.84, abs=5e-3)
    assert val == pytest.approx(brute_log_assoc(wsq.make_gevrey(2), 1.0, 100.0), abs=1e-12)


def test_log_assoc_inf_analytic_at_ten_matches_brute_force():
    # inf_j j!/10^j is attained at j = 9, 10
    val = wsq.log_assoc_inf(wsq.make_gevrey(1), 1.0, 10.0)
    assert val == pytest.approx(math.lgamma(11) - 10 * math.log(10), abs=1e-12)
    assert val == pytest.approx(-7.921, abs=1e-3)


@settings(max_examples=60, deadline=None)
@given(s=st.sampled_from([1.0, 1.5, 2.0, 3.0]), eps=st.floats(0.01, 10), t=st.floats(1, 1e4))
def test_log_assoc_inf_scalar_array_brute_agree(s, eps, t):
    ws = wsq.make_gevrey(s)
    a = wsq.log_assoc_inf(ws, eps, t)
    b = float(wsq.log_assoc_inf_array(ws, eps, np.array([t]))[0])
    assert a == pytest.approx(b, abs=1e-9 * (1 + abs(a)))
    if eps * t < 200:
        assert a == pytest.approx(brute_log_assoc(ws, eps, t), abs=1e-9 * (1 + abs(a)))


@settings(max_examples=60, deadline=None)
@given(s=st.sampled_from([1.0, 1.5, 2.0, 3.0]), eps=st.floats(0.01, 10), t=st.floats(1, 1e3),
       f=st.floats(1.0, 5.0))
def test_log_assoc_inf_nonincreasing(s, eps, t, f):
    ws = wsq.make_gevrey(s)
    base = wsq.log_assoc_inf(ws, eps, t)
    assert wsq.log_assoc_inf(ws, eps, t * f) <= base + 1e-12
    assert wsq.log_assoc_inf(ws, eps * f, t) <= base + 1e-12


def test_enumerate_delta_examples():
    assert wsq.enumerate_delta(0) == [()]
    assert wsq.enumerate_delta(2) == [(0, 1), (2, 0)]
    assert len(wsq.enumerate_delta(5)) == 7
    with pytest.raises(ResourceError):
        wsq.enumerate_delta(41)


@pytest.mark.parametrize("k", range(1, 21))
def test_enumerate_delta_cardinality_is_partition_number(k):
    assert len(wsq.enumerate_delta(k)) == wsq.partition_count(k)


def test_partition_numbers():
    assert [wsq.partition_count(k) for k in range(8)] == [1, 1, 2, 3, 5, 7, 11, 15]


def test_delta_sum_identity_examples():
    assert wsq.delta_sum_identity(1, 3) == (3.0, 3.0)
    assert wsq.delta_sum_identity(2, 1) == (2.0, 2.0)
    lhs, rhs = wsq.delta_sum_identity(6, 0.5)
    assert lhs == pytest.approx(3.796875) and rhs == pytest.approx(3.796875)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 12), R=st.sampled_from([0.25, 0.5, 1.0, 2.0, 4.0]) | st.floats(0.01, 10))
def test_delta_sum_identity_property(k, R):
    lhs, rhs = wsq.delta_sum_identity(k, R)
    assert lhs == pytest.approx(rhs, rel=1e-9)


@pytest.mark.parametrize("s", [1.0, 1.5, 2.0, 3.0])
def test_product_bound(s):
    ws = wsq.make_gevrey(s)
    for k in range(1, 13):
        assert wsq.product_bound_violations(ws, k) == []


@pytest.mark.parametrize("s", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("rho", [1.0, 10.0, 1e3, 1e6])
def test_sup_square_with_factorial_stability_constant(s, rho):
    lhs, rhs = wsq.sup_square_check(wsq.make_gevrey(s), rho)
    assert lhs <= rhs + 1e-9


def test_sup_square_with_bare_H_fails_for_gevrey_two():
    # H of m_j alone is too small for the sequence m_j j!
    ws = wsq.make_gevrey(2)
    lhs, rhs = wsq.sup_square_check(ws, 10.0, H=ws.H)
    assert lhs > rhs


def test_gevrey_bounds_examples():
    lo, mid, hi = wsq.gevrey_bounds_check(2, 100)
    assert lo == pytest.approx(8.614, abs=1e-3) and mid == pytest.approx(15.84, abs=5e-3) and hi == 20
    lo, mid, hi = wsq.gevrey_bounds_check(2, 1)
    assert mid == 0 and lo == pytest.approx(1 - 2 * math.log(2)) and hi == 2
    lo, mid, hi = wsq.gevrey_bounds_check(3, 1e6)
    assert hi == pytest.approx(300) and lo <= mid <= hi
    with pytest.raises(DomainError):
        wsq.gevrey_bounds_check(1.0, 10)


@settings(max_examples=40, deadline=None)
@given(s=st.floats(1.2, 4.0), t=st.floats(1.0, 1e6))
def test_gevrey_sandwich_property(s, t):
    lo, mid, hi = wsq.gevrey_bounds_check(s, t)
    assert lo - 1e-9 <= mid <= hi + 1e-9
