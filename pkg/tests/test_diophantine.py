from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_vekua import diophantine as dio
from torus_vekua.errors import DomainError, ResourceError


def test_sqrt2_and_golden():
    r = dio.sqrt2(20)
    assert r.quotients[:4] == (1, 2, 2, 2)
    assert r.value == pytest.approx(math.sqrt(2), abs=1e-12)
    g = dio.golden(30)
    assert g.value == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-12)
    assert g.irrationality_estimate() < 2.5


def test_liouville_like_quotients_and_value():
    L = dio.liouville_like(2, 3)
    assert L.quotients == (0, 2, 4, 64)
    # [0; 2, 4, 64] = 257/578
    assert L.as_fraction() == Fraction(257, 578)
    assert L.value == pytest.approx(0.4446366782, abs=1e-9)


def test_liouville_like_exponent_grows():
    assert dio.liouville_like(2, 6).irrationality_estimate() > 4
    assert not dio.liouville_like(2, 6).is_non_liouville_on_range()
    assert dio.sqrt2().is_non_liouville_on_range()


def test_liouville_like_bit_cap():
    with pytest.raises(ResourceError):
        dio.liouville_like(2, 12)


def test_bad_inputs():
    with pytest.raises(DomainError):
        dio.DiophantineNumber((1, 0))
    with pytest.raises(DomainError):
        dio.liouville_like(1, 3)
    with pytest.raises(DomainError):
        dio.cf_surrogate("pi")


def test_surrogate_names():
    assert dio.cf_surrogate("sqrt2").label == "sqrt2"
    assert dio.cf_surrogate("liouville_like(3, 2)").quotients == (0, 3, 9)


@settings(max_examples=50, deadline=None)
@given(q=st.lists(st.integers(1, 50), min_size=1, max_size=12), a0=st.integers(-5, 5))
def test_convergents_match_exact_fraction(q, a0):
    num = dio.DiophantineNumber((a0,) + tuple(q))
    x = Fraction(q[-1])
    for a in reversed((a0,) + tuple(q[:-1])):
        x = a + 1 / x
    assert num.as_fraction() == x
    conv = num.convergents()
    for k in range(1, len(conv)):
        (p0, q0), (p1, q1) = conv[k - 1], conv[k]
        assert p1 * q0 - p0 * q1 == (-1) ** (k + 1)
