from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_vekua import constcoef as cc
from torus_vekua import margins as mg
from torus_vekua.diophantine import liouville_like, sqrt2
from torus_vekua.errors import DomainError, IncompatibilityError
from torus_vekua.spectral import Spectrum, classify_decay, random_spectrum, synthesize
from torus_vekua.weightseq import make_gevrey

DDX = cc.ConstOperatorSpec(1, {(1,): 1.0})


def random_spec(rng, n=None, order=None):
    n = n or int(rng.integers(1, 4))
    order = order or int(rng.integers(1, 5))
    terms = {}
    for _ in range(int(rng.integers(1, 6))):
        alpha = [0] * n
        for _ in range(int(rng.integers(1, order + 1))):
            alpha[int(rng.integers(n))] += 1
        terms[tuple(alpha)] = complex(*rng.standard_normal(2))
    return cc.ConstOperatorSpec(n, terms, complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2)))


def test_presets_and_symbols():
    assert cc.laplace(2).terms == {(2, 0): 1, (0, 2): 1}
    assert cc.heat(1, 2).terms == {(1, 0): 1, (0, 2): -4}
    assert cc.symbol(cc.laplace(2), (1, 2)) == pytest.approx(-5)
    assert cc.symbol(cc.heat(1, 1), (1, 1)) == pytest.approx(1 + 1j)
    assert cc.symbol(DDX, 3) == pytest.approx(3j)
    vf = cc.vector_field([1j])
    assert cc.symbol(vf, (1, 1)) == pytest.approx(1j - 1)


def test_spec_validation():
    with pytest.raises(DomainError):
        cc.ConstOperatorSpec(1, {(0,): 1.0})
    with pytest.raises(DomainError):
        cc.ConstOperatorSpec(2, {(1,): 1.0})
    with pytest.raises(DomainError):
        cc.ConstOperatorSpec.from_json({"terms": []})


def test_spec_json_round_trip():
    spec = cc.heat(2, 0.7, 1 + 2j, 0.5)
    back = cc.ConstOperatorSpec.from_json(spec.to_json())
    assert back == spec
    p = cc.ConstOperatorSpec.from_json({"preset": {"name": "laplace", "n": 2}, "A": {"re": 1, "im": 0}})
    assert p.A == 1 and p.terms == cc.laplace(2).terms


def test_discriminant_examples():
    assert cc.discriminant(cc.laplace(2), (1, 2)) == pytest.approx(25)
    assert cc.discriminant(DDX.with_constants(1, 2), 3) == pytest.approx(-12 - 6j)
    assert abs(cc.discriminant(DDX.with_constants(4j, 0), 4)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_conjugate_symmetry_property(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    pts = mg.lattice_ball(spec.n, 6)
    d = cc.discriminant(spec, pts)
    dm = cc.discriminant(spec, -pts)
    assert np.all(np.abs(np.conj(d) - dm) <= 1e-12 * (1 + np.abs(d)))


def test_zero_set_examples():
    assert cc.zero_set(cc.laplace(2), 10) == [(0, 0)]
    assert cc.zero_set(DDX.with_constants(3j, 0), 10) == [(-3,), (3,)]


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_zero_set_closed_under_negation(seed):
    spec = random_spec(np.random.default_rng(seed), n=1, order=2)
    omega = set(cc.zero_set(spec, 20))
    assert omega == {tuple(-v for v in x) for x in omega}


def test_solve_mode_examples():
    res = cc.solve_mode(DDX.with_constants(2, 0), 1, 1, 0)
    assert res.uplus == pytest.approx(-0.4 - 0.2j) and res.uminus == pytest.approx(0)
    res = cc.solve_mode(cc.laplace(1).with_constants(1, 0.5), 2, 0, 0)
    assert res.uplus == 0 and res.uminus == 0
    cert = cc.solve_mode(DDX.with_constants(1j, 0), 1, 1, 0)
    assert isinstance(cert, cc.Certificate) and cert.xi == (1,)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_solve_mode_satisfies_system(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, n=2, order=2)
    xi = tuple(int(v) for v in rng.integers(-4, 5, 2))
    fp, fm = complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2))
    if not any(xi):
        fm = fp  # +xi and -xi are the same coefficient
    res = cc.solve_mode(spec, xi, fp, fm)
    if isinstance(res, cc.Certificate):
        return
    sp, sm = cc.symbol(spec, xi), cc.symbol(spec, tuple(-v for v in xi))
    e1 = (sp - spec.A) * res.uplus - spec.B * np.conj(res.uminus) - fp
    e2 = (sm - spec.A) * res.uminus - spec.B * np.conj(res.uplus) - fm
    scale = 1 + abs(fp) + abs(fm)
    assert abs(e1) <= 1e-10 * scale and abs(e2) <= 1e-10 * scale


def test_zero_mode_real_system():
    spec = cc.laplace(1).with_constants(1 + 1j, 0.5j)
    res = cc.solve_mode(spec, 0, 2 - 1j, 2 - 1j)
    u = res.uplus
    assert -spec.A * u - spec.B * np.conj(u) == pytest.approx(2 - 1j)


def test_solve_examples():
    spec = cc.laplace(2).with_constants(1, 0.5)
    U, diag = cc.solve(spec, Spectrum.zeros(2, 3))
    assert np.all(U.coeffs == 0) and diag.rel_residual == 0
    F = random_spectrum(2, 8, np.random.default_rng(2))
    U, diag = cc.solve(spec, F, grid=64)
    assert diag.rel_residual <= 1e-10
    bad = Spectrum.from_entries({(3,): 1.0}, 1)
    with pytest.raises(IncompatibilityError) as info:
        cc.solve(DDX.with_constants(3j, 0), bad)
    assert info.value.certificates[0].xi == (-3,) or info.value.certificates[0].xi == (3,)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.complex_numbers(max_magnitude=3), b=st.complex_numbers(max_magnitude=3))
def test_solve_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    spec = cc.heat(1, 1.0, 1 + 1j, 0.3)
    F1, F2 = random_spectrum(2, 4, rng), random_spectrum(2, 4, rng)
    U1, _ = cc.solve(spec, F1)
    U2, _ = cc.solve(spec, F2)
    # conj(u) makes P real-linear only
    a, b = complex(a.real, 0), complex(b.real, 0)
    U, _ = cc.solve(spec, Spectrum(2, 4, a * F1.coeffs + b * F2.coeffs))
    assert np.allclose(U.coeffs, a * U1.coeffs + b * U2.coeffs, atol=1e-10)


def test_check_dc_m_elliptic():
    ws = make_gevrey(2)
    rep = cc.check_dc_m(cc.laplace(2), ws, [0.1, 1.0], 50)
    assert rep.verdict == mg.PASS
    assert all(c >= 1 for c in rep.C_eps.values())
    assert all(curve.is_nondecreasing() for curve in rep.curves.values())


def test_check_dc_m_degenerate_and_floor():
    ws = make_gevrey(2)
    spec = DDX.with_constants(3j, 0)
    rep = cc.check_dc_m(spec, ws, [1.0], 20)
    assert rep.verdict == mg.DEGENERATE and rep.zero_set == [(-3,), (3,)]
    assert cc.check_dc_m(spec, ws, [1.0], 20, gamma_floor=4).verdict == mg.PASS


def test_check_dc_m_liouville_wave_fails():
    ws = make_gevrey(2)
    eta = liouville_like(2, 6)
    rep = cc.check_dc_m(cc.wave(1, eta.value, 1j, 1), ws, [0.01, 0.1, 1.0], 700)
    assert rep.verdict == mg.FAIL
    denominators = set(eta.denominators())
    assert any(abs(w[1]) in denominators for w in rep.witnesses)


def test_smooth_dc_examples():
    rep = cc.check_smooth_dc(cc.laplace(2), [0, 1, 2], 30)
    assert rep.verdict == mg.PASS and rep.best_gamma == 0
    rep = cc.check_smooth_dc(cc.heat(1, 1, 1 + 1j, 0.1), [0, 1, 2, 3], 40)
    assert rep.verdict == mg.PASS
    rep = cc.check_smooth_dc(DDX.with_constants(3j, 0), [1], 10)
    assert rep.verdict == mg.DEGENERATE


def test_smooth_implies_m_examples():
    ws = make_gevrey(2)
    assert cc.smooth_implies_m_check(cc.laplace(1), ws, 0, 1.0, 100)
    assert cc.smooth_implies_m_check(cc.laplace(1), ws, 3, 1.0, 100)
    assert cc.smooth_implies_m_check(cc.laplace(1), ws, 5, 0.1, 100)


def test_build_obstruction():
    spec = DDX.with_constants(3j, 0)
    assert np.all(cc.build_obstruction(spec, [(3,)]).coeffs == 0)
    S = cc.build_obstruction(DDX, [(5,)], variant="sigma")
    assert S[5] == pytest.approx(5j)


def test_gh_solvable_consistency():
    # decaying data through an operator that passes the scan stays decaying
    ws = make_gevrey(2)
    spec = cc.laplace(2).with_constants(1, 0.5)
    F = random_spectrum(2, 20, np.random.default_rng(4), decay=1.0)
    U, _ = cc.solve(spec, F)
    assert classify_decay(F, ws, [0.5, 1.0]).consistent
    assert classify_decay(U, ws, [0.5, 1.0]).consistent


def test_classify_wave():
    ws = make_gevrey(2)
    assert cc.classify_wave(2j, 1, 1.0, ws, 50).matched == 1
    v = cc.classify_wave(1j, 1, sqrt2(), ws, 50)
    assert v.matched == 2 and v.mu_estimate < 4
    v = cc.classify_wave(1j, 1, liouville_like(2, 6), ws, 700)
    assert v.matched is None and v.solvable is False and v.dc_report.verdict == mg.FAIL


def test_classify_vector_field():
    ws = make_gevrey(2)
    assert cc.classify_vector_field([1], 2, 1, ws, 20).matched == 2
    assert cc.classify_vector_field([1], 1, 3, ws, 20).matched == 1
    v = cc.classify_vector_field([math.sqrt(2)], 1j, 1, ws, 30)
    assert v.closed_form_error <= 1e-12


def test_margins_csv_columns():
    rep = cc.check_dc_m(cc.laplace(1), make_gevrey(2), [1.0], 5)
    lines = rep.margins_csv().splitlines()
    assert lines[0] == "eps,shell_radius,min_log_margin"
    assert len(lines) == 6
