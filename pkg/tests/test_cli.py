from __future__ import annotations

import json
import math

import numpy as np
import pytest

from torus_vekua import cli
from torus_vekua import constcoef as cc
from torus_vekua import varcoef as vc
from torus_vekua import weightseq as wsq
from torus_vekua.spectral import Spectrum, random_spectrum


def dump(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def laplace_spec(tmp_path):
    return dump(tmp_path / "lap.json", cc.laplace(2).to_json())


@pytest.fixture
def ddx_spec(tmp_path):
    return dump(tmp_path / "ddx.json", cc.ConstOperatorSpec(1, {(1,): 1.0}, 3j, 0).to_json())


def test_analyze_laplace_passes(tmp_path, laplace_spec):
    out = tmp_path / "o"
    assert cli.main(["analyze", "--spec", laplace_spec, "--weights", "gevrey:2", "--xi-max", "30",
                     "--out", str(out)]) == cli.EXIT_PASS
    rep = json.loads((out / "report.json").read_text())
    assert rep["verdict"] == "pass-on-range"
    assert (out / "margins.csv").read_text().startswith("eps,shell_radius,min_log_margin")


def test_analyze_degenerate_reports_witness(tmp_path, ddx_spec):
    out = tmp_path / "o"
    assert cli.main(["analyze", "--spec", ddx_spec, "--xi-max", "20", "--out", str(out)]) == cli.EXIT_FAIL
    text = (out / "report.json").read_text()
    rep = json.loads(text)
    assert [[-3], [3]] == rep["zero_set"]


def test_missing_field_is_input_error(tmp_path, capsys):
    obj = vc.VarOperatorSpec.from_functions(1.0, 0.0, [0.5], [0.0], 2.0, 1.0, 16).to_json()
    del obj["alpha"]
    path = dump(tmp_path / "v.json", obj)
    assert cli.main(["analyze", "--spec", path, "--out", str(tmp_path)]) == cli.EXIT_INPUT
    assert "alpha" in capsys.readouterr().err


def test_malformed_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["analyze", "--spec", str(bad), "--out", str(tmp_path)]) == cli.EXIT_INPUT
    assert cli.main(["analyze", "--spec", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == cli.EXIT_INPUT
    assert cli.main(["no-such-command"]) == cli.EXIT_INPUT


def test_solve_laplace_seed_seven(tmp_path):
    spec = dump(tmp_path / "s.json", cc.laplace(2).with_constants(1, 0.5).to_json())
    out = tmp_path / "o"
    assert cli.main(["solve", "--spec", spec, "--seed", "7", "--out", str(out)]) == cli.EXIT_PASS
    res = json.loads((out / "residual.json").read_text())
    assert res["rel_residual"] <= 1e-10
    U = Spectrum.from_json(json.loads((out / "u.json").read_text()))
    assert U.n == 2
    assert (out / "u.csv").exists()


def test_solve_zero_forcing(tmp_path):
    spec = dump(tmp_path / "s.json", cc.laplace(2).with_constants(1, 0.5).to_json())
    f = dump(tmp_path / "f.json", Spectrum.zeros(2, 3).to_json())
    out = tmp_path / "o"
    assert cli.main(["solve", "--spec", spec, "--f", f, "--out", str(out)]) == cli.EXIT_PASS
    U = Spectrum.from_json(json.loads((out / "u.json").read_text()))
    assert np.all(U.coeffs == 0)


def test_solve_incompatible_writes_certificate(tmp_path, ddx_spec):
    f = dump(tmp_path / "f.json", Spectrum.from_entries({(3,): 1.0}, 1).to_json())
    out = tmp_path / "o"
    assert cli.main(["solve", "--spec", ddx_spec, "--f", f, "--out", str(out)]) == cli.EXIT_FAIL
    res = json.loads((out / "residual.json").read_text())
    assert res["status"] == "incompatible"
    assert any(abs(c["xi"][0]) == 3 for c in res["certificates"])


def test_solve_variable_coefficients(tmp_path):
    spec = vc.VarOperatorSpec.from_functions(lambda x: 1 + np.cos(x), lambda x: 0.1 * np.sin(x), [0.3],
                                             [0.0], 2.0, 1.0, 64)
    path = dump(tmp_path / "v.json", spec.to_json())
    out = tmp_path / "o"
    assert cli.main(["solve", "--spec", path, "--modes", "3", "--out", str(out)]) == cli.EXIT_PASS
    res = json.loads((out / "residual.json").read_text())
    assert res["rel_residual"] <= 1e-2


def test_solve_variable_refused(tmp_path):
    spec = vc.VarOperatorSpec.from_functions(1.0, 0.0, [0.0], [0.0], 1.0, 1.0, 32)
    path = dump(tmp_path / "v.json", spec.to_json())
    out = tmp_path / "o"
    assert cli.main(["solve", "--spec", path, "--out", str(out)]) == cli.EXIT_FAIL
    assert json.loads((out / "residual.json").read_text())["status"] == "refused"


def test_lemma_check_gevrey_two(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["lemma-check", "--weights", "gevrey:2", "--out", str(out)]) == cli.EXIT_PASS
    rep = json.loads((out / "lemma.json").read_text())
    assert rep["ok"] is True


def test_lemma_check_table_with_m1_two(tmp_path):
    ws = wsq.make_table([0.0, math.log(2), 2 * math.log(2), 3 * math.log(2)], H=4)
    path = dump(tmp_path / "w.json", ws.to_json())
    out = tmp_path / "o"
    assert cli.main(["lemma-check", "--weights", path, "--out", str(out)]) == cli.EXIT_FAIL
    assert "property i" in (out / "lemma.json").read_text()


def test_classify_commands(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["classify", "--kind", "wave", "--A", "1j", "--B", "1", "--eta", "sqrt2",
                     "--xi-max", "40", "--out", str(out)]) == cli.EXIT_PASS
    assert cli.main(["classify", "--kind", "vector-field", "--C", "1", "--A", "2", "--B", "1",
                     "--xi-max", "20", "--out", str(out)]) == cli.EXIT_PASS
    assert cli.main(["classify", "--kind", "wave", "--out", str(out)]) == cli.EXIT_INPUT


def test_dc_equiv_commands(tmp_path):
    out = tmp_path / "o"
    args = ["dc-equiv", "--p0", "0.5", "--q0", "1.0", "--delta", "1.0", "--alpha", "0.5", "--xi-max", "40",
            "--out", str(out)]
    assert cli.main(args) == cli.EXIT_PASS
    # q0 * sqrt(delta^2 - |alpha|^2) = 2 pi with p0 = 0 puts a zero denominator on the lattice
    q0 = 2 * math.pi / math.sqrt(1.0 - 0.25)
    args = ["dc-equiv", "--p0", "0", "--q0", repr(q0), "--delta", "1.0", "--alpha", "0.5", "--xi-max", "40",
            "--out", str(out)]
    assert cli.main(args) == cli.EXIT_FAIL
    rep = json.loads((out / "report.json").read_text())
    assert rep["agree"] is True


def test_reports_are_byte_identical(tmp_path, laplace_spec):
    solvable = dump(tmp_path / "s.json", cc.laplace(2).with_constants(1, 0.5).to_json())
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["analyze", "--spec", laplace_spec, "--xi-max", "20", "--out", str(out)]) == 0
        assert cli.main(["solve", "--spec", solvable, "--seed", "3", "--out", str(out / "s")]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "s" / "u.json").read_bytes() == (b / "s" / "u.json").read_bytes()
    assert (a / "s" / "residual.json").read_bytes() == (b / "s" / "residual.json").read_bytes()


def test_floats_round_trip_exactly(tmp_path):
    spec = cc.laplace(2).with_constants(1, 0.5)
    path = dump(tmp_path / "s.json", spec.to_json())
    out = tmp_path / "o"
    assert cli.main(["solve", "--spec", path, "--seed", "1", "--out", str(out)]) == 0
    U = Spectrum.from_json(json.loads((out / "u.json").read_text()))
    ref, _ = cc.solve(spec, random_spectrum(2, 4, np.random.default_rng(1)))
    assert np.array_equal(U.coeffs, ref.coeffs)
