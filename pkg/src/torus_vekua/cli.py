"""``torus-vekua`` command line.

Exit codes: 0 pass, 2 fail-witness / degenerate / incompatible / not solved,
1 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import constcoef as cc
from . import jsonio
from . import margins as mg
from . import varcoef as vc
from . import weightseq as wsq
from .diophantine import cf_surrogate
from .errors import ConditionError, DomainError, IncompatibilityError, ResourceError, SmallDivisorError, VekuaError
from .spectral import GridFunction, Spectrum, analyze, random_spectrum, synthesize

EXIT_PASS, EXIT_INPUT, EXIT_FAIL = 0, 1, 2


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    spec: Path | None = None
    f: Path | None = None
    weights: str = "gevrey:2"
    xi_max: int = 32
    eps: list[float] = field(default_factory=lambda: [0.1, 1.0])
    grid: int | None = None
    tgrid: int | None = None
    tol: float | None = None
    out: Path = Path(".")
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.xi_max < 1:
            raise InputError("--xi-max must be >= 1")
        if not self.eps:
            raise InputError("--eps must list at least one value")
        if any(not e > 0 for e in self.eps):
            raise InputError("--eps values must be positive")
        if self.tol is not None and not self.tol > 0:
            raise InputError("--tol must be positive")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a complex number like 1+2j, got {text!r}") from None


def _complex_list(text: str) -> list[complex]:
    return [_complex(v) for v in text.split(",") if v.strip()]


def load_weights(desc: str) -> wsq.WeightSequence:
    """``gevrey:S`` or a path to a weight-sequence JSON file."""
    if desc.startswith("gevrey:"):
        try:
            return wsq.make_gevrey(float(desc.split(":", 1)[1]))
        except ValueError:
            raise InputError(f"bad Gevrey order in {desc!r}") from None
    return wsq.from_json(_load_json(Path(desc)))


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from None


def load_operator(path: Path):
    """Constant- or variable-coefficient operator, told apart by its fields."""
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise InputError("operator spec must be a JSON object")
    if "terms" in obj or "preset" in obj:
        return cc.ConstOperatorSpec.from_json(obj)
    if "q" in obj or "Nt" in obj:
        return vc.VarOperatorSpec.from_json(obj)
    raise InputError("operator spec needs 'terms'/'preset' (constant) or 'q'/'Nt' (variable coefficients)")


def _write(out: Path, name: str, content) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(content, str):
        (out / name).write_text(content)
    else:
        jsonio.write(out / name, content)


def cmd_analyze(cfg: RunConfig) -> int:
    if cfg.spec is None:
        raise InputError("analyze needs --spec")
    op = load_operator(cfg.spec)
    ws = load_weights(cfg.weights)
    if isinstance(op, cc.ConstOperatorSpec):
        rep = cc.check_dc_m(op, ws, cfg.eps, cfg.xi_max, gamma_floor=cfg.extra.get("gamma_floor", 1.0))
        body = {"operator": "constant", "weights": ws.to_json(), **rep.to_json()}
        _write(cfg.out, "report.json", body)
        _write(cfg.out, "margins.csv", rep.margins_csv())
        return EXIT_PASS if rep.verdict == mg.PASS else EXIT_FAIL
    if cfg.tgrid:
        op = op.resampled(cfg.tgrid)
    if not vc.validate_condition_p(op):
        vc.require_condition_p(op)
    red = vc.reduce(op)
    tau_max = cfg.extra.get("tau_max") or cfg.xi_max
    rep = vc.check_conditions(red, ws, cfg.eps, cfg.xi_max, tau_max)
    body = {"operator": "variable", "weights": ws.to_json(),
            "reduced": {"p0": red.p0, "q0": red.q0, "s0": red.s0, "A0": red.A0, "B0": red.B0, "C0": list(red.C0)},
            "conditions": rep.to_json()}
    csv = rep.margins_csv()
    verdict = rep.verdict
    if np.all(red.lam == 0):
        thm = vc.check_thm2(red, ws, cfg.eps, cfg.xi_max, tau_max)
        body["lambda_zero_cases"] = thm.to_json()
        if thm.curves:
            csv += "".join(thm.margins_csv().splitlines(keepends=True)[1:])
        if thm.case is not None:
            verdict = mg.PASS
    body["verdict"] = verdict
    _write(cfg.out, "report.json", body)
    _write(cfg.out, "margins.csv", csv)
    return EXIT_PASS if verdict == mg.PASS else EXIT_FAIL


def _load_f_const(cfg: RunConfig, n: int) -> Spectrum:
    if cfg.f is not None:
        if cfg.f.suffix == ".csv":
            G = GridFunction.from_csv(cfg.f.read_text())
            return analyze(G).resized(max(1, (G.N - 1) // 2))
        return Spectrum.from_json(_load_json(cfg.f))
    rng = np.random.default_rng(cfg.seed)
    return random_spectrum(n, cfg.extra.get("modes", 4), rng)


def _load_f_var(cfg: RunConfig, op: vc.VarOperatorSpec, N: int) -> GridFunction:
    if cfg.f is not None:
        if cfg.f.suffix != ".csv":
            raise InputError("variable-coefficient solve needs f as a grid CSV")
        return GridFunction.from_csv(cfg.f.read_text())
    rng = np.random.default_rng(cfg.seed)
    return synthesize(random_spectrum(op.n + 1, cfg.extra.get("modes", 4), rng), N)


def cmd_solve(cfg: RunConfig) -> int:
    if cfg.spec is None:
        raise InputError("solve needs --spec")
    op = load_operator(cfg.spec)
    if isinstance(op, cc.ConstOperatorSpec):
        tol = 1e-8 if cfg.tol is None else cfg.tol
        F = _load_f_const(cfg, op.n)
        try:
            U, diag = cc.solve(op, F, grid=cfg.grid)
        except IncompatibilityError as exc:
            _write(cfg.out, "residual.json", {"status": "incompatible", "message": str(exc),
                                              "certificates": [c.to_json() for c in exc.certificates]})
            return EXIT_FAIL
        N = cfg.grid or diag.grid
        _write(cfg.out, "u.json", U.to_json())
        _write(cfg.out, "u.csv", synthesize(U, max(N, 2 * U.K + 2)).to_csv())
        body = {"rel_residual": diag.rel_residual, "tol": tol, "diagnostics": diag.to_json()}
        _write(cfg.out, "residual.json", body)
        return EXIT_PASS if diag.rel_residual <= tol else EXIT_FAIL
    tol = 1e-2 if cfg.tol is None else cfg.tol
    N = cfg.tgrid or cfg.grid or op.Nt
    f = _load_f_var(cfg, op, N)
    try:
        u, diag = vc.solve(op, f, Nt=N, xi_max=cfg.xi_max, quadrature=cfg.extra.get("quadrature", "exptrap"))
    except (ConditionError, SmallDivisorError) as exc:
        body = {"status": "refused", "message": str(exc)}
        if isinstance(exc, SmallDivisorError):
            body["frequencies"] = [list(x) for x in exc.frequencies]
        _write(cfg.out, "residual.json", body)
        return EXIT_FAIL
    U = analyze(u)
    scale = float(np.max(np.abs(U.coeffs))) if U.coeffs.size else 0.0
    _write(cfg.out, "u.json", {"n": U.n, "K": U.K, "real": False, "entries": U.to_rows(1e-15 * scale)})
    _write(cfg.out, "u.csv", u.to_csv())
    _write(cfg.out, "residual.json", {"rel_residual": diag.rel_residual, "tol": tol, "diagnostics": diag.to_json()})
    return EXIT_PASS if diag.rel_residual <= tol else EXIT_FAIL


def lemma_suite(ws: wsq.WeightSequence, k_max: int = 12, R_list=(0.5, 1.0, 2.0, 3.7),
                rho_list=(1.0, 10.0, 1e3, 1e6)) -> dict:
    """Weight-sequence invariants; each entry has an ``ok`` flag."""
    checks: dict = {}
    table_len = len(ws.descriptor.get("log_m", [])) if ws.descriptor.get("kind") == "table" else None
    j_max = 40 if table_len is None else max(2, table_len - 1)
    rep = wsq.validate(ws, j_max)
    checks["properties"] = {"ok": rep.ok, "normalized": rep.normalized, "log_convex": rep.log_convex,
                            "stable": rep.stable, "H": ws.H, "H_estimate": rep.H_estimate, "failures": rep.failures}
    rows = []
    for rho in rho_list:
        try:
            lhs, rhs = wsq.sup_square_check(ws, rho)
            rows.append({"rho": rho, "lhs": lhs, "rhs": rhs, "ok": bool(lhs <= rhs + 1e-9)})
        except ResourceError as exc:
            rows.append({"rho": rho, "skipped": str(exc), "ok": True})
    checks["sup_square"] = {"ok": all(r["ok"] for r in rows), "H_used": wsq.factorial_stability_constant(ws),
                            "rows": rows}
    sizes = [{"k": k, "size": len(wsq.enumerate_delta(k)), "partitions": wsq.partition_count(k)}
             for k in range(1, k_max + 1)]
    checks["delta_sizes"] = {"ok": all(r["size"] == r["partitions"] for r in sizes), "rows": sizes}
    ident = []
    for k in range(1, min(k_max, 20) + 1):
        for R in R_list:
            lhs, rhs = wsq.delta_sum_identity(k, R)
            ident.append({"k": k, "R": R, "lhs": lhs, "rhs": rhs, "ok": bool(abs(lhs - rhs) <= 1e-12 * abs(rhs))})
    checks["sum_identity"] = {"ok": all(r["ok"] for r in ident), "rows": ident}
    prod = []
    for k in range(1, k_max + 1):
        if table_len is not None and k >= table_len:
            break
        bad = wsq.product_bound_violations(ws, k)
        prod.append({"k": k, "violations": [list(g) for g in bad[:5]], "count": len(bad)})
    checks["product_bound"] = {"ok": all(r["count"] == 0 for r in prod), "rows": prod}
    if ws.descriptor.get("kind") == "gevrey" and ws.descriptor["s"] > 1:
        s = ws.descriptor["s"]
        rows = []
        for t in (1.0, 10.0, 100.0, 1e3):
            lo, mid, hi = wsq.gevrey_bounds_check(s, t)
            rows.append({"t": t, "lower": lo, "value": mid, "upper": hi,
                         "ok": bool(lo - 1e-9 <= mid <= hi + 1e-9)})
        checks["gevrey_bounds"] = {"ok": all(r["ok"] for r in rows), "rows": rows}
    return checks


def cmd_lemma_check(cfg: RunConfig) -> int:
    ws = load_weights(cfg.weights)
    checks = lemma_suite(ws, k_max=cfg.extra.get("k_max", 12))
    ok = all(c["ok"] for c in checks.values())
    _write(cfg.out, "lemma.json", {"weights": ws.to_json(), "ok": ok, "checks": checks})
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_classify(cfg: RunConfig) -> int:
    ws = load_weights(cfg.weights)
    kind = cfg.extra.get("kind")
    A, B = cfg.extra.get("A", 0j), cfg.extra.get("B", 0j)
    if kind == "wave":
        eta_text = cfg.extra.get("eta")
        if eta_text is None:
            raise InputError("classify wave needs --eta")
        try:
            eta = float(eta_text)
        except ValueError:
            eta = cf_surrogate(eta_text)
        verdict = cc.classify_wave(A, B, eta, ws, cfg.xi_max, n=cfg.extra.get("n", 1), eps_list=cfg.eps)
    elif kind == "vector-field":
        C = cfg.extra.get("C")
        if not C:
            raise InputError("classify vector-field needs --C")
        verdict = cc.classify_vector_field(C, A, B, ws, cfg.xi_max, eps_list=cfg.eps)
    else:
        raise InputError("classify needs --kind wave or --kind vector-field")
    body = {"kind": kind, **verdict.to_json()}
    _write(cfg.out, "report.json", body)
    if verdict.dc_report is not None:
        _write(cfg.out, "margins.csv", verdict.dc_report.margins_csv())
    return EXIT_PASS if verdict.solvable else EXIT_FAIL


def cmd_dc_equiv(cfg: RunConfig) -> int:
    ws = load_weights(cfg.weights)
    if cfg.spec is not None:
        op = load_operator(cfg.spec)
        if not isinstance(op, vc.VarOperatorSpec):
            raise InputError("dc-equiv needs a variable-coefficient spec")
        red = vc.reduce(op)
        p0, q0, delta, alpha = red.p0, red.q0, red.delta, red.alpha
    else:
        try:
            p0, q0 = cfg.extra["p0"], cfg.extra["q0"]
            delta, alpha = cfg.extra["delta"], cfg.extra["alpha"]
        except KeyError as exc:
            raise InputError(f"dc-equiv needs --spec or --{exc.args[0]}") from None
    rep = vc.dc_equivalence_check(p0, q0, delta, alpha, ws, cfg.eps, cfg.xi_max)
    _write(cfg.out, "report.json", {"p0": list(np.atleast_1d(p0)), "q0": q0, "delta": delta, "alpha": alpha,
                                    **rep.to_json()})
    lines = ["curve,eps,shell_radius,min_log_margin"]
    for (name, eps), curve in rep.curves.items():
        lines += [f"{name},{eps!r},{r},{m!r}" for r, m in curve.rows()]
    _write(cfg.out, "margins.csv", "\n".join(lines) + "\n")
    ok = rep.agree and rep.sandwich_ok and rep.verdict_prime == mg.PASS
    return EXIT_PASS if ok else EXIT_FAIL


COMMANDS = {
    "analyze": cmd_analyze,
    "solve": cmd_solve,
    "lemma-check": cmd_lemma_check,
    "classify": cmd_classify,
    "dc-equiv": cmd_dc_equiv,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", type=Path, help="operator spec JSON")
    common.add_argument("--weights", default="gevrey:2", help="weight-sequence JSON path or gevrey:S")
    common.add_argument("--xi-max", type=int, default=32, help="scan radius")
    common.add_argument("--eps", type=_float_list, default=[0.1, 1.0], help="comma-separated eps values")
    common.add_argument("--grid", type=int, help="spatial grid size N")
    common.add_argument("--tgrid", type=int, help="t-grid size Nt")
    common.add_argument("--tol", type=float, help="residual tolerance for solve")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed for generated data")

    parser = argparse.ArgumentParser(prog="torus-vekua", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("analyze", parents=[common], help="solvability scan of an operator")
    p.add_argument("--gamma-floor", type=float, default=1.0)
    p.add_argument("--tau-max", type=int)
    p = sub.add_parser("solve", parents=[common], help="solve Pu = f")
    p.add_argument("--f", type=Path, help="f as spectrum JSON or grid CSV (random if omitted)")
    p.add_argument("--modes", type=int, default=4, help="box radius of generated f")
    p.add_argument("--quadrature", choices=vc.QUADRATURES, default="exptrap")
    p = sub.add_parser("lemma-check", parents=[common], help="weight-sequence invariant suite")
    p.add_argument("--k-max", type=int, default=12)
    p = sub.add_parser("classify", parents=[common], help="wave or vector-field classification")
    p.add_argument("--kind", choices=["wave", "vector-field"], required=True)
    p.add_argument("--A", type=_complex, default=0j)
    p.add_argument("--B", type=_complex, default=0j)
    p.add_argument("--eta", help="float or surrogate name (sqrt2, golden, liouville_like(b,d))")
    p.add_argument("--C", type=_complex_list, help="comma-separated complex coefficients")
    p.add_argument("--n", type=int, default=1)
    p = sub.add_parser("dc-equiv", parents=[common], help="compare the two forms of the Diophantine condition")
    p.add_argument("--p0", type=_float_list)
    p.add_argument("--q0", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--alpha", type=_complex)
    return parser


_EXTRA = ("gamma_floor", "tau_max", "f", "modes", "quadrature", "k_max", "kind", "A", "B", "eta", "C", "n",
          "p0", "q0", "delta", "alpha")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    extra = {k: getattr(args, k) for k in _EXTRA if getattr(args, k, None) is not None and k != "f"}
    return RunConfig(args.command, args.spec, getattr(args, "f", None), args.weights, args.xi_max, args.eps,
                     args.grid, args.tgrid, args.tol, args.out, args.seed, extra)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_INPUT
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except (InputError, DomainError, ConditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ResourceError, VekuaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
