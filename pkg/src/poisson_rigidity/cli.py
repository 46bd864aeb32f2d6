"""Command-line entry point: ``poisson-rigidity <command> [--config FILE] [--out DIR] [--seed N]``.

Exit codes: 0 pass, 1 numerical failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import ce_complex as ce
from . import engine
from . import momentum as mm
from .backends import make_backend
from .config import RunConfig, load_config
from .errors import ConfigError, NotSemisimpleError, PreconditionError
from .poisson import PoissonStructure, anchor_pointwise, default_steps

log = logging.getLogger("poisson_rigidity")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _num(x):
    """JSON-safe float (non-finite values become strings)."""
    if x is None:
        return None
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else repr(x)
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_num(payload), indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _fmt(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def write_norms_csv(path: Path, report: engine.IterationReport) -> None:
    lines = ["step,k,norm,ratio"]
    for rec in report.steps:
        for k in sorted(rec.norms):
            lines.append(f"{rec.n},{engine._key(k)},{_fmt(rec.norms[k])},{_fmt(rec.contraction_ratio)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def report_payload(cfg: RunConfig, report: engine.IterationReport, command: str) -> dict:
    s = cfg.scenario
    steps = []
    for rec in report.steps:
        steps.append({
            "n": rec.n,
            "norms": {engine._key(k): v for k, v in sorted(rec.norms.items())},
            "contraction_ratio": rec.contraction_ratio,
            "homotopy_residual": rec.homotopy_residual,
            "flow_tolerance": rec.flow_tolerance,
            "d_commutation_defect": rec.d_commutation_defect,
            "smoothing_t": rec.smoothing_t,
        })
    return {
        "command": command,
        "scenario": s.name,
        "backend": s.backend,
        "N": s.N,
        "epsilon": s.epsilon,
        "seed": s.seed,
        "status": report.status,
        "steps": steps,
        "final": report.final,
        "fits": report.fits,
        "preconditions": report.preconditions,
        "wall_clock_s": report.wall_clock_s,
    }


# -- scenarios ----------------------------------------------------------------------


def sphere_scenario(cfg: RunConfig, epsilon: float | None = None):
    """Backend, structure, model map, its perturbation and the generator ``K``."""
    s = cfg.scenario
    b = make_backend("sphere2", s.N, s.padding)
    pi = mm.sphere_poisson(b)
    K = mm.random_scalar(b, np.random.default_rng(s.seed), 1, s.perturbation_degree)
    return b, pi, K, s.epsilon if epsilon is None else epsilon


def _abelian_torus(cfg: RunConfig):
    s = cfg.scenario
    b = make_backend("torus2", s.N, s.padding)
    return b, PoissonStructure.constant(b, 1.0), mm.torus_translation_momentum(b)


# -- commands ------------------------------------------------------------------------


def cmd_validate_btorus(cfg: RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    c = cfg.btorus
    b = make_backend("torus2", cfg.scenario.N, cfg.scenario.padding)
    th1 = b.theta1
    density = np.sin(th1) if c.density == "sin" else np.cos(th1)
    keep = np.abs(np.sin(th1)) >= c.eta
    covector = np.zeros((int(keep.sum()), 2))
    covector[:, 0] = 1.0 / np.sin(th1[keep])
    image = anchor_pointwise(b, density[keep], covector)
    target = np.zeros_like(image)
    target[:, 1] = 1.0
    defect = float(np.max(np.abs(image - target))) if keep.any() else 0.0
    dtheta1 = np.zeros(b.n1)
    dtheta1[0] = 1.0
    closed = float(np.max(np.abs(b.d1(dtheta1))))
    ok = defect <= c.tol and closed <= c.tol
    payload = {
        "command": "validate-btorus",
        "backend": "torus2",
        "N": cfg.scenario.N,
        "density": c.density,
        "eta": c.eta,
        "points_checked": int(keep.sum()),
        "max_defect": defect,
        "closedness_defect": closed,
        "tolerance": c.tol,
        "status": "PASS" if ok else "FAIL",
        "wall_clock_s": time.perf_counter() - t0,
    }
    write_json(out / "report.json", payload)
    print(f"validate-btorus: {payload['status']} max_defect={defect:.3e} points={payload['points_checked']}")
    return EXIT_OK if ok else EXIT_FAIL


def complex_checks(ctx: ce.ComplexContext, cfg: RunConfig, semisimple: bool, rng) -> dict:
    c = cfg.complex
    checks = {}

    def add(name, value, tol):
        checks[name] = {"value": float(value), "threshold": tol, "status": "PASS" if value <= tol else "FAIL"}

    res = ce.complex_residuals(ctx)
    add("d1_d0", res["d1d0"], c.differential_tol)
    add("d2_d1", res["d2d1"], c.differential_tol)
    sc = ctx.structure_constants
    rep_err = 0.0
    for i in range(ctx.dim):
        for j in range(ctx.dim):
            comm = ctx.rep[i] @ ctx.rep[j] - ctx.rep[j] @ ctx.rep[i] - np.einsum("k,kab->ab", sc[i, j], ctx.rep)
            rep_err = max(rep_err, float(np.linalg.norm(comm, 2)))
    scale = max(float(np.linalg.norm(ctx.rep[i], 2)) for i in range(ctx.dim)) ** 2 or 1.0
    add("representation", rep_err / scale, c.differential_tol)
    if semisimple:
        samples = rng.standard_normal((c.samples, ctx.dim, ctx.n))
        worst = max(ce.homotopy_residual(ctx, g) for g in samples)
        add("homotopy_identity", worst, c.homotopy_tol)
        cas = ce.casimir_homotopy_check(ctx, samples=min(c.samples, 50), seed=int(rng.integers(2**31)))
        add("casimir_agreement", cas["agreement_with_pinv"], c.casimir_tol)
        add("casimir_identity", cas["casimir_identity_residual"], c.homotopy_tol)
        checks["invariant_cocycles"] = {"value": cas["invariant_cocycle_dim"], "threshold": 0,
                                        "status": "PASS" if cas["invariant_cocycle_dim"] == 0 else "FAIL"}
    else:
        for name in ("homotopy_identity", "casimir_agreement"):
            checks[name] = {"value": None, "threshold": None, "status": "SKIPPED", "reason": "not semisimple"}
    return checks


def cmd_complex_selftest(cfg: RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    s = cfg.scenario
    rng = np.random.default_rng(s.seed)
    if s.name == "torus-abelian":
        b, pi, model = _abelian_torus(cfg)
        ctx = ce.build_context(pi, model)
        checks = complex_checks(ctx, cfg, False, rng)
        diagnostics = {}
    elif s.name in ("sphere-so3", "sphere-so3-classical"):
        b = make_backend("sphere2", s.N, s.padding)
        pi = mm.sphere_poisson(b)
        ctx = ce.build_context(pi, mm.so3_sphere_momentum(b))
        checks = complex_checks(ctx, cfg, True, rng)
        sctx = ce.build_scalar_context(pi, mm.so3_sphere_hamiltonians(b))
        for name, entry in complex_checks(sctx, cfg, False, rng).items():
            if entry["status"] != "SKIPPED":
                checks["scalar_" + name] = entry
        consts = ce.homotopy_norm_constants(ctx)
        diagnostics = {"homotopy_constants_s2": consts["C"][2], "fitted_s": consts["fitted_s"],
                       "h0_rank": ctx.pinv_info("h0").rank,
                       "h0_smallest_singular_value": ctx.pinv_info("h0").smallest_retained}
    else:
        raise ConfigError(f"complex-selftest does not support scenario {s.name!r}")
    ok = all(ch["status"] in ("PASS", "SKIPPED") for ch in checks.values())
    payload = {"command": "complex-selftest", "scenario": s.name, "backend": s.backend, "N": s.N,
               "seed": s.seed, "status": "PASS" if ok else "FAIL", "checks": checks,
               "diagnostics": diagnostics, "wall_clock_s": time.perf_counter() - t0}
    write_json(out / "report.json", payload)
    for name, ch in checks.items():
        print(f"{name}: {ch['status']} {'' if ch['value'] is None else format(ch['value'], '.3e')}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_rigidity(cfg: RunConfig, out: Path) -> int:
    s = cfg.scenario
    if s.name not in ("sphere-so3", "sphere-so3-classical"):
        raise ConfigError(f"rigidity needs scenario sphere-so3 or sphere-so3-classical, got {s.name!r}")
    b, pi, K, eps = sphere_scenario(cfg)
    classical = s.name == "sphere-so3-classical"
    try:
        if classical:
            S = mm.so3_sphere_hamiltonians(b)
            T = mm.perturb_scalar(pi, S, K, eps, default_steps(1.0, cfg.engine.steps_per_unit))
            _, report, status = engine.run_classical(pi, S, T, cfg.engine)
        else:
            M = mm.so3_sphere_momentum(b)
            T = mm.perturb(pi, M, K, eps, default_steps(1.0, cfg.engine.steps_per_unit))
            _, report, status = engine.run_rigidity(pi, M, T, cfg.engine)
    except PreconditionError as exc:
        report = engine.IterationReport([], "Rejected", preconditions=exc.measured)
        status = "Rejected"
    payload = report_payload(cfg, report, "rigidity")
    write_json(out / "report.json", payload)
    write_norms_csv(out / "norms.csv", report)
    final = report.final
    ok = (status == engine.CONVERGED and final.get("residual", np.inf) <= cfg.engine.tol
          and final.get("morphism_defect", np.inf) <= cfg.engine.morphism_tol)
    print(f"rigidity: {status} steps={report.n_steps} residual={final.get('residual', float('nan')):.3e} "
          f"slope={report.fits.get('slope')}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_estimate_quadratic(cfg: RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    b, pi, K, eps = sphere_scenario(cfg)
    M = mm.so3_sphere_momentum(b)
    ctx = ce.build_context(pi, M)
    T = mm.perturb(pi, M, K, eps)
    H = mm.perturb(pi, M, K, eps / 2)
    rep = engine.estimate_quadratic_defect(pi, ctx, M, T, cfg.quadratic.ks, alpha_half=H)
    q = cfg.quadratic
    ok = eps > 0 and all(v["d_beta_ratio"] is not None and q.ratio_low <= v["d_beta_ratio"] <= q.ratio_high
                         for v in rep["scaling"].values())
    payload = {"command": "estimate-quadratic", "scenario": cfg.scenario.name, "backend": "sphere2",
               "N": cfg.scenario.N, "epsilon": eps, "seed": cfg.scenario.seed,
               "status": "PASS" if ok else "FAIL", "report": rep, "wall_clock_s": time.perf_counter() - t0}
    write_json(out / "report.json", payload)
    for k, v in rep.get("scaling", {}).items():
        print(f"k={k}: d_beta ratio {v['d_beta_ratio']}")
    return EXIT_OK if ok else EXIT_FAIL


def toy_problem(x0) -> engine.SCIProblem:
    """``zeta(f) = f``, ``H = id`` and ``Phi(g) f = f - g``: one step to the origin."""
    x0 = np.asarray(x0, dtype=float)
    return engine.SCIProblem(
        initial=x0,
        zeta=lambda f: f,
        solve=lambda z: z,
        act=lambda g, f: (f - g, {}),
        norm=lambda x, k: float(np.linalg.norm(x)),
    )


def cmd_sci_demo(cfg: RunConfig, out: Path) -> int:
    _, toy = engine.sci_drive(toy_problem(np.arange(1.0, 5.0)), cfg.engine)
    b, pi, K, eps = sphere_scenario(cfg)
    M = mm.so3_sphere_momentum(b)
    T = mm.perturb(pi, M, K, eps)
    ctx = ce.build_context(pi, T)
    problem = engine.momentum_problem(pi, ctx, M.forms, T.forms, cfg.engine)
    _, report = engine.sci_drive(problem, cfg.engine)
    payload = report_payload(cfg, report, "sci-demo")
    payload["toy"] = {"status": toy.status, "steps": toy.n_steps}
    write_json(out / "report.json", payload)
    write_norms_csv(out / "norms.csv", report)
    ok = toy.status == engine.CONVERGED and report.status == engine.CONVERGED
    print(f"sci-demo: toy {toy.status} in {toy.n_steps}; sphere {report.status}, delta={report.fits.get('delta')}")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "validate-btorus": cmd_validate_btorus,
    "complex-selftest": cmd_complex_selftest,
    "rigidity": cmd_rigidity,
    "estimate-quadratic": cmd_estimate_quadratic,
    "sci-demo": cmd_sci_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poisson-rigidity", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="INI file; defaults apply when omitted")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=int, help="override scenario.seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be nonnegative")
            cfg.scenario.seed = args.seed
            cfg.engine.seed = args.seed
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotSemisimpleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
