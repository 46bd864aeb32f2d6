"""Newton iteration conjugating two close momentum maps.

The generic loop lives in :func:`sci_drive`; :func:`run_rigidity` (1-forms)
and :func:`run_classical` (scalar Hamiltonians) wrap the momentum-map problem
as an :class:`SCIProblem` and run it through that same loop.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import ce_complex as ce
from .errors import FlowDivergenceError, HomotopyConditioningError, PreconditionError
from .fields import OneForm, hk_norm, smooth_coef
from .liealg import LieBialgebra
from .momentum import MomentumMap1, ScalarMomentumMap, chain_defect, equivariance_defect, hom_defect
from .poisson import (
    PoissonStructure,
    FlowOperator,
    d_matrix,
    default_steps,
    flow_tolerance,
    koszul_coef,
    koszul_matrix,
    poisson_bracket,
    rk4_propagator,
    scalar_derivation_matrix,
)

CONVERGED = "Converged"
STALLED = "Stalled"
DIVERGED = "Diverged"


@dataclass
class EngineConfig:
    tol: float = 1e-8
    stop_k: float = 1
    max_steps: int = 12
    norm_ks: tuple = (0, 1, 2, 3)
    homotopy_model: str = "target"
    smoothing_t0: float | None = None
    steps_per_unit: int = 64
    validate_tol: float = 1e-6
    max_near_norm: float = 0.1
    max_far_norm: float = 1.0
    sobolev_l: int = 2
    enforce_preconditions: bool = False
    divergence_factor: float = 1e3
    stall_patience: int = 3
    floor_factor: float = 100.0
    slope_steps: int = 3
    loss_s: float = 2
    morphism_pairs: int = 20
    morphism_tol: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.homotopy_model not in ("target", "source"):
            raise ValueError("homotopy_model must be 'target' or 'source'")
        if not (self.tol > 0 and self.max_steps >= 0):
            raise ValueError("tol must be positive and max_steps nonnegative")
        self.norm_ks = tuple(self.norm_ks)
        for k in (self.stop_k, self.stop_k + 2):
            if k not in self.norm_ks:
                self.norm_ks = tuple(sorted(set(self.norm_ks) | {k}))


# -- state and reports -------------------------------------------------------------


@dataclass
class MorphismState:
    """Accumulated conjugation: ``operator`` acts on truncated coefficients."""

    operator: np.ndarray
    history: list = field(default_factory=list)
    companion: np.ndarray | None = None  # scalar flow in 1-form mode, 1-form flow in scalar mode

    @classmethod
    def identity(cls, n: int, n_companion: int | None = None) -> "MorphismState":
        comp = None if n_companion is None else np.eye(n_companion)
        return cls(np.eye(n), [], comp)

    def compose(self, F: np.ndarray, generator: np.ndarray, companion: np.ndarray | None = None) -> "MorphismState":
        comp = self.companion
        if companion is not None and comp is not None:
            comp = companion @ comp
        return MorphismState(F @ self.operator, self.history + [np.array(generator)], comp)

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.operator))


@dataclass
class StepRecord:
    n: int
    norms: dict
    contraction_ratio: float | None = None
    homotopy_residual: float | None = None
    flow_tolerance: float | None = None
    d_commutation_defect: float | None = None
    smoothing_t: float | None = None
    wall_clock_s: float = 0.0


@dataclass
class IterationReport:
    steps: list
    status: str
    fits: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)
    preconditions: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0

    @property
    def n_steps(self) -> int:
        return max(0, len(self.steps) - 1)

    def norm_series(self, k: float) -> np.ndarray:
        return np.array([s.norms[k] for s in self.steps])

    def to_dict(self) -> dict:
        d = asdict(self)
        for s in d["steps"]:
            s["norms"] = {_key(k): v for k, v in s["norms"].items()}
        return d


def _key(k) -> str:
    k = float(k)
    return str(int(k)) if k.is_integer() else repr(k)


# -- generic driver --------------------------------------------------------------


@dataclass
class SCIProblem:
    """Ingredients of a normal-form iteration ``f -> Phi(H(zeta(f))) . f``.

    ``act(g, f)`` returns the new state and a dict of per-step diagnostics;
    ``diagnose(z)`` optionally adds diagnostics computed from the deviation.
    """

    initial: np.ndarray
    zeta: Callable
    solve: Callable
    act: Callable
    norm: Callable
    smooth: Callable | None = None
    diagnose: Callable | None = None


def smoothing_schedule(t0: float, n: int) -> float:
    """``t_n = t0 ** ((3/2) ** n)``."""
    return float(t0 ** (1.5**n))


def sci_drive(problem: SCIProblem, config: EngineConfig, on_step: Callable | None = None):
    """Run the generic loop; returns ``(final_state, report)``.

    ``on_step(n, g, info)`` is called after every accepted step.
    """
    start = time.perf_counter()
    ks = config.norm_ks
    kstop = config.stop_k
    f = np.array(problem.initial, dtype=float)
    records: list[StepRecord] = []
    extra: list[dict] = []
    status = STALLED
    best = math.inf
    since_best = 0
    n0 = None
    for n in range(config.max_steps + 1):
        t_step = time.perf_counter()
        z = problem.zeta(f)
        norms = {k: problem.norm(z, k) for k in ks}
        rec = StepRecord(n, norms)
        records.append(rec)
        if not all(math.isfinite(v) for v in norms.values()):
            status = DIVERGED
            break
        cur = norms[kstop]
        n0 = cur if n0 is None else n0
        if len(records) > 1:
            prev = records[-2].norms
            denom = prev[kstop + 2] ** 2
            records[-2].contraction_ratio = cur / denom if denom > 0 else None
        if cur <= config.tol:
            status = CONVERGED
            break
        if n > 0 and cur > config.divergence_factor * max(n0, config.tol):
            status = DIVERGED
            break
        if cur < best * (1.0 - 1e-3):
            best, since_best = cur, 0
        else:
            since_best += 1
            if since_best >= config.stall_patience:
                status = STALLED
                break
        if n == config.max_steps:
            status = STALLED
            break
        try:
            if problem.diagnose is not None:
                for key, val in problem.diagnose(z).items():
                    setattr(rec, key, val)
            g = problem.solve(z)
            if config.smoothing_t0 is not None and problem.smooth is not None:
                rec.smoothing_t = smoothing_schedule(config.smoothing_t0, n)
                g = problem.smooth(g, rec.smoothing_t)
            f_new, info = problem.act(g, f)
        except (FlowDivergenceError, FloatingPointError, HomotopyConditioningError, np.linalg.LinAlgError):
            status = DIVERGED
            break
        if not np.all(np.isfinite(f_new)):
            status = DIVERGED
            break
        for key, val in info.items():
            if not key.startswith("_"):
                setattr(rec, key, val)
        extra.append({"g": {k: problem.norm(g, k) for k in ks}, "df": {k: problem.norm(f_new - f, k) for k in ks},
                      "f": {k: problem.norm(f, k) for k in ks}})
        rec.wall_clock_s = time.perf_counter() - t_step
        if on_step is not None:
            on_step(n, g, info)
        f = f_new
    report = IterationReport(records, status)
    report.fits = fit_diagnostics(records, extra, config)
    report.wall_clock_s = time.perf_counter() - start
    return f, report


def _regress(x, y):
    if len(x) < 2:
        return None, None
    A = np.vstack([x, np.ones(len(x))]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(slope), float(icpt)


def fit_diagnostics(records, extra, config: EngineConfig) -> dict:
    """Measured analogues of the normal-form estimates.

    Pairs ``(n, n+1)`` whose later norm sits within ``floor_factor`` of the
    final (floor) level are excluded from every fit.
    """
    k = config.stop_k
    s = config.loss_s
    norms = [r.norms[k] for r in records]
    floor = max(norms[-1], 1e-300) if norms else 0.0
    usable = [n for n in range(len(norms) - 1)
              if norms[n + 1] > config.floor_factor * floor and norms[n] > 0 and norms[n + 1] > 0]
    ratios = [records[n].contraction_ratio for n in usable if records[n].contraction_ratio is not None]
    early = [n for n in usable if n < config.slope_steps]
    slope, _ = _regress(np.log([norms[n] for n in early]), np.log([norms[n + 1] for n in early]))
    zslope, zicpt = _regress(np.log([norms[n] for n in usable]), np.log([norms[n + 1] for n in usable]))

    def const(vals):
        vals = [v for v in vals if v is not None and math.isfinite(v)]
        return float(max(vals)) if vals else None

    ks = [kk for kk in config.norm_ks if kk + s in config.norm_ks]
    proj = const([records[n].norms[k] / e["f"][k] for n, e in enumerate(extra) if e["f"][k] > 0])
    est_h = {_key(kk): const([e["g"][kk] / records[n].norms[kk + s] for n, e in enumerate(extra)
                              if records[n].norms[kk + s] > 0]) for kk in ks}
    est_exp = {_key(kk): const([e["df"][kk] / e["g"][kk + s] for e in extra if e["g"][kk + s] > 0]) for kk in ks}
    est_bis = const([norms[n + 1] / extra[n]["g"][k + s] ** 2 for n in usable
                     if n < len(extra) and extra[n]["g"][k + s] > 0])
    return {
        "floor": float(floor),
        "pairs_used": usable,
        "contraction_C": const(ratios),
        "slope": slope,
        "delta": None if zslope is None else zslope - 1.0,
        "zeta_log_Q": zicpt,
        "proj_constant": proj,
        "estimate_H": est_h,
        "estimate_Exp": est_exp,
        "estimate_Exp_bis": est_bis,
        "loss_s": s,
    }


# -- momentum-map problems ----------------------------------------------------------


def _cochain_norm(lam, n):
    def norm(x, k):
        x = np.asarray(x, dtype=float).reshape(-1, n)
        return float(np.sqrt(np.sum(hk_norm(x, lam, k) ** 2)))

    return norm


def _propagate(A: np.ndarray, steps: int):
    P = rk4_propagator(A, 1.0, steps)
    return P, flow_tolerance(A, 1.0, steps, P)


def momentum_problem(pi: PoissonStructure, ctx: ce.ComplexContext, start: np.ndarray,
                      target: np.ndarray, config: EngineConfig, scalar_mode: bool = False) -> SCIProblem:
    """Wrap ``start -> target`` as an :class:`SCIProblem` on coefficient arrays."""
    b = pi.backend
    lam, deg, n = (b.lam0, b.deg0, b.n0) if scalar_mode else (b.lam1, b.deg1, b.n1)
    D = d_matrix(b)
    steps = default_steps(1.0, config.steps_per_unit)
    norm = _cochain_norm(lam, n)

    def act(g, f):
        if scalar_mode:
            gen = b.d0(g)
            A = scalar_derivation_matrix(pi, gen)
            F, tol = _propagate(A, steps)
            companion = rk4_propagator(koszul_matrix(pi, gen), 1.0, steps)
            defect = np.linalg.norm(D @ F - companion @ D, 2) / np.linalg.norm(D, 2)
        else:
            A = koszul_matrix(pi, g)
            F, tol = _propagate(A, steps)
            companion = rk4_propagator(scalar_derivation_matrix(pi, g), 1.0, steps)
            defect = np.linalg.norm(D @ companion - F @ D, 2) / np.linalg.norm(D, 2)
        info = {"flow_tolerance": float(tol), "d_commutation_defect": float(defect),
                "_F": F, "_companion": companion}
        return f @ F.T, info

    problem = SCIProblem(
        initial=start,
        zeta=lambda f: f - target,
        solve=lambda z: ce.h0(ctx, z),
        act=act,
        norm=norm,
        smooth=lambda g, t: smooth_coef(g, deg, t),
        diagnose=lambda z: {"homotopy_residual": ce.homotopy_residual(ctx, z)},
    )
    return problem


def _drive_momentum(pi, ctx, start, target, config, scalar_mode):
    b = pi.backend
    n, nc = (b.n0, b.n1) if scalar_mode else (b.n1, b.n0)
    problem = momentum_problem(pi, ctx, start, target, config, scalar_mode)
    holder = {"state": MorphismState.identity(n, nc)}

    def on_step(_, g, info):
        holder["state"] = holder["state"].compose(info["_F"], g, info["_companion"])

    final, report = sci_drive(problem, config, on_step)
    return final, holder["state"], report


def _random_forms(b, rng, count, kind, max_degree=3):
    deg = b.deg0 if kind == "scalar" else b.deg1
    mask = (deg >= 1) & (deg <= max_degree)
    out = np.where(mask, rng.standard_normal((count, deg.size)), 0.0)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def koszul_morphism_defect(pi: PoissonStructure, F: np.ndarray, pairs: int = 20, seed: int = 0) -> float:
    """``max |F[a, b] - [Fa, Fb]|`` over random unit band-limited 1-forms."""
    b = pi.backend
    rng = np.random.default_rng(seed)
    A = _random_forms(b, rng, pairs, "oneform")
    B = _random_forms(b, rng, pairs, "oneform")
    lhs = koszul_coef(pi, A, B) @ F.T
    rhs = koszul_coef(pi, A @ F.T, B @ F.T)
    return float(np.max(np.linalg.norm(lhs - rhs, axis=1)))


def poisson_morphism_defect(pi: PoissonStructure, P: np.ndarray, pairs: int = 20, seed: int = 0) -> float:
    """``max |P{f, g} - {Pf, Pg}|`` over random unit band-limited functions."""
    from .fields import ScalarField

    b = pi.backend
    rng = np.random.default_rng(seed)
    A = _random_forms(b, rng, pairs, "scalar")
    B = _random_forms(b, rng, pairs, "scalar")
    worst = 0.0
    for a, c in zip(A, B):
        lhs = P @ poisson_bracket(pi, ScalarField(b, a), ScalarField(b, c)).coef
        rhs = poisson_bracket(pi, ScalarField(b, P @ a), ScalarField(b, P @ c)).coef
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


def _preconditions(pi, source, target, config: EngineConfig, scalar_mode: bool) -> dict:
    b = pi.backend
    if scalar_mode:
        defects = [equivariance_defect(pi, source), equivariance_defect(pi, target)]
        lam, A, T = b.lam0, source.hamiltonians, target.hamiltonians
    else:
        defects = [hom_defect(pi, source), hom_defect(pi, target)]
        if isinstance(source.algebra, LieBialgebra):
            defects += [chain_defect(source), chain_defect(target)]
        lam, A, T = b.lam1, source.forms, target.forms
    l = config.sobolev_l
    near = float(np.sqrt(np.sum(hk_norm(A - T, lam, l) ** 2)))
    far = float(np.sqrt(np.sum(hk_norm(A, lam, 2 * l - 1) ** 2)))
    measured = {
        "validation_defect": float(max(defects)),
        "near_norm": near,
        "far_norm": far,
        "sobolev_l": l,
    }
    measured["valid"] = measured["validation_defect"] <= config.validate_tol
    measured["within_gate"] = bool(measured["valid"] and near <= config.max_near_norm and far <= config.max_far_norm)
    if config.enforce_preconditions and not measured["within_gate"]:
        raise PreconditionError("momentum maps violate the validation/smallness gate", measured)
    return measured


def _check_pair(pi, source, target):
    if source.backend is not pi.backend or target.backend is not pi.backend:
        from .errors import BackendMismatchError

        raise BackendMismatchError("momentum maps must live on the Poisson structure's backend")
    if not np.array_equal(source.algebra.structure_constants, target.algebra.structure_constants):
        raise ValueError("momentum maps must share the Lie algebra")


def newton_step(pi: PoissonStructure, ctx: ce.ComplexContext, current: MomentumMap1, target: MomentumMap1,
                state: MorphismState, smoothing_t: float | None = None, steps: int | None = None):
    """One Newton correction; returns ``(new_current, new_state, record)``."""
    _check_pair(pi, current, target)
    b = pi.backend
    beta = current.forms - target.forms
    g = smooth_coef(ce.h0(ctx, beta), b.deg1, smoothing_t)
    steps = default_steps(1.0) if steps is None else int(steps)
    A = koszul_matrix(pi, g)
    P, tol = _propagate(A, steps)
    F = FlowOperator(OneForm(b, g), 1.0, P, steps)
    record = {
        "beta_norm_h1": float(np.sqrt(np.sum(hk_norm(beta, b.lam1, 1) ** 2))),
        "homotopy_residual": ce.homotopy_residual(ctx, beta),
        "flow_tolerance": tol,
    }
    new = MomentumMap1(current.algebra, b, F.apply_coef(current.forms))
    return new, state.compose(P, g), record


def run_rigidity(pi: PoissonStructure, alpha: MomentumMap1, alpha_t: MomentumMap1,
                 config: EngineConfig | None = None, ctx: ce.ComplexContext | None = None):
    """Conjugate ``alpha`` onto ``alpha_t``; returns ``(state, report, status)``."""
    config = config or EngineConfig()
    _check_pair(pi, alpha, alpha_t)
    pre = _preconditions(pi, alpha, alpha_t, config, scalar_mode=False)
    if ctx is None:
        ctx = ce.build_context(pi, alpha_t if config.homotopy_model == "target" else alpha)
    _, state, report = _drive_momentum(pi, ctx, alpha.forms, alpha_t.forms, config, scalar_mode=False)
    report.preconditions = pre
    b = pi.backend
    residual = np.max(hk_norm(alpha.forms @ state.operator.T - alpha_t.forms, b.lam1, 1))
    D = d_matrix(b)
    report.final = {
        "residual": float(residual),
        "morphism_defect": koszul_morphism_defect(pi, state.operator, config.morphism_pairs, config.seed),
        "chain_defect": float(np.linalg.norm(D @ state.companion - state.operator @ D, 2) / np.linalg.norm(D, 2)),
        "ode_tolerance": float(sum(r.flow_tolerance or 0.0 for r in report.steps)),
        "condition_number": state.condition_number(),
    }
    return state, report, report.status


def run_classical(pi: PoissonStructure, mu: ScalarMomentumMap, lam: ScalarMomentumMap,
                  config: EngineConfig | None = None, ctx: ce.ComplexContext | None = None):
    """Scalar-mode iteration; ``state.operator`` acts on function coefficients
    and ``state.companion`` is the matching 1-form flow."""
    config = config or EngineConfig()
    _check_pair(pi, mu, lam)
    pre = _preconditions(pi, mu, lam, config, scalar_mode=True)
    if ctx is None:
        ctx = ce.build_scalar_context(pi, lam if config.homotopy_model == "target" else mu)
    _, state, report = _drive_momentum(pi, ctx, mu.hamiltonians, lam.hamiltonians, config, scalar_mode=True)
    report.preconditions = pre
    b = pi.backend
    residual = np.max(hk_norm(mu.hamiltonians @ state.operator.T - lam.hamiltonians, b.lam0, 1))
    D = d_matrix(b)
    report.final = {
        "residual": float(residual),
        "morphism_defect": poisson_morphism_defect(pi, state.operator, config.morphism_pairs, config.seed),
        "chain_defect": float(np.linalg.norm(D @ state.operator - state.companion @ D, 2) / np.linalg.norm(D, 2)),
        "ode_tolerance": float(sum(r.flow_tolerance or 0.0 for r in report.steps)),
        "condition_number": state.condition_number(),
    }
    return state, report, report.status


def estimate_quadratic_defect(pi: PoissonStructure, ctx: ce.ComplexContext, alpha: MomentumMap1,
                              alpha_t: MomentumMap1, ks=(0, 1, 2), alpha_half: MomentumMap1 | None = None) -> dict:
    """Compare ``|d beta|_k`` with ``|beta|_{k+1}^2`` for ``beta = alpha - alpha_t``.

    ``ctx`` must be built on ``alpha``.  With ``alpha_half`` (the same
    perturbation at half size) the scaling ratios are reported as well.
    """
    b = pi.backend

    def measure(other):
        beta = alpha.forms - other.forms
        db = ce.d1(ctx, beta)
        out = {}
        for k in ks:
            lhs = float(np.sqrt(np.sum(hk_norm(db, b.lam1, k) ** 2)))
            rhs = float(np.sum(hk_norm(beta, b.lam1, k + 1) ** 2))
            out[_key(k)] = {"d_beta": lhs, "beta_sq": rhs, "c": lhs / rhs if rhs > 0 else None}
        return out

    report = {"eps": measure(alpha_t)}
    if alpha_half is not None:
        report["half"] = measure(alpha_half)
        scaling = {}
        for k in report["eps"]:
            a, h = report["eps"][k], report["half"][k]
            scaling[k] = {
                "d_beta_ratio": a["d_beta"] / h["d_beta"] if h["d_beta"] > 0 else None,
                "ratio_of_ratios": a["c"] / h["c"] if a["c"] and h["c"] else None,
            }
        report["scaling"] = scaling
    return report
