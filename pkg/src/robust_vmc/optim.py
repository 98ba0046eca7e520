"""Deterministic sampled free-energy minimization.

The objective is the sampled free energy (plus an optional multiple of its
standard error) evaluated with a fixed pseudorandom stream, so it is a
deterministic but increasingly discontinuous function of the parameters.
Derivatives are taken at fixed measurement outcomes via replay sweeps; the
search direction is the gradient preconditioned by the Hessian diagonal and
is explored with a coarse geometric line search that assumes no continuity.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .chainsim import IsingSpec, SweepConfig, SweepResult, freeze_outcomes, replay_sweep, run_sweep
from .decomp import ConditionalModel, embed_model, param_count
from .errors import LineSearchError, ReplayDegeneracyError, ValidationError

LINE_SEARCH_POINTS = 33
LINE_SEARCH_LO = 1e-4
LINE_SEARCH_HI = 4.0
DEFAULT_H = 1e-3
STALL_WINDOW = 5
STALL_TOL = 1e-7


@dataclass(frozen=True)
class ObjectiveSpec:
    """Model template plus sweep settings defining one sampled objective."""

    kind: str
    n: int
    ising: IsingSpec
    config: SweepConfig
    kappa: float = 0.0

    def __post_init__(self):
        if self.kappa < 0:
            raise ValidationError("risk multiplier kappa must be >= 0")
        if self.n != self.config.n:
            raise ValidationError(f"template depth {self.n} != config depth {self.config.n}")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    objective: float
    free_energy: float
    stderr: float
    step: float
    direction_norm: float


@dataclass
class OptResult:
    params: np.ndarray
    free_energy: float
    stderr: float
    iterations: int
    objective_evaluations: int
    trace: List[TraceRow] = field(default_factory=list)


def evaluate_objective(params: np.ndarray, spec: ObjectiveSpec) -> Tuple[float, float, float]:
    """(value, free_energy, stderr) with value = F + kappa * stderr."""
    _, value, result = _evaluate(params, spec)
    return value, result.free_energy, result.stderr_free_energy


def _evaluate(params: np.ndarray, spec: ObjectiveSpec) -> Tuple[ConditionalModel, float, SweepResult]:
    model = ConditionalModel(spec.kind, spec.n, params)
    result = run_sweep(model, spec.ising, spec.config)
    value = result.free_energy + spec.kappa * result.stderr_free_energy
    return model, value, result


def central_differences(
    fn: Callable[[np.ndarray], float], params: np.ndarray, h_base: float
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Per-coordinate central-difference gradient and Hessian diagonal with
    step h_i = h_base * max(1, |params_i|).  Returns (g, H_diag, evals)."""
    params = np.asarray(params, dtype=np.float64)
    f0 = fn(params)
    dim = params.size
    grad = np.zeros(dim)
    hess = np.zeros(dim)
    for i in range(dim):
        h = h_base * max(1.0, abs(params[i]))
        up = params.copy()
        up[i] += h
        down = params.copy()
        down[i] -= h
        try:
            f_up = fn(up)
            f_down = fn(down)
        except ReplayDegeneracyError as exc:
            raise ReplayDegeneracyError(exc.site, coordinate=i) from exc
        grad[i] = (f_up - f_down) / (2.0 * h)
        hess[i] = (f_up - 2.0 * f0 + f_down) / (h * h)
    return grad, hess, 2 * dim + 1


def fixed_outcome_gradient(
    params: np.ndarray,
    spec: ObjectiveSpec,
    record: np.ndarray,
    h: float = DEFAULT_H,
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian diagonal of the replayed free energy at fixed
    measurement outcomes (2 dim + 1 replay evaluations)."""

    def replay_free_energy(p: np.ndarray) -> float:
        model = ConditionalModel(spec.kind, spec.n, p)
        return replay_sweep(model, spec.ising, spec.config, record).free_energy

    grad, hess, _ = central_differences(replay_free_energy, params, h)
    return grad, hess


def line_search_steps() -> np.ndarray:
    ratio = LINE_SEARCH_HI / LINE_SEARCH_LO
    return LINE_SEARCH_LO * ratio ** (np.arange(LINE_SEARCH_POINTS) / (LINE_SEARCH_POINTS - 1))


def line_minimize(
    objective: Callable[[np.ndarray], float],
    params: np.ndarray,
    direction: np.ndarray,
    f0: Optional[float] = None,
) -> Tuple[float, float]:
    """Coarse geometric line search over 33 candidates in [1e-4, 4] times the
    preconditioned natural step, plus step 0.  Returns the best improving
    (step, value), or (0, f0) when nothing improves."""
    direction = np.asarray(direction, dtype=np.float64)
    if not np.all(np.isfinite(direction)) or not np.any(direction):
        raise ValidationError("line search direction must be finite and nonzero")
    if f0 is None:
        f0 = objective(np.asarray(params, dtype=np.float64))
    best_step = 0.0
    best_val = f0
    failures = 0
    steps = line_search_steps()
    for s in steps:
        try:
            val = objective(params + s * direction)
        except Exception:
            failures += 1
            continue
        if val < best_val:
            best_val = val
            best_step = float(s)
    if failures == steps.size:
        raise LineSearchError("every line-search candidate failed to evaluate")
    return best_step, best_val


def minimize(
    spec: ObjectiveSpec,
    init: np.ndarray,
    max_iters: int = 200,
    h: float = DEFAULT_H,
) -> OptResult:
    """Iterate sample -> freeze outcomes -> fixed-outcome derivatives ->
    preconditioned direction -> line search; the accepted-objective trace is
    non-increasing.  Stops at max_iters or when the best objective improves
    by less than 1e-7 over 5 iterations."""
    params = np.array(init, dtype=np.float64).reshape(-1)
    if params.size != param_count(spec.kind, spec.n):
        raise ValidationError(
            f"init has {params.size} parameters, template needs {param_count(spec.kind, spec.n)}"
        )
    evals = 0
    _, f0, result = _evaluate(params, spec)
    evals += 1
    trace = [TraceRow(0, f0, result.free_energy, result.stderr_free_energy, 0.0, 0.0)]
    best_history = [f0]

    def objective(p: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        return _evaluate(p, spec)[1]

    iteration = 0
    for iteration in range(1, max_iters + 1):
        record = freeze_outcomes(result)
        grad = hess = None
        h_try = h
        for _ in range(4):  # initial attempt + up to 3 halvings
            try:
                grad, hess = fixed_outcome_gradient(params, spec, record, h=h_try)
                evals += 2 * params.size + 1
                break
            except ReplayDegeneracyError:
                h_try *= 0.5
        if grad is None:
            break
        floor = 1e-2 * float(np.max(np.abs(hess))) + 1e-8
        direction = -grad / np.maximum(np.abs(hess), floor)
        dnorm = float(np.linalg.norm(direction))
        if not np.any(direction):
            trace.append(TraceRow(iteration, f0, result.free_energy, result.stderr_free_energy, 0.0, 0.0))
            best_history.append(f0)
        else:
            step, value = line_minimize(objective, params, direction, f0=f0)
            if step > 0.0 and value < f0:
                params = params + step * direction
                _, f0, result = _evaluate(params, spec)
                evals += 1
            trace.append(
                TraceRow(iteration, f0, result.free_energy, result.stderr_free_energy, step, dnorm)
            )
            best_history.append(f0)
        if len(best_history) > STALL_WINDOW:
            if best_history[-STALL_WINDOW - 1] - best_history[-1] < STALL_TOL:
                break
    return OptResult(
        params=params,
        free_energy=result.free_energy,
        stderr=result.stderr_free_energy,
        iterations=iteration,
        objective_evaluations=evals,
        trace=trace,
    )


def default_init(kind: str, n: int) -> np.ndarray:
    """A generic non-degenerate start with mild symmetry breaking."""
    if kind == "classical":
        return np.zeros(param_count(kind, n))
    if kind == "pure":
        ctx = 1 << n
        raw = np.zeros((2, ctx, 2))
        raw[0, :, 0] = 1.0
        raw[1, :, 0] = -0.1
        return raw.reshape(-1)
    d = 1 << (n + 1)
    G = np.zeros((d, d), dtype=np.complex128)
    for i in range(d):
        G[i, i] = 1.0 if i < d // 2 else 0.5
    for i in range(d - 1):
        G[i, i + 1] = -0.2
    from .decomp import _pack_factor

    return _pack_factor(G, d)


def continuation_schedule(
    spec: ObjectiveSpec,
    n_max: int,
    init0: Optional[np.ndarray] = None,
    max_iters: Sequence[int] | int = 200,
    h: float = DEFAULT_H,
) -> List[OptResult]:
    """Optimize depth 0 first, then embed each optimum as the start of the
    next depth up to n_max.  Returns one OptResult per stage."""
    if n_max < 0:
        raise ValidationError("n_max must be >= 0")
    if isinstance(max_iters, int):
        max_iters = [max_iters] * (n_max + 1)
    if len(max_iters) < n_max + 1:
        raise ValidationError("need one max_iters entry per continuation stage")
    results: List[OptResult] = []
    params = np.asarray(init0 if init0 is not None else default_init(spec.kind, 0), dtype=np.float64)
    for stage in range(n_max + 1):
        stage_cfg = replace(spec.config, n=stage)
        stage_spec = ObjectiveSpec(spec.kind, stage, spec.ising, stage_cfg, spec.kappa)
        res = minimize(stage_spec, params, max_iters=max_iters[stage], h=h)
        results.append(res)
        if stage < n_max:
            model = ConditionalModel(spec.kind, stage, res.params)
            params = embed_model(model).params
    return results


def write_trace_csv(result: OptResult, path) -> None:
    """Optimization trace: iteration, objective, free_energy, stderr, step,
    direction_norm."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("iteration,objective,free_energy,stderr,step,direction_norm\n")
        for row in result.trace:
            fh.write(
                f"{row.iteration},{format(row.objective, '.17g')},"
                f"{format(row.free_energy, '.17g')},{format(row.stderr, '.17g')},"
                f"{format(row.step, '.17g')},{format(row.direction_norm, '.17g')}\n"
            )
