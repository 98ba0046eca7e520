"""Sliding-window sampler for translation-invariant 1D Ising chains.

Each site iteration extends the surviving window by one spin, accumulates a
local energy and an entropy production, then measures out the oldest spin.
The sweep models the infinite lattice: statistics are spatial averages over
one long chain after a burn-in discard, and the whole sweep is a pure
function of (model, spec, config) thanks to counter-based uniforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Tuple, Union

import numpy as np

from . import _engine, prng
from .decomp import ConditionalModel, ReconstructionOp, apply_reconstruction, build_reconstruction
from .errors import ReplayDegeneracyError, SamplerDegeneracyError, ValidationError, ZeroProbabilityError
from .qmath import (
    DensityMatrix,
    PauliString,
    PureStateVector,
    pauli_expectation,
    von_neumann_entropy,
)

FAMILIES = ("classical_field", "transverse_field")
MAX_WINDOW = 10
BATCH_COUNT = 100


@dataclass(frozen=True)
class HamiltonianTerm:
    coefficient: float
    ops: Tuple[str, ...]
    quantum_weight: int


@dataclass(frozen=True)
class IsingSpec:
    """1D Ising family: per-site field alpha and unit ferromagnetic bonds."""

    family: str
    alpha: float
    temperature: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")

    @property
    def terms(self) -> Tuple[HamiltonianTerm, HamiltonianTerm]:
        field_op = "X" if self.family == "transverse_field" else "Z"
        return (
            HamiltonianTerm(self.alpha, (field_op,), 1 if field_op == "X" else 0),
            HamiltonianTerm(-1.0, ("Z", "Z"), 0),
        )


@dataclass(frozen=True)
class SweepConfig:
    n: int
    num_sites: int = 100_000
    burn_in: int = 1_000
    seed: int = 0
    window_extra: int = 0

    def __post_init__(self):
        if self.n < 0 or self.window_extra < 0:
            raise ValidationError("n and window_extra must be >= 0")
        if self.num_sites < 1:
            raise ValidationError("num_sites must be >= 1")
        if not 0 <= self.burn_in < self.num_sites:
            raise ValidationError("burn_in must satisfy 0 <= burn_in < num_sites")
        if self.n + 1 + self.window_extra > MAX_WINDOW:
            raise ValidationError("n + 1 + window_extra must not exceed 10 spins")


@dataclass(frozen=True, eq=False)
class SiteTrace:
    site: np.ndarray
    outcome: np.ndarray
    site_energy: np.ndarray
    site_entropy: np.ndarray


@dataclass(frozen=True, eq=False)
class SweepResult:
    mean_energy: float
    mean_entropy: float
    free_energy: float
    stderr_free_energy: float
    stderr_energy: float
    stderr_entropy: float
    temperature: float
    outcomes: np.ndarray
    per_site: Optional[SiteTrace] = None


def _check_compat(model: ConditionalModel, spec: IsingSpec) -> None:
    if spec.family == "classical_field" and model.kind != "classical":
        raise ValidationError("the classical field family requires a classical-kind model")
    if spec.family == "transverse_field" and model.kind == "classical":
        raise ValidationError("the transverse field family requires a pure- or mixed-kind model")


def _batch_stderr(values: np.ndarray) -> float:
    """Batch-means standard error of the mean over correlated site series."""
    count = values.size
    if count < 2:
        return 0.0
    nb = min(BATCH_COUNT, count)
    bs = count // nb
    means = values[: nb * bs].reshape(nb, bs).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(nb))


def _assemble(
    energy: np.ndarray,
    entropy: np.ndarray,
    outcomes: np.ndarray,
    temperature: float,
    burn_in: int,
    capture_per_site: bool,
) -> SweepResult:
    e_post = energy[burn_in:]
    s_post = entropy[burn_in:]
    f_post = e_post - temperature * s_post
    per_site = None
    if capture_per_site:
        per_site = SiteTrace(
            site=np.arange(outcomes.size),
            outcome=outcomes.copy(),
            site_energy=energy.copy(),
            site_entropy=entropy.copy(),
        )
    return SweepResult(
        mean_energy=float(e_post.mean()),
        mean_entropy=float(s_post.mean()),
        free_energy=float(e_post.mean()) - temperature * float(s_post.mean()),
        stderr_free_energy=_batch_stderr(f_post),
        stderr_energy=_batch_stderr(e_post),
        stderr_entropy=_batch_stderr(s_post),
        temperature=temperature,
        outcomes=outcomes,
        per_site=per_site,
    )


def run_sweep(
    model: ConditionalModel,
    spec: IsingSpec,
    config: SweepConfig,
    capture_per_site: bool = False,
) -> SweepResult:
    """Sample num_sites sites from the cold start (all conditioning spins 0),
    accumulating statistics for sites >= burn_in.  Deterministic in its
    arguments down to the last bit."""
    if model.n != config.n:
        raise ValidationError(f"model depth {model.n} != config depth {config.n}")
    _check_compat(model, spec)
    op = build_reconstruction(model)
    uniforms = prng.uniform_stream(config.seed, config.num_sites)
    outcomes, bad = _engine.generate_outcomes(
        model.kind, op.matrix, model.n, config.window_extra, uniforms
    )
    if bad >= 0:
        raise SamplerDegeneracyError(bad)
    energy, entropy, _ = _engine.estimate(
        model.kind, op.matrix, spec.family, spec.alpha, model.n, config.window_extra, outcomes
    )
    return _assemble(energy, entropy, outcomes, spec.temperature, config.burn_in, capture_per_site)


def freeze_outcomes(result: SweepResult) -> np.ndarray:
    """The measurement record of a sweep, for fixed-outcome replays."""
    return result.outcomes.copy()


def replay_sweep(
    model: ConditionalModel,
    spec: IsingSpec,
    config: SweepConfig,
    record: np.ndarray,
    capture_per_site: bool = False,
) -> SweepResult:
    """Recompute all conditional states and estimators with every measurement
    forced to `record` (no uniform draws).  Replaying the generating model
    reproduces the original SweepResult bit-exactly."""
    if model.n != config.n:
        raise ValidationError(f"model depth {model.n} != config depth {config.n}")
    _check_compat(model, spec)
    record = np.asarray(record, dtype=np.uint8)
    if record.shape != (config.num_sites,):
        raise ValidationError(f"record length {record.size} != num_sites {config.num_sites}")
    op = build_reconstruction(model)
    energy, entropy, p_rec = _engine.estimate(
        model.kind, op.matrix, spec.family, spec.alpha, model.n, config.window_extra, record
    )
    dead = ~(p_rec >= _engine.PROB_FLOOR)
    if np.any(dead):
        raise ReplayDegeneracyError(int(np.argmax(dead)))
    return _assemble(energy, entropy, record.copy(), spec.temperature, config.burn_in, capture_per_site)


# ---------------------------------------------------------------------------
# reference single-site step (used by tests and for exhaustive enumeration)
# ---------------------------------------------------------------------------

def _extend_reference(
    op: ReconstructionOp, window: Union[DensityMatrix, PureStateVector], extra: int
) -> Union[DensityMatrix, PureStateVector]:
    if extra == 0:
        return apply_reconstruction(op, window)
    m = window.num_spins
    d = 1 << m
    if isinstance(window, PureStateVector):
        e = np.arange(2 * d)
        big = op.matrix[e >> m, (e & (d - 1)) >> extra]
        return PureStateVector(m + 1, big * np.concatenate([window.data, window.data]))
    rm = _engine._row_map(op.context_spins, extra)
    R_big = op.as_general()[np.ix_(rm, rm)]
    return DensityMatrix(m + 1, R_big * np.tile(window.data, (2, 2)))


def _site_energy_reference(
    ext: Union[DensityMatrix, PureStateVector],
    spec: IsingSpec,
    prev_outcome: int,
) -> float:
    # Field on the oldest spin of the extension (the one about to leave the
    # window) and bond on the two oldest: no later extension conditions on
    # spin 0, so these conditional expectations match the final chain state.
    if isinstance(ext, PureStateVector):
        ext = DensityMatrix.from_vector(ext)
    m = ext.num_spins - 1
    field_op = "X" if spec.family == "transverse_field" else "Z"
    ops = ["I"] * ext.num_spins
    ops[0] = field_op
    field_val = pauli_expectation(ext, PauliString(tuple(ops)))
    if m >= 1:
        ops = ["I"] * ext.num_spins
        ops[0] = "Z"
        ops[1] = "Z"
        bond = pauli_expectation(ext, PauliString(tuple(ops)))
    else:
        z = pauli_expectation(ext, PauliString(("Z",)))
        bond = (1.0 - 2.0 * prev_outcome) * z
    return spec.alpha * field_val - bond


def step_site(
    window: Union[DensityMatrix, PureStateVector],
    model: ConditionalModel,
    spec: IsingSpec,
    uniforms: Iterator[float],
    prev_outcome: int = 0,
    recent_outcomes: Tuple[int, ...] = (),
) -> Tuple[Union[DensityMatrix, PureStateVector], int, float, float]:
    """One extend -> estimate -> measure-out cycle.

    `window` carries n + window_extra spins (window_extra inferred from the
    spin count); `prev_outcome` is only consulted for the n = 0 bond term and
    `recent_outcomes` (the previous measured bits, oldest first) only for the
    classical-kind entropy, which is the chain-rule Shannon term at the
    measured context.  Returns (new_window, outcome, site_energy,
    site_entropy).
    """
    _check_compat(model, spec)
    extra = window.num_spins - model.n
    if extra < 0:
        raise ValidationError(f"window has {window.num_spins} spins, model needs >= {model.n}")
    op = build_reconstruction(model)
    ext = _extend_reference(op, window, extra)
    if model.kind == "pure":
        site_entropy = 0.0
    elif model.kind == "mixed":
        before = window if isinstance(window, DensityMatrix) else DensityMatrix.from_vector(window)
        site_entropy = von_neumann_entropy(ext) - von_neumann_entropy(before)
    site_energy = _site_energy_reference(ext, spec, prev_outcome)
    u = next(uniforms)
    if isinstance(ext, PureStateVector):
        amp = ext.data
        p0 = float(np.sum(np.abs(amp[0::2]) ** 2))
        outcome = 0 if u < p0 else 1
        pb = p0 if outcome == 0 else float(np.sum(np.abs(amp[1::2]) ** 2))
        if pb < _engine.PROB_FLOOR:
            raise ZeroProbabilityError(f"outcome {outcome} has probability {pb:.3e} < 1e-12")
        new_window = PureStateVector(ext.num_spins - 1, amp[outcome::2] / np.sqrt(pb))
    else:
        diag = ext.data.diagonal().real
        p0 = float(diag[0::2].sum())
        outcome = 0 if u < p0 else 1
        _, new_window = condition_on_outcome_dispatch(ext, outcome)
    if model.kind == "classical":
        from .entropy import classical_step_entropy

        bits = (tuple(recent_outcomes) + (outcome,))[-model.n :] if model.n else ()
        bits = (0,) * (model.n - len(bits)) + bits
        context = sum(b << q for q, b in enumerate(bits))
        site_entropy = classical_step_entropy(op, context)
    return new_window, outcome, site_energy, site_entropy


def condition_on_outcome_dispatch(ext: DensityMatrix, outcome: int) -> Tuple[float, DensityMatrix]:
    from .qmath import condition_on_outcome

    return condition_on_outcome(ext, 0, outcome)


def write_site_trace(result: SweepResult, path) -> None:
    """CSV dump of the per-site trace: site, outcome, site_energy, site_entropy."""
    if result.per_site is None:
        raise ValidationError("sweep was run without capture_per_site=True")
    tr = result.per_site
    with open(path, "w", encoding="ascii") as fh:
        fh.write("site,outcome,site_energy,site_entropy\n")
        for i in range(tr.site.size):
            fh.write(
                f"{tr.site[i]},{tr.outcome[i]},"
                f"{format(tr.site_energy[i], '.17g')},{format(tr.site_entropy[i], '.17g')}\n"
            )
