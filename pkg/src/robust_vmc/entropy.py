"""Von Neumann entropy lower bounds for robust reconstruction sequences.

The sampled per-step estimator is `step_entropy_production`; the enumerating
dephased-reference bound (`entropy_bound_dephased`) and the Petz-map
tightness diagnostic (`error_channel_distortion`) are kept for small-system
validation.
"""

from __future__ import annotations

from typing import Iterable, Tuple

import numpy as np

from .decomp import ReconstructionOp, apply_reconstruction
from .errors import (
    ChannelViolationError,
    EnumerationSizeError,
    InverseSqrtError,
    ValidationError,
)
from .qmath import DensityMatrix, dephase, entropy_of_eigenvalues, von_neumann_entropy

EIG_FLOOR = 1e-12
SUPPORT_WEIGHT = 1e-10
PRODUCTION_FLOOR = -1e-6
MAX_BOUND_CONTEXTS = 256


def classical_step_entropy(op: ReconstructionOp, context: int) -> float:
    """Shannon entropy (nats) of the conditional P(.|context); in [0, ln 2]."""
    if op.kind != "classical":
        raise ValidationError("classical_step_entropy requires a classical-kind op")
    if not 0 <= context < (1 << op.context_spins):
        raise ValidationError(f"context {context} out of range")
    p = op.matrix[:, context]
    nz = p > 0.0
    return float(-np.sum(p[nz] * np.log(p[nz])))


def step_entropy_production(window_before: DensityMatrix, window_after: DensityMatrix) -> float:
    """S(after) - S(before); non-negative (up to roundoff) when `after` was
    produced from `before` by a valid reconstruction."""
    production = von_neumann_entropy(window_after) - von_neumann_entropy(window_before)
    if production < PRODUCTION_FLOOR:
        raise ChannelViolationError(
            f"entropy production {production:.3e} below -1e-6; extension is not a valid channel"
        )
    return production


def _gather_bits(value: int, positions) -> int:
    out = 0
    for q, pos in enumerate(positions):
        out |= ((value >> pos) & 1) << q
    return out


def _scatter(value: int, positions) -> int:
    out = 0
    for q, pos in enumerate(positions):
        out |= ((value >> q) & 1) << pos
    return out


def _sub_operation(R: np.ndarray, n: int, undephased, fixed_positions, fixed_value: int) -> np.ndarray:
    """Restrict the general R to a fixed basis value on the dephased context
    spins, leaving a channel on (new spin) + undephased context spins."""
    ctx_free = 1 << len(undephased)
    free = np.array([_scatter(k, undephased) for k in range(ctx_free)])
    base = _scatter(fixed_value, fixed_positions)
    k_full = free | base
    rows = np.concatenate([k_full, (1 << n) + k_full])
    return R[np.ix_(rows, rows)]


def entropy_bound_dephased(
    rho: DensityMatrix,
    op: ReconstructionOp,
    sigma: DensityMatrix,
    undephased: Iterable[int],
) -> float:
    """Lower bound on S(rho) for rho = R(sigma), using the reference state
    dephased on every sigma spin outside `undephased`:

        S(sigma) + sum_i p_i [ S(R_i(sig_i / p_i)) - S(sig_i / p_i) ]

    where i enumerates basis states of the dephased spins, sig_i are the
    conditional blocks on the undephased spins and p_i = tr(sig_i).  With
    `undephased` = all spins the sum collapses to S(rho) exactly.
    """
    m = op.context_spins
    if sigma.num_spins != m:
        raise ValidationError(f"sigma has {sigma.num_spins} spins, op conditions on {m}")
    if rho.num_spins != m + 1:
        raise ValidationError(f"rho must have {m + 1} spins, got {rho.num_spins}")
    if rho.num_spins > 8:
        raise EnumerationSizeError("entropy_bound_dephased is limited to 8 total spins")
    undephased = sorted(set(int(s) for s in undephased))
    if any(s < 0 or s >= m for s in undephased):
        raise ValidationError(f"undephased set {undephased} out of range")
    reconstructed = apply_reconstruction(op, sigma)
    if np.max(np.abs(reconstructed.data - rho.data)) > 1e-8:
        raise ValidationError("rho does not match applyReconstruction(op, sigma)")
    dephased_spins = [s for s in range(m) if s not in undephased]
    n_contexts = 1 << len(dephased_spins)
    if n_contexts > MAX_BOUND_CONTEXTS:
        raise EnumerationSizeError(f"{n_contexts} dephased contexts exceed the 2^8 enumeration limit")
    R = op.as_general()
    bound = von_neumann_entropy(sigma)
    free_count = 1 << len(undephased)
    free_idx = np.array([_scatter(k, undephased) for k in range(free_count)])
    for i in range(n_contexts):
        base = _scatter(i, dephased_spins)
        rows = free_idx | base
        block = sigma.data[np.ix_(rows, rows)]
        p_i = float(np.real(np.trace(block)))
        if p_i < 1e-15:
            continue
        norm_block = block / p_i
        sub = _sub_operation(R, m, undephased, dephased_spins, i)
        extended = sub * np.tile(norm_block, (2, 2))
        s_out = entropy_of_eigenvalues(np.linalg.eigvalsh(extended))
        s_in = entropy_of_eigenvalues(np.linalg.eigvalsh(norm_block))
        bound += p_i * (s_out - s_in)
    return bound


def relative_entropy(rho: np.ndarray, tau: np.ndarray) -> float:
    """Quantum relative entropy S(rho || tau) in nats.

    Returns +inf when rho has weight above 1e-10 outside the support of tau
    (tau eigenvalue below 1e-12).
    """
    rho = np.asarray(rho, dtype=np.complex128)
    tau = np.asarray(tau, dtype=np.complex128)
    mu, V = np.linalg.eigh(tau)
    w = np.real(np.einsum("ij,jk,ki->i", V.conj().T, rho, V))
    w = np.clip(w, 0.0, None)
    if np.any((mu < EIG_FLOOR) & (w > SUPPORT_WEIGHT)):
        return float("inf")
    tr_rho_ln_rho = -entropy_of_eigenvalues(np.linalg.eigvalsh(rho))
    safe_mu = np.clip(mu, EIG_FLOOR, None)
    keep = w > 0.0
    tr_rho_ln_tau = float(np.sum(w[keep] * np.log(safe_mu[keep])))
    return tr_rho_ln_rho - tr_rho_ln_tau


def _psd_power(matrix: np.ndarray, power: float) -> np.ndarray:
    """matrix**power on its support; eigenvalues in [-1e-10, 1e-12) are
    treated as null space, anything more negative is an error."""
    eigs, V = np.linalg.eigh(matrix)
    if eigs[0] < -1e-10:
        raise InverseSqrtError(f"eigenvalue {eigs[0]:.3e} below -1e-10 in matrix power")
    out = np.zeros_like(eigs)
    support = eigs >= EIG_FLOOR
    out[support] = eigs[support] ** power
    return (V * out[None, :]) @ V.conj().T


def _adjoint_apply(R: np.ndarray, Y: np.ndarray, ctx: int) -> np.ndarray:
    """R^dagger(Y) for the restricted channel form: contract the new-spin
    indices of conj(R) * Y down to a context-by-context matrix."""
    Rb = R.reshape(2, ctx, 2, ctx)
    Yb = Y.reshape(2, ctx, 2, ctx)
    return np.einsum("ikjl,ikjl->kl", Rb.conj(), Yb)


def error_channel_distortion(
    op: ReconstructionOp,
    sigma: DensityMatrix,
    undephased: Iterable[int],
) -> Tuple[DensityMatrix, Tuple[float, float, float]]:
    """Apply the error channel E = M o R (M the Petz recovery map of R at the
    dephased reference) to sigma, returning E(sigma) and the sandwich

        ( S(sigma || sigma0), S(R(sigma) || R(sigma0)), S(E(sigma) || sigma0) ),

    which is non-increasing by monotonicity of relative entropy.  Square
    roots are taken on the support with eigenvalue floor 1e-12.
    """
    m = op.context_spins
    if sigma.num_spins != m:
        raise ValidationError(f"sigma has {sigma.num_spins} spins, op conditions on {m}")
    if m + 1 > 6:
        raise EnumerationSizeError("error_channel_distortion is limited to 6 total spins")
    if np.linalg.eigvalsh(sigma.data)[0] <= 1e-10:
        raise ValidationError("sigma must be strictly positive (min eigenvalue > 1e-10)")
    undephased = sorted(set(int(s) for s in undephased))
    dephased_spins = [s for s in range(m) if s not in undephased]
    sigma0 = dephase(sigma, dephased_spins)
    R = op.as_general()
    ctx = 1 << m
    r_sigma = R * np.tile(sigma.data, (2, 2))
    r_sigma0 = R * np.tile(sigma0.data, (2, 2))
    inv_sqrt = _psd_power(r_sigma0, -0.5)
    sqrt_sigma0 = _psd_power(sigma0.data, 0.5)
    inner = inv_sqrt @ r_sigma @ inv_sqrt
    pulled = _adjoint_apply(R, inner, ctx)
    distorted = sqrt_sigma0 @ pulled @ sqrt_sigma0
    distorted = 0.5 * (distorted + distorted.conj().T)
    tr = float(np.real(np.trace(distorted)))
    if not 0.9 < tr < 1.1:
        raise InverseSqrtError(f"Petz output trace {tr:.3e}; reference too singular")
    distorted_dm = DensityMatrix(m, distorted / tr)
    sandwich = (
        relative_entropy(sigma.data, sigma0.data),
        relative_entropy(r_sigma, r_sigma0),
        relative_entropy(distorted_dm.data, sigma0.data),
    )
    return distorted_dm, sandwich
