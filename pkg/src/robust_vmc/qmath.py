"""Dense linear algebra for complex Hermitian states on small spin registers.

Basis-index convention used by every module: bit b of a computational basis
index addresses spin b, bit 0 is the oldest spin of a sliding window and the
highest bit is the newest.  Entropies are in nats.  States are immutable and
all operations are pure functions, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from .errors import NumericIntegrityError, ValidationError, ZeroProbabilityError

MAX_SPINS = 10
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-10
PROB_FLOOR = 1e-12


def _frozen_complex(data, shape) -> np.ndarray:
    arr = np.array(data, dtype=np.complex128)
    if arr.shape != shape:
        raise ValidationError(f"expected array of shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian PSD unit-trace matrix on `num_spins` spins (0 spins = scalar 1)."""

    num_spins: int
    data: np.ndarray

    def __post_init__(self):
        if not 0 <= self.num_spins <= MAX_SPINS:
            raise ValidationError(f"num_spins must be in [0, {MAX_SPINS}], got {self.num_spins}")
        dim = 1 << self.num_spins
        arr = _frozen_complex(self.data, (dim, dim))
        object.__setattr__(self, "data", arr)
        if np.max(np.abs(arr - arr.conj().T)) > HERMITIAN_TOL:
            raise ValidationError("matrix is not Hermitian within 1e-10")
        if abs(arr.trace() - 1.0) > TRACE_TOL:
            raise ValidationError(f"trace {arr.trace():.3e} is not 1 within 1e-10")
        if np.linalg.eigvalsh(arr)[0] < -PSD_TOL:
            raise ValidationError("matrix has an eigenvalue below -1e-10")

    @property
    def dim(self) -> int:
        return 1 << self.num_spins

    @classmethod
    def from_vector(cls, psi: "PureStateVector") -> "DensityMatrix":
        return cls(psi.num_spins, np.outer(psi.data, psi.data.conj()))


@dataclass(frozen=True)
class PureStateVector:
    """Unit-norm complex amplitude vector on `num_spins` spins."""

    num_spins: int
    data: np.ndarray

    def __post_init__(self):
        if not 0 <= self.num_spins <= MAX_SPINS:
            raise ValidationError(f"num_spins must be in [0, {MAX_SPINS}], got {self.num_spins}")
        dim = 1 << self.num_spins
        arr = _frozen_complex(self.data, (dim,))
        object.__setattr__(self, "data", arr)
        if abs(np.linalg.norm(arr) - 1.0) > NORM_TOL:
            raise ValidationError("vector norm is not 1 within 1e-10")

    @property
    def dim(self) -> int:
        return 1 << self.num_spins


_PAULI_CHARS = frozenset("IXYZ")


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-spin Paulis; ops[b] acts on spin b."""

    ops: Tuple[str, ...]

    def __post_init__(self):
        ops = tuple(str(c).upper() for c in self.ops)
        if not all(c in _PAULI_CHARS for c in ops):
            raise ValidationError(f"Pauli ops must be one of I, X, Y, Z: {ops}")
        object.__setattr__(self, "ops", ops)

    def __len__(self) -> int:
        return len(self.ops)

    @property
    def quantum_weight(self) -> int:
        """Number of spins that must be measured outside the computational basis."""
        return sum(1 for c in self.ops if c in ("X", "Y"))


def entropy_of_eigenvalues(eigs: np.ndarray) -> float:
    """-sum(lam ln lam) with eigenvalues clamped to [0, 1] and 0 ln 0 = 0."""
    eigs = np.asarray(eigs, dtype=np.float64)
    if eigs.size and eigs.min() < -PSD_TOL:
        raise ValidationError(f"eigenvalue {eigs.min():.3e} below -1e-10: not a valid state")
    lam = np.clip(eigs, 0.0, 1.0)
    nz = lam > 0.0
    return float(-np.sum(lam[nz] * np.log(lam[nz])))


def _entropy_raw(matrix: np.ndarray) -> float:
    return entropy_of_eigenvalues(np.linalg.eigvalsh(matrix))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S(rho) = -tr(rho ln rho) in nats; always >= 0 after eigenvalue clamping."""
    return _entropy_raw(rho.data)


def _scatter_bits(values: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    """Map compact indices to full indices with bit q placed at positions[q]."""
    out = np.zeros_like(values)
    for q, pos in enumerate(positions):
        out |= ((values >> q) & 1) << pos
    return out


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the spins in `keep`, preserving their relative order."""
    keep = sorted(set(int(s) for s in keep))
    if not keep:
        raise ValidationError("keep set must be non-empty (a scalar trace is not a DensityMatrix)")
    if keep[0] < 0 or keep[-1] >= rho.num_spins:
        raise ValidationError(f"keep set {keep} out of range for {rho.num_spins} spins")
    traced = [s for s in range(rho.num_spins) if s not in keep]
    k = len(keep)
    idx_keep = _scatter_bits(np.arange(1 << k), keep)
    idx_tr = _scatter_bits(np.arange(1 << len(traced)), traced)
    full = idx_keep[:, None] | idx_tr[None, :]
    view = rho.data[full[:, :, None, None], full[None, None, :, :]]
    out = np.einsum("rtct->rc", view)
    return DensityMatrix(k, out)


def dephase(rho: DensityMatrix, spins: Iterable[int]) -> DensityMatrix:
    """Zero every entry whose row/column indices differ on any spin in `spins`."""
    spins = set(int(s) for s in spins)
    if any(s < 0 or s >= rho.num_spins for s in spins):
        raise ValidationError(f"dephase spins {spins} out of range for {rho.num_spins} spins")
    mask = 0
    for s in spins:
        mask |= 1 << s
    idx = np.arange(rho.dim)
    key = idx & mask
    keepers = key[:, None] == key[None, :]
    return DensityMatrix(rho.num_spins, rho.data * keepers)


def _removed_spin_indices(num_spins: int, spin: int, outcome: int) -> np.ndarray:
    idx = np.arange(1 << num_spins)
    sel = idx[((idx >> spin) & 1) == outcome]
    return sel


def condition_on_outcome(rho: DensityMatrix, spin: int, outcome: int) -> Tuple[float, DensityMatrix]:
    """Probability of `outcome` on `spin` and the renormalized post-measurement
    state with the measured spin removed (higher spins shift down one bit)."""
    if not 0 <= spin < rho.num_spins:
        raise ValidationError(f"spin {spin} out of range for {rho.num_spins} spins")
    if outcome not in (0, 1):
        raise ValidationError(f"outcome must be 0 or 1, got {outcome}")
    sel = _removed_spin_indices(rho.num_spins, spin, outcome)
    prob = float(np.real(rho.data[sel, sel].sum()))
    if prob < PROB_FLOOR:
        raise ZeroProbabilityError(
            f"outcome {outcome} on spin {spin} has probability {prob:.3e} < 1e-12"
        )
    reduced = rho.data[np.ix_(sel, sel)] / prob
    return prob, DensityMatrix(rho.num_spins - 1, reduced)


def pauli_expectation(rho: DensityMatrix, p: PauliString) -> float:
    """tr(rho P); raises if the trace has an imaginary part above 1e-10."""
    if len(p) != rho.num_spins:
        raise ValidationError(f"Pauli string length {len(p)} != {rho.num_spins} spins")
    xmask = 0
    zmask = 0
    n_y = 0
    for s, c in enumerate(p.ops):
        if c in ("X", "Y"):
            xmask |= 1 << s
        if c in ("Z", "Y"):
            zmask |= 1 << s
        if c == "Y":
            n_y += 1
    idx = np.arange(rho.dim)
    # P|j> = c_j |j ^ xmask>, c_j = i^n_y * (-1)^(popcount(j & zmask))
    signs = 1.0 - 2.0 * (_popcount(idx & zmask) & 1)
    coeff = (1j ** n_y) * signs
    val = np.sum(rho.data[idx, idx ^ xmask] * coeff)
    if abs(val.imag) > 1e-10:
        raise NumericIntegrityError(f"Pauli expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def _popcount(values: np.ndarray) -> np.ndarray:
    v = values.astype(np.uint64)
    count = np.zeros_like(v)
    while np.any(v):
        count += v & 1
        v >>= np.uint64(1)
    return count.astype(np.int64)


def permute_spins(rho: DensityMatrix, order: Sequence[int]) -> DensityMatrix:
    """Relabel spins so that new spin q is old spin order[q]."""
    order = list(order)
    if sorted(order) != list(range(rho.num_spins)):
        raise ValidationError(f"order {order} is not a permutation of 0..{rho.num_spins - 1}")
    idx = _scatter_bits_from(np.arange(rho.dim), order)
    return DensityMatrix(rho.num_spins, rho.data[np.ix_(idx, idx)])


def _scatter_bits_from(values: np.ndarray, order: Sequence[int]) -> np.ndarray:
    # new index v maps to old index with old bit order[q] = bit q of v
    out = np.zeros_like(values)
    for q, pos in enumerate(order):
        out |= ((values >> q) & 1) << pos
    return out


State = Union[DensityMatrix, PureStateVector]
