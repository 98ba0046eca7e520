"""Robust reconstruction operations and their variational parameterizations.

A reconstruction operation extends a window state by one new spin (placed at
the highest bit) conditioned on computational-basis structure of the existing
window.  Three families are supported:

  classical -- a conditional probability table P(a|k),
  pure      -- conditional amplitudes psi(a|k) applied as an isometry,
  mixed     -- a full Hermitian PSD matrix R with per-context trace one.

Unconstrained real parameter vectors map onto valid operations via softmax
(classical), column normalization (pure), and a Cholesky-style factor with a
symmetric diagonal rescaling (mixed).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import DecompositionSingularError, DegenerateParameterError, ValidationError
from .qmath import DensityMatrix, PureStateVector, permute_spins

KINDS = ("classical", "pure", "mixed")
PSD_TOL = 1e-10
NORM_TOL = 1e-10
CLASSICAL_NORM_TOL = 1e-12
DEGENERACY_FLOOR = 1e-12


@dataclass(frozen=True)
class ReconstructionOp:
    """A valid robust extension channel on `context_spins` conditioning spins.

    matrix layout by kind:
      classical: (2, 2**n) real table, column k sums to 1;
      pure:      (2, 2**n) complex isometry columns, unit column norm;
      mixed:     (2**(n+1), 2**(n+1)) Hermitian PSD matrix indexed by the
                 composite (a, k) -> a * 2**n + k with per-context trace 1.
    """

    kind: str
    context_spins: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.context_spins < 0:
            raise ValidationError("context_spins must be >= 0")
        ctx = 1 << self.context_spins
        if self.kind == "mixed":
            arr = np.array(self.matrix, dtype=np.complex128)
            if arr.shape != (2 * ctx, 2 * ctx):
                raise ValidationError(f"mixed matrix must be {(2 * ctx, 2 * ctx)}, got {arr.shape}")
            if np.max(np.abs(arr - arr.conj().T)) > 1e-10:
                raise ValidationError("mixed reconstruction matrix is not Hermitian")
            if np.linalg.eigvalsh(arr)[0] < -PSD_TOL:
                raise ValidationError("mixed reconstruction matrix has eigenvalue below -1e-10")
            colsums = arr[np.arange(ctx), np.arange(ctx)].real + arr[ctx + np.arange(ctx), ctx + np.arange(ctx)].real
            if np.max(np.abs(colsums - 1.0)) > NORM_TOL:
                raise ValidationError("mixed reconstruction violates per-context trace preservation")
        elif self.kind == "pure":
            arr = np.array(self.matrix, dtype=np.complex128)
            if arr.shape != (2, ctx):
                raise ValidationError(f"pure matrix must be {(2, ctx)}, got {arr.shape}")
            norms = np.sum(np.abs(arr) ** 2, axis=0)
            if np.max(np.abs(norms - 1.0)) > NORM_TOL:
                raise ValidationError("pure reconstruction columns are not unit-norm")
        else:
            arr = np.array(self.matrix, dtype=np.float64)
            if arr.shape != (2, ctx):
                raise ValidationError(f"classical matrix must be {(2, ctx)}, got {arr.shape}")
            if arr.min() < 0.0:
                raise ValidationError("classical conditional table has negative entries")
            if np.max(np.abs(arr.sum(axis=0) - 1.0)) > CLASSICAL_NORM_TOL:
                raise ValidationError("classical conditional table columns do not sum to 1")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    def as_general(self) -> np.ndarray:
        """The full PSD matrix R[(a,k),(b,l)] of the general channel form."""
        ctx = 1 << self.context_spins
        if self.kind == "mixed":
            return np.array(self.matrix)
        if self.kind == "pure":
            flat = self.matrix.reshape(2 * ctx)
            return np.outer(flat, flat.conj())
        return np.diag(self.matrix.reshape(2 * ctx)).astype(np.complex128)


def param_count(kind: str, n: int) -> int:
    if kind == "classical":
        return 2 * (1 << n)
    if kind == "pure":
        return 4 * (1 << n)
    if kind == "mixed":
        d = 1 << (n + 1)
        return d * (d + 1)
    raise ValidationError(f"unknown kind {kind!r}")


@dataclass(frozen=True)
class ConditionalModel:
    """Unconstrained variational parameters for one reconstruction family.

    Parameter layout:
      classical: 2*2**n logits f(i, j), stored row-major as f[i, j];
      pure:      complex f(i, j) as interleaved (re, im), row-major over (i, j);
      mixed:     upper-triangular factor G (row-major over i <= j) as
                 interleaved (re, im); the d imaginary-diagonal slots are
                 carried but ignored, giving d*(d+1) reals for d = 2**(n+1).
    """

    kind: str
    n: int
    params: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 0:
            raise ValidationError("conditioning depth n must be >= 0")
        arr = np.array(self.params, dtype=np.float64).reshape(-1)
        expected = param_count(self.kind, self.n)
        if arr.size != expected:
            raise ValidationError(
                f"{self.kind} model at n={self.n} needs {expected} parameters, got {arr.size}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "params", arr)


def _unpack_factor(params: np.ndarray, d: int) -> np.ndarray:
    """Upper-triangular G with real diagonal from the packed parameter vector."""
    G = np.zeros((d, d), dtype=np.complex128)
    pos = 0
    for i in range(d):
        for j in range(i, d):
            re, im = params[pos], params[pos + 1]
            G[i, j] = re if i == j else re + 1j * im
            pos += 2
    return G


def _pack_factor(G: np.ndarray, d: int) -> np.ndarray:
    params = np.zeros(d * (d + 1), dtype=np.float64)
    pos = 0
    for i in range(d):
        for j in range(i, d):
            params[pos] = G[i, j].real
            params[pos + 1] = 0.0 if i == j else G[i, j].imag
            pos += 2
    return params


def build_reconstruction(model: ConditionalModel) -> ReconstructionOp:
    """Map unconstrained parameters to a valid ReconstructionOp."""
    if not np.all(np.isfinite(model.params)):
        raise ValidationError("model parameters must be finite")
    ctx = 1 << model.n
    if model.kind == "classical":
        f = model.params.reshape(2, ctx)
        shifted = f - f.max(axis=0, keepdims=True)
        w = np.exp(shifted)
        table = w / w.sum(axis=0, keepdims=True)
        return ReconstructionOp("classical", model.n, table)
    if model.kind == "pure":
        raw = model.params.reshape(2, ctx, 2)
        f = raw[..., 0] + 1j * raw[..., 1]
        norms = np.sqrt(np.sum(np.abs(f) ** 2, axis=0))
        if norms.min() < DEGENERACY_FLOOR:
            raise DegenerateParameterError(
                f"pure column norm {norms.min():.3e} below 1e-12"
            )
        return ReconstructionOp("pure", model.n, f / norms[None, :])
    d = 2 * ctx
    G = _unpack_factor(model.params, d)
    R0 = G @ G.conj().T
    s = R0[np.arange(ctx), np.arange(ctx)].real + R0[ctx + np.arange(ctx), ctx + np.arange(ctx)].real
    if s.min() < DEGENERACY_FLOOR:
        raise DegenerateParameterError(f"mixed context weight {s.min():.3e} below 1e-12")
    scale = 1.0 / np.sqrt(np.concatenate([s, s]))
    R = R0 * scale[:, None] * scale[None, :]
    R = 0.5 * (R + R.conj().T)
    return ReconstructionOp("mixed", model.n, R)


def apply_reconstruction(
    op: ReconstructionOp, window: Union[DensityMatrix, PureStateVector]
) -> Union[DensityMatrix, PureStateVector]:
    """Extend `window` by one spin at the highest bit.

    Output entry [(i,k),(j,l)] = R[(i,k),(j,l)] * window[k,l].  A pure-kind op
    applied to a PureStateVector stays on the vector path.
    """
    if window.num_spins != op.context_spins:
        raise ValidationError(
            f"window has {window.num_spins} spins, op conditions on {op.context_spins}"
        )
    if isinstance(window, PureStateVector):
        if op.kind != "pure":
            raise ValidationError("vector windows require a pure-kind reconstruction")
        ext = (op.matrix * window.data[None, :]).reshape(-1)
        return PureStateVector(window.num_spins + 1, ext)
    R = op.as_general()
    tiled = np.tile(window.data, (2, 2))
    return DensityMatrix(window.num_spins + 1, R * tiled)


def canonical_decompose(
    rho: DensityMatrix, split: int | None = None
) -> Tuple[ReconstructionOp, DensityMatrix]:
    """Factor rho = R(sigma) with the rank-1 sigma that makes R a symmetric
    diagonal rescaling of rho (hence Hermitian PSD).

    `split` selects the spin treated as the new subsystem (default: the
    newest, i.e. the highest bit).  Other spins keep their relative order; for
    split != num_spins-1 the reconstruction reproduces rho with that spin
    permuted to the top.
    """
    if rho.num_spins < 1:
        raise ValidationError("need at least one spin to decompose")
    if split is None:
        split = rho.num_spins - 1
    if not 0 <= split < rho.num_spins:
        raise ValidationError(f"split spin {split} out of range")
    if split != rho.num_spins - 1:
        order = [s for s in range(rho.num_spins) if s != split] + [split]
        rho = permute_spins(rho, order)
    ctx = 1 << (rho.num_spins - 1)
    data = rho.data
    diag = data.diagonal().real
    dvec = diag[:ctx] + diag[ctx:]
    if dvec.min() <= DEGENERACY_FLOOR:
        raise DecompositionSingularError(
            f"diagonal partial sum {dvec.min():.3e} vanishes; canonical form undefined"
        )
    sq = np.sqrt(dvec)
    sigma = DensityMatrix(rho.num_spins - 1, np.outer(sq, sq).astype(np.complex128))
    denom = np.tile(sq, 2)
    R = data / (denom[:, None] * denom[None, :])
    op = ReconstructionOp("mixed", rho.num_spins - 1, R)
    return op, sigma


def embed_model(model: ConditionalModel) -> ConditionalModel:
    """Deepen conditioning by one spin (the added, oldest context bit) without
    changing behavior: the new reconstruction's entries are replicated across
    the added bit, so it acts as the old one with a coherent spectator."""
    n_new = model.n + 1
    ctx_old = 1 << model.n
    if model.kind == "classical":
        f = model.params.reshape(2, ctx_old)
        f_new = np.repeat(f, 2, axis=1)  # new context k: old context = k >> 1
        return ConditionalModel("classical", n_new, f_new.reshape(-1))
    if model.kind == "pure":
        raw = model.params.reshape(2, ctx_old, 2)
        raw_new = np.repeat(raw, 2, axis=1)
        return ConditionalModel("pure", n_new, raw_new.reshape(-1))
    d_old = 2 * ctx_old
    G_old = _unpack_factor(model.params, d_old)
    d_new = 2 * d_old
    # copy G into the odd columns at both row parities: stays upper
    # triangular and gives (G G+)[2v+c, 2v'+c'] = (G_old G_old+)[v, v'] for
    # every (c, c'), i.e. full elementwise replication across the added bit.
    # A block-diagonal copy would instead dephase the added spin, which the
    # local energy estimator on the oldest window spin can detect.
    G_new = np.zeros((d_new, d_new), dtype=np.complex128)
    rows = 2 * np.arange(d_old)
    cols = 2 * np.arange(d_old) + 1
    for c in (0, 1):
        G_new[np.ix_(rows + c, cols)] = G_old
    return ConditionalModel("mixed", n_new, _pack_factor(G_new, d_new))


def save_model(model: ConditionalModel, path) -> None:
    """Flat text format: 3-line header (kind, n, param count), one real per
    line with 17 significant digits for a bit-exact round trip."""
    lines = [model.kind, str(model.n), str(model.params.size)]
    lines.extend(format(x, ".17g") for x in model.params)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> ConditionalModel:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 3:
        raise ValidationError(f"model file {path} is missing its 3-line header")
    kind, n_str, count_str = lines[0], lines[1], lines[2]
    try:
        n = int(n_str)
        count = int(count_str)
    except ValueError as exc:
        raise ValidationError(f"model file {path} has a malformed header") from exc
    values = lines[3:]
    if len(values) != count:
        raise ValidationError(
            f"model file {path} declares {count} parameters but carries {len(values)}"
        )
    params = np.array([float(v) for v in values], dtype=np.float64)
    return ConditionalModel(kind, n, params)
