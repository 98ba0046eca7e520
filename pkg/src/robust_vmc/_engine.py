"""Internal sweep engine.

Outcome generation walks the chain sequentially (one measurement per site);
estimators are then evaluated in vectorized batches from the closed-form
conditional windows, which for a sliding-window model depend only on the
model table and the recorded outcomes.  run/replay share this estimator
path, so replaying a record under the generating model is bit-exact.

Index conventions: window of m = n + extra spins, bit 0 oldest; a new spin
extends at bit m; the op conditions on the newest n window spins
(context = k >> extra); measuring out removes bit 0.
"""

from __future__ import annotations

import numpy as np

PROB_FLOOR = 1e-12

try:  # pragma: no cover - exercised implicitly
    import numba

    def _jit(fn):
        return numba.njit(cache=True)(fn)

    HAVE_NUMBA = True
except Exception:  # pragma: no cover
    def _jit(fn):
        return fn

    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# sequential outcome generation
# ---------------------------------------------------------------------------

def _gen_classical(P, n, extra, uniforms, outcomes):
    m = n + extra
    d = 1 << m
    w = np.zeros(d, dtype=np.float64)
    w[0] = 1.0
    ext = np.empty(2 * d, dtype=np.float64)
    for t in range(uniforms.shape[0]):
        for e in range(2 * d):
            ext[e] = P[e >> m, (e & (d - 1)) >> extra] * w[e & (d - 1)]
        p0 = 0.0
        p1 = 0.0
        for i in range(d):
            p0 += ext[2 * i]
            p1 += ext[2 * i + 1]
        b = 0 if uniforms[t] < p0 else 1
        pb = p0 if b == 0 else p1
        if pb < PROB_FLOOR:
            return t
        outcomes[t] = b
        for i in range(d):
            w[i] = ext[2 * i + b] / pb
    return -1


def _gen_pure(psi, n, extra, uniforms, outcomes):
    m = n + extra
    d = 1 << m
    v = np.zeros(d, dtype=np.complex128)
    v[0] = 1.0
    ext = np.empty(2 * d, dtype=np.complex128)
    for t in range(uniforms.shape[0]):
        for e in range(2 * d):
            ext[e] = psi[e >> m, (e & (d - 1)) >> extra] * v[e & (d - 1)]
        p0 = 0.0
        p1 = 0.0
        for i in range(d):
            p0 += abs(ext[2 * i]) ** 2
            p1 += abs(ext[2 * i + 1]) ** 2
        b = 0 if uniforms[t] < p0 else 1
        pb = p0 if b == 0 else p1
        if pb < PROB_FLOOR:
            return t
        outcomes[t] = b
        r = 1.0 / np.sqrt(pb)
        for i in range(d):
            v[i] = ext[2 * i + b] * r
    return -1


def _gen_mixed(R, n, extra, uniforms, outcomes):
    m = n + extra
    d = 1 << m
    dext = d << 1
    w = np.zeros((d, d), dtype=np.complex128)
    w[0, 0] = 1.0
    ext = np.empty((dext, dext), dtype=np.complex128)
    for t in range(uniforms.shape[0]):
        for e in range(dext):
            re = ((e >> m) << n) | ((e & (d - 1)) >> extra)
            for f in range(dext):
                cf = ((f >> m) << n) | ((f & (d - 1)) >> extra)
                ext[e, f] = R[re, cf] * w[e & (d - 1), f & (d - 1)]
        p0 = 0.0
        p1 = 0.0
        for i in range(d):
            p0 += ext[2 * i, 2 * i].real
            p1 += ext[2 * i + 1, 2 * i + 1].real
        b = 0 if uniforms[t] < p0 else 1
        pb = p0 if b == 0 else p1
        if pb < PROB_FLOOR:
            return t
        outcomes[t] = b
        for i in range(d):
            for j in range(d):
                w[i, j] = ext[2 * i + b, 2 * j + b] / pb
    return -1


gen_classical = _jit(_gen_classical)
gen_pure = _jit(_gen_pure)
gen_mixed = _jit(_gen_mixed)


def generate_outcomes(kind: str, table: np.ndarray, n: int, extra: int, uniforms: np.ndarray):
    """Run the sampling pass; returns (outcomes, first_degenerate_site)."""
    outcomes = np.zeros(uniforms.shape[0], dtype=np.uint8)
    if kind == "classical":
        bad = gen_classical(table, n, extra, uniforms, outcomes)
    elif kind == "pure":
        bad = gen_pure(table, n, extra, uniforms, outcomes)
    else:
        bad = gen_mixed(table, n, extra, uniforms, outcomes)
    return outcomes, int(bad)


# ---------------------------------------------------------------------------
# closed-form conditional windows from a fixed outcome record
# ---------------------------------------------------------------------------

def _history_ints(n: int, m: int, outcomes: np.ndarray, t0: int, t1: int) -> np.ndarray:
    """A_t for t in [t0, t1): bit q = measured value of spin t-m-n+q.

    Spin s is measured out at step s+m, so its value is outcomes[s+m] and
    bit q reads outcomes[t-n+q]; steps below m record the cold-start spins,
    whose outcome is 0.  Requires t0 >= m so every index is in range."""
    count = t1 - t0
    A = np.zeros(count, dtype=np.int64)
    if n == 0:
        return A
    o = outcomes.astype(np.int64)
    for q in range(n):
        A |= o[t0 - n + q : t1 - n + q] << q
    return A


def _factor_indices(n: int, m: int, j: int, A: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Row index into the op table for window bit j: (k_j, context_j)."""
    if j < n:
        ctx = ((A[:, None] >> j) & ((1 << (n - j)) - 1)) | ((k[None, :] & ((1 << j) - 1)) << (n - j))
    else:
        ctx = np.broadcast_to((k[None, :] >> (j - n)) & ((1 << n) - 1), (A.shape[0], k.shape[0])).copy()
    return (((k[None, :] >> j) & 1) << n) | ctx


def _early_windows_mixed(R_big, m, outcomes, limit):
    d = 1 << m
    out = np.empty((limit, d, d), dtype=np.complex128)
    w = np.zeros((d, d), dtype=np.complex128)
    w[0, 0] = 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        for t in range(limit):
            out[t] = w
            ext = R_big * np.tile(w, (2, 2))
            b = int(outcomes[t])
            blk = ext[b::2, b::2]
            tr = np.real(np.trace(blk))
            w = blk / tr if tr > 0.0 else np.full_like(blk, np.nan)
    return out


def _early_windows_vec(big, m, outcomes, limit, pure):
    d = 1 << m
    dtype = np.complex128 if pure else np.float64
    out = np.empty((limit, d), dtype=dtype)
    w = np.zeros(d, dtype=dtype)
    w[0] = 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        for t in range(limit):
            out[t] = w
            ext = big * np.concatenate([w, w])
            b = int(outcomes[t])
            blk = ext[b::2]
            if pure:
                pb = float(np.sum(np.abs(blk) ** 2))
                w = blk / np.sqrt(pb) if pb > 0.0 else np.full_like(blk, np.nan)
            else:
                pb = float(blk.sum())
                w = blk / pb if pb > 0.0 else np.full_like(blk, np.nan)
    return out


def _row_map(n: int, extra: int) -> np.ndarray:
    m = n + extra
    e = np.arange(1 << (m + 1))
    return ((e >> m) << n) | ((e & ((1 << m) - 1)) >> extra)


def _big_table(kind: str, table: np.ndarray, n: int, extra: int) -> np.ndarray:
    rm = _row_map(n, extra)
    if kind == "mixed":
        return table[np.ix_(rm, rm)]
    return table[rm >> n, rm & ((1 << n) - 1)]


# ---------------------------------------------------------------------------
# estimator evaluation
# ---------------------------------------------------------------------------

def _entropy_rows(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def _entropy_batch(mats: np.ndarray) -> np.ndarray:
    eigs = np.linalg.eigvalsh(mats)
    return _entropy_rows(np.clip(eigs, 0.0, 1.0))


def estimate(
    kind: str,
    table: np.ndarray,
    family: str,
    alpha: float,
    n: int,
    extra: int,
    outcomes: np.ndarray,
    chunk: int = 8192,
):
    """Per-site (energy, entropy_production, recorded-branch probability).

    Windows and extensions are reconstructed from the outcome record alone,
    so the result is a pure function of (table, outcomes).
    """
    m = n + extra
    d = 1 << m
    half = d
    T = outcomes.shape[0]
    quantum = family == "transverse_field"
    energy = np.empty(T, dtype=np.float64)
    entropy = np.zeros(T, dtype=np.float64)
    p_rec = np.empty(T, dtype=np.float64)

    # The field term is evaluated on the oldest spin of the extension (the
    # one leaving the window): no later extension conditions on it, so its
    # conditional expectation equals its value in the final chain state.
    # Evaluating X on the newest spin instead would be biased, because later
    # context conditioning dephases it.  The bond pairs the two oldest spins.
    e_idx = np.arange(2 * d)
    z_old = 1.0 - 2.0 * (e_idx & 1)
    if m >= 1:
        zz_sign = z_old * (1.0 - 2.0 * ((e_idx >> 1) & 1))
    zprev = 1.0 - 2.0 * np.concatenate([[0], outcomes[:-1].astype(np.int64)]) if T else np.zeros(0)

    b_t = outcomes.astype(np.int64)
    k_idx = np.arange(d, dtype=np.int64)

    if kind == "mixed":
        R_big = _big_table("mixed", table, n, extra)
        early = _early_windows_mixed(R_big, m, outcomes, min(m, T))
    else:
        pure = kind == "pure"
        big = _big_table(kind, table, n, extra)
        early = _early_windows_vec(big, m, outcomes, min(m, T), pure)
    if kind == "classical":
        # chain-rule entropy sampled at the measured context: once a site's
        # full context has been measured out, attribute H(P(.|context)).
        # Shares the mean with S(ext) - S(window) but keeps the replayed
        # free energy's parameter derivatives aligned with the chain rule.
        col_entropy = _entropy_rows(table.T)
        padded = np.concatenate([np.zeros(n, dtype=np.int64), outcomes.astype(np.int64)])
        ctx = np.zeros(T, dtype=np.int64)
        for q in range(n):
            ctx |= padded[1 + q : 1 + q + T] << q
        entropy[:] = col_entropy[ctx]

    with np.errstate(invalid="ignore", divide="ignore"):
        for lo in range(0, T, chunk):
            hi = min(lo + chunk, T)
            if kind == "mixed":
                W = _chunk_windows_mixed(table, n, m, outcomes, early, lo, hi, k_idx)
                EXT = R_big[None, :, :] * np.tile(W, (1, 2, 2))
                diag = np.einsum("tee->te", EXT).real
                s_ext = _entropy_batch(EXT)
                s_win = _entropy_batch(W)
                entropy[lo:hi] = s_ext - s_win
                if quantum:
                    x = 2.0 * np.einsum("tkk->t", EXT[:, 0::2, 1::2]).real
            elif kind == "pure":
                V = _chunk_windows_vec(table, n, m, outcomes, early, lo, hi, k_idx, pure=True)
                EV = big[None, :] * np.tile(V, (1, 2))
                diag = np.abs(EV) ** 2
                if quantum:
                    x = 2.0 * np.real(np.einsum("tk,tk->t", EV[:, 0::2].conj(), EV[:, 1::2]))
            else:
                W = _chunk_windows_vec(table, n, m, outcomes, early, lo, hi, k_idx, pure=False)
                EXT = big[None, :] * np.tile(W, (1, 2))
                diag = EXT

            p0 = diag[:, 0::2].sum(axis=1)
            p1 = diag[:, 1::2].sum(axis=1)
            bb = b_t[lo:hi]
            p_rec[lo:hi] = np.where(bb == 0, p0, p1)

            if m >= 1:
                bond = diag @ zz_sign
            else:
                bond = zprev[lo:hi] * (diag @ z_old)
            if quantum:
                energy[lo:hi] = alpha * x - bond
            else:
                energy[lo:hi] = alpha * (diag @ z_old) - bond
    return energy, entropy, p_rec


def _chunk_windows_mixed(R, n, m, outcomes, early, lo, hi, k_idx):
    d = 1 << m
    count = hi - lo
    W = np.empty((count, d, d), dtype=np.complex128)
    n_early = min(max(m - lo, 0), count)
    if n_early:
        W[:n_early] = early[lo : lo + n_early]
    t0 = max(lo, m)
    if t0 < hi:
        A = _history_ints(n, m, outcomes, t0, hi)
        acc = np.ones((hi - t0, d, d), dtype=np.complex128)
        for j in range(m):
            E = _factor_indices(n, m, j, A, k_idx)
            acc *= R[E[:, :, None], E[:, None, :]]
        tr = np.einsum("tkk->t", acc).real
        acc /= np.where(tr > 0.0, tr, np.nan)[:, None, None]
        W[t0 - lo :] = acc
    return W


def _chunk_windows_vec(table, n, m, outcomes, early, lo, hi, k_idx, pure):
    d = 1 << m
    count = hi - lo
    dtype = np.complex128 if pure else np.float64
    W = np.empty((count, d), dtype=dtype)
    n_early = min(max(m - lo, 0), count)
    if n_early:
        W[:n_early] = early[lo : lo + n_early]
    t0 = max(lo, m)
    if t0 < hi:
        A = _history_ints(n, m, outcomes, t0, hi)
        acc = np.ones((hi - t0, d), dtype=dtype)
        for j in range(m):
            E = _factor_indices(n, m, j, A, k_idx)
            acc *= table[E >> n, E & ((1 << n) - 1)]
        if pure:
            norm = np.sqrt(np.sum(np.abs(acc) ** 2, axis=1))
        else:
            norm = acc.sum(axis=1)
        acc /= np.where(norm > 0.0, norm, np.nan)[:, None]
        W[t0 - lo :] = acc
    return W
