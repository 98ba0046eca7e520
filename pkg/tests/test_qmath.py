import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_vmc.errors import ValidationError, ZeroProbabilityError
from robust_vmc.qmath import (
    DensityMatrix,
    PauliString,
    PureStateVector,
    condition_on_outcome,
    dephase,
    partial_trace,
    pauli_expectation,
    permute_spins,
    von_neumann_entropy,
)
from conftest import random_density, random_pure

LN2 = np.log(2.0)

BELL = DensityMatrix(2, np.outer([1, 0, 0, 1], [1, 0, 0, 1]) / 2.0)
PLUS = DensityMatrix(1, np.full((2, 2), 0.5, dtype=complex))
ZERO = DensityMatrix(1, np.diag([1.0, 0.0]).astype(complex))


def shannon(p):
    p = np.asarray(p, dtype=float)
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz])))


class TestVonNeumannEntropy:
    def test_pure_state_zero(self):
        assert von_neumann_entropy(ZERO) == 0.0

    def test_maximally_mixed(self):
        rho = DensityMatrix(1, np.eye(2) / 2.0)
        assert von_neumann_entropy(rho) == pytest.approx(LN2, abs=1e-12)

    def test_diagonal_75_25(self):
        # independent oracle: direct -sum p ln p
        expected = shannon([0.75, 0.25])
        assert expected == pytest.approx(0.562335, abs=5e-7)
        rho = DensityMatrix(1, np.diag([0.75, 0.25]).astype(complex))
        assert von_neumann_entropy(rho) == pytest.approx(expected, abs=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValidationError):
            DensityMatrix(1, np.array([[0.5, 0.5], [-0.5, 0.5]], dtype=complex))

    def test_rejects_non_psd(self):
        with pytest.raises(ValidationError):
            DensityMatrix(1, np.array([[1.2, 0.0], [0.0, -0.2]], dtype=complex))

    def test_rejects_bad_trace(self):
        with pytest.raises(ValidationError):
            DensityMatrix(1, np.eye(2, dtype=complex))

    def test_concavity(self, rng):
        for _ in range(50):
            a = random_density(rng, 2)
            b = random_density(rng, 2)
            lam = rng.uniform()
            mix = DensityMatrix(2, lam * a.data + (1 - lam) * b.data)
            assert von_neumann_entropy(mix) >= (
                lam * von_neumann_entropy(a) + (1 - lam) * von_neumann_entropy(b) - 1e-9
            )


class TestPartialTrace:
    def test_bell_state_marginal(self):
        kept = partial_trace(BELL, {0})
        assert np.allclose(kept.data, np.eye(2) / 2.0, atol=1e-12)

    def test_product_state(self, rng):
        a = random_density(rng, 1)
        b = random_density(rng, 2)
        joint = DensityMatrix(3, np.kron(b.data, a.data))  # spin 0 = a (lowest bit)
        assert np.allclose(partial_trace(joint, {0}).data, a.data, atol=1e-12)
        assert np.allclose(partial_trace(joint, {1, 2}).data, b.data, atol=1e-12)

    def test_against_index_contraction(self, rng):
        rho = random_density(rng, 3)
        keep = [0, 2]
        out = np.zeros((4, 4), dtype=complex)
        for r in range(4):
            for c in range(4):
                # bit 0 of r/c -> spin 0, bit 1 -> spin 2, summed spin 1
                for t in range(2):
                    ri = (r & 1) | (t << 1) | ((r >> 1) << 2)
                    ci = (c & 1) | (t << 1) | ((c >> 1) << 2)
                    out[r, c] += rho.data[ri, ci]
        assert np.allclose(partial_trace(rho, keep).data, out, atol=1e-12)

    def test_trace_preserved(self, rng):
        rho = random_density(rng, 3)
        assert abs(np.trace(partial_trace(rho, {1}).data) - 1.0) < 1e-12

    def test_empty_keep_rejected(self, rng):
        with pytest.raises(ValidationError):
            partial_trace(random_density(rng, 2), set())


class TestDephase:
    def test_plus_state(self):
        assert np.allclose(dephase(PLUS, {0}).data, np.eye(2) / 2.0, atol=1e-15)

    def test_diagonal_unchanged(self, rng):
        p = rng.dirichlet(np.ones(4))
        rho = DensityMatrix(2, np.diag(p).astype(complex))
        assert np.allclose(dephase(rho, {0, 1}).data, rho.data, atol=0)

    def test_bell_single_spin(self):
        out = dephase(BELL, {1})
        expected = np.diag([0.5, 0, 0, 0.5]).astype(complex)
        assert np.allclose(out.data, expected, atol=1e-15)

    def test_idempotent_and_trace_preserving(self, rng):
        rho = random_density(rng, 3)
        once = dephase(rho, {0, 2})
        twice = dephase(once, {0, 2})
        assert np.allclose(once.data, twice.data, atol=0)
        assert abs(np.trace(once.data) - 1.0) < 1e-12

    def test_entropy_never_decreases(self, rng):
        for _ in range(25):
            rho = random_density(rng, 2)
            spins = {0} if rng.uniform() < 0.5 else {0, 1}
            assert von_neumann_entropy(dephase(rho, spins)) >= von_neumann_entropy(rho) - 1e-9

    def test_commutes_with_partial_trace(self, rng):
        for _ in range(25):
            rho = random_density(rng, 3)
            left = partial_trace(dephase(rho, {0, 2}), {0, 1})
            right = dephase(partial_trace(rho, {0, 1}), {0})
            assert np.allclose(left.data, right.data, atol=1e-12)


class TestConditionOnOutcome:
    def test_bell_branch(self):
        prob, reduced = condition_on_outcome(BELL, 0, 0)
        assert prob == pytest.approx(0.5, abs=1e-12)
        assert np.allclose(reduced.data, np.diag([1.0, 0.0]), atol=1e-12)

    def test_zero_probability_branch(self):
        with pytest.raises(ZeroProbabilityError):
            condition_on_outcome(ZERO, 0, 1)

    def test_branches_reconstruct_marginal(self, rng):
        rho = random_density(rng, 3)
        for spin in range(3):
            total = 0.0
            acc = np.zeros((4, 4), dtype=complex)
            for b in (0, 1):
                prob, reduced = condition_on_outcome(rho, spin, b)
                total += prob
                acc += prob * reduced.data
            assert total == pytest.approx(1.0, abs=1e-12)
            keep = set(range(3)) - {spin}
            assert np.allclose(acc, partial_trace(rho, keep).data, atol=1e-12)


class TestPauliExpectation:
    def test_z_on_zero(self):
        assert pauli_expectation(ZERO, PauliString(("Z",))) == pytest.approx(1.0)

    def test_x_on_plus(self):
        assert pauli_expectation(PLUS, PauliString(("X",))) == pytest.approx(1.0)

    def test_zz_on_bell(self):
        assert pauli_expectation(BELL, PauliString(("Z", "Z"))) == pytest.approx(1.0)

    def test_matches_dense_matrices(self, rng):
        mats = {
            "I": np.eye(2),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]]),
            "Z": np.diag([1.0, -1.0]).astype(complex),
        }
        rho = random_density(rng, 3)
        for ops in [("X", "Y", "Z"), ("Y", "I", "Y"), ("Z", "X", "I")]:
            dense = np.kron(mats[ops[2]], np.kron(mats[ops[1]], mats[ops[0]]))
            expected = np.real(np.trace(rho.data @ dense))
            assert pauli_expectation(rho, PauliString(ops)) == pytest.approx(expected, abs=1e-10)

    def test_quantum_weight(self):
        assert PauliString(("X", "Z", "Y", "I")).quantum_weight == 2
        assert PauliString(("Z", "Z")).quantum_weight == 0

    def test_length_mismatch(self, rng):
        with pytest.raises(ValidationError):
            pauli_expectation(random_density(rng, 2), PauliString(("Z",)))


class TestPermuteSpins:
    def test_swap_matches_kron(self, rng):
        a = random_density(rng, 1)
        b = random_density(rng, 1)
        joint = DensityMatrix(2, np.kron(b.data, a.data))  # spin0=a, spin1=b
        swapped = permute_spins(joint, [1, 0])
        assert np.allclose(swapped.data, np.kron(a.data, b.data), atol=1e-14)


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_pure_state_entropy_is_zero(seed):
    rng = np.random.default_rng(seed)
    psi = random_pure(rng, 2)
    rho = DensityMatrix.from_vector(psi)
    assert von_neumann_entropy(rho) <= 1e-9


@given(st.integers(min_value=0, max_value=2**31 - 1), st.integers(min_value=1, max_value=3))
@settings(max_examples=25, deadline=None)
def test_entropy_bounded_by_log_dim(seed, spins):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, spins)
    assert -1e-9 <= von_neumann_entropy(rho) <= spins * LN2 + 1e-9
