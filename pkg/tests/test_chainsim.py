import numpy as np
import pytest

from robust_vmc import prng
from robust_vmc.chainsim import (
    IsingSpec,
    SweepConfig,
    freeze_outcomes,
    replay_sweep,
    run_sweep,
    step_site,
    write_site_trace,
)
from robust_vmc.decomp import ConditionalModel, build_reconstruction, param_count
from robust_vmc.errors import ReplayDegeneracyError, ValidationError
from robust_vmc.oracles import (
    classical_transfer_matrix,
    exact_classical_conditionals,
    pure_mean_field_scan,
)
from robust_vmc.qmath import DensityMatrix, PureStateVector
from test_decomp import random_model, random_valid_mixed


def cold_window(kind, m):
    if kind == "pure":
        v = np.zeros(1 << m, dtype=complex)
        v[0] = 1.0
        return PureStateVector(m, v)
    w = np.zeros((1 << m, 1 << m), dtype=complex)
    w[0, 0] = 1.0
    return DensityMatrix(m, w)


def reference_sweep(model, spec, config):
    window = cold_window(model.kind, config.n + config.window_extra)
    uniforms = iter(prng.uniform_stream(config.seed, config.num_sites))
    prev = 0
    recent = ()
    rows = []
    for _ in range(config.num_sites):
        window, outcome, e, s = step_site(
            window, model, spec, uniforms, prev_outcome=prev, recent_outcomes=recent
        )
        rows.append((outcome, e, s))
        prev = outcome
        recent = (recent + (outcome,))[-4:]
    return rows


class TestTypes:
    def test_terms_and_quantum_weight(self):
        spec = IsingSpec("transverse_field", 1.2, 0.5)
        field, bond = spec.terms
        assert field.ops == ("X",) and field.quantum_weight == 1
        assert bond.ops == ("Z", "Z") and bond.quantum_weight == 0
        cfield, cbond = IsingSpec("classical_field", 1.2, 0.5).terms
        assert cfield.ops == ("Z",) and cfield.quantum_weight == 0
        assert cbond.quantum_weight == 0

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            SweepConfig(n=1, num_sites=10, burn_in=10)
        with pytest.raises(ValidationError):
            SweepConfig(n=9, num_sites=10, burn_in=0, window_extra=1)
        with pytest.raises(ValidationError):
            IsingSpec("transverse_field", 1.0, -0.1)

    def test_family_kind_compat(self):
        model = ConditionalModel("classical", 0, [0.0, 0.0])
        with pytest.raises(ValidationError):
            run_sweep(model, IsingSpec("transverse_field", 1.0, 0.0), SweepConfig(n=0, num_sites=10, burn_in=0))

    def test_uniform_stream_is_counter_based(self):
        stream = prng.uniform_stream(42, 100)
        assert all(0.0 <= u < 1.0 for u in stream)
        assert prng.site_uniform(42, 17) == stream[17]
        assert np.array_equal(prng.uniform_stream(42, 30, start=70), stream[70:])
        assert not np.array_equal(prng.uniform_stream(43, 100), stream)


class TestStepSite:
    def test_classical_copy_chain(self):
        # near-deterministic copy conditional: P(i|j) ~ delta_ij
        logits = np.array([[30.0, -30.0], [-30.0, 30.0]]).reshape(-1)
        model = ConditionalModel("classical", 1, logits)
        spec = IsingSpec("classical_field", 0.7, 1.0)
        window = cold_window("classical", 1)
        uniforms = iter(prng.uniform_stream(0, 5))
        for _ in range(5):
            window, outcome, e, s = step_site(window, model, spec, uniforms)
            assert outcome == 0
            assert e == pytest.approx(0.7 - 1.0, abs=1e-10)
            assert abs(s) <= 1e-10

    def test_pure_product_model(self):
        params = np.zeros((2, 2, 2))
        params[0, :, 0] = 1.0  # psi(.|j) = (1, 0) for both contexts
        model = ConditionalModel("pure", 1, params.reshape(-1))
        spec = IsingSpec("transverse_field", 1.3, 0.0)
        window = cold_window("pure", 1)
        window, outcome, e, s = step_site(window, model, spec, iter([0.2]))
        assert outcome == 0
        assert e == pytest.approx(-1.0, abs=1e-12)  # <X>=0, <ZZ>=1
        assert s == 0.0

    def test_mixed_branch_enumeration(self, rng):
        # probability-weighted branch statistics match deterministic enumeration
        model = random_valid_mixed(rng, 2)
        spec = IsingSpec("transverse_field", 0.9, 1.0)
        op = build_reconstruction(model)
        from robust_vmc.decomp import apply_reconstruction

        window = cold_window("mixed", 2)
        uniforms = iter(prng.uniform_stream(5, 40))
        for _ in range(10):  # walk to a generic window
            window, *_ = step_site(window, model, spec, uniforms)
        ext = apply_reconstruction(op, window)
        diag = ext.data.diagonal().real
        p0 = float(diag[0::2].sum())
        stats = {}
        for branch, u in ((0, 0.0), (1, min(p0 + 1e-9, 1.0 - 1e-12))):
            w2, outcome, e, s = step_site(window, model, spec, iter([u]))
            assert outcome == branch
            w3, _, e_next, s_next = step_site(w2, model, spec, iter([0.0]))
            stats[branch] = (e_next, s_next)
        p1 = 1.0 - p0
        avg_e = p0 * stats[0][0] + p1 * stats[1][0]
        # enumeration oracle: extend twice treating the un-measured spin as a
        # spectator, then read the same estimator off the larger cluster
        from robust_vmc.chainsim import _extend_reference, _site_energy_reference

        ext2 = _extend_reference(op, ext, extra=1)
        e_enum = _site_energy_reference(ext2, spec, 0)
        # the big-cluster estimator acts on spins (1,2) of ext2's 4-spin state;
        # branch energies act on spins (0,1) after the oldest was measured out
        from robust_vmc.qmath import PauliString, pauli_expectation

        x_enum = pauli_expectation(ext2, PauliString(("I", "X", "I", "I")))
        zz_enum = pauli_expectation(ext2, PauliString(("I", "Z", "Z", "I")))
        assert avg_e == pytest.approx(spec.alpha * x_enum - zz_enum, abs=1e-10)

    def test_window_size_checked(self, rng):
        model = random_model(rng, "classical", 1)
        spec = IsingSpec("classical_field", 0.5, 1.0)
        with pytest.raises(ValidationError):
            step_site(cold_window("classical", 0), model, spec, iter([0.1]))


class TestRunSweep:
    def test_exact_classical_matches_transfer_matrix(self):
        model = exact_classical_conditionals(0.5, 3.0)
        spec = IsingSpec("classical_field", 0.5, 3.0)
        cfg = SweepConfig(n=1, num_sites=100_000, burn_in=1000, seed=7)
        res = run_sweep(model, spec, cfg)
        F, S = classical_transfer_matrix(0.5, 3.0)
        assert abs(res.free_energy - F) <= 3 * res.stderr_free_energy
        assert abs(res.mean_entropy - S) <= 3 * res.stderr_entropy

    def test_pure_mean_field_fixed_point(self):
        phi, e_star = pure_mean_field_scan(1.0)
        params = np.zeros((2, 1, 2))
        params[0, 0, 0] = np.cos(phi)
        params[1, 0, 0] = np.sin(phi)
        model = ConditionalModel("pure", 0, params.reshape(-1))
        spec = IsingSpec("transverse_field", 1.0, 0.0)
        res = run_sweep(model, spec, SweepConfig(n=0, num_sites=100_000, burn_in=1000, seed=3))
        assert abs(res.mean_energy - e_star) <= 3 * res.stderr_energy

    def test_bit_exact_determinism(self, rng):
        model = random_valid_mixed(rng, 1)
        spec = IsingSpec("transverse_field", 1.15, 1.0)
        cfg = SweepConfig(n=1, num_sites=5_000, burn_in=100, seed=9)
        a = run_sweep(model, spec, cfg, capture_per_site=True)
        b = run_sweep(model, spec, cfg, capture_per_site=True)
        assert a.free_energy == b.free_energy
        assert a.stderr_free_energy == b.stderr_free_energy
        assert np.array_equal(a.outcomes, b.outcomes)
        assert np.array_equal(a.per_site.site_energy, b.per_site.site_energy)

    def test_free_energy_consistency(self, rng):
        model = random_valid_mixed(rng, 1)
        spec = IsingSpec("transverse_field", 1.0, 0.7)
        res = run_sweep(model, spec, SweepConfig(n=1, num_sites=2_000, burn_in=100, seed=1))
        assert res.free_energy == pytest.approx(
            res.mean_energy - spec.temperature * res.mean_entropy, abs=1e-12
        )
        assert res.stderr_free_energy >= 0

    @pytest.mark.parametrize("kind,family,T", [
        ("classical", "classical_field", 2.0),
        ("pure", "transverse_field", 0.0),
        ("mixed", "transverse_field", 1.0),
    ])
    @pytest.mark.parametrize("n,extra", [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)])
    def test_engine_matches_reference(self, rng, kind, family, T, n, extra):
        if kind == "mixed":
            model = random_valid_mixed(rng, n)
        else:
            model = random_model(rng, kind, n)
        spec = IsingSpec(family, 0.8, T)
        cfg = SweepConfig(n=n, num_sites=40, burn_in=0, seed=17, window_extra=extra)
        res = run_sweep(model, spec, cfg, capture_per_site=True)
        ref = reference_sweep(model, spec, cfg)
        for t, (outcome, e, s) in enumerate(ref):
            assert res.per_site.outcome[t] == outcome
            assert res.per_site.site_energy[t] == pytest.approx(e, abs=1e-10)
            assert res.per_site.site_entropy[t] == pytest.approx(s, abs=1e-10)

    def test_outcome_windows_match_stationary_distribution(self):
        model = exact_classical_conditionals(0.5, 3.0)
        spec = IsingSpec("classical_field", 0.5, 3.0)
        res = run_sweep(model, spec, SweepConfig(n=1, num_sites=100_000, burn_in=1000, seed=13))
        bits = res.outcomes[1000:]
        triples = bits[:-2].astype(int) * 4 + bits[1:-1].astype(int) * 2 + bits[2:].astype(int)
        counts = np.bincount(triples, minlength=8)
        P = build_reconstruction(model).matrix
        evals, evecs = np.linalg.eig(P)
        pi = np.real(evecs[:, np.argmin(np.abs(evals - 1))])
        pi /= pi.sum()
        probs = np.array(
            [pi[a] * P[b, a] * P[c, b] for a in range(2) for b in range(2) for c in range(2)]
        )
        total = counts.sum()
        for k in range(8):
            sigma = np.sqrt(total * probs[k] * (1 - probs[k]))
            assert abs(counts[k] - total * probs[k]) <= 4 * sigma

    def test_every_site_counted_once(self, rng):
        model = random_model(rng, "classical", 1)
        spec = IsingSpec("classical_field", 0.3, 1.5)
        cfg = SweepConfig(n=1, num_sites=500, burn_in=0, seed=2)
        res = run_sweep(model, spec, cfg, capture_per_site=True)
        assert res.per_site.site.size == 500
        assert res.outcomes.size == 500

    def test_estimator_quantum_weight_discipline(self):
        # the only non-computational-basis factor is a single X inside the
        # surviving cluster, on the spin about to be measured out
        from robust_vmc.qmath import PauliString

        m = 3
        ops = ["I"] * (m + 1)
        ops[0] = "X"
        field = PauliString(tuple(ops))
        assert field.quantum_weight == 1
        ops = ["I"] * (m + 1)
        ops[0] = "Z"
        ops[1] = "Z"
        assert PauliString(tuple(ops)).quantum_weight == 0


class TestReplay:
    def test_identity_replay_bit_exact(self, rng):
        model = random_valid_mixed(rng, 2)
        spec = IsingSpec("transverse_field", 1.15, 0.5)
        cfg = SweepConfig(n=2, num_sites=3_000, burn_in=200, seed=21)
        res = run_sweep(model, spec, cfg, capture_per_site=True)
        rep = replay_sweep(model, spec, cfg, freeze_outcomes(res), capture_per_site=True)
        assert rep.free_energy == res.free_energy
        assert rep.mean_entropy == res.mean_entropy
        assert rep.stderr_free_energy == res.stderr_free_energy
        assert np.array_equal(rep.per_site.site_energy, res.per_site.site_energy)

    def test_small_perturbation_is_continuous(self):
        model = exact_classical_conditionals(0.5, 3.0)
        spec = IsingSpec("classical_field", 0.5, 3.0)
        cfg = SweepConfig(n=1, num_sites=5_000, burn_in=500, seed=4)
        res = run_sweep(model, spec, cfg)
        record = freeze_outcomes(res)
        base = replay_sweep(model, spec, cfg, record).free_energy
        bumped = np.array(model.params)
        bumped[0] += 1e-6
        moved = replay_sweep(ConditionalModel("classical", 1, bumped), spec, cfg, record).free_energy
        assert 0 < abs(moved - base) < 1e-4

    def test_inconsistent_record_degenerates(self):
        logits = np.array([[30.0, -30.0], [-30.0, 30.0]]).reshape(-1)  # copy chain
        model = ConditionalModel("classical", 1, logits)
        spec = IsingSpec("classical_field", 0.5, 1.0)
        cfg = SweepConfig(n=1, num_sites=100, burn_in=0, seed=0)
        record = np.zeros(100, dtype=np.uint8)
        record[50] = 1  # impossible under the copy chain started from zeros
        with pytest.raises(ReplayDegeneracyError) as err:
            replay_sweep(model, spec, cfg, record)
        assert err.value.site == 50

    def test_record_length_checked(self, rng):
        model = random_model(rng, "classical", 1)
        spec = IsingSpec("classical_field", 0.5, 1.0)
        cfg = SweepConfig(n=1, num_sites=100, burn_in=0, seed=0)
        with pytest.raises(ValidationError):
            replay_sweep(model, spec, cfg, np.zeros(99, dtype=np.uint8))


class TestEntropyEstimator:
    def test_matches_transfer_matrix_entropy(self):
        model = exact_classical_conditionals(0.5, 3.0)
        spec = IsingSpec("classical_field", 0.5, 3.0)
        res = run_sweep(model, spec, SweepConfig(n=1, num_sites=100_000, burn_in=1000, seed=29))
        _, S = classical_transfer_matrix(0.5, 3.0)
        assert abs(res.mean_entropy - S) <= 3 * res.stderr_entropy

    def test_window_extra_keeps_energy_unbiased(self, rng):
        model = random_valid_mixed(rng, 1)
        spec = IsingSpec("transverse_field", 1.15, 1.0)
        base = run_sweep(model, spec, SweepConfig(n=1, num_sites=60_000, burn_in=1000, seed=31))
        wide = run_sweep(
            model, spec, SweepConfig(n=1, num_sites=60_000, burn_in=1000, seed=31, window_extra=1)
        )
        tol = 4 * np.hypot(base.stderr_energy, wide.stderr_energy)
        assert abs(base.mean_energy - wide.mean_energy) <= tol


def test_site_trace_csv(tmp_path, rng):
    model = random_model(rng, "classical", 1)
    spec = IsingSpec("classical_field", 0.3, 1.5)
    res = run_sweep(model, spec, SweepConfig(n=1, num_sites=50, burn_in=0, seed=2), capture_per_site=True)
    path = tmp_path / "trace.csv"
    write_site_trace(res, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "site,outcome,site_energy,site_entropy"
    assert len(lines) == 51
    res_no_trace = run_sweep(model, spec, SweepConfig(n=1, num_sites=50, burn_in=0, seed=2))
    with pytest.raises(ValidationError):
        write_site_trace(res_no_trace, tmp_path / "x.csv")
