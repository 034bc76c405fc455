import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsc.errors import CapacityError, DomainError
from qsc.qubo import QuboProblem, qubo_energy, to_qubo
from qsc.solvers import (
    AnnealConfig,
    anneal_ground_batch,
    make_encoder,
    matching_pursuit,
    solve_annealed,
    solve_exhaustive,
    spectrum_to_csv,
)


def random_problem(rng, n, scale=1.0):
    h = rng.uniform(-scale, scale, size=n)
    q = rng.uniform(-scale, scale, size=(n, n))
    q = 0.5 * (q + q.T)
    np.fill_diagonal(q, 0.0)
    return QuboProblem(h=h, Q=q, lam=0.0, const_offset=0.0)


def brute_force_ground(p):
    """Independent oracle: plain python loop, no shared code path."""
    n = p.n_vars
    best_e, best_state = None, None
    for i in range(2 ** n):
        bits = [(i >> (n - 1 - j)) & 1 for j in range(n)]
        e = 0.0
        for j in range(n):
            if bits[j]:
                e += p.h[j]
                for k in range(j + 1, n):
                    if bits[k]:
                        e += p.Q[j, k]
        if best_e is None or e < best_e - 1e-15:
            best_e, best_state = e, bits
    return best_e, np.array(best_state, dtype=np.uint8)


TWO_VAR = QuboProblem(h=np.array([1.0, 1.0]),
                      Q=np.array([[0.0, 1.0], [1.0, 0.0]]),
                      lam=0.0, const_offset=0.0)


class TestExhaustive:
    def test_two_variable_hand_enumeration(self):
        spec = solve_exhaustive(TWO_VAR, keep=4)
        states = ["".join(map(str, s)) for s in spec.states]
        assert states == ["00", "01", "10", "11"]
        np.testing.assert_allclose(spec.energies, [0.0, 1.0, 1.0, 3.0])

    def test_zero_signal_ground_state_all_zeros(self):
        rng = np.random.default_rng(0)
        atoms = rng.normal(size=(9, 6))
        atoms /= np.linalg.norm(atoms, axis=0)
        p = to_qubo(atoms, np.zeros(9), lam=0.4)
        spec = solve_exhaustive(p, keep=1)
        assert spec.ground_energy == 0.0
        assert spec.ground_state.sum() == 0

    def test_matches_independent_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            p = random_problem(rng, 12)
            spec = solve_exhaustive(p, keep=3)
            oracle_e, oracle_state = brute_force_ground(p)
            assert spec.ground_energy == pytest.approx(oracle_e, abs=1e-9)
            np.testing.assert_array_equal(spec.ground_state, oracle_state)

    def test_capacity_cap(self):
        p = random_problem(np.random.default_rng(2), 26)
        with pytest.raises(CapacityError):
            solve_exhaustive(p)

    def test_energies_reevaluate(self):
        rng = np.random.default_rng(3)
        p = random_problem(rng, 10)
        spec = solve_exhaustive(p, keep=16)
        for s, e in zip(spec.states, spec.energies):
            assert abs(e - qubo_energy(p, s)) < 1e-9
        assert np.all(np.diff(spec.energies) >= 0)

    def test_no_duplicate_states(self):
        rng = np.random.default_rng(4)
        p = random_problem(rng, 8)
        spec = solve_exhaustive(p, keep=50)
        seen = {s.tobytes() for s in spec.states}
        assert len(seen) == len(spec)


class TestAnnealed:
    def test_tiny_landscape_finds_ground(self):
        cfg = AnnealConfig(reads=50, sweeps=30, seed=1)
        spec = solve_annealed(TWO_VAR, cfg, keep=4)
        assert spec.ground_energy == 0.0
        assert spec.ground_state.sum() == 0

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(5)
        p = random_problem(rng, 15)
        cfg = AnnealConfig(reads=8, sweeps=60, seed=123)
        a = solve_annealed(p, cfg, keep=10)
        b = solve_annealed(p, cfg, keep=10)
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.energies, b.energies)
        assert a.read_count == cfg.reads

    def test_oracle_agreement_smoke(self):
        # acceptance runs the full 100-instance version
        rng = np.random.default_rng(6)
        cfg = AnnealConfig(reads=64, sweeps=200, seed=7)
        hits = 0
        for _ in range(10):
            p = random_problem(rng, 16)
            if abs(solve_annealed(p, cfg).ground_energy
                   - solve_exhaustive(p).ground_energy) < 1e-9:
                hits += 1
        assert hits >= 9

    def test_annealed_never_beats_exhaustive(self):
        rng = np.random.default_rng(7)
        cfg = AnnealConfig(reads=4, sweeps=20, seed=3)
        for _ in range(5):
            p = random_problem(rng, 10)
            assert (solve_annealed(p, cfg).ground_energy
                    >= solve_exhaustive(p).ground_energy - 1e-9)

    def test_energies_reevaluate_and_sorted(self):
        rng = np.random.default_rng(8)
        p = random_problem(rng, 12)
        spec = solve_annealed(p, AnnealConfig(reads=16, sweeps=80, seed=0), keep=30)
        for s, e in zip(spec.states, spec.energies):
            assert abs(e - qubo_energy(p, s)) < 1e-9
        assert np.all(np.diff(spec.energies) >= 0)
        seen = {s.tobytes() for s in spec.states}
        assert len(seen) == len(spec)

    def test_config_validation(self):
        with pytest.raises(DomainError):
            AnnealConfig(reads=0)
        with pytest.raises(DomainError):
            AnnealConfig(t_hot=0.1, t_cold=0.5)
        with pytest.raises(DomainError):
            AnnealConfig(sweeps=0)


class TestAnnealGroundBatch:
    def test_matches_solve_annealed_per_signal(self):
        rng = np.random.default_rng(9)
        atoms = rng.normal(size=(12, 9))
        atoms /= np.linalg.norm(atoms, axis=0)
        signals = rng.uniform(0, 1, size=(6, 12))
        lam = 0.6
        cfg = AnnealConfig(reads=8, sweeps=60, seed=100)
        h_rows = -(signals @ atoms) + lam + 0.5
        q = to_qubo(atoms, signals[0], lam).Q
        seeds = 100 + np.arange(6) * 4096
        states, energies = anneal_ground_batch(h_rows, q, cfg, seeds)
        for i in range(6):
            p = to_qubo(atoms, signals[i], lam)
            ref = solve_annealed(
                p, AnnealConfig(reads=8, sweeps=60, seed=int(seeds[i])), keep=1)
            np.testing.assert_array_equal(states[i], ref.ground_state)
            assert energies[i] == pytest.approx(ref.ground_energy, abs=1e-9)


class TestMatchingPursuit:
    def setup_method(self):
        rng = np.random.default_rng(10)
        self.atoms = rng.normal(size=(20, 8))
        self.atoms /= np.linalg.norm(self.atoms, axis=0)

    def test_exact_atom_recovered_in_one_step(self):
        a = matching_pursuit(self.atoms, self.atoms[:, 3], k_max=5)
        expected = np.zeros(8, dtype=np.uint8)
        expected[3] = 1
        np.testing.assert_array_equal(a, expected)

    def test_zero_signal_empty_code(self):
        a = matching_pursuit(self.atoms, np.zeros(20), k_max=5)
        assert a.sum() == 0

    def test_sparsity_bounded_by_k_max(self):
        rng = np.random.default_rng(11)
        for k in (1, 2, 4):
            a = matching_pursuit(self.atoms, rng.normal(size=20) * 3, k_max=k)
            assert a.sum() <= k

    def test_residual_strictly_decreasing(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=20) * 2
        # replay the greedy loop, checking the residual norm falls each step
        residual = x.copy()
        a = np.zeros(8, dtype=np.uint8)
        norms = [np.linalg.norm(residual)]
        for _ in range(8):
            gains = self.atoms.T @ residual - 0.5
            gains[a == 1] = -np.inf
            i = int(np.argmax(gains))
            if gains[i] <= 0:
                break
            a[i] = 1
            residual -= self.atoms[:, i]
            norms.append(np.linalg.norm(residual))
        assert all(b < a for a, b in zip(norms, norms[1:]))
        np.testing.assert_array_equal(a, matching_pursuit(self.atoms, x, k_max=8))

    def test_k_max_cap(self):
        with pytest.raises(DomainError):
            matching_pursuit(self.atoms, np.zeros(20), k_max=9)


class TestSpectrumCsv:
    def test_format(self):
        spec = solve_exhaustive(TWO_VAR, keep=2)
        text = spectrum_to_csv(spec)
        lines = text.strip().splitlines()
        assert lines[0] == "rank,energy,bitstring"
        assert lines[1].startswith("0,") and lines[1].endswith(",00")


class TestEncoders:
    def test_exhaustive_encoder(self):
        rng = np.random.default_rng(13)
        atoms = rng.normal(size=(10, 5))
        atoms /= np.linalg.norm(atoms, axis=0)
        enc = make_encoder("exhaustive", keep=4)
        spec = enc(atoms, atoms[:, 2] * 1.5, 0.1)
        assert len(spec) == 4
        assert spec.ground_state[2] == 1

    def test_mp_encoder_single_state(self):
        rng = np.random.default_rng(14)
        atoms = rng.normal(size=(10, 5))
        atoms /= np.linalg.norm(atoms, axis=0)
        enc = make_encoder("mp", mp_k=3)
        spec = enc(atoms, atoms[:, 1], 0.2)
        assert len(spec) == 1
        assert spec.ground_state[1] == 1

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            make_encoder("tabu")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_monotone_sparsity_in_lambda(seed):
    """Ground-state active count never increases with lambda (exhaustive)."""
    rng = np.random.default_rng(seed)
    d, n = 10, 8
    atoms = rng.normal(size=(d, n))
    atoms /= np.linalg.norm(atoms, axis=0)
    x = rng.normal(size=d) * rng.uniform(0.5, 2.0)
    counts = []
    for lam in (0.0, 0.3, 0.8, 1.5, 3.0):
        spec = solve_exhaustive(to_qubo(atoms, x, lam), keep=1)
        counts.append(int(spec.ground_state.sum()))
    assert all(b <= a for a, b in zip(counts, counts[1:]))
