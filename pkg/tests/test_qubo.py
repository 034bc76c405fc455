import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsc.errors import DimensionError, DomainError, FormatError, NormalizationError
from qsc.qubo import (
    QuboProblem,
    as_binary_code,
    qubo_energy,
    read_qubo,
    sc_energy,
    text_to_qubo,
    to_qubo,
    write_qubo,
)


def unit_dictionary(rng, d, n):
    atoms = rng.normal(size=(d, n))
    return atoms / np.linalg.norm(atoms, axis=0)


def all_states(n):
    for i in range(1 << n):
        yield np.array([(i >> (n - 1 - j)) & 1 for j in range(n)], dtype=np.uint8)


class TestToQubo:
    def test_orthonormal_dictionary_signal_equals_atom(self):
        atoms = np.eye(5)[:, :4]  # orthonormal columns
        x = atoms[:, 0]
        p = to_qubo(atoms, x, lam=0.0)
        expected_h = np.array([-0.5, 0.5, 0.5, 0.5])
        np.testing.assert_allclose(p.h, expected_h, atol=1e-12)
        np.testing.assert_allclose(p.Q, np.zeros((4, 4)), atol=1e-12)
        assert p.const_offset == pytest.approx(0.5)

    def test_zero_signal_bias_is_lam_plus_half(self):
        rng = np.random.default_rng(0)
        atoms = unit_dictionary(rng, 12, 6)
        p = to_qubo(atoms, np.zeros(12), lam=0.9)
        np.testing.assert_allclose(p.h, np.full(6, 1.4), atol=1e-12)

    def test_rejects_non_unit_dictionary(self):
        atoms = np.eye(4) * 2.0
        with pytest.raises(NormalizationError):
            to_qubo(atoms, np.ones(4), lam=0.1)

    def test_rejects_dimension_mismatch(self):
        rng = np.random.default_rng(1)
        atoms = unit_dictionary(rng, 8, 3)
        with pytest.raises(DimensionError):
            to_qubo(atoms, np.ones(9), lam=0.1)

    def test_diagonal_zero_and_symmetric(self):
        rng = np.random.default_rng(2)
        atoms = unit_dictionary(rng, 10, 7)
        p = to_qubo(atoms, rng.normal(size=10), lam=0.3)
        assert np.all(np.diagonal(p.Q) == 0.0)
        assert np.array_equal(p.Q, p.Q.T)


class TestEnergies:
    def test_zero_state_energy_zero(self):
        rng = np.random.default_rng(3)
        atoms = unit_dictionary(rng, 9, 5)
        p = to_qubo(atoms, rng.normal(size=9), lam=0.4)
        assert qubo_energy(p, np.zeros(5)) == 0.0

    def test_single_active_unit_gives_bias(self):
        rng = np.random.default_rng(4)
        atoms = unit_dictionary(rng, 9, 5)
        p = to_qubo(atoms, rng.normal(size=9), lam=0.4)
        for k in range(5):
            e = np.zeros(5)
            e[k] = 1
            assert qubo_energy(p, e) == pytest.approx(p.h[k], abs=1e-12)

    def test_pair_energy(self):
        rng = np.random.default_rng(5)
        atoms = unit_dictionary(rng, 9, 5)
        p = to_qubo(atoms, rng.normal(size=9), lam=0.4)
        a = np.zeros(5)
        a[1] = a[3] = 1
        assert qubo_energy(p, a) == pytest.approx(p.h[1] + p.h[3] + p.Q[1, 3], abs=1e-12)

    def test_sc_energy_zero_code(self):
        rng = np.random.default_rng(6)
        atoms = unit_dictionary(rng, 9, 5)
        x = rng.normal(size=9)
        assert sc_energy(atoms, x, np.zeros(5), 0.3) == pytest.approx(0.5 * x @ x)

    def test_sc_energy_perfect_single_atom(self):
        rng = np.random.default_rng(7)
        atoms = unit_dictionary(rng, 9, 5)
        e1 = np.zeros(5)
        e1[0] = 1
        assert sc_energy(atoms, atoms[:, 0], e1, 0.7) == pytest.approx(0.7, abs=1e-12)

    def test_non_binary_code_rejected(self):
        rng = np.random.default_rng(8)
        atoms = unit_dictionary(rng, 9, 5)
        p = to_qubo(atoms, rng.normal(size=9), lam=0.4)
        with pytest.raises(DomainError):
            qubo_energy(p, np.array([0, 1, 2, 0, 1]))
        with pytest.raises(DimensionError):
            qubo_energy(p, np.zeros(4))


class TestEnergyEquivalence:
    """sc_energy - qubo_energy == 0.5*||X||^2 for every binary state."""

    def test_exhaustive_small_instance(self):
        rng = np.random.default_rng(9)
        atoms = unit_dictionary(rng, 14, 8)
        x = rng.normal(size=14)
        lam = 0.7
        p = to_qubo(atoms, x, lam)
        for a in all_states(8):
            lhs = sc_energy(atoms, x, a, lam) - qubo_energy(p, a)
            assert lhs == pytest.approx(p.const_offset, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 5.0))
    def test_identity_random_instances(self, seed, lam):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(3, 30))
        n = int(rng.integers(1, 12))
        atoms = unit_dictionary(rng, d, n)
        x = rng.normal(size=d) * rng.uniform(0.1, 3.0)
        p = to_qubo(atoms, x, lam)
        a = rng.integers(0, 2, size=n).astype(np.uint8)
        diff = sc_energy(atoms, x, a, lam) - qubo_energy(p, a)
        assert diff == pytest.approx(p.const_offset, abs=1e-9)

    def test_sampled_at_47_atoms(self):
        rng = np.random.default_rng(10)
        atoms = unit_dictionary(rng, 36, 47)
        x = rng.uniform(0, 1, size=36)
        lam = 0.7
        p = to_qubo(atoms, x, lam)
        for _ in range(1000):
            a = rng.integers(0, 2, size=47).astype(np.uint8)
            diff = sc_energy(atoms, x, a, lam) - qubo_energy(p, a)
            assert abs(diff - p.const_offset) < 1e-9


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        atoms = unit_dictionary(rng, 10, 6)
        p = to_qubo(atoms, rng.normal(size=10), lam=1.3)
        path = tmp_path / "problem.qubo"
        write_qubo(p, path)
        q = read_qubo(path)
        assert q.n_vars == p.n_vars
        assert q.lam == p.lam
        assert q.const_offset == p.const_offset
        np.testing.assert_array_equal(q.h, p.h)
        np.testing.assert_array_equal(q.Q, p.Q)

    def test_header_format(self):
        p = QuboProblem(h=np.array([0.25]), Q=np.zeros((1, 1)), lam=0.5,
                        const_offset=2.0)
        from qsc.qubo import qubo_to_text

        lines = qubo_to_text(p).splitlines()
        assert lines[0].split()[0] == "1"
        assert float(lines[0].split()[1]) == 0.5

    def test_bad_text_rejected(self):
        with pytest.raises(FormatError):
            text_to_qubo("")
        with pytest.raises(FormatError):
            text_to_qubo("2 0.5\n")


class TestValidation:
    def test_asymmetric_q_rejected(self):
        q = np.zeros((2, 2))
        q[0, 1] = 1.0
        with pytest.raises(DomainError):
            QuboProblem(h=np.zeros(2), Q=q, lam=0.0, const_offset=0.0)

    def test_nonzero_diagonal_rejected(self):
        q = np.eye(2)
        with pytest.raises(DomainError):
            QuboProblem(h=np.zeros(2), Q=q, lam=0.0, const_offset=0.0)

    def test_as_binary_code_uint8_passthrough(self):
        a = np.array([0, 1, 1], dtype=np.uint8)
        assert as_binary_code(a, 3) is a
