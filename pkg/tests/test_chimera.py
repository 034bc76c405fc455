import numpy as np
import pytest

from qsc.chimera import (
    HORIZONTAL,
    VERTICAL,
    chains_connected,
    chains_disjoint,
    chimera_graph,
    clique_edges_covered,
    default_chain_strength,
    embed_clique,
    embed_qubo,
    max_native_clique,
    read_embedding,
    text_to_embedding,
    unembed,
    validate_clique_embedding,
    write_embedding,
)
from qsc.errors import ConsistencyError, DomainError, EmbeddingError
from qsc.qubo import QuboProblem
from qsc.solvers import SolutionSpectrum, solve_exhaustive


def random_problem(rng, n, scale=1.0):
    h = rng.uniform(-scale, scale, size=n)
    q = rng.uniform(-scale, scale, size=(n, n))
    q = 0.5 * (q + q.T)
    np.fill_diagonal(q, 0.0)
    return QuboProblem(h=h, Q=q, lam=0.0, const_offset=0.0)


class TestGraph:
    def test_single_cell_counts(self):
        g = chimera_graph(1, 1, 4)
        assert g.n_qubits == 8
        assert g.n_edges == 16  # complete bipartite K_{4,4}

    def test_full_grid_counts(self):
        g = chimera_graph(12, 12, 4)
        assert g.n_qubits == 1152
        assert max(g.degree(q) for q in g.qubits()) == 6

    def test_two_by_one_edge_count(self):
        g = chimera_graph(2, 1, 4)
        assert g.n_qubits == 16
        # 32 intra-cell edges + 4 vertical inter-cell couplers
        assert g.n_edges == 36

    def test_interior_qubits_reach_degree_six(self):
        g = chimera_graph(3, 3, 4)
        center_v = g.qubit_id(1, 1, VERTICAL, 0)
        center_h = g.qubit_id(1, 1, HORIZONTAL, 2)
        assert g.degree(center_v) == 6
        assert g.degree(center_h) == 6

    def test_degree_bound_everywhere(self):
        g = chimera_graph(4, 3, 4)
        assert all(g.degree(q) <= 6 for q in g.qubits())

    def test_orientation_rules(self):
        g = chimera_graph(2, 2, 4)
        v = g.qubit_id(0, 0, VERTICAL, 1)
        # vertical couples down to same shore index, same column
        assert g.has_edge(v, g.qubit_id(1, 0, VERTICAL, 1))
        assert not g.has_edge(v, g.qubit_id(1, 0, VERTICAL, 2))
        assert not g.has_edge(v, g.qubit_id(0, 1, VERTICAL, 1))
        h = g.qubit_id(0, 0, HORIZONTAL, 3)
        assert g.has_edge(h, g.qubit_id(0, 1, HORIZONTAL, 3))
        assert not g.has_edge(h, g.qubit_id(1, 0, HORIZONTAL, 3))

    def test_disabled_qubits_removed(self):
        dead = {3, 17}
        g = chimera_graph(2, 2, 4, disabled=dead)
        assert g.n_qubits == 30
        assert all(q not in g.qubits() for q in dead)
        assert all(q not in g.neighbors(p) for q in dead for p in g.qubits())

    def test_disabled_out_of_range(self):
        with pytest.raises(DomainError):
            chimera_graph(1, 1, 4, disabled={99})

    def test_coords_round_trip(self):
        g = chimera_graph(3, 5, 4)
        for q in (0, 17, 59, 119):
            r, c, o, k = g.coords(q)
            assert g.qubit_id(r, c, o, k) == q


class TestCliqueEmbedding:
    def test_k4_on_single_cell(self):
        g = chimera_graph(1, 1, 4)
        e = embed_clique(4, g)
        assert all(len(chain) == 2 for chain in e.chains.values())
        for chain in e.chains.values():
            orients = {g.coords(q)[2] for q in chain}
            assert orients == {VERTICAL, HORIZONTAL}
        validate_clique_embedding(e, g)

    def test_47_clique_on_full_graph(self):
        g = chimera_graph(12, 12, 4)
        e = embed_clique(47, g)
        assert e.n_logical == 47
        assert all(len(chain) == 13 for chain in e.chains.values())
        assert chains_disjoint(e)
        assert chains_connected(e, g)
        assert clique_edges_covered(e, g)  # all 1081 pairs

    def test_capacity_error_reports_max(self):
        g = chimera_graph(12, 12, 4)
        with pytest.raises(EmbeddingError, match="max achievable n = 48"):
            embed_clique(200, g)

    def test_max_native_clique(self):
        assert max_native_clique(chimera_graph(12, 12, 4)) == 48
        assert max_native_clique(chimera_graph(1, 1, 4)) == 4
        assert max_native_clique(chimera_graph(2, 2, 4)) == 8

    def test_defect_breaks_construction(self):
        # shore 0's vertical qubit in the only cell is on every chain the
        # triangle construction would build, so no clique fits at all
        g = chimera_graph(1, 1, 4, disabled={0})
        with pytest.raises(EmbeddingError):
            embed_clique(4, g)
        assert max_native_clique(g) == 0

    def test_defect_outside_triangle_is_harmless(self):
        g2 = chimera_graph(2, 2, 4)
        # cell (0, 1) is untouched by the construction on a 2x2 grid
        dead = g2.qubit_id(0, 1, VERTICAL, 0)
        g = chimera_graph(2, 2, 4, disabled={dead})
        assert max_native_clique(g) == 8
        validate_clique_embedding(embed_clique(8, g), g)


class TestEmbedQubo:
    def test_single_variable_identity(self):
        g = chimera_graph(1, 1, 4)
        e = embed_clique(1, g, chain_strength=1.0)
        # one chain of 2 qubits: bias split, one ferromagnetic edge
        p = QuboProblem(h=np.array([0.8]), Q=np.zeros((1, 1)), lam=0.0,
                        const_offset=0.25)
        pp = embed_qubo(p, e, g)
        assert pp.n_vars == 2
        np.testing.assert_allclose(pp.h, [0.4 + 1.0, 0.4 + 1.0])
        np.testing.assert_allclose(pp.Q[0, 1], -2.0)
        assert pp.const_offset == 0.25
        # aligned states reproduce logical energies exactly
        assert pp.h @ np.ones(2) + pp.Q[0, 1] == pytest.approx(0.8)

    def test_two_singleton_chains_coupling(self):
        g = chimera_graph(1, 1, 4)
        e_manual = type(embed_clique(1, g))(
            chains={0: (g.qubit_id(0, 0, VERTICAL, 0),),
                    1: (g.qubit_id(0, 0, HORIZONTAL, 0),)},
            chain_strength=1.0)
        q = np.array([[0.0, 0.7], [0.7, 0.0]])
        p = QuboProblem(h=np.zeros(2), Q=q, lam=0.0, const_offset=0.0)
        pp = embed_qubo(p, e_manual, g)
        assert pp.n_vars == 2
        np.testing.assert_allclose(pp.h, [0.0, 0.0])
        assert pp.Q[0, 1] == pytest.approx(0.7)

    def test_misaligned_chain_costs_strength(self):
        g = chimera_graph(1, 1, 4)
        e = embed_clique(1, g, chain_strength=3.0)
        p = QuboProblem(h=np.array([0.0]), Q=np.zeros((1, 1)), lam=0.0,
                        const_offset=0.0)
        pp = embed_qubo(p, e, g)
        from qsc.qubo import qubo_energy

        assert qubo_energy(pp, np.array([1, 0])) == pytest.approx(3.0)
        assert qubo_energy(pp, np.array([0, 1])) == pytest.approx(3.0)
        assert qubo_energy(pp, np.array([1, 1])) == pytest.approx(0.0)
        assert qubo_energy(pp, np.array([0, 0])) == pytest.approx(0.0)

    def test_missing_chain_rejected(self):
        g = chimera_graph(2, 2, 4)
        e = embed_clique(2, g)
        p = random_problem(np.random.default_rng(0), 3)
        with pytest.raises(EmbeddingError):
            embed_qubo(p, e, g)

    def test_default_chain_strength(self):
        p = QuboProblem(h=np.array([2.0, -1.0]),
                        Q=np.array([[0.0, 0.5], [0.5, 0.0]]),
                        lam=0.0, const_offset=0.0)
        assert default_chain_strength(p) == pytest.approx(2.0 * 2.0 * 2)


class TestUnembed:
    def test_unanimous_chains(self):
        g = chimera_graph(2, 2, 4)
        e = embed_clique(3, g, chain_strength=5.0)
        p = random_problem(np.random.default_rng(1), 3)
        pp = embed_qubo(p, e, g)
        spec = solve_exhaustive(pp, keep=4)
        logical = unembed(spec, e, p)
        direct = solve_exhaustive(p, keep=1)
        np.testing.assert_array_equal(logical.ground_state, direct.ground_state)
        assert logical.ground_energy == pytest.approx(direct.ground_energy, abs=1e-9)

    def test_tie_breaks_to_zero(self):
        g = chimera_graph(1, 1, 4)
        e = embed_clique(1, g)  # chain of two qubits
        p = QuboProblem(h=np.array([0.3]), Q=np.zeros((1, 1)), lam=0.0,
                        const_offset=0.0)
        split = SolutionSpectrum(states=np.array([[1, 0]], dtype=np.uint8),
                                 energies=np.array([0.0]), read_count=1)
        logical = unembed(split, e, p)
        assert logical.ground_state[0] == 0

    def test_width_mismatch_rejected(self):
        g = chimera_graph(1, 1, 4)
        e = embed_clique(2, g)
        p = random_problem(np.random.default_rng(2), 2)
        bad = SolutionSpectrum(states=np.zeros((1, 3), dtype=np.uint8),
                               energies=np.zeros(1), read_count=1)
        with pytest.raises(ConsistencyError):
            unembed(bad, e, p)


class TestRoundTrip:
    def test_ground_state_preserved_on_random_problems(self):
        rng = np.random.default_rng(3)
        g = chimera_graph(2, 2, 4)
        for _ in range(5):
            n = int(rng.integers(4, 9))
            p = random_problem(rng, n)
            strength = 2.0 * (np.abs(p.h).sum() + np.abs(np.triu(p.Q, 1)).sum())
            e = embed_clique(n, g, chain_strength=strength)
            pp = embed_qubo(p, e, g)
            physical = solve_exhaustive(pp, keep=8)
            logical = unembed(physical, e, p)
            direct = solve_exhaustive(p, keep=1)
            assert logical.ground_energy == pytest.approx(direct.ground_energy,
                                                          abs=1e-9)
            np.testing.assert_array_equal(logical.ground_state,
                                          direct.ground_state)


class TestSerialization:
    def test_text_round_trip(self, tmp_path):
        g = chimera_graph(2, 2, 4)
        e = embed_clique(5, g, chain_strength=2.5)
        path = tmp_path / "embedding.txt"
        write_embedding(e, path)
        back = read_embedding(path, chain_strength=2.5)
        assert back.chains == e.chains
        assert back.chain_strength == 2.5

    def test_line_format(self):
        e = text_to_embedding("0: 1 2 3\n1: 4 5\n")
        assert e.chains == {0: (1, 2, 3), 1: (4, 5)}
