"""Chimera qubit topology, clique embedding, and chain decoding.

A chimera graph is a rows x cols grid of unit cells, each a complete
bipartite K_{shore,shore} between `shore` vertically oriented and `shore`
horizontally oriented qubits.  Between cells, a vertical qubit couples only
to the vertical qubit at the same shore index in the cells directly above
and below; a horizontal qubit couples only to its counterparts directly
left and right.  Every qubit therefore has degree at most shore + 2 (6 for
the canonical shore of 4).

Dense problems are mapped onto this sparse fabric by *chaining*: each
logical variable owns a connected set of physical qubits held aligned by a
ferromagnetic penalty, which buys all-to-all logical connectivity at the
cost of physical qubits.  :func:`embed_clique` uses the deterministic
triangle construction: logical variable ``t = shore*j + k`` takes the
horizontal wire of shore index ``k`` through row ``j`` (columns 0..j) plus
the vertical wire of shore index ``k`` through column ``j`` (rows
j..groups-1).  The two wires meet in the diagonal cell (j, j), every pair
of chains crosses in some cell, and all chains have length groups + 1,
where groups = ceil(n / shore).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DomainError, EmbeddingError
from .qubo import QuboProblem, qubo_energy
from .solvers import SolutionSpectrum, _build_spectrum

VERTICAL = 0
HORIZONTAL = 1


@dataclass(frozen=True)
class ChimeraGraph:
    """Chimera topology with an optional set of disabled (defective) qubits.

    Qubit ids are linear: ``((row * cols + col) * 2 + orientation) * shore
    + shore_index`` with orientation 0 = vertical, 1 = horizontal.
    """

    rows: int
    cols: int
    shore: int = 4
    disabled: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if min(self.rows, self.cols, self.shore) < 1:
            raise DomainError("rows, cols, shore must all be >= 1")
        total = self.rows * self.cols * 2 * self.shore
        disabled = frozenset(int(q) for q in self.disabled)
        for q in disabled:
            if not (0 <= q < total):
                raise DomainError(f"disabled qubit id {q} out of range [0, {total})")
        object.__setattr__(self, "disabled", disabled)

    def qubit_id(self, row: int, col: int, orientation: int, k: int) -> int:
        return ((row * self.cols + col) * 2 + orientation) * self.shore + k

    def coords(self, q: int) -> tuple[int, int, int, int]:
        k = q % self.shore
        q //= self.shore
        orientation = q % 2
        q //= 2
        return q // self.cols, q % self.cols, orientation, k

    @property
    def n_qubits(self) -> int:
        return self.rows * self.cols * 2 * self.shore - len(self.disabled)

    def qubits(self) -> list[int]:
        total = self.rows * self.cols * 2 * self.shore
        return [q for q in range(total) if q not in self.disabled]

    def enabled(self, q: int) -> bool:
        return 0 <= q < self.rows * self.cols * 2 * self.shore and q not in self.disabled

    def neighbors(self, q: int) -> list[int]:
        if not self.enabled(q):
            return []
        row, col, orientation, k = self.coords(q)
        out = []
        # intra-cell: all qubits of the opposite orientation
        for kk in range(self.shore):
            out.append(self.qubit_id(row, col, 1 - orientation, kk))
        # inter-cell: same orientation, same shore index, adjacent cell
        if orientation == VERTICAL:
            if row > 0:
                out.append(self.qubit_id(row - 1, col, VERTICAL, k))
            if row < self.rows - 1:
                out.append(self.qubit_id(row + 1, col, VERTICAL, k))
        else:
            if col > 0:
                out.append(self.qubit_id(row, col - 1, HORIZONTAL, k))
            if col < self.cols - 1:
                out.append(self.qubit_id(row, col + 1, HORIZONTAL, k))
        return sorted(p for p in out if p not in self.disabled)

    def degree(self, q: int) -> int:
        return len(self.neighbors(q))

    def has_edge(self, p: int, q: int) -> bool:
        return q in self.neighbors(p)

    def edges(self) -> set[tuple[int, int]]:
        out = set()
        for q in self.qubits():
            for p in self.neighbors(q):
                out.add((min(p, q), max(p, q)))
        return out

    @property
    def n_edges(self) -> int:
        return len(self.edges())


def chimera_graph(rows: int, cols: int, shore: int = 4,
                  disabled=()) -> ChimeraGraph:
    """Construct a chimera graph; the defect-free 12x12 grid with shore 4
    has 1152 qubits and maximum degree 6."""
    return ChimeraGraph(rows=rows, cols=cols, shore=shore,
                        disabled=frozenset(disabled))


@dataclass(frozen=True)
class Embedding:
    """Logical-to-physical chain map.

    ``chains[i]`` is the tuple of physical qubit ids representing logical
    variable ``i``.  ``chain_strength`` is the ferromagnetic penalty per
    chain edge; None defers to the problem-dependent default at embed time.
    """

    chains: dict[int, tuple[int, ...]]
    chain_strength: float | None = None

    @property
    def n_logical(self) -> int:
        return len(self.chains)

    def physical_qubits(self) -> tuple[int, ...]:
        """Canonical physical variable order: sorted union of all chains."""
        out: set[int] = set()
        for chain in self.chains.values():
            out.update(chain)
        return tuple(sorted(out))


def _triangle_chains(n: int, g: ChimeraGraph) -> dict[int, tuple[int, ...]]:
    groups = math.ceil(n / g.shore)
    chains = {}
    for t in range(n):
        j, k = divmod(t, g.shore)
        chain = [g.qubit_id(j, c, HORIZONTAL, k) for c in range(j + 1)]
        chain += [g.qubit_id(r, j, VERTICAL, k) for r in range(j, groups)]
        chains[t] = tuple(chain)
    return chains


def _triangle_fits(n: int, g: ChimeraGraph) -> bool:
    if n < 1 or math.ceil(n / g.shore) > min(g.rows, g.cols):
        return False
    chains = _triangle_chains(n, g)
    for chain in chains.values():
        if any(not g.enabled(q) for q in chain):
            return False
        if not _chain_connected(chain, g):
            return False
    return _pairs_covered(chains, g)


def max_native_clique(g: ChimeraGraph) -> int:
    """Largest n for which the triangle construction succeeds on `g`."""
    for n in range(g.shore * min(g.rows, g.cols), 0, -1):
        if _triangle_fits(n, g):
            return n
    return 0


def embed_clique(n: int, g: ChimeraGraph,
                 chain_strength: float | None = None) -> Embedding:
    """Deterministic triangle clique embedding of n logical variables.

    Produces n disjoint connected chains realizing all n(n-1)/2 logical
    adjacencies.  Raises EmbeddingError, reporting the maximum achievable
    n, when the graph (or its defects) cannot host the construction.
    """
    if n < 1:
        raise DomainError("clique size must be >= 1")
    if not _triangle_fits(n, g):
        raise EmbeddingError(
            f"cannot embed a {n}-clique on this "
            f"{g.rows}x{g.cols}x{2 * g.shore} chimera; "
            f"max achievable n = {max_native_clique(g)}"
        )
    return Embedding(chains=_triangle_chains(n, g), chain_strength=chain_strength)


def _chain_connected(chain, g: ChimeraGraph) -> bool:
    members = set(chain)
    if not members:
        return False
    seen = {chain[0]}
    frontier = [chain[0]]
    while frontier:
        q = frontier.pop()
        for p in g.neighbors(q):
            if p in members and p not in seen:
                seen.add(p)
                frontier.append(p)
    return seen == members


def _pairs_covered(chains: dict[int, tuple[int, ...]], g: ChimeraGraph) -> bool:
    keys = sorted(chains)
    for ai in range(len(keys)):
        for bi in range(ai + 1, len(keys)):
            if not _coupling_edges(chains[keys[ai]], chains[keys[bi]], g):
                return False
    return True


def _coupling_edges(chain_a, chain_b, g: ChimeraGraph) -> list[tuple[int, int]]:
    members_b = set(chain_b)
    out = []
    for q in chain_a:
        for p in g.neighbors(q):
            if p in members_b:
                out.append((min(p, q), max(p, q)))
    return sorted(set(out))


def chains_disjoint(e: Embedding) -> bool:
    seen: set[int] = set()
    for chain in e.chains.values():
        members = set(chain)
        if len(members) != len(chain) or members & seen:
            return False
        seen |= members
    return True


def chains_connected(e: Embedding, g: ChimeraGraph) -> bool:
    return all(_chain_connected(chain, g) for chain in e.chains.values())


def clique_edges_covered(e: Embedding, g: ChimeraGraph) -> bool:
    """True when every logical pair has at least one physical coupler."""
    return _pairs_covered(e.chains, g)


def validate_clique_embedding(e: Embedding, g: ChimeraGraph) -> None:
    """Raise EmbeddingError naming the first violated assertion."""
    for i, chain in e.chains.items():
        for q in chain:
            if not g.enabled(q):
                raise EmbeddingError(f"chain {i} uses missing/disabled qubit {q}")
    if not chains_disjoint(e):
        raise EmbeddingError("chains are not pairwise disjoint")
    if not chains_connected(e, g):
        raise EmbeddingError("some chain is not connected")
    if not clique_edges_covered(e, g):
        raise EmbeddingError("some logical pair has no physical coupler")


def default_chain_strength(p: QuboProblem) -> float:
    """Conservative default: 2 * max(|h|_inf, |Q|_inf) * N_q."""
    scale = max(np.abs(p.h).max(initial=0.0), np.abs(p.Q).max(initial=0.0))
    return 2.0 * scale * p.n_vars


def embed_qubo(p: QuboProblem, e: Embedding, g: ChimeraGraph) -> QuboProblem:
    """Compile a logical QUBO onto chimera hardware variables.

    Physical variables are the sorted union of chain qubits.  Each logical
    bias is split equally across its chain; each logical coupling is placed
    on the single lowest-id physical edge between the two chains.  Every
    chain edge carries the ferromagnetic penalty (-2s on the coupling, +s
    on each endpoint bias) so misaligned chain bits cost `s` per edge and
    aligned physical states reproduce the logical energies exactly.
    """
    n = p.n_vars
    missing = [i for i in range(n) if i not in e.chains]
    if missing:
        raise EmbeddingError(f"embedding covers no chain for logical variable {missing[0]}")
    strength = e.chain_strength if e.chain_strength is not None else default_chain_strength(p)
    if strength <= 0:
        raise EmbeddingError("chain_strength must be positive")

    qubits = e.physical_qubits()
    pos = {q: i for i, q in enumerate(qubits)}
    m = len(qubits)
    h_phys = np.zeros(m)
    q_phys = np.zeros((m, m))

    for i in range(n):
        chain = e.chains[i]
        share = p.h[i] / len(chain)
        for q in chain:
            h_phys[pos[q]] += share

    for i in range(n):
        for j in range(i + 1, n):
            if p.Q[i, j] == 0.0:
                continue
            edges = _coupling_edges(e.chains[i], e.chains[j], g)
            if not edges:
                raise EmbeddingError(
                    f"no physical edge available for logical coupling ({i},{j})"
                )
            a, b = edges[0]
            q_phys[pos[a], pos[b]] += p.Q[i, j]
            q_phys[pos[b], pos[a]] += p.Q[i, j]

    for i in range(n):
        chain = e.chains[i]
        members = set(chain)
        for q in chain:
            for nb in g.neighbors(q):
                if nb in members and nb > q:
                    q_phys[pos[q], pos[nb]] += -2.0 * strength
                    q_phys[pos[nb], pos[q]] += -2.0 * strength
                    h_phys[pos[q]] += strength
                    h_phys[pos[nb]] += strength

    return QuboProblem(h=h_phys, Q=q_phys, lam=p.lam, const_offset=p.const_offset)


def unembed(spectrum: SolutionSpectrum, e: Embedding, p: QuboProblem) -> SolutionSpectrum:
    """Decode physical states back to logical ones by majority vote.

    Each chain votes with its physical bits (exact tie -> 0); energies are
    recomputed with the logical problem, then states are deduplicated and
    re-sorted.  The physical column order must be ``e.physical_qubits()``,
    which is how :func:`embed_qubo` lays out variables.
    """
    qubits = e.physical_qubits()
    if spectrum.n_vars != len(qubits):
        raise ConsistencyError(
            f"state width {spectrum.n_vars} != {len(qubits)} chain qubits"
        )
    pos = {q: i for i, q in enumerate(qubits)}
    n = e.n_logical
    codes = []
    for s in range(len(spectrum)):
        phys = spectrum.states[s]
        logical = np.zeros(n, dtype=np.uint8)
        for i in range(n):
            chain = e.chains[i]
            ones = int(sum(phys[pos[q]] for q in chain))
            logical[i] = 1 if 2 * ones > len(chain) else 0
        codes.append(logical)
    return _build_spectrum(p, codes, read_count=spectrum.read_count, keep=len(codes))


def embedding_to_text(e: Embedding) -> str:
    """One line per logical variable: ``i: q1 q2 ...``."""
    lines = []
    for i in sorted(e.chains):
        lines.append(f"{i}: " + " ".join(str(q) for q in e.chains[i]))
    return "\n".join(lines) + "\n"


def text_to_embedding(text: str, chain_strength: float | None = None) -> Embedding:
    chains = {}
    for ln in text.splitlines():
        if not ln.strip():
            continue
        head, _, rest = ln.partition(":")
        chains[int(head)] = tuple(int(q) for q in rest.split())
    return Embedding(chains=chains, chain_strength=chain_strength)


def write_embedding(e: Embedding, path) -> None:
    with open(path, "w") as fh:
        fh.write(embedding_to_text(e))


def read_embedding(path, chain_strength: float | None = None) -> Embedding:
    with open(path) as fh:
        return text_to_embedding(fh.read(), chain_strength=chain_strength)
