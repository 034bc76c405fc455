"""Low-energy binary states for QUBO problems.

Three backends:

* :func:`solve_exhaustive` - complete enumeration, the oracle for small
  instances (hard cap at 25 variables).
* :func:`solve_annealed` - restarted simulated annealing with a geometric
  Metropolis schedule.  Plays the role of a multi-read annealer: each read
  contributes its final state plus every state that improved on the read's
  running best, and the deduplicated union forms a :class:`SolutionSpectrum`.
* :func:`matching_pursuit` - the greedy classical baseline, restricted to
  binary (unit) activations to stay in the same code space.

Determinism: read ``r`` of an annealed solve draws from a private generator
seeded with ``seed + r``, so serial and parallel execution (and any batching)
produce identical spectra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import CapacityError, DimensionError, DomainError
from .qubo import QuboProblem, _atoms, as_binary_code, qubo_energy, to_qubo

EXHAUSTIVE_CAP = 25

# Circular buffer size for improving states collected per read.
_IMPROVEMENT_CAP = 256


@dataclass(frozen=True)
class AnnealConfig:
    """Simulated-annealing schedule: `reads` independent restarts, each
    running `sweeps` Metropolis sweeps while the temperature decays
    geometrically from `t_hot` to `t_cold`."""

    reads: int = 64
    sweeps: int = 200
    t_hot: float = 2.0
    t_cold: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.reads < 1:
            raise DomainError("reads must be >= 1")
        if self.sweeps < 1:
            raise DomainError("sweeps must be >= 1")
        if not (self.t_hot > self.t_cold > 0):
            raise DomainError("need t_hot > t_cold > 0")


@dataclass(frozen=True)
class SolutionSpectrum:
    """Distinct binary states sorted by ascending energy.

    ``states`` is a (k, n) uint8 array, ``energies`` the matching (k,)
    vector, ``read_count`` the number of anneal restarts that produced it
    (1 for deterministic single-pass solvers).  Ties in energy are ordered
    lexicographically, all-zeros first.
    """

    states: np.ndarray
    energies: np.ndarray
    read_count: int

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def n_vars(self) -> int:
        return self.states.shape[1]

    @property
    def ground_state(self) -> np.ndarray:
        return self.states[0]

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])


def _build_spectrum(p: QuboProblem, states, read_count: int, keep: int) -> SolutionSpectrum:
    """Dedupe candidate states, re-evaluate energies exactly, sort by
    (energy, lexicographic state), truncate to `keep`."""
    seen: dict[bytes, np.ndarray] = {}
    for s in states:
        seen.setdefault(s.tobytes(), np.asarray(s, dtype=np.uint8))
    entries = [(qubo_energy(p, s), key, s) for key, s in seen.items()]
    entries.sort(key=lambda t: (t[0], t[1]))
    entries = entries[: max(keep, 1)]
    return SolutionSpectrum(
        states=np.array([s for _, _, s in entries], dtype=np.uint8),
        energies=np.array([e for e, _, _ in entries], dtype=np.float64),
        read_count=read_count,
    )


def _lex_states(indices: np.ndarray, n: int) -> np.ndarray:
    """Decode enumeration indices to states; index order == lexicographic
    order of the bit tuple (bit 0 is the most significant)."""
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def solve_exhaustive(p: QuboProblem, keep: int = 1) -> SolutionSpectrum:
    """Enumerate all 2**N_q states and keep the lowest-energy ones.

    Ties are broken lexicographically (all-zeros first), which keeps golden
    tests stable.  Capped at N_q <= 25.
    """
    n = p.n_vars
    if n > EXHAUSTIVE_CAP:
        raise CapacityError(
            f"exhaustive solver capped at N_q <= {EXHAUSTIVE_CAP}, got {n}"
        )
    total = 1 << n
    chunk = 1 << 16
    keep = max(int(keep), 1)
    best_e = np.empty(0)
    best_idx = np.empty(0, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        states = _lex_states(idx, n).astype(np.float64)
        energies = states @ p.h + 0.5 * np.einsum("ij,jk,ik->i", states, p.Q, states)
        cand_e = np.concatenate([best_e, energies])
        cand_idx = np.concatenate([best_idx, idx])
        order = np.lexsort((cand_idx, cand_e))[:keep]
        best_e, best_idx = cand_e[order], cand_idx[order]
    states = _lex_states(best_idx, n)
    return _build_spectrum(p, states, read_count=1, keep=keep)


@njit(cache=True)
def _anneal_kernel(h, q, reads, sweeps, t_hot, t_cold, seed, cap):
    """Restarted Metropolis annealing on one QUBO.

    Returns (finals, improvements, counts): the final state of each read,
    a per-read circular buffer of states that strictly improved the read's
    best energy, and how many improvements occurred.
    """
    n = h.shape[0]
    finals = np.zeros((reads, n), dtype=np.uint8)
    improv = np.zeros((reads, cap, n), dtype=np.uint8)
    counts = np.zeros(reads, dtype=np.int64)
    if sweeps > 1:
        ratio = (t_cold / t_hot) ** (1.0 / (sweeps - 1))
    else:
        ratio = 1.0
    for r in range(reads):
        np.random.seed((seed + r) % 4294967296)
        a = np.zeros(n, dtype=np.uint8)
        for i in range(n):
            if np.random.random() < 0.5:
                a[i] = 1
        f = np.zeros(n, dtype=np.float64)
        for i in range(n):
            if a[i] == 1:
                for j in range(n):
                    f[j] += q[j, i]
        e = 0.0
        for i in range(n):
            if a[i] == 1:
                e += h[i] + 0.5 * f[i]
        best = e
        t = t_cold if sweeps == 1 else t_hot
        for _ in range(sweeps):
            for i in range(n):
                if a[i] == 0:
                    de = h[i] + f[i]
                else:
                    de = -(h[i] + f[i])
                accept = False
                if de <= 0.0:
                    accept = True
                elif np.random.random() < np.exp(-de / t):
                    accept = True
                if accept:
                    e += de
                    if a[i] == 0:
                        a[i] = 1
                        for j in range(n):
                            f[j] += q[j, i]
                    else:
                        a[i] = 0
                        for j in range(n):
                            f[j] -= q[j, i]
                    if e < best:
                        best = e
                        improv[r, counts[r] % cap, :] = a
                        counts[r] += 1
            t *= ratio
        finals[r, :] = a
    return finals, improv, counts


def solve_annealed(p: QuboProblem, cfg: AnnealConfig, keep: int = 1) -> SolutionSpectrum:
    """Sample low-energy states with restarted simulated annealing.

    Each read starts from a seeded random state and anneals from `t_hot`
    to `t_cold`; every sweep proposes all N_q single-bit flips in index
    order under the Metropolis rule.  The spectrum collects each read's
    final state plus every state that improved the read's running best,
    deduplicates, and keeps the `keep` lowest.  Deterministic given
    ``cfg.seed``.
    """
    finals, improv, counts = _anneal_kernel(
        p.h, p.Q, cfg.reads, cfg.sweeps, cfg.t_hot, cfg.t_cold,
        int(cfg.seed), _IMPROVEMENT_CAP,
    )
    candidates = [finals[r] for r in range(cfg.reads)]
    for r in range(cfg.reads):
        kept = min(counts[r], _IMPROVEMENT_CAP)
        for k in range(kept):
            candidates.append(improv[r, k])
    return _build_spectrum(p, candidates, read_count=cfg.reads, keep=keep)


@njit(cache=True)
def _anneal_best_batch_kernel(hmat, q, reads, sweeps, t_hot, t_cold, seeds):
    """Per-read best states for a batch of QUBOs sharing one coupling
    matrix (the throughput path behind patch-wise encoding)."""
    m, n = hmat.shape
    out = np.zeros((m, reads, n), dtype=np.uint8)
    if sweeps > 1:
        ratio = (t_cold / t_hot) ** (1.0 / (sweeps - 1))
    else:
        ratio = 1.0
    for s in range(m):
        h = hmat[s]
        for r in range(reads):
            np.random.seed((seeds[s] + r) % 4294967296)
            a = np.zeros(n, dtype=np.uint8)
            for i in range(n):
                if np.random.random() < 0.5:
                    a[i] = 1
            f = np.zeros(n, dtype=np.float64)
            for i in range(n):
                if a[i] == 1:
                    for j in range(n):
                        f[j] += q[j, i]
            e = 0.0
            for i in range(n):
                if a[i] == 1:
                    e += h[i] + 0.5 * f[i]
            best = e
            out[s, r, :] = a
            t = t_cold if sweeps == 1 else t_hot
            for _ in range(sweeps):
                for i in range(n):
                    if a[i] == 0:
                        de = h[i] + f[i]
                    else:
                        de = -(h[i] + f[i])
                    accept = False
                    if de <= 0.0:
                        accept = True
                    elif np.random.random() < np.exp(-de / t):
                        accept = True
                    if accept:
                        e += de
                        if a[i] == 0:
                            a[i] = 1
                            for j in range(n):
                                f[j] += q[j, i]
                        else:
                            a[i] = 0
                            for j in range(n):
                                f[j] -= q[j, i]
                        if e < best:
                            best = e
                            out[s, r, :] = a
                t *= ratio
    return out


def anneal_ground_batch(h_rows: np.ndarray, q: np.ndarray, cfg: AnnealConfig,
                        seeds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ground states for many QUBOs sharing one coupling matrix.

    ``h_rows`` is (m, n); ``seeds[s]`` seeds signal ``s`` (its reads use
    ``seeds[s] + r``).  Returns (states, energies) where ``states[s]`` is
    the lowest-energy state seen for signal ``s``, energy ties broken
    lexicographically exactly as in :func:`solve_annealed`.
    """
    h_rows = np.ascontiguousarray(h_rows, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    seeds = np.asarray(seeds, dtype=np.int64)
    m, n = h_rows.shape
    if seeds.shape[0] != m:
        raise DimensionError("one seed per signal required")
    per_read = _anneal_best_batch_kernel(
        h_rows, q, cfg.reads, cfg.sweeps, cfg.t_hot, cfg.t_cold, seeds
    )
    flat = per_read.astype(np.float64)
    energies = np.einsum("mrn,mn->mr", flat, h_rows) + 0.5 * np.einsum(
        "mrn,nk,mrk->mr", flat, q, flat
    )
    best_states = np.zeros((m, n), dtype=np.uint8)
    best_e = np.zeros(m, dtype=np.float64)
    for s in range(m):
        e_min = energies[s].min()
        ties = np.nonzero(energies[s] == e_min)[0]
        pick = min(ties, key=lambda r: per_read[s, r].tobytes())
        best_states[s] = per_read[s, pick]
        best_e[s] = e_min
    return best_states, best_e


def matching_pursuit(dictionary, x, k_max: int) -> np.ndarray:
    """Greedy binary sparse approximation.

    Repeatedly activates the inactive atom that most reduces
    0.5 * ||r - phi_i||**2 (equivalently, maximizes r @ phi_i - 0.5 for
    unit-norm atoms), subtracting the atom at unit amplitude.  Stops when
    no atom reduces the residual or after ``k_max`` activations.
    """
    atoms = _atoms(dictionary)
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != atoms.shape[0]:
        raise DimensionError(
            f"signal dimension {x.shape[0]} != dictionary rows {atoms.shape[0]}"
        )
    n = atoms.shape[1]
    if k_max > n:
        raise DomainError(f"k_max {k_max} exceeds atom count {n}")
    a = np.zeros(n, dtype=np.uint8)
    residual = x.copy()
    for _ in range(k_max):
        gains = atoms.T @ residual - 0.5
        gains[a == 1] = -np.inf
        i = int(np.argmax(gains))
        if gains[i] <= 0.0:
            break
        a[i] = 1
        residual -= atoms[:, i]
    return a


def spectrum_to_csv(spectrum: SolutionSpectrum) -> str:
    """CSV serialization: rank,energy,bitstring."""
    lines = ["rank,energy,bitstring"]
    for rank in range(len(spectrum)):
        bits = "".join(str(int(b)) for b in spectrum.states[rank])
        lines.append(f"{rank},{float(spectrum.energies[rank])!r},{bits}")
    return "\n".join(lines) + "\n"


def write_spectrum_csv(spectrum: SolutionSpectrum, path) -> None:
    with open(path, "w") as fh:
        fh.write(spectrum_to_csv(spectrum))


def make_encoder(method: str = "anneal", *, anneal: AnnealConfig | None = None,
                 keep: int = 1, mp_k: int | None = None):
    """Build a solver handle: a callable (dictionary, signal, lam) ->
    SolutionSpectrum.

    ``method`` is one of "exhaustive", "anneal", "mp".  The handle is what
    dictionary learning, feature-map encoding and lambda sweeps plug in.
    For "mp" the spectrum holds the single greedy code (with its QUBO
    energy) and ``mp_k`` bounds the activation count (defaults to the atom
    count).
    """
    if method == "exhaustive":

        def encode(dictionary, x, lam):
            return solve_exhaustive(to_qubo(dictionary, x, lam), keep=keep)

    elif method == "anneal":
        cfg = anneal if anneal is not None else AnnealConfig()

        def encode(dictionary, x, lam):
            return solve_annealed(to_qubo(dictionary, x, lam), cfg, keep=keep)

    elif method == "mp":

        def encode(dictionary, x, lam):
            atoms = _atoms(dictionary)
            k = mp_k if mp_k is not None else atoms.shape[1]
            code = matching_pursuit(dictionary, x, k)
            p = to_qubo(dictionary, x, lam)
            return _build_spectrum(p, [code], read_count=1, keep=1)

    else:
        raise DomainError(f"unknown solver method {method!r}")

    return encode
