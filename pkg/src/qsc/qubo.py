"""Binary sparse-coding objective and its exact QUBO form.

The sparse-coding energy of a signal ``X`` under a unit-norm dictionary
``phi`` with binary activations ``a`` is

    E(a) = 0.5 * ||X - phi @ a||**2 + lam * ||a||_0 .

Because every column of ``phi`` has unit norm, expanding the square turns
this into a quadratic form over the binary code, up to the code-independent
constant ``0.5 * ||X||**2``:

    H(a)  = sum_i h_i a_i + sum_{i<j} Q_ij a_i a_j
    h_i   = -(phi.T @ X)_i + lam + 0.5
    Q_ij  = (phi.T @ phi)_ij   for i != j, no self-interaction.

``to_qubo`` performs the transform; ``sc_energy`` and ``qubo_energy``
evaluate the two sides.  For every binary code,

    sc_energy(phi, X, a, lam) == qubo_energy(to_qubo(phi, X, lam), a)
                                 + 0.5 * ||X||**2 ,

which is the identity the test suite checks exhaustively on small codes.
The pair sum counts each unordered pair exactly once; ``Q`` is stored as a
full symmetric matrix with zero diagonal, so the energy uses
``0.5 * a @ Q @ a`` (beware the classic double-count bug when porting).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, FormatError, NormalizationError

UNIT_NORM_TOL = 1e-6


def as_binary_code(a, n_vars: int | None = None) -> np.ndarray:
    """Validate and return a {0,1} code as a uint8 array.

    Raises DomainError for non-binary entries and DimensionError when
    ``n_vars`` is given and the length differs.
    """
    arr = np.asarray(a)
    if arr.ndim != 1:
        raise DimensionError(f"binary code must be 1-d, got shape {arr.shape}")
    if n_vars is not None and arr.shape[0] != n_vars:
        raise DimensionError(f"code length {arr.shape[0]} != expected {n_vars}")
    if arr.dtype == np.uint8:
        if arr.max(initial=0) > 1:
            raise DomainError("binary code entries must be 0 or 1")
        return arr
    if not np.isin(arr, (0, 1)).all():
        raise DomainError("binary code entries must be 0 or 1")
    return arr.astype(np.uint8)


def _atoms(dictionary) -> np.ndarray:
    """Accept a Dictionary or a raw (d, n) array of atom columns."""
    atoms = getattr(dictionary, "atoms", dictionary)
    atoms = np.asarray(atoms, dtype=np.float64)
    if atoms.ndim != 2:
        raise DimensionError(f"dictionary atoms must be 2-d, got shape {atoms.shape}")
    return atoms


@dataclass(frozen=True)
class QuboProblem:
    """QUBO instance: bias vector ``h``, symmetric zero-diagonal coupling
    matrix ``Q``, the trade-off ``lam`` used to build it, and the constant
    ``0.5 * ||X||**2`` separating QUBO energies from sparse-coding energies.
    """

    h: np.ndarray
    Q: np.ndarray
    lam: float
    const_offset: float

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.float64)
        q = np.asarray(self.Q, dtype=np.float64)
        if h.ndim != 1 or q.ndim != 2 or q.shape != (h.shape[0], h.shape[0]):
            raise DimensionError(f"bad QUBO shapes h={h.shape} Q={q.shape}")
        if not (np.isfinite(h).all() and np.isfinite(q).all()):
            raise DomainError("QUBO coefficients must be finite")
        if np.abs(np.diagonal(q)).max(initial=0.0) != 0.0:
            raise DomainError("Q diagonal must be exactly zero")
        if not np.array_equal(q, q.T):
            raise DomainError("Q must be symmetric")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "Q", q)

    @property
    def n_vars(self) -> int:
        return self.h.shape[0]


def to_qubo(dictionary, x, lam: float) -> QuboProblem:
    """Cast a sparse-coding instance (dictionary, signal, trade-off) to QUBO.

    Requires unit-norm atom columns (within 1e-6), otherwise the
    ``lam + 1/2`` linear term would be wrong.
    """
    atoms = _atoms(dictionary)
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != atoms.shape[0]:
        raise DimensionError(
            f"signal dimension {x.shape[0]} != dictionary rows {atoms.shape[0]}"
        )
    norms = np.linalg.norm(atoms, axis=0)
    bad = np.abs(norms - 1.0) > UNIT_NORM_TOL
    if bad.any():
        raise NormalizationError(
            f"dictionary columns not unit-norm (worst column {int(np.argmax(np.abs(norms - 1.0)))},"
            f" norm {norms[bad][0]:.9f})"
        )
    h = -(atoms.T @ x) + lam + 0.5
    gram = atoms.T @ atoms
    q = 0.5 * (gram + gram.T)
    np.fill_diagonal(q, 0.0)
    return QuboProblem(h=h, Q=q, lam=float(lam), const_offset=0.5 * float(x @ x))


def qubo_energy(p: QuboProblem, a) -> float:
    """Evaluate sum_i h_i a_i + sum_{i<j} Q_ij a_i a_j for a binary code."""
    code = as_binary_code(a, p.n_vars).astype(np.float64)
    return float(p.h @ code + 0.5 * code @ p.Q @ code)


def sc_energy(dictionary, x, a, lam: float) -> float:
    """Evaluate 0.5 * ||X - phi a||**2 + lam * ||a||_0 for a binary code."""
    atoms = _atoms(dictionary)
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != atoms.shape[0]:
        raise DimensionError(
            f"signal dimension {x.shape[0]} != dictionary rows {atoms.shape[0]}"
        )
    code = as_binary_code(a, atoms.shape[1]).astype(np.float64)
    residual = x - atoms @ code
    return float(0.5 * residual @ residual + lam * code.sum())


def qubo_to_text(p: QuboProblem) -> str:
    """Serialize to the interchange text format.

    Line 1: ``N_q lam const_offset``; then ``i h_i`` for every variable;
    then ``i j Q_ij`` for i<j, nonzero couplings only.  Floats use repr so
    the round-trip is exact.
    """
    lines = [f"{p.n_vars} {float(p.lam)!r} {float(p.const_offset)!r}"]
    for i in range(p.n_vars):
        lines.append(f"{i} {float(p.h[i])!r}")
    rows, cols = np.nonzero(np.triu(p.Q, k=1))
    for i, j in zip(rows, cols):
        lines.append(f"{i} {j} {float(p.Q[i, j])!r}")
    return "\n".join(lines) + "\n"


def text_to_qubo(text: str) -> QuboProblem:
    """Parse the text format produced by :func:`qubo_to_text`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty QUBO text")
    head = lines[0].split()
    if len(head) != 3:
        raise FormatError(f"bad QUBO header: {lines[0]!r}")
    n = int(head[0])
    lam, offset = float(head[1]), float(head[2])
    h = np.zeros(n)
    q = np.zeros((n, n))
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) == 2:
            h[int(parts[0])] = float(parts[1])
        elif len(parts) == 3:
            i, j = int(parts[0]), int(parts[1])
            if i == j:
                raise FormatError("diagonal coupling in QUBO text")
            q[i, j] = q[j, i] = float(parts[2])
        else:
            raise FormatError(f"bad QUBO line: {ln!r}")
    return QuboProblem(h=h, Q=q, lam=lam, const_offset=offset)


def write_qubo(p: QuboProblem, path) -> None:
    with open(path, "w") as fh:
        fh.write(qubo_to_text(p))


def read_qubo(path) -> QuboProblem:
    with open(path) as fh:
        return text_to_qubo(fh.read())
