"""Feature dictionaries: imprinting and unsupervised Hebbian refinement.

A dictionary is a (d, n) matrix whose unit-norm columns are the feature
atoms used for sparse coding (canonically n = 47 atoms over d = 144 whole
images or d = 36 patches).  Atoms are initialized by *imprinting* - drawing
random images or random crops from the dataset - and refined by a local
residual-Hebbian rule: the update ``(X - phi a) a^T`` is the gradient of
the reconstruction term restricted to active units, applied through a
momentum buffer and followed by column re-normalization (unit norms are
what make the QUBO transform's ``lam + 1/2`` bias exact).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import ImageSet
from .errors import (
    DimensionError,
    DomainError,
    FormatError,
    InsufficientDataError,
    NormalizationError,
    SolverError,
)
from .qubo import as_binary_code, sc_energy

DICT_MAGIC = b"QSCD"
_NORM_TOL = 1e-9


@dataclass
class Dictionary:
    """Unit-norm feature atoms as the columns of a (d, n) matrix."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        if atoms.ndim != 2 or atoms.shape[1] < 1:
            raise DimensionError(f"atoms must be (d, n>=1), got {atoms.shape}")
        if not np.isfinite(atoms).all():
            raise DomainError("atoms must be finite")
        norms = np.linalg.norm(atoms, axis=0)
        if np.abs(norms - 1.0).max() > _NORM_TOL:
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise NormalizationError(
                f"column {worst} has norm {norms[worst]!r}, expected 1"
            )
        self.atoms = atoms

    @property
    def d(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    @property
    def gamma(self) -> float:
        """Overcompleteness: atom count over signal dimension."""
        return self.n_atoms / self.d

    def save(self, path) -> None:
        """QSCD container: magic, d, n (uint32 LE), column-major float64."""
        import struct

        with open(path, "wb") as fh:
            fh.write(DICT_MAGIC)
            fh.write(struct.pack("<II", self.d, self.n_atoms))
            fh.write(np.asfortranarray(self.atoms).astype("<f8").tobytes(order="F"))

    @classmethod
    def load(cls, path) -> "Dictionary":
        import struct

        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != DICT_MAGIC:
                raise FormatError(f"{path}: bad magic {magic!r}")
            d, n = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(d * n * 8), dtype="<f8")
        return cls(atoms=data.reshape((d, n), order="F"))


def _normalize_columns(atoms: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(atoms, axis=0)
    if (norms < 1e-12).any():
        dead = int(np.argmin(norms))
        raise NormalizationError(f"column {dead} collapsed to zero norm")
    return atoms / norms


@dataclass(frozen=True)
class LearnConfig:
    """Hyperparameters for unsupervised dictionary refinement."""

    lr: float = 0.1
    momentum: float = 0.9
    batch_size: int = 100
    steps: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise DomainError("lr must be > 0")
        if not (0 <= self.momentum < 1):
            raise DomainError("momentum must lie in [0, 1)")


def imprint(s: ImageSet, n: int, patch: int | None = None, seed: int = 0) -> Dictionary:
    """Imprint a dictionary on random samples drawn without replacement.

    With ``patch`` absent the atoms are whole flattened images (d = h*w);
    with ``patch`` = p they are random p x p crops at arbitrary offsets.
    Zero-vector draws are rejected and redrawn; if fewer than ``n``
    distinct nonzero candidates exist, InsufficientDataError is raised.
    """
    if n < 1:
        raise DomainError("atom count must be >= 1")
    rng = np.random.default_rng(seed)
    if patch is None:
        candidates = s.count
    else:
        if patch > min(s.height, s.width):
            raise DimensionError(f"patch {patch} exceeds image size {s.height}x{s.width}")
        offsets = (s.height - patch + 1) * (s.width - patch + 1)
        candidates = s.count * offsets

    order = rng.permutation(candidates)
    cols = []
    for cand in order:
        if patch is None:
            vec = s.images[cand].ravel()
        else:
            img, off = divmod(int(cand), offsets)
            r, c = divmod(off, s.width - patch + 1)
            vec = s.images[img, r:r + patch, c:c + patch].ravel()
        if np.linalg.norm(vec) < 1e-12:
            continue
        cols.append(vec.copy())
        if len(cols) == n:
            break
    if len(cols) < n:
        raise InsufficientDataError(
            f"only {len(cols)} distinct nonzero candidates for {n} atoms"
        )
    return Dictionary(atoms=_normalize_columns(np.stack(cols, axis=1)))


def hebbian_step(dictionary: Dictionary, batch, state: np.ndarray | None,
                 cfg: LearnConfig) -> tuple[Dictionary, np.ndarray]:
    """One residual-Hebbian update from a batch of (signal, code) pairs.

    delta = mean_b (X_b - phi a_b) a_b^T, pushed through the momentum
    buffer ``state`` (created on first use), then columns re-normalized.
    Returns the updated dictionary and buffer.
    """
    atoms = dictionary.atoms
    xs, codes = [], []
    for x, a in batch:
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.shape[0] != atoms.shape[0]:
            raise DimensionError(
                f"signal dimension {x.shape[0]} != dictionary rows {atoms.shape[0]}"
            )
        codes.append(as_binary_code(a, atoms.shape[1]).astype(np.float64))
        xs.append(x)
    x_mat = np.stack(xs)          # (B, d)
    a_mat = np.stack(codes)       # (B, n)
    residual = x_mat - a_mat @ atoms.T
    delta = residual.T @ a_mat / len(batch)
    if state is None:
        state = np.zeros_like(atoms)
    state = cfg.momentum * state + cfg.lr * delta
    return Dictionary(atoms=_normalize_columns(atoms + state)), state


def learn(dictionary: Dictionary, s: ImageSet, cfg: LearnConfig, encoder,
          lam: float) -> tuple[Dictionary, list[float]]:
    """Alternate sparse encoding and Hebbian updates until saturation.

    ``encoder`` is a solver handle (dictionary, signal, lam) ->
    SolutionSpectrum; each step encodes a random mini-batch, records the
    mean sparse-coding loss, and applies one hebbian_step.  Stops early
    when the loss changed by < 1e-6 over the last 10 steps.  Solver
    failures propagate as SolverError with the step index.
    """
    rng = np.random.default_rng(cfg.seed)
    state: np.ndarray | None = None
    losses: list[float] = []
    for step in range(cfg.steps):
        take = min(cfg.batch_size, s.count)
        idx = rng.choice(s.count, size=take, replace=False)
        batch = []
        loss = 0.0
        for i in idx:
            x = s.images[i].ravel()
            try:
                code = encoder(dictionary, x, lam).ground_state
            except Exception as exc:
                raise SolverError(f"solver failed at learn step {step}: {exc}") from exc
            batch.append((x, code))
            loss += sc_energy(dictionary, x, code, lam)
        losses.append(loss / take)
        dictionary, state = hebbian_step(dictionary, batch, state, cfg)
        if len(losses) > 10 and abs(losses[-1] - losses[-11]) < 1e-6:
            break
    return dictionary, losses
