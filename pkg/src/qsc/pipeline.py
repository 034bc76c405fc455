"""Patch tiling, sparse feature maps, augmentation, and classifier heads.

Overcomplete coding slides a 6x6 patch over each 12x12 image with stride 2
(16 patches), solves one QUBO per patch, and stacks the binary codes into a
4x4xN feature map; undercomplete coding solves a single QUBO over the
flattened image.  Spectra of whole-image problems provide *augmentation*:
the k lowest-energy codes of an image become k training rows sharing its
label.

Classifier heads are deliberately small and self-contained: a one-vs-rest
hinge-loss linear SVM and a single-hidden-layer relu/softmax MLP, both
plain seeded minibatch SGD.

Feature maps persist in a bit-packed container (magic ``QSCF``): header
{magic, count, grid rows, grid cols, code length} as little-endian uint32,
then per map ceil(bits/8) packed bytes followed by one label byte.
"""

from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datasets import ImageSet
from .dictionary import Dictionary
from .errors import (
    ConsistencyError,
    DimensionError,
    DivergenceError,
    DomainError,
    FormatError,
    SolverError,
)
from .qubo import to_qubo
from .solvers import AnnealConfig, SolutionSpectrum, anneal_ground_batch, make_encoder

FEATURE_MAGIC = b"QSCF"

# Seed spacing between consecutive signals so per-read streams never collide.
_SEED_STRIDE = 4096


@dataclass
class FeatureMap:
    """Grid of binary patch codes plus the image label.

    ``codes`` is (grid_rows, grid_cols, n_atoms) uint8; a whole-image code
    is the 1x1xN special case.
    """

    codes: np.ndarray
    label: int = -1

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 3:
            raise DimensionError(f"codes must be 3-d, got shape {codes.shape}")
        if codes.size and not np.isin(codes, (0, 1)).all():
            raise DomainError("feature map entries must be 0 or 1")
        self.codes = codes.astype(np.uint8)

    def flat(self) -> np.ndarray:
        """Concatenated float feature vector for classifiers."""
        return self.codes.reshape(-1).astype(np.float64)

    @property
    def sparsity(self) -> float:
        return float(self.codes.mean())


def tile(image: np.ndarray, patch: int = 6, stride: int = 2):
    """Slide a patch over the image; returns [((row, col), patch_pixels)].

    Patch (r, c) covers pixels [stride*r, stride*r+patch) in each axis,
    row-major.  The geometry must divide exactly.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise DimensionError(f"image must be 2-d, got shape {image.shape}")
    h, w = image.shape
    if (h - patch) % stride or (w - patch) % stride:
        raise DimensionError(
            f"patch {patch} with stride {stride} does not tile {h}x{w}"
        )
    rows = (h - patch) // stride + 1
    cols = (w - patch) // stride + 1
    out = []
    for r in range(rows):
        for c in range(cols):
            out.append(((r, c),
                        image[stride * r:stride * r + patch,
                              stride * c:stride * c + patch].copy()))
    return out


def encode_image(image: np.ndarray, dictionary: Dictionary, lam: float,
                 encoder, patch: int = 6, stride: int = 2,
                 label: int = -1) -> FeatureMap:
    """Patch-wise sparse coding of one image into a feature map.

    Each patch becomes a QUBO via the dictionary; the solver handle's
    lowest-energy state is its code.  Solver errors carry the patch
    coordinates.
    """
    patches = tile(image, patch=patch, stride=stride)
    rows = max(r for (r, _), _ in patches) + 1
    cols = max(c for (_, c), _ in patches) + 1
    codes = np.zeros((rows, cols, dictionary.n_atoms), dtype=np.uint8)
    for (r, c), pix in patches:
        try:
            codes[r, c] = encoder(dictionary, pix.ravel(), lam).ground_state
        except Exception as exc:
            raise SolverError(f"solver failed at patch ({r},{c}): {exc}") from exc
    return FeatureMap(codes=codes, label=label)


def encode_image_whole(image: np.ndarray, dictionary: Dictionary, lam: float,
                       encoder) -> np.ndarray:
    """Single QUBO over the flattened image; returns the ground code."""
    image = np.asarray(image, dtype=np.float64)
    if image.size != dictionary.d:
        raise DimensionError(
            f"image has {image.size} pixels but dictionary rows = {dictionary.d}"
        )
    return encoder(dictionary, image.ravel(), lam).ground_state


def _anneal_codes(signals: np.ndarray, dictionary: Dictionary, lam: float,
                  cfg: AnnealConfig, first_index: int) -> np.ndarray:
    """Batched annealed ground codes; signal i uses seed
    cfg.seed + (first_index + i) * _SEED_STRIDE."""
    p0 = to_qubo(dictionary, signals[0], lam)
    h_rows = -(signals @ dictionary.atoms) + lam + 0.5
    seeds = cfg.seed + (first_index + np.arange(signals.shape[0], dtype=np.int64)) * _SEED_STRIDE
    states, _ = anneal_ground_batch(h_rows, p0.Q, cfg, seeds)
    return states


def _encode_chunk(args):
    (images, dictionary_atoms, lam, method, cfg, patch, stride, first_index,
     mp_k, keep) = args
    dictionary = Dictionary(atoms=dictionary_atoms)
    whole = patch is None
    n_img = images.shape[0]
    if whole:
        signals = images.reshape(n_img, -1)
    else:
        per_img = []
        for img in images:
            per_img.append(np.stack([pix.ravel() for _, pix in
                                     tile(img, patch=patch, stride=stride)]))
        signals = np.concatenate(per_img)
    if method == "anneal":
        codes = _anneal_codes(signals, dictionary, lam, cfg, first_index)
    else:
        encoder = make_encoder(method, anneal=cfg, keep=keep, mp_k=mp_k)
        codes = np.stack([encoder(dictionary, sig, lam).ground_state
                          for sig in signals])
    if whole:
        return codes
    per = signals.shape[0] // n_img
    return codes.reshape(n_img, per, dictionary.n_atoms)


def encode_set(s: ImageSet, dictionary: Dictionary, lam: float, *,
               method: str = "anneal", anneal: AnnealConfig | None = None,
               patch: int | None = 6, stride: int = 2, mp_k: int | None = None,
               workers: int = 1) -> list[FeatureMap]:
    """Encode every image of a set; the throughput path behind the CLI.

    ``patch=None`` produces whole-image 1x1xN maps, otherwise patch-grid
    maps.  The annealed backend runs a batched kernel with per-signal
    seeds derived from the global signal index, so results are identical
    for any ``workers`` split (deterministic merge by image order).
    """
    cfg = anneal if anneal is not None else AnnealConfig()
    if patch is None:
        signals_per_image = 1
        grid = (1, 1)
    else:
        grid_rows = (s.height - patch) // stride + 1
        grid_cols = (s.width - patch) // stride + 1
        signals_per_image = grid_rows * grid_cols
        grid = (grid_rows, grid_cols)

    n_chunks = max(1, min(int(workers), s.count))
    bounds = np.linspace(0, s.count, n_chunks + 1, dtype=int)
    jobs = []
    for b in range(n_chunks):
        lo, hi = int(bounds[b]), int(bounds[b + 1])
        if lo == hi:
            continue
        jobs.append((s.images[lo:hi], dictionary.atoms, lam, method, cfg,
                     patch, stride, lo * signals_per_image, mp_k, 1))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_encode_chunk, jobs))
    else:
        chunks = [_encode_chunk(job) for job in jobs]
    all_codes = np.concatenate(chunks)
    maps = []
    for i in range(s.count):
        codes = all_codes[i].reshape(grid[0], grid[1], dictionary.n_atoms)
        maps.append(FeatureMap(codes=codes, label=int(s.labels[i])))
    return maps


def augment(spectrum: SolutionSpectrum, k: int) -> list[np.ndarray]:
    """The min(k, N_s) lowest-energy distinct codes of one spectrum.

    Each code is meant to become one training row carrying the source
    image's label; no padding when the spectrum is short.
    """
    if len(spectrum) == 0:
        raise DomainError("empty spectrum")
    return [spectrum.states[i].copy() for i in range(min(k, len(spectrum)))]


# --------------------------------------------------------------------------
# classifier heads


@dataclass
class LinearSVM:
    """One-vs-rest linear SVM: per-class weight rows and biases."""

    weights: np.ndarray  # (n_classes, dim)
    bias: np.ndarray     # (n_classes,)


def _check_features(features, labels, n_classes=10):
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2:
        raise DimensionError(f"features must be (count, dim), got {x.shape}")
    if y.shape != (x.shape[0],):
        raise ConsistencyError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise DomainError(f"labels must lie in [0, {n_classes})")
    return x, y


def hinge_loss(m: LinearSVM, features, labels, reg: float = 0.0) -> float:
    """Mean one-vs-rest hinge loss plus 0.5*reg*||W||^2."""
    x, y = _check_features(features, labels, m.weights.shape[0])
    scores = x @ m.weights.T + m.bias
    signs = np.where(np.arange(m.weights.shape[0])[None, :] == y[:, None], 1.0, -1.0)
    margins = np.maximum(0.0, 1.0 - signs * scores)
    return float(margins.mean() + 0.5 * reg * np.sum(m.weights * m.weights))


def train_svm(features, labels, epochs: int = 30, lr: float = 0.1,
              reg: float = 1e-4, seed: int = 0, batch_size: int = 32,
              n_classes: int = 10) -> tuple[LinearSVM, list[float]]:
    """One-vs-rest hinge-loss SGD, deterministic by seed.

    Returns the model and the per-epoch hinge loss history (non-increasing
    up to minibatch noise).
    """
    x, y = _check_features(features, labels, n_classes)
    rng = np.random.default_rng(seed)
    w = np.zeros((n_classes, x.shape[1]))
    b = np.zeros(n_classes)
    history: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(x.shape[0])
        for start in range(0, x.shape[0], batch_size):
            sel = order[start:start + batch_size]
            xb, yb = x[sel], y[sel]
            scores = xb @ w.T + b
            signs = np.where(np.arange(n_classes)[None, :] == yb[:, None], 1.0, -1.0)
            active = (1.0 - signs * scores) > 0.0
            coeff = signs * active / xb.shape[0]
            w += lr * (coeff.T @ xb - reg * w)
            b += lr * coeff.sum(axis=0)
        history.append(hinge_loss(LinearSVM(w, b), x, y, reg))
    return LinearSVM(weights=w, bias=b), history


def predict_svm(m: LinearSVM, features) -> np.ndarray | int:
    """Argmax class score; ties resolve to the lowest class index."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != m.weights.shape[1]:
        raise DimensionError(
            f"feature dim {x.shape[1]} != model dim {m.weights.shape[1]}"
        )
    pred = np.argmax(x @ m.weights.T + m.bias, axis=1)
    return int(pred[0]) if single else pred


@dataclass
class MlpHead:
    """One hidden relu layer + softmax output."""

    w_hidden: np.ndarray
    b_hidden: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray


def train_mlp(features, labels, hidden: int = 256, epochs: int = 30,
              lr: float = 0.1, seed: int = 0, batch_size: int = 32,
              n_classes: int = 10) -> tuple[MlpHead, list[float]]:
    """Softmax cross-entropy SGD for the transfer-learning head."""
    x, y = _check_features(features, labels, n_classes)
    rng = np.random.default_rng(seed)
    dim = x.shape[1]
    w1 = rng.uniform(-0.05, 0.05, size=(dim, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.uniform(-0.05, 0.05, size=(hidden, n_classes))
    b2 = np.zeros(n_classes)
    onehot = np.eye(n_classes)[y]
    history: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(x.shape[0])
        for start in range(0, x.shape[0], batch_size):
            sel = order[start:start + batch_size]
            xb, tb = x[sel], onehot[sel]
            z1 = xb @ w1 + b1
            a1 = np.maximum(z1, 0.0)
            logits = a1 @ w2 + b2
            logits -= logits.max(axis=1, keepdims=True)
            expz = np.exp(logits)
            probs = expz / expz.sum(axis=1, keepdims=True)
            d_logits = (probs - tb) / xb.shape[0]
            d_a1 = d_logits @ w2.T
            d_z1 = d_a1 * (z1 > 0.0)
            w2 -= lr * a1.T @ d_logits
            b2 -= lr * d_logits.sum(axis=0)
            w1 -= lr * xb.T @ d_z1
            b1 -= lr * d_z1.sum(axis=0)
        z1 = np.maximum(x @ w1 + b1, 0.0)
        logits = z1 @ w2 + b2
        logits -= logits.max(axis=1, keepdims=True)
        log_probs = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
        loss = float(-np.mean(log_probs[np.arange(x.shape[0]), y]))
        if not np.isfinite(loss):
            raise DivergenceError(f"MLP loss became non-finite at epoch {epoch}")
        history.append(loss)
    return MlpHead(w_hidden=w1, b_hidden=b1, w_out=w2, b_out=b2), history


def predict_mlp(m: MlpHead, features) -> np.ndarray | int:
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != m.w_hidden.shape[0]:
        raise DimensionError(
            f"feature dim {x.shape[1]} != model dim {m.w_hidden.shape[0]}"
        )
    hidden = np.maximum(x @ m.w_hidden + m.b_hidden, 0.0)
    pred = np.argmax(hidden @ m.w_out + m.b_out, axis=1)
    return int(pred[0]) if single else pred


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    return float(np.mean(predictions == labels))


def split_train_test(count: int, ratio: tuple[int, int] = (5, 1)) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic index split in the given train/test ratio (5/1)."""
    n_train = count * ratio[0] // (ratio[0] + ratio[1])
    idx = np.arange(count)
    return idx[:n_train], idx[n_train:]


# --------------------------------------------------------------------------
# persistence


def save_feature_maps(path, maps: list[FeatureMap]) -> None:
    """QSCF container: header + per-map packed code bits + label byte."""
    if not maps:
        raise DomainError("no feature maps to save")
    rows, cols, n = maps[0].codes.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<IIII", len(maps), rows, cols, n))
        for fm in maps:
            if fm.codes.shape != (rows, cols, n):
                raise ConsistencyError("feature maps have mixed shapes")
            fh.write(np.packbits(fm.codes.reshape(-1)).tobytes())
            fh.write(bytes([fm.label & 0xFF]))


def load_feature_maps(path) -> list[FeatureMap]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURE_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        count, rows, cols, n = struct.unpack("<IIII", fh.read(16))
        bits = rows * cols * n
        nbytes = (bits + 7) // 8
        maps = []
        for _ in range(count):
            rec = fh.read(nbytes + 1)
            if len(rec) < nbytes + 1:
                raise ConsistencyError(f"{path}: truncated feature record")
            codes = np.unpackbits(np.frombuffer(rec[:nbytes], dtype=np.uint8))[:bits]
            maps.append(FeatureMap(codes=codes.reshape(rows, cols, n),
                                   label=int(rec[nbytes])))
    return maps


def feature_maps_to_csv(path, maps: list[FeatureMap]) -> None:
    """Flat CSV (label, f0..fD) for external classifiers."""
    with open(path, "w") as fh:
        dim = maps[0].codes.size
        fh.write("label," + ",".join(f"f{i}" for i in range(dim)) + "\n")
        for fm in maps:
            fh.write(str(fm.label) + "," +
                     ",".join(str(int(v)) for v in fm.codes.reshape(-1)) + "\n")
