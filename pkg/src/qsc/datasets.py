"""Image ingestion and dimensionality reduction.

Pipeline front end: read IDX-format digit files, downsample 28x28 images
to 12x12 (crop the 2-pixel border, then 2x2 mean pooling - deterministic,
no resampling kernel), and train a 144-47-144 bottleneck autoencoder whose
reconstructions form the reduced-dimensional dataset that everything
downstream consumes.

Reduced sets persist in a small binary container (magic ``QSC1``): header
{magic, count, width, height} as little-endian uint32, then per image
width*height float32 pixels followed by one label byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConsistencyError,
    DimensionError,
    DivergenceError,
    DomainError,
    FormatError,
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
REDUCED_MAGIC = b"QSC1"


@dataclass
class ImageSet:
    """A labeled stack of same-size grayscale images with pixels in [0, 1].

    ``images`` is (count, height, width) float64, ``labels`` (count,) int64
    with class indices 0-9.
    """

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 3:
            raise DimensionError(f"images must be (count, h, w), got {images.shape}")
        if labels.ndim != 1:
            raise DimensionError(f"labels must be 1-d, got {labels.shape}")
        if images.shape[0] != labels.shape[0]:
            raise ConsistencyError(
                f"{images.shape[0]} images but {labels.shape[0]} labels"
            )
        if images.size and (images.min() < 0.0 or images.max() > 1.0):
            raise DomainError("pixel values must lie in [0, 1]")
        self.images = images
        self.labels = labels

    @property
    def count(self) -> int:
        return self.images.shape[0]

    @property
    def height(self) -> int:
        return self.images.shape[1]

    @property
    def width(self) -> int:
        return self.images.shape[2]

    def flat(self) -> np.ndarray:
        """(count, height*width) view of the pixel data."""
        return self.images.reshape(self.count, -1)

    def take(self, indices) -> "ImageSet":
        return ImageSet(images=self.images[indices], labels=self.labels[indices])


def load_idx(images_path, labels_path) -> ImageSet:
    """Read an IDX image/label file pair (the classic MNIST layout).

    Both files are big-endian; pixels are rescaled from bytes to [0, 1].
    Bad magic numbers raise FormatError; count mismatches between the two
    files or truncated payloads raise ConsistencyError.
    """
    with open(images_path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16:
            raise FormatError(f"{images_path}: truncated IDX header")
        magic, count, height, width = struct.unpack(">IIII", head)
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(
                f"{images_path}: bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
            )
        payload = fh.read()
    expected = count * height * width
    if len(payload) < expected:
        raise ConsistencyError(
            f"{images_path}: expected {expected} pixel bytes, found {len(payload)}"
        )
    images = np.frombuffer(payload[:expected], dtype=np.uint8).reshape(
        count, height, width
    )

    with open(labels_path, "rb") as fh:
        head = fh.read(8)
        if len(head) < 8:
            raise FormatError(f"{labels_path}: truncated IDX header")
        magic, label_count = struct.unpack(">II", head)
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(
                f"{labels_path}: bad magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
            )
        label_payload = fh.read()
    if label_count != count:
        raise ConsistencyError(
            f"image count {count} != label count {label_count}"
        )
    if len(label_payload) < label_count:
        raise ConsistencyError(
            f"{labels_path}: expected {label_count} label bytes, found {len(label_payload)}"
        )
    labels = np.frombuffer(label_payload[:label_count], dtype=np.uint8)
    return ImageSet(images=images.astype(np.float64) / 255.0,
                    labels=labels.astype(np.int64))


def write_idx(images_path, labels_path, s: ImageSet) -> None:
    """Write an ImageSet as an IDX pair (pixels quantized back to bytes)."""
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, s.count, s.height, s.width))
        fh.write(np.round(s.images * 255.0).astype(np.uint8).tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, s.count))
        fh.write(s.labels.astype(np.uint8).tobytes())


def downsample(s: ImageSet) -> ImageSet:
    """28x28 -> 12x12: crop the 2-pixel border, then 2x2 mean pooling.

    Linear and deterministic; a constant image stays constant.
    """
    if (s.height, s.width) != (28, 28):
        raise DimensionError(f"downsample expects 28x28 images, got {s.height}x{s.width}")
    cropped = s.images[:, 2:26, 2:26]
    pooled = cropped.reshape(s.count, 12, 2, 12, 2).mean(axis=(2, 4))
    return ImageSet(images=pooled, labels=s.labels.copy())


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Autoencoder:
    """144-47-144 bottleneck autoencoder, logistic sigmoid on both layers."""

    w_enc: np.ndarray
    b_enc: np.ndarray
    w_dec: np.ndarray
    b_dec: np.ndarray

    @property
    def n_inputs(self) -> int:
        return self.w_enc.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.w_enc.shape[1]

    def encode(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(x @ self.w_enc + self.b_enc)

    def decode(self, hid: np.ndarray) -> np.ndarray:
        return _sigmoid(hid @ self.w_dec + self.b_dec)

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        return self.decode(self.encode(x))

    def save(self, path) -> None:
        np.savez(path, w_enc=self.w_enc, b_enc=self.b_enc,
                 w_dec=self.w_dec, b_dec=self.b_dec)

    @classmethod
    def load(cls, path) -> "Autoencoder":
        with np.load(path) as data:
            return cls(w_enc=data["w_enc"], b_enc=data["b_enc"],
                       w_dec=data["w_dec"], b_dec=data["b_dec"])


def reconstruction_mse(ae: Autoencoder, s: ImageSet) -> float:
    """Mean (over images and pixels) squared reconstruction error."""
    x = s.flat()
    err = ae.reconstruct(x) - x
    return float(np.mean(err * err))


def init_autoencoder(n_inputs: int, n_hidden: int, seed: int) -> Autoencoder:
    """Weights uniform in [-0.05, 0.05] from a seeded generator."""
    rng = np.random.default_rng(seed)
    return Autoencoder(
        w_enc=rng.uniform(-0.05, 0.05, size=(n_inputs, n_hidden)),
        b_enc=rng.uniform(-0.05, 0.05, size=n_hidden),
        w_dec=rng.uniform(-0.05, 0.05, size=(n_hidden, n_inputs)),
        b_dec=rng.uniform(-0.05, 0.05, size=n_inputs),
    )


def train_autoencoder(s: ImageSet, epochs: int, lr: float = 30.0,
                      momentum: float = 0.9, seed: int = 0,
                      n_hidden: int = 47, batch_size: int = 32,
                      ) -> tuple[Autoencoder, list[float]]:
    """Train the bottleneck autoencoder with minibatch SGD + momentum.

    Trains on the first 90% of the set (fixed order); the last 10% is the
    held-out split whose per-epoch MSE is returned as the checkpoint
    history.  Bit-reproducible for a fixed seed.  Raises DivergenceError
    naming the epoch if the loss goes non-finite.
    """
    if epochs < 1:
        raise DomainError("epochs must be >= 1")
    if s.count < 1:
        raise DomainError("empty training set")
    x_all = s.flat()
    n_val = s.count // 10
    x_train = x_all[: s.count - n_val] if n_val else x_all
    x_val = x_all[s.count - n_val:] if n_val else x_all

    ae = init_autoencoder(x_all.shape[1], n_hidden, seed)
    rng = np.random.default_rng(seed + 1)
    vels = [np.zeros_like(w) for w in (ae.w_enc, ae.b_enc, ae.w_dec, ae.b_dec)]
    history: list[float] = []

    for epoch in range(epochs):
        order = rng.permutation(x_train.shape[0])
        for start in range(0, x_train.shape[0], batch_size):
            x = x_train[order[start:start + batch_size]]
            b = x.shape[0]
            hid = _sigmoid(x @ ae.w_enc + ae.b_enc)
            out = _sigmoid(hid @ ae.w_dec + ae.b_dec)
            # L = mean_b mean_px 0.5*(out - x)^2
            d_out = (out - x) * out * (1.0 - out) / (b * x.shape[1])
            d_hid = (d_out @ ae.w_dec.T) * hid * (1.0 - hid)
            grads = (x.T @ d_hid, d_hid.sum(0), hid.T @ d_out, d_out.sum(0))
            params = (ae.w_enc, ae.b_enc, ae.w_dec, ae.b_dec)
            for vel, grad, param in zip(vels, grads, params):
                vel *= momentum
                vel -= lr * grad
                param += vel
        val_mse = reconstruction_mse(ae, ImageSet(
            images=x_val.reshape(-1, s.height, s.width),
            labels=np.zeros(x_val.shape[0], dtype=np.int64)))
        if not np.isfinite(val_mse):
            raise DivergenceError(f"autoencoder loss became non-finite at epoch {epoch}")
        history.append(val_mse)
    return ae, history


def reduce(ae: Autoencoder, s: ImageSet) -> ImageSet:
    """Replace every image with its autoencoder reconstruction.

    Labels and count are preserved; sigmoid output keeps pixels in (0, 1).
    """
    if s.height * s.width != ae.n_inputs:
        raise DimensionError(
            f"autoencoder expects {ae.n_inputs} pixels, images have {s.height * s.width}"
        )
    recon = ae.reconstruct(s.flat()).reshape(s.count, s.height, s.width)
    return ImageSet(images=recon, labels=s.labels.copy())


def save_reduced(path, s: ImageSet) -> None:
    """Write the QSC1 container: header + float32 pixels + label byte."""
    with open(path, "wb") as fh:
        fh.write(REDUCED_MAGIC)
        fh.write(struct.pack("<III", s.count, s.width, s.height))
        flat = s.flat().astype("<f4")
        for i in range(s.count):
            fh.write(flat[i].tobytes())
            fh.write(bytes([int(s.labels[i])]))


def load_reduced(path) -> ImageSet:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != REDUCED_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {REDUCED_MAGIC!r}")
        count, width, height = struct.unpack("<III", fh.read(12))
        record = width * height * 4 + 1
        payload = fh.read()
    if len(payload) < count * record:
        raise ConsistencyError(
            f"{path}: expected {count * record} payload bytes, found {len(payload)}"
        )
    images = np.empty((count, height, width))
    labels = np.empty(count, dtype=np.int64)
    for i in range(count):
        rec = payload[i * record:(i + 1) * record]
        images[i] = np.frombuffer(rec[:-1], dtype="<f4").reshape(height, width)
        labels[i] = rec[-1]
    return ImageSet(images=np.clip(images, 0.0, 1.0), labels=labels)
