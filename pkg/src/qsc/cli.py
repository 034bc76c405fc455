"""Command-line front end wiring the full pipeline.

Subcommands: ingest, autoencode, imprint, learn, encode, classify,
augment, thermo, embed, sweep.  Every run resolves its parameters from
built-in defaults, an optional flat ``key=value`` config file, and command
line flags (in that order), validates them, executes, and writes a
manifest JSON recording the resolved config, its hash, seeds, and library
versions next to the primary output.  Artifacts are byte-identical across
re-runs with the same config and seeds; only the manifest timestamp
differs.

Exit status: 0 on success, 1 on config or pipeline errors (with a
module-tagged message), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, chimera, datasets, dictionary, pipeline, solvers, thermo
from .errors import (
    CapacityError,
    ConfigError,
    ConsistencyError,
    DimensionError,
    DivergenceError,
    DomainError,
    EmbeddingError,
    FormatError,
    InsufficientDataError,
    NormalizationError,
    QscError,
    SolverError,
)

_ERROR_MODULE = {
    FormatError: "datasets",
    ConsistencyError: "datasets",
    DivergenceError: "datasets",
    InsufficientDataError: "dictionary",
    NormalizationError: "dictionary",
    DimensionError: "qubo",
    DomainError: "qubo",
    CapacityError: "solvers",
    SolverError: "solvers",
    EmbeddingError: "chimera",
    ConfigError: "cli",
}

SOLVERS = ("exhaustive", "anneal", "mp")


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit CLI flags."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        file_vals = _read_config_file(args.config)
        for key, raw in file_vals.items():
            if key not in resolved:
                raise ConfigError(f"unknown config key {key!r}")
            kind = type(resolved[key]) if resolved[key] is not None else str
            try:
                resolved[key] = kind(raw) if kind is not bool else raw.lower() in ("1", "true", "yes")
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    for key in resolved:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            resolved[key] = cli_val
    return resolved


def _config_hash(params: dict) -> str:
    canonical = json.dumps(params, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _write_manifest(primary_output: str, command: str, params: dict,
                    outputs: list[str]) -> str:
    import numba

    manifest = {
        "command": command,
        "config": params,
        "config_hash": _config_hash(params),
        "seed": params.get("seed"),
        "lambda": params.get("lam"),
        "solver": params.get("solver"),
        "reads": params.get("reads"),
        "workers": params.get("workers"),
        "versions": {
            "qsc": __version__,
            "numpy": np.__version__,
            "numba": numba.__version__,
            "python": sys.version.split()[0],
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "outputs": outputs,
    }
    path = str(Path(primary_output).with_suffix("")) + "-manifest.json"
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _require_file(path: str, role: str) -> str:
    if not path:
        raise ConfigError(f"missing required path for {role}")
    if not Path(path).is_file():
        raise ConfigError(f"{role} file not found: {path}")
    return path


def _anneal_config(p: dict) -> solvers.AnnealConfig:
    return solvers.AnnealConfig(reads=p["reads"], sweeps=p["sweeps"],
                                t_hot=p["t_hot"], t_cold=p["t_cold"],
                                seed=p["seed"])


def _validate_solver(p: dict, dct: dictionary.Dictionary | None) -> None:
    if p["solver"] not in SOLVERS:
        raise ConfigError(f"solver must be one of {SOLVERS}, got {p['solver']!r}")
    if p.get("lam", 0.0) < 0:
        raise ConfigError("lambda must be >= 0")
    if (p["solver"] == "exhaustive" and dct is not None
            and dct.n_atoms > solvers.EXHAUSTIVE_CAP):
        raise ConfigError(
            f"exhaustive solver is capped at N_q <= {solvers.EXHAUSTIVE_CAP} "
            f"variables but the dictionary has {dct.n_atoms} atoms; "
            "use --solver anneal"
        )


def _limited(s: datasets.ImageSet, limit: int) -> datasets.ImageSet:
    if limit and limit < s.count:
        return s.take(np.arange(limit))
    return s


def _encoder_from(p: dict, keep: int = 1):
    return solvers.make_encoder(p["solver"], anneal=_anneal_config(p),
                                keep=keep, mp_k=p.get("mp_k"))


# --------------------------------------------------------------------------
# command handlers


def _cmd_ingest(p: dict) -> list[str]:
    raw = datasets.load_idx(_require_file(p["images"], "images"),
                            _require_file(p["labels"], "labels"))
    raw = _limited(raw, p["limit"])
    reduced = datasets.downsample(raw)
    datasets.save_reduced(p["out"], reduced)
    print(f"ingest: {reduced.count} images -> 12x12 -> {p['out']}")
    return [p["out"]]


def _cmd_autoencode(p: dict) -> list[str]:
    data = datasets.load_reduced(_require_file(p["data"], "data"))
    ae, history = datasets.train_autoencoder(
        data, epochs=p["epochs"], lr=p["lr"], momentum=p["momentum"],
        seed=p["seed"])
    reduced = datasets.reduce(ae, data)
    ae.save(p["model"])
    datasets.save_reduced(p["out"], reduced)
    print(f"autoencode: {data.count} images, held-out mse "
          f"{history[0]:.5f} -> {history[-1]:.5f}, wrote {p['out']}")
    return [p["out"], p["model"]]


def _cmd_imprint(p: dict) -> list[str]:
    data = datasets.load_reduced(_require_file(p["data"], "data"))
    patch = p["patch"] or None
    dct = dictionary.imprint(data, n=p["atoms"], patch=patch, seed=p["seed"])
    dct.save(p["out"])
    print(f"imprint: {dct.n_atoms} atoms of dim {dct.d} "
          f"(gamma={dct.gamma:.2f}) -> {p['out']}")
    return [p["out"]]


def _cmd_learn(p: dict) -> list[str]:
    data = datasets.load_reduced(_require_file(p["data"], "data"))
    data = _limited(data, p["limit"])
    dct = dictionary.Dictionary.load(_require_file(p["dict"], "dictionary"))
    _validate_solver(p, dct)
    if dct.d != data.height * data.width:
        raise ConfigError(
            f"dictionary dim {dct.d} does not match image pixels "
            f"{data.height * data.width}; unsupervised learning runs on whole images"
        )
    cfg = dictionary.LearnConfig(lr=p["lr"], momentum=p["momentum"],
                                 batch_size=p["batch"], steps=p["steps"],
                                 seed=p["seed"])
    refined, losses = dictionary.learn(dct, data, cfg, _encoder_from(p), p["lam"])
    refined.save(p["out"])
    print(f"learn: {len(losses)} steps, loss {losses[0]:.4f} -> {losses[-1]:.4f}, "
          f"wrote {p['out']}")
    return [p["out"]]


def _cmd_encode(p: dict) -> list[str]:
    data = datasets.load_reduced(_require_file(p["data"], "data"))
    data = _limited(data, p["limit"])
    dct = dictionary.Dictionary.load(_require_file(p["dict"], "dictionary"))
    _validate_solver(p, dct)
    patch = p["patch"] or None
    if patch is None and dct.d != data.height * data.width:
        raise ConfigError(
            f"whole-image encoding needs dictionary dim {data.height * data.width}, "
            f"got {dct.d}; pass --patch for patch coding"
        )
    if patch is not None and dct.d != patch * patch:
        raise ConfigError(
            f"patch={patch} encoding needs dictionary dim {patch * patch}, got {dct.d}"
        )
    maps = pipeline.encode_set(data, dct, p["lam"], method=p["solver"],
                               anneal=_anneal_config(p), patch=patch,
                               stride=p["stride"], mp_k=p.get("mp_k"),
                               workers=p["workers"])
    pipeline.save_feature_maps(p["out"], maps)
    mean_sparsity = float(np.mean([fm.sparsity for fm in maps]))
    print(f"encode: {len(maps)} feature maps, mean sparsity "
          f"{100 * mean_sparsity:.1f}% -> {p['out']}")
    if p["csv"]:
        pipeline.feature_maps_to_csv(p["csv"], maps)
        return [p["out"], p["csv"]]
    return [p["out"]]


def _split_features(maps):
    x = np.stack([fm.flat() for fm in maps])
    y = np.array([fm.label for fm in maps], dtype=np.int64)
    train_idx, test_idx = pipeline.split_train_test(len(maps))
    return x[train_idx], y[train_idx], x[test_idx], y[test_idx]


def _cmd_classify(p: dict) -> list[str]:
    maps = pipeline.load_feature_maps(_require_file(p["features"], "features"))
    x_train, y_train, x_test, y_test = _split_features(maps)
    if p["classifier"] == "svm":
        model, _ = pipeline.train_svm(x_train, y_train, epochs=p["epochs"],
                                      lr=p["lr"], reg=p["reg"], seed=p["seed"])
        train_acc = pipeline.accuracy(pipeline.predict_svm(model, x_train), y_train)
        test_acc = pipeline.accuracy(pipeline.predict_svm(model, x_test), y_test)
    elif p["classifier"] == "mlp":
        model, _ = pipeline.train_mlp(x_train, y_train, epochs=p["epochs"],
                                      lr=p["lr"], seed=p["seed"])
        train_acc = pipeline.accuracy(pipeline.predict_mlp(model, x_train), y_train)
        test_acc = pipeline.accuracy(pipeline.predict_mlp(model, x_test), y_test)
    else:
        raise ConfigError(f"classifier must be svm or mlp, got {p['classifier']!r}")
    metrics = {"classifier": p["classifier"], "train_count": len(y_train),
               "test_count": len(y_test), "train_accuracy": train_acc,
               "test_accuracy": test_acc}
    Path(p["out"]).write_text(json.dumps(metrics, indent=2) + "\n")
    print(f"classify[{p['classifier']}]: train {100 * train_acc:.2f}%  "
          f"test {100 * test_acc:.2f}%")
    return [p["out"]]


def _cmd_augment(p: dict) -> list[str]:
    data = datasets.load_reduced(_require_file(p["data"], "data"))
    data = _limited(data, p["limit"])
    dct = dictionary.Dictionary.load(_require_file(p["dict"], "dictionary"))
    _validate_solver(p, dct)
    if dct.d != data.height * data.width:
        raise ConfigError("augmentation runs on whole-image dictionaries")
    cfg = _anneal_config(p)
    train_idx, test_idx = pipeline.split_train_test(data.count)

    from .qubo import to_qubo

    spectra = []
    for rank, i in enumerate(train_idx):
        prob = to_qubo(dct, data.images[i].ravel(), p["lam"])
        spectra.append(solvers.solve_annealed(
            prob, solvers.AnnealConfig(reads=cfg.reads, sweeps=cfg.sweeps,
                                       t_hot=cfg.t_hot, t_cold=cfg.t_cold,
                                       seed=cfg.seed + int(i) * 4096),
            keep=p["k"]))
    x_test = np.stack([
        pipeline.encode_image_whole(data.images[i], dct, p["lam"],
                                    _encoder_from(p)).astype(np.float64)
        for i in test_idx])
    y_test = data.labels[test_idx]

    def svm_accuracy(k: int) -> float:
        rows, labels = [], []
        for spec, i in zip(spectra, train_idx):
            for code in pipeline.augment(spec, k):
                rows.append(code.astype(np.float64))
                labels.append(data.labels[i])
        model, _ = pipeline.train_svm(np.stack(rows), np.array(labels),
                                      epochs=p["epochs"], lr=p["lr"],
                                      reg=p["reg"], seed=p["seed"])
        return pipeline.accuracy(pipeline.predict_svm(model, x_test), y_test)

    base = svm_accuracy(1)
    augmented = svm_accuracy(p["k"])
    metrics = {"lambda": p["lam"], "k": p["k"], "test_count": len(y_test),
               "accuracy_k1": base, "accuracy_k": augmented,
               "gain_points": 100 * (augmented - base)}
    Path(p["out"]).write_text(json.dumps(metrics, indent=2) + "\n")
    print(f"augment: k=1 {100 * base:.2f}%  k={p['k']} {100 * augmented:.2f}%  "
          f"gain {metrics['gain_points']:+.2f} points")
    return [p["out"]]


def _parse_grid(spec: str) -> np.ndarray:
    try:
        start, stop, step = (float(tok) for tok in spec.split(":"))
    except ValueError as exc:
        raise ConfigError(f"grid must be start:stop:step, got {spec!r}") from exc
    count = int(round((stop - start) / step)) + 1
    grid = start + step * np.arange(count)
    return grid[grid <= stop + 1e-9]


def _cmd_thermo(p: dict) -> list[str]:
    data = datasets.load_reduced(_require_file(p["data"], "data"))
    dct = dictionary.Dictionary.load(_require_file(p["dict"], "dictionary"))
    _validate_solver(p, dct)
    if not (0 <= p["index"] < data.count):
        raise ConfigError(f"image index {p['index']} out of range [0, {data.count})")
    grid = _parse_grid(p["grid"])
    encoder = _encoder_from(p, keep=max(4 * p["reads"], 64))
    curve = thermo.lambda_sweep(data.images[p["index"]].ravel(), dct, grid,
                                encoder, beta=p["beta"])
    thermo.write_curve_csv(curve, p["out"])
    _, _, locator = thermo.second_derivative(curve)
    best_recon = float(curve.lambdas[int(np.argmin(curve.recon_error))])
    print(f"thermo: image {p['index']}, {len(curve)} lambdas -> {p['out']}; "
          f"|d2F| peak at lambda={locator:.2f}, recon minimum at lambda={best_recon:.2f}")
    return [p["out"]]


def _cmd_embed(p: dict) -> list[str]:
    disabled: set[int] = set()
    if p["disabled"]:
        text = Path(_require_file(p["disabled"], "disabled-qubit list")).read_text()
        disabled = {int(tok) for tok in text.replace(",", " ").split()}
    graph = chimera.chimera_graph(p["rows"], p["cols"], p["shore"], disabled)
    strength = p["chain_strength"] or None
    emb = chimera.embed_clique(p["n"], graph, chain_strength=strength)
    chimera.validate_clique_embedding(emb, graph)
    chimera.write_embedding(emb, p["out"])
    used = sum(len(c) for c in emb.chains.values())
    print(f"embed: {p['n']}-clique on {p['rows']}x{p['cols']}x{2 * p['shore']} "
          f"({graph.n_qubits} qubits), {used} physical qubits in chains of "
          f"{max(len(c) for c in emb.chains.values())}, "
          f"max native clique {chimera.max_native_clique(graph)} -> {p['out']}")
    return [p["out"]]


def _cmd_sweep(p: dict) -> list[str]:
    data = datasets.load_reduced(_require_file(p["data"], "data"))
    data = _limited(data, p["limit"])
    dct = dictionary.Dictionary.load(_require_file(p["dict"], "dictionary"))
    _validate_solver(p, dct)
    try:
        lams = [float(tok) for tok in p["lambdas"].split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad lambda list {p['lambdas']!r}") from exc
    if not lams:
        raise ConfigError("empty lambda list")
    patch = p["patch"] or None
    rows = ["lambda,sparsity,train_accuracy,test_accuracy"]
    best = (-1.0, None)
    for lam in lams:
        maps = pipeline.encode_set(data, dct, lam, method=p["solver"],
                                   anneal=_anneal_config(p), patch=patch,
                                   stride=p["stride"], mp_k=p.get("mp_k"),
                                   workers=p["workers"])
        x_train, y_train, x_test, y_test = _split_features(maps)
        model, _ = pipeline.train_svm(x_train, y_train, epochs=p["epochs"],
                                      lr=p["lr"], reg=p["reg"], seed=p["seed"])
        train_acc = pipeline.accuracy(pipeline.predict_svm(model, x_train), y_train)
        test_acc = pipeline.accuracy(pipeline.predict_svm(model, x_test), y_test)
        sparsity = float(np.mean([fm.sparsity for fm in maps]))
        rows.append(f"{lam!r},{sparsity!r},{train_acc!r},{test_acc!r}")
        if test_acc > best[0]:
            best = (test_acc, lam)
        print(f"sweep: lambda={lam:.2f} sparsity={100 * sparsity:.1f}% "
              f"test accuracy={100 * test_acc:.2f}%")
    Path(p["out"]).write_text("\n".join(rows) + "\n")
    print(f"sweep: best lambda={best[1]} ({100 * best[0]:.2f}%) -> {p['out']}")
    return [p["out"]]


# --------------------------------------------------------------------------
# argument plumbing

_COMMON = {
    "seed": 0, "lam": 0.7, "solver": "anneal", "reads": 64, "sweeps": 200,
    "t_hot": 2.0, "t_cold": 0.05, "workers": 1, "limit": 0, "mp_k": 6,
}

_DEFAULTS: dict[str, dict] = {
    "ingest": {**_COMMON, "images": "", "labels": "", "out": "reduced12.qsc1"},
    "autoencode": {**_COMMON, "data": "", "out": "reduced.qsc1",
                   "model": "autoencoder.npz", "epochs": 80, "lr": 30.0,
                   "momentum": 0.9},
    "imprint": {**_COMMON, "data": "", "out": "dictionary.qscd", "atoms": 47,
                "patch": 0},
    "learn": {**_COMMON, "data": "", "dict": "", "out": "dictionary.qscd",
              "steps": 100, "batch": 100, "lr": 0.1, "momentum": 0.9},
    "encode": {**_COMMON, "data": "", "dict": "", "out": "features.qscf",
               "patch": 0, "stride": 2, "csv": ""},
    "classify": {**_COMMON, "features": "", "classifier": "svm", "epochs": 30,
                 "lr": 0.1, "reg": 1e-4, "out": "metrics.json"},
    "augment": {**_COMMON, "data": "", "dict": "", "k": 30, "epochs": 30,
                "lr": 0.1, "reg": 1e-4, "out": "augment-metrics.json"},
    "thermo": {**_COMMON, "data": "", "dict": "", "index": 0,
               "grid": "0.5:3.5:0.1", "beta": 100.0, "reads": 1000,
               "out": "lambda-curve.csv"},
    "embed": {**_COMMON, "rows": 12, "cols": 12, "shore": 4, "n": 47,
              "disabled": "", "chain_strength": 0.0, "out": "embedding.txt"},
    "sweep": {**_COMMON, "data": "", "dict": "", "lambdas": "0.5,0.7,1.0,1.5",
              "patch": 6, "stride": 2, "epochs": 30, "lr": 0.1, "reg": 1e-4,
              "out": "sweep.csv"},
}

_HANDLERS = {
    "ingest": _cmd_ingest, "autoencode": _cmd_autoencode,
    "imprint": _cmd_imprint, "learn": _cmd_learn, "encode": _cmd_encode,
    "classify": _cmd_classify, "augment": _cmd_augment, "thermo": _cmd_thermo,
    "embed": _cmd_embed, "sweep": _cmd_sweep,
}


def _add_options(sub: argparse.ArgumentParser, defaults: dict) -> None:
    sub.add_argument("--config", help="flat key=value config file")
    for key, default in defaults.items():
        flag = "--" + key.replace("_", "-")
        if key == "lam":
            flag = "--lambda"
        kind = type(default)
        sub.add_argument(flag, dest=key, type=str if kind is str else kind,
                         default=None, help=f"default: {default!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsc",
        description="Binary sparse coding pipeline on QUBO solvers.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name, defaults in _DEFAULTS.items():
        sub = subs.add_parser(name, help=f"{name} stage")
        _add_options(sub, defaults)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = _resolve(args, _DEFAULTS[args.command])
        outputs = _HANDLERS[args.command](params)
        manifest = _write_manifest(outputs[0], args.command, params, outputs)
        print(f"manifest: {manifest}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except QscError as exc:
        tag = _ERROR_MODULE.get(type(exc), "qsc")
        print(f"error[{tag}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
