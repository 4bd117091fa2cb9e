"""Text checkpoint format for trained models.

Layout:
    line 1: "textlier-checkpoint v1"
    a [config] block holding one JSON object
    one [param] block per named parameter: "[param] NAME shape=D0,D1,..."
    followed by the values as decimal reals, 8 per line, printed with 17
    significant digits so a float64 reload is bit-exact.

The same container stores the autoencoder and, when present, the logistic
classifier (weights, bias, standardizer) under "classifier.*" names.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autoencoder import AEConfig, AutoencoderModel
from .classifier import LogisticModel, Standardizer
from .errors import FormatError

MAGIC = "textlier-checkpoint v1"
_VALUES_PER_LINE = 8


@dataclass
class PipelineBundle:
    """Everything cmd_train produces: the AE, the classifier and the resolved
    run configuration (including split seed/fractions for stage isolation)."""

    autoencoder: AutoencoderModel | None
    classifier: LogisticModel | None
    run_config: dict


def _named_params(model: AutoencoderModel) -> list[tuple[str, np.ndarray]]:
    out = []
    for side, layers in (("encoder", model.encoder), ("decoder", model.decoder)):
        for i, layer in enumerate(layers):
            names = ["weight", "bias"]
            for name, p in zip(names, layer.parameters):
                out.append((f"{side}.{i}.{name}", p))
    return out


def _write_block(f, name: str, arr: np.ndarray) -> None:
    shape = ",".join(str(s) for s in arr.shape) if arr.shape else "1"
    f.write(f"[param] {name} shape={shape}\n")
    flat = np.asarray(arr, dtype=np.float64).ravel()
    for start in range(0, flat.size, _VALUES_PER_LINE):
        chunk = flat[start:start + _VALUES_PER_LINE]
        f.write(" ".join(f"{v:.17g}" for v in chunk) + "\n")


def save_checkpoint(bundle: PipelineBundle, path: str) -> None:
    cfg: dict = {"run": bundle.run_config}
    if bundle.autoencoder is not None:
        cfg["ae"] = bundle.autoencoder.config.to_dict()
        cfg["training_log"] = [float(v) for v in bundle.autoencoder.training_log]
    if bundle.classifier is not None:
        cfg["classifier"] = {"lam": bundle.classifier.lam,
                             "threshold": bundle.classifier.threshold}
    with open(path, "w", encoding="utf-8") as f:
        f.write(MAGIC + "\n")
        f.write("[config]\n")
        f.write(json.dumps(cfg, sort_keys=True) + "\n")
        if bundle.autoencoder is not None:
            for name, arr in _named_params(bundle.autoencoder):
                _write_block(f, name, arr)
        if bundle.classifier is not None:
            clf = bundle.classifier
            _write_block(f, "classifier.weights", clf.weights)
            _write_block(f, "classifier.bias", np.asarray([clf.bias]))
            _write_block(f, "classifier.std.mean", clf.standardizer.mean)
            _write_block(f, "classifier.std.std", clf.standardizer.std)


def _parse_blocks(lines: list[str], path: str) -> tuple[dict, dict[str, np.ndarray]]:
    if not lines or lines[0].strip() != MAGIC:
        raise FormatError(f"not a checkpoint file (expected {MAGIC!r})", path, 1)
    i = 1
    if i >= len(lines) or lines[i].strip() != "[config]":
        raise FormatError("missing [config] block", path, i + 1)
    try:
        cfg = json.loads(lines[i + 1])
    except (IndexError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable config: {exc}", path, i + 2) from exc
    params: dict[str, np.ndarray] = {}
    i += 2
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if not line.startswith("[param] "):
            raise FormatError(f"expected a [param] block, got {line[:40]!r}",
                              path, i + 1)
        try:
            _, name, shape_part = line.split(" ", 2)
            shape = tuple(int(s) for s in shape_part.removeprefix("shape=").split(","))
        except ValueError as exc:
            raise FormatError(f"bad [param] header: {exc}", path, i + 1) from exc
        n = int(np.prod(shape))
        values: list[float] = []
        i += 1
        while len(values) < n:
            if i >= len(lines):
                raise FormatError(f"truncated block {name!r}", path, i)
            values.extend(float(v) for v in lines[i].split())
            i += 1
        if len(values) != n:
            raise FormatError(
                f"block {name!r} has {len(values)} values, expected {n}", path, i)
        params[name] = np.asarray(values, dtype=np.float64).reshape(shape)
    return cfg, params


def load_checkpoint(path: str) -> PipelineBundle:
    with open(path, encoding="utf-8") as f:
        lines = f.readlines()
    cfg, params = _parse_blocks(lines, path)
    model: AutoencoderModel | None = None
    if "ae" in cfg:
        model = AutoencoderModel(AEConfig.from_dict(cfg["ae"]))
        model.training_log = list(cfg.get("training_log", []))
        for name, arr in _named_params(model):
            if name not in params:
                raise FormatError(f"checkpoint is missing parameter {name!r}", path)
            if params[name].shape != arr.shape:
                raise FormatError(
                    f"parameter {name!r} has shape {params[name].shape}, "
                    f"model expects {arr.shape}", path)
            arr[...] = params[name]
    clf: LogisticModel | None = None
    if "classifier" in cfg:
        try:
            clf = LogisticModel(
                weights=params["classifier.weights"],
                bias=float(params["classifier.bias"][0]),
                lam=cfg["classifier"]["lam"],
                threshold=cfg["classifier"]["threshold"],
                standardizer=Standardizer(mean=params["classifier.std.mean"],
                                          std=params["classifier.std.std"]))
        except KeyError as exc:
            raise FormatError(f"checkpoint is missing {exc}", path) from exc
    return PipelineBundle(autoencoder=model, classifier=clf,
                          run_config=cfg.get("run", {}))
