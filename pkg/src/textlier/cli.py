"""Command-line pipeline: embed, inject, split, train, score, eval, baseline.

Configuration resolves defaults < config file (--config, JSON) < flags, and
every command persists its resolved configuration next to its outputs. All
randomness flows from the single --seed through named per-stage sub-seeds,
so re-running any stage with the same inputs is byte-identical.

Exit codes: 0 success, 2 usage, 3 format, 4 numerical/training.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import baselines as bl
from . import corpus
from .autoencoder import AEConfig, featurize, train_autoencoder
from .checkpoint import PipelineBundle, load_checkpoint, save_checkpoint
from .classifier import predict, train_logreg
from .corpus import _fnv1a64
from .errors import FormatError, NumericalError, TrainingError
from .evaluation import evaluate_predictions

DEFAULTS: dict = {
    "seed": 0,
    "max_sent": 32,
    "embed_dim": 768,
    "latent_dim": 32,
    "channels": [8, 16, 32],
    "epochs": 50,
    "batch_size": 32,
    "lr": 1e-3,
    "lam": 1e-4,
    "logreg_epochs": 2000,
    "logreg_lr": 0.1,
    "threshold": 0.5,
    "fractions": [0.8, 0.1, 0.1],
    "baseline_percentile": 95.0,
    "pca_k": 8,
}


def sub_seed(seed: int, stage: str) -> int:
    """Stable per-stage seed derived from the run seed and the stage name."""
    return (_fnv1a64(f"{seed}:{stage}".encode()) ^ seed) & 0x7FFFFFFF


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as f:
            try:
                file_cfg = json.load(f)
            except json.JSONDecodeError as exc:
                raise FormatError(f"bad config file: {exc}", args.config) from exc
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def persist_config(cfg: dict, out_dir: str, name: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as f:
        f.write(json.dumps(cfg, sort_keys=True, indent=2) + "\n")


def _split_from_config(docs, cfg: dict) -> corpus.DatasetSplit:
    return corpus.stratified_split(docs, tuple(cfg["fractions"]),
                                   seed=sub_seed(cfg["seed"], "split"))


def cmd_embed(args) -> int:
    cfg = resolve_config(args)
    raw = corpus.read_raw_corpus(args.input)
    if args.provider == "hash":
        provider: corpus.EmbeddingProvider = corpus.HashEmbedder(cfg["embed_dim"])
    elif args.provider == "file":
        if not args.provider_path:
            raise ValueError("--provider file requires --provider-path")
        provider = corpus.LookupEmbedder.from_file(args.provider_path)
    else:
        raise ValueError(f"unknown provider {args.provider!r}")
    docs = [corpus.embed_document(d, provider, cfg["max_sent"]) for d in raw]
    corpus.write_embeddings(docs, args.out, max_sent=cfg["max_sent"])
    n_sent = sum(d.sentence_count for d in docs)
    print(f"embedded {len(docs)} documents ({n_sent} sentences, "
          f"dim {provider.embed_dim}) -> {args.out}")
    return 0


def cmd_inject(args) -> int:
    normal = corpus.read_raw_corpus(args.normal)
    pool = corpus.read_raw_corpus(args.outliers)
    normal = [corpus.RawDocument(d.id, d.text, corpus.Source.NORMAL)
              for d in normal]
    pool = [corpus.RawDocument(d.id, d.text, corpus.Source.OUTLIER)
            for d in pool]
    combined = corpus.inject_outliers(normal, pool, args.n, seed=args.seed or 0)
    corpus.write_raw_corpus(combined, args.out)
    n_out = sum(1 for d in combined if d.source is corpus.Source.OUTLIER)
    print(f"wrote {len(combined)} documents ({n_out} outliers) -> {args.out}")
    return 0


def cmd_split(args) -> int:
    cfg = resolve_config(args)
    docs, header = corpus.read_embeddings(args.embeddings)
    split = _split_from_config(docs, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    for name in ("train", "validation", "test"):
        path = os.path.join(args.out_dir, f"{name}.jsonl")
        corpus.write_embeddings(split.partition(name), path,
                                max_sent=header["max_sent"])
        print(f"{name}: {len(split.partition(name))} documents -> {path}")
    persist_config(cfg, args.out_dir, "split_config.json")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    docs, header = corpus.read_embeddings(args.embeddings)
    if not docs:
        raise ValueError(f"no documents in {args.embeddings}")
    cfg["max_sent"] = header["max_sent"]
    cfg["embed_dim"] = header["embed_dim"]
    split = _split_from_config(docs, cfg)
    ae_cfg = AEConfig(max_sent=cfg["max_sent"], embed_dim=cfg["embed_dim"],
                      latent_dim=cfg["latent_dim"],
                      channels=tuple(cfg["channels"]), epochs=cfg["epochs"],
                      batch_size=cfg["batch_size"], lr=cfg["lr"],
                      seed=sub_seed(cfg["seed"], "ae"))
    model = train_autoencoder(split.train, ae_cfg)
    feats = [(featurize(model, d).payload(), d.label) for d in split.train]
    feats = corpus.oversample(feats, seed=sub_seed(cfg["seed"], "oversample"))
    clf = train_logreg(feats, lam=cfg["lam"], epochs=cfg["logreg_epochs"],
                       lr=cfg["logreg_lr"], seed=sub_seed(cfg["seed"], "logreg"),
                       threshold=cfg["threshold"])
    bundle = PipelineBundle(autoencoder=model, classifier=clf, run_config=cfg)
    save_checkpoint(bundle, args.out)
    out_dir = args.out_dir or os.path.dirname(os.path.abspath(args.out))
    persist_config(cfg, out_dir, "train_config.json")
    from .plots import save_training_curve
    save_training_curve(model.training_log,
                        os.path.join(out_dir, "training_loss.png"))
    print(f"trained on {len(split.train)} documents, final epoch loss "
          f"{model.training_log[-1]:.6g} -> {args.out}")
    return 0


def _write_scores(items: list[bl.ScoredItem], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for it in items:
            f.write(json.dumps({"id": it.doc_id, "score": it.score,
                                "scorer": it.scorer}) + "\n")


def cmd_score(args) -> int:
    bundle = load_checkpoint(args.checkpoint)
    if bundle.autoencoder is None:
        raise FormatError("checkpoint holds no autoencoder", args.checkpoint)
    docs, _ = corpus.read_embeddings(args.embeddings)
    items = [bl.ScoredItem(doc_id=d.id,
                           score=featurize(bundle.autoencoder, d).recon_error,
                           scorer="ae_recon")
             for d in docs]
    _write_scores(items, args.out)
    from .plots import save_score_histogram
    fig_path = os.path.splitext(args.out)[0] + ".png"
    save_score_histogram([it.score for it in items], [d.label for d in docs],
                         fig_path, title="AE reconstruction error")
    print(f"scored {len(items)} documents -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    bundle = load_checkpoint(args.checkpoint)
    if bundle.autoencoder is None or bundle.classifier is None:
        raise FormatError("checkpoint is not a trained pipeline bundle",
                          args.checkpoint)
    docs, _ = corpus.read_embeddings(args.embeddings)
    cfg = {**DEFAULTS, **bundle.run_config}
    split = _split_from_config(docs, cfg)
    part = split.partition(args.partition)
    if not part:
        raise ValueError(f"partition {args.partition!r} is empty")
    labels = [d.label for d in part]
    preds = [predict(bundle.classifier,
                     featurize(bundle.autoencoder, d).payload()) for d in part]
    report = evaluate_predictions(labels, preds)
    base = os.path.splitext(args.out)[0]
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(report.to_json() + "\n")
    table = report.to_table(item=f"{args.partition} (ae+logreg)")
    with open(base + ".txt", "w", encoding="utf-8") as f:
        f.write(table)
    from .plots import save_confusion_figure
    save_confusion_figure(report, base + ".png")
    print(table, end="")
    return 0


def cmd_baseline(args) -> int:
    cfg = resolve_config(args)
    docs, _ = corpus.read_embeddings(args.embeddings)
    split = _split_from_config(docs, cfg)
    train_vecs = np.asarray([d.pooled() for d in split.train])
    if args.scorer == "mahalanobis":
        model: bl.GaussianModel | bl.PCAModel = bl.fit_gaussian(train_vecs)
    elif args.scorer == "pca":
        k = min(cfg["pca_k"], train_vecs.shape[1])
        model = bl.fit_pca(train_vecs, k)
    else:
        raise ValueError(f"unknown scorer {args.scorer!r}")
    train_scores = [it.score for it in bl.score_corpus(model, split.train)]
    thresh = bl.percentile_threshold(train_scores, cfg["baseline_percentile"])
    part = split.partition(args.partition)
    items = bl.score_corpus(model, part)
    labels = [d.label for d in part]
    preds = [1 if it.score > thresh else 0 for it in items]
    report = evaluate_predictions(labels, preds)
    os.makedirs(args.out_dir, exist_ok=True)
    _write_scores(items, os.path.join(args.out_dir, f"{args.scorer}_scores.jsonl"))
    with open(os.path.join(args.out_dir, f"{args.scorer}_report.json"), "w",
              encoding="utf-8") as f:
        f.write(report.to_json() + "\n")
    table = report.to_table(item=f"{args.partition} ({args.scorer})")
    with open(os.path.join(args.out_dir, f"{args.scorer}_report.txt"), "w",
              encoding="utf-8") as f:
        f.write(table)
    from .plots import save_score_histogram
    save_score_histogram([it.score for it in items], labels,
                         os.path.join(args.out_dir, f"{args.scorer}_scores.png"),
                         title=f"{args.scorer} scores ({args.partition})")
    persist_config(cfg, args.out_dir, f"{args.scorer}_config.json")
    print(table, end="")
    return 0


def _fractions(text: str) -> list[float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("need three comma-separated fractions")
    return parts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textlier",
        description="Text outlier detection with a convolutional autoencoder "
                    "over sentence embeddings")
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out-dir", default=None)
        p.add_argument("--max-sent", dest="max_sent", type=int, default=None)
        p.add_argument("--embed-dim", dest="embed_dim", type=int, default=None)

    p = sub.add_parser("embed", help="embed a raw corpus into the canonical file")
    p.add_argument("--input", required=True)
    p.add_argument("--provider", choices=["hash", "file"], default="hash")
    p.add_argument("--provider-path", default=None,
                   help="lookup table for --provider file")
    p.add_argument("--out", required=True)
    shared(p)
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("inject", help="inject outlier documents into a corpus")
    p.add_argument("--normal", required=True)
    p.add_argument("--outliers", required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--out", required=True)
    shared(p)
    p.set_defaults(fn=cmd_inject)

    p = sub.add_parser("split", help="stratified 3-way split of an embedding file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--fractions", type=_fractions, default=None)
    shared(p)
    p.set_defaults(fn=cmd_split, _needs_out_dir=True)

    p = sub.add_parser("train", help="split, train AE + classifier, write checkpoint")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fractions", type=_fractions, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--latent-dim", dest="latent_dim", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    shared(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("score", help="AE reconstruction-error scores")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    shared(p)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one partition")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--partition", default="validation",
                   choices=["train", "validation", "test"])
    p.add_argument("--out", required=True)
    shared(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("baseline", help="Mahalanobis / PCA baseline scoring")
    p.add_argument("--scorer", choices=["mahalanobis", "pca"], required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--partition", default="validation",
                   choices=["train", "validation", "test"])
    p.add_argument("--fractions", type=_fractions, default=None)
    shared(p)
    p.set_defaults(fn=cmd_baseline, _needs_out_dir=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "_needs_out_dir", False) and not args.out_dir:
        parser.error(f"{args.command} requires --out-dir")
    try:
        return args.fn(args)
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 3
    except (TrainingError, NumericalError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
