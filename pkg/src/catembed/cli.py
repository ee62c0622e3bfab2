"""Command-line entry point.

Subcommands: build-vocab, train, eval-categorize, eval-relatedness,
neighbors, inspect-weights, gen-synthetic, export. Options can come from a
``key=value`` config file (``--config``); explicit flags override file
values, and every command that writes an output directory echoes its
effective configuration there as ``config.echo`` so a run can be reproduced
from its own outputs.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import categorize, embeddings, hierarchy, kernels, relatedness, synthetic, trainer
from .corpus import NodeKind, build_vocabulary, load_corpus, load_hierarchy, prune_to_dag
from .errors import CatembedError, ConfigError
from .synthetic import SyntheticSpec

log = logging.getLogger("catembed")

ECHO_NAME = "config.echo"


@dataclass
class RunConfig:
    """Everything a pipeline run needs: paths, pruning options, hyperparameters."""

    corpus: str = ""
    hierarchy: str = ""
    embeddings: str = ""
    gold: str = ""
    dataset: str = ""
    output: str = "out"
    root: str = "root"
    drop_patterns: list[str] = field(default_factory=list)
    min_count: int = 1
    verbosity: int = 1
    dim: int = 100
    epochs: int = 5
    lr0: float = 0.025
    lr_min: float = -1.0  # negative means auto: 1e-4 * lr0
    negatives: int = 10
    chunk: int = 500
    noise_alpha: float = 0.75
    seed: int = 1
    workers: int = 1
    mode: str = "hce"
    shuffle: bool = True
    subsample: float = 0.0
    checkpoint_every: int = 0

    def train_config(self) -> trainer.TrainConfig:
        return trainer.TrainConfig(
            dim=self.dim, epochs=self.epochs, lr0=self.lr0,
            lr_min=None if self.lr_min < 0 else self.lr_min,
            negatives=self.negatives, chunk=self.chunk, noise_alpha=self.noise_alpha,
            seed=self.seed, workers=self.workers, mode=self.mode,
            shuffle=self.shuffle, subsample=self.subsample,
            checkpoint_every=self.checkpoint_every,
        )


def _coerce(raw: str, typ) -> object:
    if typ == bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if typ == int:
        return int(raw)
    if typ == float:
        return float(raw)
    if typ == list[str]:
        return [p for p in (s.strip() for s in raw.split(",")) if p]
    return raw


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    types = {f.name: f.type for f in fields(RunConfig)}
    values: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip().replace("-", "_")
        if key not in types:
            raise ConfigError(f"{path}:{lineno}: unknown option {key!r}")
        typ = types[key]
        if isinstance(typ, str):  # annotations may arrive as strings
            typ = {"str": str, "int": int, "float": float, "bool": bool, "list[str]": list[str]}[typ]
        values[key] = _coerce(raw.strip(), typ)
    return values


def effective_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            setattr(cfg, key, value)
    names = {f.name for f in fields(RunConfig)}
    for key, value in vars(args).items():
        if key in names:  # flags use SUPPRESS, so present means explicitly given
            setattr(cfg, key, value)
    return cfg


def echo_config(cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, list):
            value = ",".join(value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name}={value}")
    (out_dir / ECHO_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")


def dota_gold_path() -> Path:
    """Bundled 450-concept / 15-category categorization fixture."""
    return Path(str(importlib.resources.files("catembed").joinpath("data", "dota.tsv")))


def _build_pipeline(cfg: RunConfig):
    if not cfg.corpus:
        raise ConfigError("missing --corpus path")
    if not cfg.hierarchy:
        raise ConfigError("missing --hierarchy path")
    vocab = build_vocabulary(cfg.corpus, min_count=cfg.min_count)
    raw = load_hierarchy(cfg.hierarchy, vocab)
    graph, report = prune_to_dag(raw, vocab, cfg.root, cfg.drop_patterns)
    log.info("%s", report)
    corpus = load_corpus(cfg.corpus, vocab, graph)
    if corpus.skipped_documents or corpus.dropped_contexts or corpus.dropped_labels:
        log.info(
            "corpus filtering: %d documents skipped, %d contexts dropped, %d labels dropped",
            corpus.skipped_documents, corpus.dropped_contexts, corpus.dropped_labels,
        )
    log.info(
        "corpus: %d documents, %d pairs, %d entities, %d categories",
        len(corpus), corpus.n_pairs, vocab.n_entities, vocab.n_categories,
    )
    return vocab, graph, corpus


def cmd_build_vocab(args: argparse.Namespace) -> int:
    cfg = effective_config(args)
    if not cfg.corpus:
        raise ConfigError("missing --corpus path")
    vocab = build_vocabulary(cfg.corpus, min_count=cfg.min_count)
    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = vocab.entity_counts()
    with (out_dir / "vocab.tsv").open("w", encoding="utf-8") as fh:
        for i, label in enumerate(vocab.entity_labels()):
            fh.write(f"e:{label}\t{counts[i]}\n")
        for label in vocab.category_labels():
            fh.write(f"c:{label}\t0\n")
    echo_config(cfg, out_dir)
    log.info("wrote %s (%d entities, %d categories)", out_dir / "vocab.tsv", vocab.n_entities, vocab.n_categories)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = effective_config(args)
    vocab, graph, corpus = _build_pipeline(cfg)
    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, out_dir)
    if cfg.checkpoint_every:
        echo_config(cfg, out_dir / "checkpoints")  # sidecar next to the checkpoints

    tconf = cfg.train_config()
    total_chunks = max(1, math.ceil(tconf.epochs * corpus.n_pairs / tconf.chunk))
    log_every = max(1, total_chunks // 20)
    state = {"smoothed": None, "chunks": 0}

    def on_chunk(stats: trainer.ChunkStats) -> None:
        prev = state["smoothed"]
        state["smoothed"] = stats.loss_per_pair if prev is None else 0.9 * prev + 0.1 * stats.loss_per_pair
        state["chunks"] += 1
        if state["chunks"] % log_every == 0:
            log.info(
                "epoch %d | pairs %d/%d | lr %.5f | smoothed loss/pair %.4f",
                stats.epoch, stats.pairs_done, stats.total_pairs, stats.lr, state["smoothed"],
            )

    log.info("training mode=%s dim=%d epochs=%d backend=%s", tconf.mode, tconf.dim, tconf.epochs, kernels.BACKEND)
    table = trainer.train(corpus, graph, tconf, on_chunk=on_chunk, checkpoint_dir=out_dir / "checkpoints")
    out_path = out_dir / "embeddings.txt"
    embeddings.save_text(table, vocab, out_path)
    log.info("wrote %s (%d rows, dim %d)", out_path, vocab.n_entities + vocab.n_categories, tconf.dim)
    return 0


def _write_report(report: dict, out_dir: Path, stem: str, text: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / f"{stem}.txt").write_text(text, encoding="utf-8")


def _categorize_text(report: dict) -> str:
    lines = [
        f"gold concepts: {report['n_gold']} (scored {report['n_scored']}, unresolved {report['n_excluded']})",
        f"gold classes:  {report['n_classes']}",
    ]
    if report["excluded"]:
        lines.append("unresolved: " + ", ".join(report["excluded"]))
    if "cluster" in report:
        c = report["cluster"]
        p = c["best_params"]
        lines.append("")
        lines.append(f"clustering purity: {c['purity']:.4f}")
        lines.append(f"  best setting: {p['algorithm']} / {p['metric']}" + (f" / {p['linkage']}" if p["linkage"] else ""))
        for combo in c["sweep"]:
            link = f" / {combo['linkage']}" if combo["linkage"] else ""
            lines.append(f"    {combo['algorithm']} / {combo['metric']}{link}: {combo['purity']:.4f}")
        lines.extend(_misclassified_text(c["misclassified"]))
    if "nn" in report:
        nn = report["nn"]
        lines.append("")
        lines.append(f"nn-classification purity: {nn['purity']:.4f} (accuracy {nn['accuracy']:.4f})")
        if nn["missing_categories"]:
            lines.append("  categories without vectors: " + ", ".join(nn["missing_categories"]))
        lines.extend(_misclassified_text(nn["misclassified"]))
    return "\n".join(lines) + "\n"


def _misclassified_text(by_predicted: dict) -> list[str]:
    if not by_predicted:
        return ["  misclassified: none"]
    lines = ["  misclassified (grouped by predicted category):"]
    for cat in sorted(by_predicted):
        items = ", ".join(f"{m['entity']} (gold: {m['gold']})" for m in by_predicted[cat])
        lines.append(f"    {cat}: {items}")
    return lines


def cmd_eval_categorize(args: argparse.Namespace) -> int:
    cfg = effective_config(args)
    if not cfg.embeddings:
        raise ConfigError("missing --embeddings path")
    index = embeddings.load_embeddings(cfg.embeddings)
    gold_path = Path(cfg.gold) if cfg.gold else dota_gold_path()
    gold = categorize.load_gold(gold_path)
    log.info("gold file %s: %d concepts, %d classes", gold_path, len(gold), gold.n_classes)
    report = categorize.run_categorization(index, gold, method=args.method, seed=cfg.seed)
    out_dir = Path(cfg.output)
    _write_report(report, out_dir, "categorize_report", _categorize_text(report))
    echo_config(cfg, out_dir)
    print(_categorize_text(report), end="")
    return 0


def cmd_eval_relatedness(args: argparse.Namespace) -> int:
    cfg = effective_config(args)
    if not cfg.embeddings:
        raise ConfigError("missing --embeddings path")
    if not cfg.dataset:
        raise ConfigError("missing --dataset path")
    index = embeddings.load_embeddings(cfg.embeddings)
    pairs = relatedness.load_relatedness(cfg.dataset)
    report = relatedness.run_relatedness(index, pairs)
    text = (
        f"pairs: {report['n_pairs']} (mapped {report['n_mapped']}, dropped {report['n_unmapped']})\n"
        f"spearman rho: {report['spearman']:.4f}\n"
    )
    out_dir = Path(cfg.output)
    _write_report(report, out_dir, "relatedness_report", text)
    echo_config(cfg, out_dir)
    print(text, end="")
    return 0


def cmd_neighbors(args: argparse.Namespace) -> int:
    cfg = effective_config(args)
    if not cfg.embeddings:
        raise ConfigError("missing --embeddings path")
    index = embeddings.load_embeddings(cfg.embeddings)
    node = relatedness.map_word_to_node(args.label, index)
    if node is None:
        raise CatembedError(f"label {args.label!r} not found in the embedding")
    query = index.vector(node)
    labels = ["e:" + lab for lab in index.ent_labels] + ["c:" + lab for lab in index.cat_labels]
    matrix = np.vstack([index.ent_vecs, index.cat_vecs])
    norms = np.linalg.norm(matrix, axis=1)
    qnorm = float(np.linalg.norm(query))
    if qnorm == 0.0:
        raise CatembedError(f"label {args.label!r} has a zero vector")
    sims = (matrix @ query) / (np.maximum(norms, 1e-300) * qnorm)
    self_row = node.index if node.kind is NodeKind.ENTITY else len(index.ent_labels) + node.index
    sims[self_row] = -np.inf
    top = np.argsort(-sims, kind="stable")[: min(args.top_n, len(labels) - 1)]
    for row in top:
        print(f"{labels[row]}\t{sims[row]:.4f}")
    return 0


def cmd_inspect_weights(args: argparse.Namespace) -> int:
    cfg = effective_config(args)
    vocab, graph, _corpus = _build_pipeline(cfg)
    ent = vocab.match_entity(args.entity)
    if ent is None:
        raise CatembedError(f"entity {args.entity!r} not in vocabulary")
    direct = graph.entity_categories.get(ent)
    if not direct:
        raise CatembedError(f"entity {args.entity!r} has no category labeling")
    weights = hierarchy.weights_for_entity(graph, ent, cfg.mode)
    print(f"# entity {vocab.entity_label(ent)} mode={cfg.mode}")
    for cat, w in zip(weights.categories, weights.weights):
        steps = hierarchy.avg_steps_down(graph, cat, direct)
        marker = "direct" if cat in direct else "ancestor"
        print(f"c:{vocab.category_label(cat)}\t{w:.6f}\tavg_steps={steps:.3f}\t{marker}")
    return 0


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    cfg = effective_config(args)
    spec = SyntheticSpec(
        parents=args.parents,
        leaves_per_parent=args.leaves_per_parent,
        entities_per_leaf=args.entities_per_leaf,
        docs=args.docs,
        contexts_per_doc=args.contexts_per_doc,
        p_in=args.p_in,
        seed=cfg.seed,
    )
    world = synthetic.generate_world(cfg.output, spec)
    echo_config(cfg, Path(cfg.output))
    log.info(
        "synthetic world in %s: %d leaves, %d entities, %d docs",
        cfg.output, len(world.leaf_labels), len(world.entity_labels), spec.docs,
    )
    print(world.corpus_path)
    print(world.hierarchy_path)
    print(world.gold_path)
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    index = embeddings.load_embeddings(args.input)
    if args.to == "binary":
        index.save_binary(args.output)
    else:
        index.save_text(args.output)
    log.info("wrote %s (%d rows, %s format)", args.output, index.n_rows, args.to)
    return 0


def _add_config_flags(p: argparse.ArgumentParser, *names: str) -> None:
    S = argparse.SUPPRESS
    flags = {
        "corpus": lambda: p.add_argument("--corpus", default=S, help="corpus file (target<TAB>cats<TAB>contexts)"),
        "hierarchy": lambda: p.add_argument("--hierarchy", default=S, help="hierarchy edge file (parent<TAB>child)"),
        "embeddings": lambda: p.add_argument("--embeddings", default=S, help="embedding export to evaluate"),
        "gold": lambda: p.add_argument("--gold", default=S, help="gold file (entity<TAB>category); default: bundled fixture"),
        "dataset": lambda: p.add_argument("--dataset", default=S, help="relatedness file (word1<TAB>word2<TAB>score)"),
        "output": lambda: p.add_argument("--output", default=S, help="output directory"),
        "root": lambda: p.add_argument("--root", default=S, help="root category label"),
        "drop_patterns": lambda: p.add_argument(
            "--drop-pattern", dest="drop_patterns", action="append", default=S,
            help="drop categories whose label contains this substring (repeatable)",
        ),
        "min_count": lambda: p.add_argument("--min-count", dest="min_count", type=int, default=S,
                                            help="exclude entities seen fewer times than this"),
        "verbosity": lambda: p.add_argument("--verbosity", type=int, default=S, help="0=warnings, 1=info, 2=debug"),
        "dim": lambda: p.add_argument("--dim", type=int, default=S, help="embedding dimensionality"),
        "epochs": lambda: p.add_argument("--epochs", type=int, default=S, help="passes over the pair stream"),
        "lr0": lambda: p.add_argument("--lr0", type=float, default=S, help="initial learning rate"),
        "lr_min": lambda: p.add_argument("--lr-min", dest="lr_min", type=float, default=S,
                                         help="learning-rate floor (default 1e-4 * lr0)"),
        "negatives": lambda: p.add_argument("--negatives", type=int, default=S, help="negative samples per pair"),
        "chunk": lambda: p.add_argument("--chunk", type=int, default=S,
                                        help="pairs per scheduling chunk (lr updates, progress)"),
        "noise_alpha": lambda: p.add_argument("--noise-alpha", dest="noise_alpha", type=float, default=S,
                                              help="noise distribution exponent over entity counts"),
        "seed": lambda: p.add_argument("--seed", type=int, default=S, help="RNG seed"),
        "workers": lambda: p.add_argument("--workers", type=int, default=S,
                                          help="training threads (reproducible only with 1)"),
        "mode": lambda: p.add_argument("--mode", choices=("ce", "hce"), default=S,
                                       help="direct categories only (ce) or weighted ancestors (hce)"),
        "shuffle": lambda: p.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=S,
                                          help="shuffle document order each epoch"),
        "subsample": lambda: p.add_argument("--subsample", type=float, default=S,
                                            help="frequent-entity subsampling threshold; 0 disables"),
        "checkpoint_every": lambda: p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, default=S,
                                                   help="chunks between checkpoints; 0 disables"),
    }
    p.add_argument("--config", default=None, help="key=value config file; flags override")
    for name in names:
        flags[name]()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catembed",
        description="Train and evaluate entity/category embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="build and dump the vocabulary")
    _add_config_flags(p, "corpus", "min_count", "output", "verbosity")
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="train embeddings over a corpus and hierarchy")
    _add_config_flags(
        p, "corpus", "hierarchy", "output", "root", "drop_patterns", "min_count",
        "dim", "epochs", "lr0", "lr_min", "negatives", "chunk", "noise_alpha",
        "seed", "workers", "mode", "shuffle", "subsample", "checkpoint_every", "verbosity",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-categorize", help="concept categorization (clustering / NN)")
    _add_config_flags(p, "embeddings", "gold", "output", "seed", "verbosity")
    p.add_argument("--method", choices=("cluster", "nn", "both"), default="both")
    p.set_defaults(func=cmd_eval_categorize)

    p = sub.add_parser("eval-relatedness", help="semantic relatedness (Spearman rho)")
    _add_config_flags(p, "embeddings", "dataset", "output", "verbosity")
    p.set_defaults(func=cmd_eval_relatedness)

    p = sub.add_parser("neighbors", help="nearest nodes by cosine similarity")
    _add_config_flags(p, "embeddings", "verbosity")
    p.add_argument("--label", required=True, help="entity or category label to query")
    p.add_argument("--top-n", dest="top_n", type=int, default=10)
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("inspect-weights", help="print the category weight table for an entity")
    _add_config_flags(p, "corpus", "hierarchy", "root", "drop_patterns", "min_count", "mode", "verbosity")
    p.add_argument("--entity", required=True)
    p.set_defaults(func=cmd_inspect_weights)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic corpus/hierarchy/gold world")
    _add_config_flags(p, "output", "seed", "verbosity")
    p.add_argument("--parents", type=int, default=3, help="branches under the root")
    p.add_argument("--leaves-per-parent", dest="leaves_per_parent", type=int, default=1)
    p.add_argument("--entities-per-leaf", dest="entities_per_leaf", type=int, default=10)
    p.add_argument("--docs", type=int, default=200)
    p.add_argument("--contexts-per-doc", dest="contexts_per_doc", type=int, default=20)
    p.add_argument("--p-in", dest="p_in", type=float, default=0.9,
                   help="probability a context comes from the target's own leaf")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("export", help="convert an embedding file between text and binary")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--to", choices=("text", "binary"), required=True)
    p.set_defaults(func=cmd_export)

    return parser


def _setup_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        verbosity = getattr(args, "verbosity", None)
        if verbosity is None and getattr(args, "config", None):
            verbosity = load_config_file(args.config).get("verbosity")
        _setup_logging(verbosity if verbosity is not None else 1)
        return args.func(args)
    except CatembedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
