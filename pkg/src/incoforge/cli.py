"""incoforge command line: reproducible pipelines over the library.

Subcommands: ingest, index, forge, train, predict, evaluate, generate,
bench, serve, export. Every output-writing stage drops a manifest with the
fully resolved configuration and content hashes, so any stage can be re-run
from its manifest alone. Exit codes: 0 ok, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import config as runconfig
from . import corpus as corpus_mod
from . import evalkit, forge, retrieval
from .annotation import AgreementPolicy, AnnotationStore, candidates_from_instances
from .detector import (
    DetectorModel,
    TrainConfig,
    TransformerConfig,
    bench_forward,
    build_vocab,
    Vocab,
    iter_batches,
    load_checkpoint,
    predict_scores,
    retrieve_sentence,
    save_checkpoint,
    train,
)
from .detector.train import save_history
from .embedder import make_provider
from .similarity import HashTokenVectors, load_token_vectors

_SM_SWEEP = (0.1, 1.0, 10.0)


def _add_config_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--config",
        default=None,
        help="key=value config file; flags win [default: $INCOFORGE_CONFIG]",
    )


def _d(parser: argparse.ArgumentParser, defaults: dict, name: str, **kwargs) -> None:
    """Declare a flag whose default lives in `defaults` (config-file mergeable)."""
    key = name.lstrip("-").replace("-", "_")
    default = defaults[key]
    help_text = kwargs.pop("help", "")
    kwargs.setdefault("default", None)
    parser.add_argument(name, help=f"{help_text} [default: {default}]", **kwargs)


# -- embedding provider flags (shared by train/predict/generate) -------------

_EMBED_DEFAULTS = {"embed_kind": "mean", "embed_dim": 64, "embed_seed": 0, "embed_table": ""}


def _add_embed_flags(p, defaults):
    defaults.update(_EMBED_DEFAULTS)
    _d(p, defaults, "--embed-kind", choices=["hash", "mean", "table"],
       help="sentence embedding provider kind")
    _d(p, defaults, "--embed-dim", type=int, help="embedding dimensionality")
    _d(p, defaults, "--embed-seed", type=int, help="hash-projection seed")
    _d(p, defaults, "--embed-table", help="sentence-embedding table file (kind=table)")


def _add_embed_override_flags(p, defaults):
    # inference commands default to the checkpoint's own embed settings
    defaults.update({k: None for k in _EMBED_DEFAULTS})
    for name, kwargs in (
        ("--embed-kind", {"choices": ["hash", "mean", "table"]}),
        ("--embed-dim", {"type": int}),
        ("--embed-seed", {"type": int}),
        ("--embed-table", {}),
    ):
        p.add_argument(name, default=None,
                       help="override the checkpoint's embedding setting "
                            "[default: from checkpoint]", **kwargs)


def _provider_from(ns) -> object:
    return make_provider(
        ns.embed_kind, ns.embed_dim, ns.embed_seed, ns.embed_table or None
    )


# -- ingest -------------------------------------------------------------------

_INGEST_DEFAULTS = {"input": "", "output": "corpus.jsonl"}


def _cmd_ingest(args) -> int:
    resolved = runconfig.resolve_options(args, args._defaults, args.config)
    if not args.input:
        raise ValueError("ingest needs --input (a .txt file or a directory of them)")
    paths = (
        sorted(Path(args.input).glob("*.txt"))
        if os.path.isdir(args.input)
        else [Path(args.input)]
    )
    narratives = []
    for path in paths:
        blocks = [b for b in path.read_text(encoding="utf-8").split("\n\n") if b.strip()]
        for i, block in enumerate(blocks):
            sentences = [
                corpus_mod.Sentence.from_text(t)
                for t in corpus_mod.segment_text(block.replace("\n", " "))
            ]
            sentences = [s for s in sentences if s.tokens]
            if sentences:
                narratives.append(
                    corpus_mod.Narrative(f"{path.stem}:{i:04d}", tuple(sentences))
                )
    n = corpus_mod.save_corpus(narratives, args.output)
    runconfig.write_manifest(args.output, "ingest", resolved, extra={"narratives": n})
    print(f"ingested {n} narratives -> {args.output}")
    return 0


# -- index ---------------------------------------------------------------------

_INDEX_DEFAULTS = {"corpus": "", "output": "bm25.idx"}


def _cmd_index(args) -> int:
    resolved = runconfig.resolve_options(args, args._defaults, args.config)
    narratives = list(corpus_mod.load_corpus(args.corpus))
    index = retrieval.build_index(narratives)
    retrieval.save_index(index, args.output, corpus_hash=retrieval.file_sha256(args.corpus))
    runconfig.write_manifest(
        args.output, "index", resolved,
        inputs={"corpus": args.corpus}, extra={"n_docs": index.n_docs},
    )
    print(f"indexed {index.n_docs} sentences -> {args.output}")
    return 0


# -- forge ----------------------------------------------------------------------

_FORGE_DEFAULTS = {
    "corpus": "",
    "output": "instances.jsonl",
    "mode": "msd",
    "segment_len": 5,
    "corrupt_count": 1,
    "bm25_top_k": 100,
    "tau": 0.7,
    "seed": 0,
    "no_boundary_removal": True,
    "no_adjacent_removal": True,
    "exclude_self_narrative": True,
    "constrain_replacements": False,
    "bm25_k1": 1.2,
    "bm25_b": 0.75,
    "sim_dim": 64,
    "sim_seed": 0,
    "sim_vectors": "",
    "index": "",
    "windows": False,
    "window_len": 16,
    "window_rate": 0.25,
}


def _cmd_forge(args) -> int:
    resolved = runconfig.resolve_options(args, args._defaults, args.config)
    if not args.corpus:
        raise ValueError("forge needs --corpus")
    cfg = forge.ForgeConfig(
        mode=args.mode,
        segment_len=args.segment_len,
        corrupt_count=args.corrupt_count,
        bm25_top_k=args.bm25_top_k,
        tau=args.tau,
        seed=args.seed,
        no_boundary_removal=args.no_boundary_removal,
        no_adjacent_removal=args.no_adjacent_removal,
        exclude_self_narrative=args.exclude_self_narrative,
        constrain_replacements=args.constrain_replacements,
        bm25=retrieval.Bm25Params(k1=args.bm25_k1, b=args.bm25_b),
    )
    narratives = list(corpus_mod.load_corpus(args.corpus))
    index = provider = None
    if cfg.mode == "dsd":
        if args.index:
            index = retrieval.load_index(args.index)
        else:
            index = retrieval.build_index(narratives)
        provider = (
            load_token_vectors(args.sim_vectors, args.sim_seed)
            if args.sim_vectors
            else HashTokenVectors(args.sim_dim, args.sim_seed)
        )
    if args.windows:
        instances, manifest = forge.make_pretrain_segments(
            narratives, cfg, index, provider,
            segment_len=args.window_len, rate=args.window_rate,
        )
    else:
        instances, manifest = forge.forge_dataset(narratives, cfg, index, provider)
    forge.write_instances(instances, args.output)
    runconfig.write_manifest(
        args.output, "forge", resolved, inputs={"corpus": args.corpus}, extra=manifest
    )
    print(
        f"forged {manifest['counts']['emitted']} instances "
        f"({manifest['counts']['skipped_short']} short, "
        f"{manifest['counts']['skipped_no_confounder']} confounderless) -> {args.output}"
    )
    return 0


# -- train -----------------------------------------------------------------------

_TRAIN_DEFAULTS = {
    "instances": "",
    "dev": "",
    "output": "detector.ckpt",
    "history": "",
    "arch": "sentence",
    "layers": 2,
    "heads": 4,
    "d_model": 64,
    "d_ff": 256,
    "max_positions": 64,
    "dropout": 0.0,
    "dtype": "float32",
    "paper_scale": False,
    "epochs": 20,
    "batch_size": 32,
    "lr": 1e-3,
    "sm_weight": 1.0,
    "sm_sweep": False,
    "threshold": 0.5,
    "seed": 0,
}


def _model_config(args, task_mode: str, vocab_size: int) -> TransformerConfig:
    if args.paper_scale:
        return TransformerConfig.paper_scale(
            mode=args.arch, vocab_size=vocab_size, d_embed=args.embed_dim
        )
    return TransformerConfig(
        n_layers=args.layers,
        n_heads=args.heads,
        d_model=args.d_model,
        d_ff=args.d_ff,
        max_positions=args.max_positions,
        dropout=args.dropout,
        mode=args.arch,
        d_embed=args.embed_dim,
        vocab_size=vocab_size,
        dtype=args.dtype,
    )


def _cmd_train(args) -> int:
    resolved = runconfig.resolve_options(args, args._defaults, args.config)
    if not args.instances:
        raise ValueError("train needs --instances")
    instances = forge.read_instances(args.instances)
    if not instances:
        raise ValueError("no instances to train on")
    dev = forge.read_instances(args.dev) if args.dev else None
    task_mode = instances[0].mode
    provider = _provider_from(args)
    vocab = build_vocab(instances) if args.arch == "token" else None
    vocab_size = len(vocab) if vocab else 0

    def run_one(sm_weight: float):
        model = DetectorModel(_model_config(args, task_mode, vocab_size), seed=args.seed)
        cfg = TrainConfig(
            lr=args.lr, batch_size=args.batch_size, epochs=args.epochs,
            sm_weight=sm_weight, threshold=args.threshold, seed=args.seed,
        )
        history = train(instances, model, cfg, provider, vocab, dev)
        return model, history

    sweep_results = {}
    if args.sm_sweep:
        if not dev:
            raise ValueError("--sm-sweep needs --dev for model selection")
        best = None
        for w in _SM_SWEEP:
            model, history = run_one(w)
            dev_auc = history[-1]["dev_auc"]
            sweep_results[str(w)] = dev_auc
            if best is None or dev_auc > best[0]:
                best = (dev_auc, w, model, history)
        _, sm_weight, model, history = best
    else:
        sm_weight = args.sm_weight
        model, history = run_one(sm_weight)

    extra = {
        "task_mode": task_mode,
        "threshold": args.threshold,
        "sm_weight": sm_weight,
        "embed": {
            "kind": args.embed_kind,
            "dim": args.embed_dim,
            "seed": args.embed_seed,
            "table": args.embed_table or None,
        },
        "vocab": vocab.to_list() if vocab else None,
    }
    save_checkpoint(model, args.output, extra)
    if args.history:
        save_history(history, args.history)
    runconfig.write_manifest(
        args.output, "train", resolved,
        inputs={"instances": args.instances, "dev": args.dev},
        extra={"final": history[-1], "sm_sweep": sweep_results or None},
    )
    last = history[-1]
    print(
        f"trained {args.epochs} epochs: total {last['total']:.4f} "
        f"dev_auc {last['dev_auc']:.4f} -> {args.output}"
    )
    return 0


# -- predict ------------------------------------------------------------------

_PREDICT_DEFAULTS = {"model": "", "instances": "", "output": "preds.jsonl", "threshold": -1.0}


def _load_model_bundle(path, args):
    model, extra = load_checkpoint(path)
    emb = extra.get("embed", {})
    kind = args.embed_kind if args.embed_kind is not None else emb.get("kind", "mean")
    dim = args.embed_dim if args.embed_dim is not None else emb.get("dim", 64)
    seed = args.embed_seed if args.embed_seed is not None else emb.get("seed", 0)
    table = args.embed_table if args.embed_table else emb.get("table")
    provider = make_provider(kind, int(dim), int(seed), table or None)
    vocab = Vocab.from_list(extra["vocab"]) if extra.get("vocab") else None
    return model, extra, provider, vocab


def _cmd_predict(args) -> int:
    resolved = runconfig.resolve_options(args, args._defaults, args.config)
    if not args.model or not args.instances:
        raise ValueError("predict needs --model and --instances")
    model, extra, provider, vocab = _load_model_bundle(args.model, args)
    threshold = args.threshold if args.threshold >= 0 else extra.get("threshold", 0.5)
    instances = forge.read_instances(args.instances)
    records = predict_scores(instances, model, provider, vocab)
    with open(args.output, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            rec["label"] = 1 if rec["score"] >= threshold else 0
            f.write(json.dumps(rec, ensure_ascii=False))
            f.write("\n")
    runconfig.write_manifest(
        args.output, "predict", {**resolved, "threshold": threshold},
        inputs={"model": args.model, "instances": args.instances},
        extra={"positions": len(records)},
    )
    print(f"predicted {len(records)} positions -> {args.output}")
    return 0


# -- evaluate -------------------------------------------------------------------

_EVAL_DEFAULTS = {"preds": "", "gens": "", "output": "", "threshold": 0.5}


def _cmd_evaluate(args) -> int:
    resolved = runconfig.resolve_options(args, args._defaults, args.config)
    if not args.preds and not args.gens:
        raise ValueError("evaluate needs --preds and/or --gens")
    report: dict = {}
    if args.preds:
        records = evalkit.read_prediction_records(args.preds)
        preds = [(float(r["score"]), int(r["gold"])) for r in records]
        rep = evalkit.classification_report(preds, args.threshold)
        try:
            auc_value, roc = evalkit.auc(preds)
            rep["auc"] = auc_value
            rep["roc"] = roc
        except evalkit.DegenerateClassError:
            rep["auc"] = float("nan")
        rep["per_position"] = evalkit.per_position_auc(records)
        report["classification"] = rep
        print(evalkit.format_report(rep, "classification"))
    if args.gens:
        hyps, refs = evalkit.read_generations(args.gens, corpus_mod.tokenize)
        gen = evalkit.generation_report(hyps, refs)
        report["generation"] = gen
        print(evalkit.format_report(gen, "generation"))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, sort_keys=True)
            f.write("\n")
        runconfig.write_manifest(
            args.output, "evaluate", resolved,
            inputs={"preds": args.preds, "gens": args.gens},
        )
    return 0


# -- generate (retrieval decoding) -----------------------------------------------

_GEN_DEFAULTS = {"model": "", "instances": "", "pool": "", "output": "gens.jsonl"}


def _cmd_generate(args) -> int:
    resolved = runconfig.resolve_options(args, args._defaults, args.config)
    if not (args.model and args.instances and args.pool):
        raise ValueError("generate needs --model, --instances, and --pool")
    model, extra, provider, vocab = _load_model_bundle(args.model, args)
    instances = forge.read_instances(args.instances)
    pool_sentences = [
        s for narrative in corpus_mod.load_corpus(args.pool) for s in narrative.sentences
    ]
    pool = [(s, provider.embed(s)) for s in pool_sentences]
    records = []
    for batch in iter_batches(
        instances, 32, provider, model.config.mode, vocab, model.config.np_dtype
    ):
        s, _ = model.forward(batch.x, batch.mask)
        h_hat = model.sm_forward(s)[0]
        for bi, (inst_id, positions) in enumerate(batch.meta):
            for seq_pos, task_pos, gold in positions:
                if not gold or batch.sm_mask[bi, seq_pos] == 0:
                    continue
                best, _score = retrieve_sentence(h_hat[bi, seq_pos], pool)
                ref = batch.sm_targets[bi, seq_pos]
                records.append(
                    {
                        "instance": inst_id,
                        "position": task_pos,
                        "hyp": best.text,
                        "ref_embedding_known": bool(np.linalg.norm(ref) > 0),
                    }
                )
    # attach reference texts from the instances themselves
    ref_by_key = {}
    for inst in instances:
        if inst.mode == "msd":
            for slot, removed in inst.gap_targets.items():
                ref_by_key[(inst.id, slot)] = removed[0].text
        else:
            for pos, original in inst.originals.items():
                ref_by_key[(inst.id, pos)] = original.text
    with open(args.output, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            rec["ref"] = ref_by_key[(rec["instance"], rec["position"])]
            rec.pop("ref_embedding_known", None)
            f.write(json.dumps(rec, ensure_ascii=False))
            f.write("\n")
    runconfig.write_manifest(
        args.output, "generate", resolved,
        inputs={"model": args.model, "instances": args.instances, "pool": args.pool},
        extra={"generated": len(records)},
    )
    print(f"generated {len(records)} sentences by retrieval -> {args.output}")
    return 0


# -- bench ------------------------------------------------------------------------

_BENCH_DEFAULTS = {
    "n_grid": "2,4,8,16",
    "l_grid": "10,20,40",
    "d_model": 64,
    "layers": 2,
    "heads": 4,
    "batch": 8,
    "repeats": 5,
    "output": "",
}


def _cmd_bench(args) -> int:
    resolved = runconfig.resolve_options(args, args._defaults, args.config)
    n_grid = [int(x) for x in args.n_grid.split(",")]
    l_grid = [int(x) for x in args.l_grid.split(",")]
    rows = bench_forward(
        n_grid, l_grid, d_model=args.d_model, n_layers=args.layers,
        n_heads=args.heads, batch=args.batch, repeats=args.repeats,
    )
    header = f"{'mode':<9} {'N':>4} {'L':>4} {'cells/layer':>12} {'s/paragraph':>12} {'para/s':>10}"
    print(header)
    for r in rows:
        print(
            f"{r['mode']:<9} {r['N']:>4} {r['L']:>4} {r['cells_per_layer']:>12} "
            f"{r['seconds_per_paragraph']:>12.6f} {r['paragraphs_per_second']:>10.1f}"
        )
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            json.dump(rows, f, indent=2)
            f.write("\n")
        runconfig.write_manifest(args.output, "bench", resolved)
    return 0


# -- serve / export -----------------------------------------------------------------

_SERVE_DEFAULTS = {
    "state_dir": "annotation-state",
    "candidates": "",
    "screening": "",
    "host": "127.0.0.1",
    "port": 8765,
    "admin_token": "",
    "static": "",
    "screening_pass": 0.8,
}


def _read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def _as_candidates(records: list[dict]) -> list[dict]:
    if records and "focus" in records[0]:
        return records
    return candidates_from_instances(records)


def _cmd_serve(args) -> int:
    import uvicorn

    from .annotation.service import create_app

    runconfig.resolve_options(args, args._defaults, args.config)
    store = AnnotationStore(args.state_dir, screening_pass=args.screening_pass)
    if args.candidates:
        result = store.enqueue(_as_candidates(_read_jsonl(args.candidates)))
        print(f"enqueued {result['accepted']} candidates ({result['duplicates']} dupes)")
    if args.screening:
        n = store.add_screening_probes(_as_candidates(_read_jsonl(args.screening)))
        print(f"loaded {n} screening probes")
    admin_token = args.admin_token or secrets.token_hex(16)
    if not args.admin_token:
        print(f"admin token: {admin_token}")
    app = create_app(store, admin_token, static_dir=args.static or None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_EXPORT_DEFAULTS = {"state_dir": "annotation-state", "output": "kept.jsonl"}


def _cmd_export(args) -> int:
    resolved = runconfig.resolve_options(args, args._defaults, args.config)
    store = AnnotationStore(args.state_dir)
    kept = store.export_kept()
    with open(args.output, "w", encoding="utf-8", newline="\n") as f:
        for rec in kept:
            f.write(json.dumps(rec, ensure_ascii=False))
            f.write("\n")
    runconfig.write_manifest(args.output, "export", resolved, extra={"kept": len(kept)})
    print(f"exported {len(kept)} kept candidates -> {args.output}")
    return 0


# -- parser wiring ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="incoforge",
        description="Forge, train, evaluate, and verify narrative incoherence benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="segment raw text files into a narrative corpus")
    _add_config_flag(p)
    _d(p, _INGEST_DEFAULTS, "--input", help="a .txt file or directory of .txt files")
    _d(p, _INGEST_DEFAULTS, "--output", help="corpus JSONL to write")
    p.set_defaults(func=_cmd_ingest, _defaults=_INGEST_DEFAULTS)

    p = sub.add_parser("index", help="build the sentence-level BM25 index cache")
    _add_config_flag(p)
    _d(p, _INDEX_DEFAULTS, "--corpus", help="corpus JSONL")
    _d(p, _INDEX_DEFAULTS, "--output", help="index cache file")
    p.set_defaults(func=_cmd_index, _defaults=_INDEX_DEFAULTS)

    p = sub.add_parser("forge", help="create MSD/DSD instances from a corpus")
    _add_config_flag(p)
    d = _FORGE_DEFAULTS
    _d(p, d, "--corpus", help="corpus JSONL")
    _d(p, d, "--output", help="instance JSONL to write")
    _d(p, d, "--mode", choices=["msd", "dsd"], help="corruption mode")
    _d(p, d, "--segment-len", type=int, help="sentences per sampled segment")
    _d(p, d, "--corrupt-count", type=int, help="removals/replacements per segment")
    _d(p, d, "--bm25-top-k", type=int, help="confounder candidates scanned per sentence")
    _d(p, d, "--tau", type=float, help="similarity ceiling for confounders")
    _d(p, d, "--seed", type=int, help="global seed")
    p.add_argument("--allow-boundary-removal", dest="no_boundary_removal",
                   action="store_const", const=False,
                   help="permit removing the first/last segment sentence [default: off]")
    p.add_argument("--allow-adjacent-removal", dest="no_adjacent_removal",
                   action="store_const", const=False,
                   help="permit adjacent removals [default: off]")
    p.add_argument("--include-self-narrative", dest="exclude_self_narrative",
                   action="store_const", const=False,
                   help="let a narrative donate confounders to itself [default: off]")
    p.add_argument("--constrain-replacements", dest="constrain_replacements",
                   action="store_const", const=True,
                   help="apply the MSD position rules to DSD replacements [default: off]")
    _d(p, d, "--bm25-k1", type=float, help="BM25 k1")
    _d(p, d, "--bm25-b", type=float, help="BM25 b")
    _d(p, d, "--sim-dim", type=int, help="token-vector dim for the similarity filter")
    _d(p, d, "--sim-seed", type=int, help="token-vector hash seed")
    _d(p, d, "--sim-vectors", help="token vector table file (optional)")
    _d(p, d, "--index", help="prebuilt index cache (optional)")
    p.add_argument("--windows", dest="windows", action="store_const", const=True,
                   help="large-scale mode: corrupt non-overlapping windows [default: off]")
    _d(p, d, "--window-len", type=int, help="window length in sentences")
    _d(p, d, "--window-rate", type=float, help="corruption rate per window")
    p.set_defaults(func=_cmd_forge, _defaults=d)

    p = sub.add_parser("train", help="train a detector")
    _add_config_flag(p)
    d = dict(_TRAIN_DEFAULTS)
    _d(p, d, "--instances", help="training instance JSONL")
    _d(p, d, "--dev", help="dev instance JSONL (enables dev AUC)")
    _d(p, d, "--output", help="checkpoint path")
    _d(p, d, "--history", help="per-epoch CSV path (optional)")
    _d(p, d, "--arch", choices=["sentence", "token"], help="model operating mode")
    _d(p, d, "--layers", type=int, help="encoder layers")
    _d(p, d, "--heads", type=int, help="attention heads")
    _d(p, d, "--d-model", type=int, help="model width")
    _d(p, d, "--d-ff", type=int, help="feed-forward width")
    _d(p, d, "--max-positions", type=int, help="positional embedding count")
    _d(p, d, "--dropout", type=float, help="dropout rate")
    _d(p, d, "--dtype", choices=["float32", "float64"], help="parameter precision")
    p.add_argument("--paper-scale", dest="paper_scale", action="store_const", const=True,
                   help="use the 12-layer, 768-wide preset [default: off]")
    _d(p, d, "--epochs", type=int, help="training epochs")
    _d(p, d, "--batch-size", type=int, help="instances per batch")
    _d(p, d, "--lr", type=float, help="learning rate")
    _d(p, d, "--sm-weight", type=float, help="semantic-matching loss weight")
    p.add_argument("--sm-sweep", dest="sm_sweep", action="store_const", const=True,
                   help="sweep the SM weight over {0.1, 1, 10}, keep best dev AUC [default: off]")
    _d(p, d, "--threshold", type=float, help="decision threshold stored with the model")
    _d(p, d, "--seed", type=int, help="init/shuffle seed")
    _add_embed_flags(p, d)
    p.set_defaults(func=_cmd_train, _defaults=d)

    p = sub.add_parser("predict", help="score instances with a trained detector")
    _add_config_flag(p)
    d = dict(_PREDICT_DEFAULTS)
    _d(p, d, "--model", help="checkpoint path")
    _d(p, d, "--instances", help="instance JSONL")
    _d(p, d, "--output", help="prediction JSONL to write")
    _d(p, d, "--threshold", type=float, help="decision threshold (-1: use checkpoint's)")
    _add_embed_override_flags(p, d)
    p.set_defaults(func=_cmd_predict, _defaults=d)

    p = sub.add_parser("evaluate", help="report metrics over predictions/generations")
    _add_config_flag(p)
    d = _EVAL_DEFAULTS
    _d(p, d, "--preds", help="prediction JSONL")
    _d(p, d, "--gens", help="generation JSONL")
    _d(p, d, "--output", help="report JSON to write (optional)")
    _d(p, d, "--threshold", type=float, help="decision threshold")
    p.set_defaults(func=_cmd_evaluate, _defaults=d)

    p = sub.add_parser("generate", help="retrieval-decode sentences at corrupted positions")
    _add_config_flag(p)
    d = dict(_GEN_DEFAULTS)
    _d(p, d, "--model", help="checkpoint path")
    _d(p, d, "--instances", help="instance JSONL (gold positions are decoded)")
    _d(p, d, "--pool", help="corpus JSONL supplying candidate sentences")
    _d(p, d, "--output", help="generation JSONL to write")
    _add_embed_override_flags(p, d)
    p.set_defaults(func=_cmd_generate, _defaults=d)

    p = sub.add_parser("bench", help="token- vs sentence-mode forward cost over a grid")
    _add_config_flag(p)
    d = _BENCH_DEFAULTS
    _d(p, d, "--n-grid", help="comma-separated sentence counts")
    _d(p, d, "--l-grid", help="comma-separated tokens per sentence")
    _d(p, d, "--d-model", type=int, help="model width (same in both modes)")
    _d(p, d, "--layers", type=int, help="encoder layers")
    _d(p, d, "--heads", type=int, help="attention heads")
    _d(p, d, "--batch", type=int, help="paragraphs per timed forward")
    _d(p, d, "--repeats", type=int, help="timed repeats (median)")
    _d(p, d, "--output", help="JSON results path (optional)")
    p.set_defaults(func=_cmd_bench, _defaults=d)

    p = sub.add_parser("serve", help="run the judge annotation service")
    _add_config_flag(p)
    d = _SERVE_DEFAULTS
    _d(p, d, "--state-dir", help="journal/snapshot directory")
    _d(p, d, "--candidates", help="candidate or forge-output JSONL to enqueue")
    _d(p, d, "--screening", help="screening probe JSONL")
    _d(p, d, "--host", help="bind host")
    _d(p, d, "--port", type=int, help="bind port")
    _d(p, d, "--admin-token", help="admin token (generated if empty)")
    _d(p, d, "--static", help="directory of UI assets to serve at /")
    _d(p, d, "--screening-pass", type=float, help="screening pass fraction")
    p.set_defaults(func=_cmd_serve, _defaults=d)

    p = sub.add_parser("export", help="write the kept (verified) test set offline")
    _add_config_flag(p)
    d = _EXPORT_DEFAULTS
    _d(p, d, "--state-dir", help="journal/snapshot directory")
    _d(p, d, "--output", help="kept-set JSONL to write")
    p.set_defaults(func=_cmd_export, _defaults=d)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as e:  # runtime errors: structured message, exit 1
        print(json.dumps({"error": type(e).__name__, "detail": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
