"""Command-line front end.

Subcommands: extract, realign, finetune, experiment, filter, report.
Exit codes: 0 success, 2 usage error, 3 invalid configuration, 4 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .align_extract import (
    dictionary_align,
    read_corpus,
    read_dictionary,
    read_pharaoh_file,
    symmetrize_gdfa,
    write_corpus,
    write_pharaoh_file,
)
from .encoder import EncoderModel, FreezeStrategy, init_model
from .errors import AlignFreezeError, ConfigError, DataError
from .pipeline import (
    FINETUNE_ONLY,
    ExperimentReport,
    ExperimentSpec,
    TrainConfig,
    init_head,
    realignment_corpus,
    run_experiment,
    run_finetune,
    run_realignment,
)
from .qe_filter import ScoredPair, filter_corpus, percentile_threshold, read_scores
from .realign_loss import LossConfig
from .tasks import evaluate_sentence_task, evaluate_token_task

EXIT_USAGE, EXIT_CONFIG, EXIT_DATA = 2, 3, 4

log = logging.getLogger("alignfreeze")


def _seeds(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="alignfreeze", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, config=False):
        sp.add_argument("--out", required=True, help="output path")
        sp.add_argument("-v", "--verbose", action="count", default=0)
        if config:
            sp.add_argument("--config", required=True, help="experiment spec (JSON)")
            sp.add_argument("--seeds", type=_seeds, help="comma-separated seeds, e.g. 1,2,3")
            sp.add_argument("--seed", type=int, help="single seed override")
        return sp

    sp = common(sub.add_parser("extract", help="dictionary or GDFA word alignment"))
    sp.add_argument("--corpus", required=True, help="src<TAB>tgt parallel corpus")
    sp.add_argument("--dict", help="source_word<TAB>target_word dictionary")
    sp.add_argument("--alignments-fwd", help="forward Pharaoh alignments")
    sp.add_argument("--alignments-bwd", help="backward Pharaoh alignments (source-target order)")
    sp.add_argument("--no-fold-case", action="store_true")

    sp = common(sub.add_parser("realign", help="realign fresh encoders under freezing strategies"), True)
    sp.add_argument("--strategy", action="append", help="freeze strategy (repeatable)")

    sp = common(sub.add_parser("finetune", help="fine-tune and evaluate an encoder"), True)
    sp.add_argument("--model", help="encoder container to start from (default: fresh init)")

    sp = common(sub.add_parser("experiment", help="run strategies x seeds and write a report"), True)
    sp.add_argument("--strategy", action="append", help="override strategy list (repeatable)")
    sp.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on this)")

    sp = common(sub.add_parser("filter", help="keep corpus lines at or above a score percentile"))
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--scores", required=True, help="one score per corpus line")
    sp.add_argument("--percentile", type=float, required=True)

    sp = common(sub.add_parser("report", help="render a report as CSV and a text table"))
    sp.add_argument("report", help="report.json written by `experiment`")
    return p


def _sha256_file(path):
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None


def _write_manifest(directory, subcommand, config_hash, seeds=None, extra=None):
    manifest = {
        "toolkit": "alignfreeze",
        "version": __version__,
        "subcommand": subcommand,
        "config_sha256": config_hash,
        "seeds": seeds,
    }
    if extra:
        manifest.update(extra)
    Path(directory).mkdir(parents=True, exist_ok=True)
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (Path(directory) / "manifest.json").write_text(text, encoding="utf-8")


def _options_hash(options):
    blob = json.dumps(options, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _read_data(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except FileNotFoundError as e:
        raise DataError(f"missing input file: {e.filename}") from None
    except UnicodeDecodeError as e:
        raise DataError(f"input is not valid UTF-8: {e}") from None


def _load_spec(args):
    if not Path(args.config).is_file():
        raise ConfigError(f"config file not found: {args.config}")
    spec = ExperimentSpec.from_json(args.config)
    if getattr(args, "strategy", None):
        spec = ExperimentSpec.from_dict({**spec.to_dict(), "strategies": args.strategy})
    if args.seeds:
        spec.seeds = args.seeds
    elif args.seed is not None:
        spec.seeds = [args.seed]
    return spec


def cmd_extract(args):
    pairs = _read_data(read_corpus, args.corpus)
    options = {"corpus": _sha256_file(args.corpus)}
    if args.dict:
        if args.alignments_fwd or args.alignments_bwd:
            raise ConfigError("use either --dict or --alignments-fwd/--alignments-bwd")
        d = _read_data(read_dictionary, args.dict, fold_case=not args.no_fold_case)
        alignments = [dictionary_align(p, d) for p in pairs]
        options.update(route="dictionary", dict=_sha256_file(args.dict), fold_case=not args.no_fold_case)
    elif args.alignments_fwd and args.alignments_bwd:
        fwd = _read_data(read_pharaoh_file, args.alignments_fwd, pairs)
        bwd = _read_data(read_pharaoh_file, args.alignments_bwd, pairs)
        alignments = [symmetrize_gdfa(f, b) for f, b in zip(fwd, bwd)]
        options.update(
            route="gdfa", fwd=_sha256_file(args.alignments_fwd), bwd=_sha256_file(args.alignments_bwd)
        )
    else:
        raise ConfigError("extract needs --dict or both --alignments-fwd and --alignments-bwd")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_pharaoh_file(out, alignments)
    _write_manifest(out.parent, "extract", _options_hash(options), extra={"output": out.name})
    log.info("wrote %d alignment lines to %s", len(alignments), out)


def cmd_filter(args):
    pairs = _read_data(read_corpus, args.corpus)
    scores = _read_data(read_scores, args.scores)
    if len(scores) != len(pairs):
        raise DataError(f"{len(scores)} scores for {len(pairs)} corpus lines")
    if not 0 <= args.percentile <= 100:
        raise ConfigError("--percentile must lie in [0, 100]")
    kept = filter_corpus([ScoredPair(i, s) for i, s in enumerate(scores)], args.percentile)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_corpus(out, [pairs[sp.index] for sp in kept])
    options = {
        "corpus": _sha256_file(args.corpus),
        "scores": _sha256_file(args.scores),
        "percentile": args.percentile,
    }
    _write_manifest(
        out.parent,
        "filter",
        _options_hash(options),
        extra={
            "output": out.name,
            "threshold": percentile_threshold(scores, args.percentile),
            "retained": len(kept),
            "total": len(pairs),
        },
    )


def cmd_realign(args):
    spec = _load_spec(args)
    bundle = spec.load_bundle()
    cfg = spec.encoder_config(bundle)
    corpus = realignment_corpus(bundle, spec.aligner)
    strategies = args.strategy or [s for s in spec.strategies if s != FINETUNE_ONLY]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    losses = {}
    for strat in strategies:
        strategy = FreezeStrategy.parse(strat)
        for seed in spec.seeds:
            model = init_model(cfg, seed)
            history = []
            tcfg = TrainConfig.from_dict({**spec.train, "seed": seed})
            run_realignment(model, corpus, strategy, tcfg, LossConfig(**spec.loss), history)
            model.save(out / f"{strategy}_seed{seed}.afm")
            losses[f"{strategy}_seed{seed}"] = history
    (out / "losses.json").write_text(json.dumps(losses, sort_keys=True) + "\n", encoding="utf-8")
    _write_manifest(out, "realign", spec.config_hash(), spec.seeds, {"strategies": strategies})


def cmd_finetune(args):
    spec = _load_spec(args)
    bundle = spec.load_bundle()
    cfg = spec.encoder_config(bundle)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kind = "token_classifier" if spec.task_kind == "token" else "sentence_classifier"
    evaluate = evaluate_token_task if spec.task_kind == "token" else evaluate_sentence_task
    results = {}
    for seed in spec.seeds:
        if args.model:
            try:
                model = EncoderModel.load(args.model)
            except FileNotFoundError:
                raise DataError(f"missing model file: {args.model}") from None
            except (ValueError, KeyError) as e:
                raise DataError(f"{args.model}: not a valid encoder container ({e})") from None
            if model.config.vocab_size < bundle.table_size:
                raise ConfigError("model vocabulary is smaller than the bundle's id range")
        else:
            model = init_model(cfg, seed)
        head = init_head(kind, model.config.hidden_dim, bundle.spec.num_tags, seed=[seed, 3])
        tcfg = TrainConfig.from_dict({**spec.train, "seed": seed})
        model, head = run_finetune(model, head, bundle.source_train, tcfg)
        model.save(out / f"finetuned_seed{seed}.afm")
        np.savez(out / f"head_seed{seed}.npz", weight=head.weight, bias=head.bias, kind=head.kind)
        scores = {lang: evaluate(model, head, bundle.target_eval[lang]) for lang in bundle.targets}
        scores[bundle.source] = evaluate(model, head, bundle.source_eval)
        results[str(seed)] = scores
    (out / "scores.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    extra = {"model": _sha256_file(args.model)} if args.model else None
    _write_manifest(out, "finetune", spec.config_hash(), spec.seeds, extra)


def cmd_experiment(args):
    spec = _load_spec(args)
    report = run_experiment(spec, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "table.txt").write_text(report.to_table(), encoding="utf-8")
    _write_manifest(out, "experiment", spec.config_hash(), spec.seeds, {"strategies": spec.strategies})
    sys.stdout.write(report.to_table())


def cmd_report(args):
    try:
        raw = Path(args.report).read_text(encoding="utf-8")
    except OSError:
        raise ConfigError(f"report file not found: {args.report}") from None
    try:
        report = ExperimentReport.from_dict(json.loads(raw))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise DataError(f"{args.report}: not a valid report ({e})") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "table.txt").write_text(report.to_table(), encoding="utf-8")
    _write_manifest(out, "report", report.config_hash, report.seeds)
    sys.stdout.write(report.to_table())


COMMANDS = {
    "extract": cmd_extract,
    "realign": cmd_realign,
    "finetune": cmd_finetune,
    "experiment": cmd_experiment,
    "filter": cmd_filter,
    "report": cmd_report,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.subcommand](args)
    except ConfigError as e:
        print(f"alignfreeze {args.subcommand}: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AlignFreezeError as e:
        print(f"alignfreeze {args.subcommand}: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return 0


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
