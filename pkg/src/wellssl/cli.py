"""Command-line entry point: one subcommand per pipeline stage.

Exit status is 0 on success, 1 for invalid configuration or input, and 2
for runtime or numerical failures. Set WELLSSL_THREADS to cap the number of
BLAS/OpenMP threads (1 gives the bit-reproducible reference path).
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import encoder, evaluate, ingest, ssl, synth
from .storage import FormatError

log = logging.getLogger("wellssl")

THREADS_ENV = "WELLSSL_THREADS"
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class MissingInput(FileNotFoundError):
    pass


def _require(path: Path) -> Path:
    if not path.is_file():
        raise MissingInput(f"input file not found: {path}")
    return path


def _output(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


# ------------------------------------------------------------ stages


def cmd_synth(cfg, args):
    tables = synth.generate(cfg.synth_config())
    out = _output(cfg.path("dataset"))
    ingest.write_log_csv(tables, out)
    log.info("wrote %d wells to %s", len(tables), out)


def cmd_preprocess(cfg, args):
    tables = ingest.preprocess(ingest.parse_log_csv(_require(cfg.path("dataset"))))
    l = cfg.data.interval_length
    files = [("intervals", cfg.data.stride)]
    if cfg.data.train_stride is not None:
        files.append(("train_intervals", cfg.data.train_stride))
    for name, stride in files:
        s = ingest.IntervalSet.from_intervals(ingest.extract_all(tables, l, stride))
        if len(s.well_ids) == 0:
            raise ingest.ValidationError(f"no interval of length {l} fits in any well")
        s.save(_output(cfg.path(name)))
        log.info("wrote %d intervals (stride %d) to %s", len(s.well_ids), stride, cfg.path(name))


def _training_intervals(cfg) -> Path:
    name = "intervals" if cfg.data.train_stride is None else "train_intervals"
    return _require(cfg.path(name))


def cmd_train(cfg, args):
    intervals = ingest.IntervalSet.load(_training_intervals(cfg))
    tcfg = cfg.train_config()
    result = ssl.train(intervals, tcfg)
    meta = {"method": tcfg.method, "seed": cfg.seed, "best_epoch": result.best_epoch}
    encoder.save_checkpoint(_output(cfg.path("checkpoint")), result.params, meta)
    ssl.write_history(result.history, _output(cfg.path("history")))
    log.info("best epoch %d; checkpoint %s", result.best_epoch, cfg.path("checkpoint"))


def cmd_embed(cfg, args):
    params, _ = encoder.load_checkpoint(_require(cfg.path("checkpoint")))
    intervals = ingest.IntervalSet.load(_require(cfg.path("intervals")))
    vectors = encoder.encode(params, intervals.values)
    emb = evaluate.EmbeddingMatrix.from_intervals(vectors, intervals)
    emb.to_csv(_output(cfg.path("embeddings")))
    log.info("wrote %d embeddings to %s", len(emb), cfg.path("embeddings"))


def _labelled(emb):
    if np.any(emb.geo_class < 0):
        raise evaluate.EvalError("every interval needs a GEO_CLASS label for this evaluation")
    return emb


def cmd_eval_cluster(cfg, args):
    emb = _labelled(evaluate.EmbeddingMatrix.from_csv(_require(cfg.path("embeddings"))))
    k = cfg.eval.k or len(np.unique(emb.geo_class))
    pred = evaluate.agglomerative_cluster(emb.vectors, k)
    rows = [
        {"task": "cluster", "probe": f"ward_k{k}", "metric": m, "value": v, "seed": cfg.seed}
        for m, v in evaluate.cluster_metrics(pred, emb.geo_class).items()
    ]
    evaluate.write_results(rows, _output(cfg.path("cluster_metrics")))
    evaluate.write_assignments(pred, emb.geo_class, _output(cfg.path("assignments")), emb.row_ids)
    for r in rows:
        log.info("%s = %.4f", r["metric"], r["value"])


def cmd_eval_probe(cfg, args):
    emb = evaluate.EmbeddingMatrix.from_csv(_require(cfg.path("embeddings")))
    e = cfg.eval
    rows = []
    for task in e.tasks:
        if task == "geo":
            _labelled(emb)
        for kind in e.probes:
            for seed in e.probe_seeds:
                kw = {"n_pairs": e.n_pairs} if task == "binary" else {}
                res = evaluate.TASKS[task](emb, kind, seed, test_fraction=e.test_fraction, **kw)
                rows.append({"task": task, "probe": kind, "metric": "accuracy", "value": res.accuracy, "seed": seed})
                log.info("%s/%s seed %d: accuracy %.4f", task, kind, seed, res.accuracy)
    evaluate.write_results(rows, _output(cfg.path("probe_metrics")))


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic well-log CSV"),
    "preprocess": (cmd_preprocess, "clean and normalize a CSV, then cut it into intervals"),
    "train": (cmd_train, "self-supervised training; writes checkpoint and history"),
    "embed": (cmd_embed, "encode intervals with a checkpoint; writes embeddings CSV"),
    "eval-cluster": (cmd_eval_cluster, "Ward clustering of embeddings; writes metrics and assignments"),
    "eval-probe": (cmd_eval_probe, "frozen-embedding classification probes; writes metrics"),
}


# ------------------------------------------------------------ plumbing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="JSON run configuration (defaults apply when omitted)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. optim.base_lr=0.05 (repeatable)")
    common.add_argument("--root", help="shortcut for --set paths.root=DIR")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="wellssl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "train":
            p.add_argument("--method", choices=["barlow-twins", "byol"], help="overrides ssl.method")
    return parser


def _thread_limit():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise config_mod.ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise config_mod.ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _fail(message: str) -> None:
    print(f"wellssl: error: {message}", file=sys.stderr)


def run(command: str, config_path=None, overrides=(), method=None, root=None) -> int:
    """Execute one stage; returns the process exit status."""
    try:
        overrides = list(overrides)
        if root is not None:
            overrides.append(f"paths.root={root}")
        if method is not None:
            overrides.append(f"ssl.method={method.replace('-', '_')}")
        cfg = config_mod.load(config_path, overrides)
        cfg.paths.root = str(Path(cfg.paths.root).resolve())
        limit = _thread_limit()
        config_mod.save(cfg, _output(cfg.path("effective_config")))
        with limit:
            COMMANDS[command][0](cfg, None)
    except (ArithmeticError, FloatingPointError) as exc:
        _fail(f"numerical failure: {exc}")
        return EXIT_RUNTIME
    except (MissingInput, config_mod.ConfigError, ingest.IngestError, evaluate.EvalError, FormatError,
            FileNotFoundError, ValueError) as exc:
        _fail(str(exc))
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        _fail(f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    logging.getLogger("wellssl").setLevel(logging.INFO if args.verbose else logging.WARNING)
    return run(args.command, args.config, args.set, getattr(args, "method", None), args.root)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
