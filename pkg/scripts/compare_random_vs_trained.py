"""Ward-clustering ARI and probe accuracy of trained vs randomly initialized encoders.

Trains one Barlow Twins (or BYOL) encoder per seed on the default synthetic
dataset and prints one table row per seed. Single-threaded.

    python scripts/compare_random_vs_trained.py --seeds 0 1 2 --epochs 30
"""

import argparse
import time

import numpy as np
from threadpoolctl import threadpool_limits

from wellssl import encoder, evaluate, ingest, ssl, synth
from wellssl.optim import LARSConfig


def run(seed, args):
    tables = ingest.preprocess(synth.generate(synth.SynthConfig(seed=seed)))
    train_set = ingest.IntervalSet.from_intervals(ingest.extract_all(tables, 100, args.train_stride))
    eval_set = ingest.IntervalSet.from_intervals(ingest.extract_all(tables, 100, 100))
    cfg = ssl.TrainConfig(
        method=args.method, batch_size=args.batch_size, max_epochs=args.epochs, seed=seed,
        window_size=args.window, lars=LARSConfig(trust_coefficient=args.trust),
    )
    random_init = ssl.Trainer(cfg).student
    t0 = time.perf_counter()
    res = ssl.train(train_set, cfg)
    minutes = (time.perf_counter() - t0) / 60
    row = {"seed": seed, "epochs": len(res.history), "minutes": minutes,
           "loss_ratio": res.history[-1]["train_loss"] / res.history[0]["train_loss"]}
    for name, params in (("random", random_init), ("trained", res.params)):
        vecs = encoder.encode(params, eval_set.values)
        emb = evaluate.EmbeddingMatrix.from_intervals(vecs, eval_set)
        row[f"ari_{name}"] = evaluate.ari(evaluate.agglomerative_cluster(vecs, 4), eval_set.geo_class)
        row[f"geo_{name}"] = evaluate.geo_task(emb, "linear", 0).accuracy
        row[f"bin_{name}"] = np.mean([evaluate.binary_task(emb, "linear", s).accuracy for s in range(3)])
    return row


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--method", default="barlow_twins", choices=list(ssl.METHODS))
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--batch-size", type=int, default=256)
    ap.add_argument("--train-stride", type=int, default=25)
    ap.add_argument("--window", type=int, default=None)
    ap.add_argument("--trust", type=float, default=3e-3)
    args = ap.parse_args()
    cols = ["seed", "epochs", "minutes", "loss_ratio", "ari_random", "ari_trained",
            "geo_random", "geo_trained", "bin_random", "bin_trained"]
    print(" ".join(f"{c:>11}" for c in cols))
    with threadpool_limits(limits=1):
        for seed in args.seeds:
            row = run(seed, args)
            print(" ".join(f"{row[c]:>11.4g}" if isinstance(row[c], float) else f"{row[c]:>11}" for c in cols),
                  flush=True)


if __name__ == "__main__":
    main()
