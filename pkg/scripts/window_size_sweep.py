"""Clustering ARI of Barlow Twins encoders trained with different window-slice sizes.

    python scripts/window_size_sweep.py --windows 25 50 65 85 --epochs 15
"""

import argparse

from threadpoolctl import threadpool_limits

from wellssl import encoder, evaluate, ingest, ssl, synth


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--windows", type=int, nargs="+", default=[25, 50, 65, 85])
    ap.add_argument("--epochs", type=int, default=15)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--train-stride", type=int, default=50)
    args = ap.parse_args()
    tables = ingest.preprocess(synth.generate(synth.SynthConfig(seed=args.seed)))
    train_set = ingest.IntervalSet.from_intervals(ingest.extract_all(tables, 100, args.train_stride))
    eval_set = ingest.IntervalSet.from_intervals(ingest.extract_all(tables, 100, 100))
    print(f"{'window':>7} {'epochs':>7} {'ari':>7} {'geo':>7}")
    with threadpool_limits(limits=1):
        for w in args.windows:
            cfg = ssl.TrainConfig(batch_size=256, max_epochs=args.epochs, window_size=w, seed=args.seed)
            res = ssl.train(train_set, cfg)
            vecs = encoder.encode(res.params, eval_set.values)
            ari = evaluate.ari(evaluate.agglomerative_cluster(vecs, 4), eval_set.geo_class)
            geo = evaluate.geo_task(evaluate.EmbeddingMatrix.from_intervals(vecs, eval_set), "linear", 0).accuracy
            print(f"{w:>7} {len(res.history):>7} {ari:>7.3f} {geo:>7.3f}", flush=True)


if __name__ == "__main__":
    main()
