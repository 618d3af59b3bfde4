"""Type-2 collision counts on the collision-pair fixture as the drop ratio grows.

Compares DropEdge, DropNode and SoftEdge over the same epochs and prints a CSV::

    python scripts/collision_trend.py --epochs 200 --out results/collision_trend.csv
"""

import argparse
from pathlib import Path

from softedge.augment import AugmentSpec, Method
from softedge.fixtures import collision_pairs
from softedge.wl import audit_dataset


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--ratios", type=float, nargs="+", default=[0.2, 0.4, 0.6])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)

    ds = collision_pairs()
    rows = ["method,ratio,epochs,type1,type2,type3"]
    for method in (Method.DROPEDGE, Method.DROPNODE, Method.SOFTEDGE):
        for ratio in args.ratios:
            c = audit_dataset(ds, AugmentSpec(method, ratio, args.seed), epochs=args.epochs).counts
            rows.append(f"{method.value},{ratio},{args.epochs},{c['type1']},{c['type2']},{c['type3']}")
    text = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    print(text, end="")


if __name__ == "__main__":
    main()
