#!/usr/bin/env python3
"""Build a GLUCOSE-D1 file from a raw GLUCOSE test-set CSV.

Each usable row yields one instance: the cause statement becomes the
premise, its paired effect the correct choice, and the effect of another
row (drawn with --seed) the distractor. Rows whose cause or effect is empty
or "escaped" are skipped. Column names vary between GLUCOSE releases, so
they are arguments.

    python3 tools/make_glucose_d1.py raw_test.csv data/glucose-d1.tsv \
        --id-col unique_id --cause-col cause --effect-col effect
"""

import argparse
import csv
import random
import sys


def clean(text):
    return " ".join((text or "").split())


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("raw_csv")
    ap.add_argument("out_tsv")
    ap.add_argument("--id-col", default="unique_id")
    ap.add_argument("--cause-col", default="cause")
    ap.add_argument("--effect-col", default="effect")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rows = []
    with open(args.raw_csv, newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            try:
                sid, cause, effect = rec[args.id_col], clean(rec[args.cause_col]), clean(rec[args.effect_col])
            except KeyError as e:
                sys.exit(f"missing column {e}; available: {', '.join(rec.keys())}")
            if not cause or not effect or "escaped" in (cause.lower(), effect.lower()):
                continue
            rows.append((clean(sid), cause, effect))
    if len({r[2] for r in rows}) < 2:
        sys.exit("need at least two distinct effects to draw distractors from")

    rng = random.Random(args.seed)
    seen = set()
    with open(args.out_tsv, "w", encoding="utf-8") as out:
        out.write("source_id\tcause\teffect\tdistractor\n")
        for sid, cause, effect in rows:
            if sid in seen:
                continue
            seen.add(sid)
            distractor = effect
            while distractor == effect:
                distractor = rows[rng.randrange(len(rows))][2]
            out.write(f"{sid}\t{cause}\t{effect}\t{distractor}\n")


if __name__ == "__main__":
    main()
