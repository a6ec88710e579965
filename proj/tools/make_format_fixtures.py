#!/usr/bin/env python3
"""Write the synthetic format fixtures under data/.

    copa-dev.xml     100 items   (COPA XML layout, invented sentences)
    copa-test.xml    500 items
    glucose-d1.tsv   153 rows    (source_id, cause, effect, distractor)

The sentences are generated, not taken from any corpus; they exist so the
loaders and the evaluation loop can be exercised at the official sizes.
Output is a pure function of --seed.
"""

import argparse
import pathlib
import random
from xml.sax.saxutils import escape

PEOPLE = ["The man", "The woman", "The girl", "The boy", "My friend", "The teacher", "The driver",
          "The farmer", "The nurse", "The child", "The cook", "My neighbor", "The student", "The pilot"]
CAUSES = ["forgot to water the plants", "stayed up late", "skipped breakfast", "left the window open",
          "dropped the glass", "ran in the rain", "lost the keys", "ate spoiled fish",
          "practiced every day", "missed the bus", "spilled coffee on the desk", "turned off the heater",
          "won the lottery", "sprained an ankle", "found a wallet", "painted the fence"]
EFFECTS = ["the plants wilted", "was tired the next morning", "felt hungry by noon", "the room got cold",
           "the glass shattered", "got soaking wet", "could not open the door", "got sick",
           "played the song perfectly", "arrived late to work", "the papers were stained",
           "the house grew chilly", "bought a new car", "limped for a week", "returned it to the owner",
           "the fence looked new"]


def sentence(subject, phrase):
    text = phrase if phrase.startswith("the ") else f"{subject} {phrase}"
    return text[0].upper() + text[1:] + "."


def copa_items(rng, count, first_id):
    items = []
    for k in range(count):
        i = rng.randrange(len(CAUSES))
        j = rng.choice([n for n in range(len(CAUSES)) if n != i])
        who = rng.choice(PEOPLE)
        asks = rng.choice(["cause", "effect"])
        if asks == "effect":
            premise, right, wrong = sentence(who, CAUSES[i]), sentence(who, EFFECTS[i]), sentence(who, EFFECTS[j])
        else:
            premise, right, wrong = sentence(who, EFFECTS[i]), sentence(who, CAUSES[i]), sentence(who, CAUSES[j])
        mpa = rng.choice([1, 2])
        a1, a2 = (right, wrong) if mpa == 1 else (wrong, right)
        items.append((first_id + k, asks, mpa, premise, a1, a2))
    return items


def write_copa(path, items):
    lines = ['<?xml version="1.0" encoding="UTF-8"?>', '<copa-corpus version="1.0">']
    for item_id, asks, mpa, p, a1, a2 in items:
        lines.append(f'  <item id="{item_id}" asks-for="{asks}" most-plausible-alternative="{mpa}">')
        lines.append(f"    <p>{escape(p)}</p>")
        lines.append(f"    <a1>{escape(a1)}</a1>")
        lines.append(f"    <a2>{escape(a2)}</a2>")
        lines.append("  </item>")
    lines.append("</copa-corpus>")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_glucose(path, rng, rows):
    out = ["source_id\tcause\teffect\tdistractor"]
    for r in range(rows):
        i = rng.randrange(len(CAUSES))
        j = rng.choice([n for n in range(len(EFFECTS)) if n != i])
        who = rng.choice(PEOPLE)
        out.append(f"g{r + 1:03d}\t{sentence(who, CAUSES[i])}\t{sentence(who, EFFECTS[i])}\t{sentence(who, EFFECTS[j])}")
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=2023)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    write_copa(out / "copa-dev.xml", copa_items(rng, 100, 1))
    write_copa(out / "copa-test.xml", copa_items(rng, 500, 501))
    write_glucose(out / "glucose-d1.tsv", rng, 153)


if __name__ == "__main__":
    main()
