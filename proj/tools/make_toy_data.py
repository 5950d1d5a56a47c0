"""Regenerates the toy corpus and the benchmark sets under data/.

Two topics (pets, markets) with three subtopics each. Consecutive corpus
lines follow a Markov chain over subtopics, so the text after a sentence
depends on the subtopic that sentence belongs to.
"""

import argparse
import pathlib
import random

SUBTOPICS = {
    "cats": {
        "starts": ["kittens", "cats"],
        "verbs": ["chase", "watch", "paw at", "sleep near"],
        "objects": ["the mouse", "a ball of yarn", "the warm sofa", "the fishbowl"],
    },
    "dogs": {
        "starts": ["puppies", "hounds"],
        "verbs": ["fetch", "dig up", "bark at", "carry"],
        "objects": ["a stick", "the old bone", "the mailman", "a leash"],
    },
    "birds": {
        "starts": ["sparrows", "wrens"],
        "verbs": ["build", "peck at", "sing from", "guard"],
        "objects": ["a nest", "the seeds", "the high branch", "the feeder"],
    },
    "stocks": {
        "starts": ["traders", "investors"],
        "verbs": ["buy", "short", "sell off", "track"],
        "objects": ["tech shares", "the index", "a rally", "small caps"],
    },
    "banks": {
        "starts": ["lenders", "bankers"],
        "verbs": ["raise", "approve", "cut", "audit"],
        "objects": ["the mortgage", "deposits", "a credit line", "the loan"],
    },
    "bonds": {
        "starts": ["yields", "gilts"],
        "verbs": ["climb past", "slip below", "hold near", "follow"],
        "objects": ["the coupon", "treasuries", "the curve", "a new high"],
    },
}

PETS = ["cats", "dogs", "birds"]
MARKETS = ["stocks", "banks", "bonds"]


def transition(src):
    """Next-subtopic distribution: stay, neighbour, far sibling, other topic."""
    group, other = (PETS, MARKETS) if src in PETS else (MARKETS, PETS)
    i = group.index(src)
    row = {s: {0: 0.5, 1: 0.2, 2: 0.08}[abs(i - j)] for j, s in enumerate(group)}
    for s in other:
        row[s] = 0.02
    total = sum(row.values())
    return {k: v / total for k, v in row.items()}


def sentence(rng, sub):
    t = SUBTOPICS[sub]
    return f"{rng.choice(t['starts'])} {rng.choice(t['verbs'])} {rng.choice(t['objects'])}."


def check_markers(order):
    # The model sees order-1 symbols: the tail of an input before the newline
    # must identify the subtopic, and so must the first letter after it.
    firsts = {}
    tails = {}
    for sub, t in SUBTOPICS.items():
        for s in t["starts"]:
            assert firsts.setdefault(s[0], sub) == sub, s
        for o in t["objects"]:
            tail = (o + ".")[-(order - 2):]
            assert tails.setdefault(tail, sub) == sub, o


def corpus(rng, lines):
    sub = rng.choice(list(SUBTOPICS))
    out = []
    for _ in range(lines):
        out.append(sentence(rng, sub))
        row = transition(sub)
        sub = rng.choices(list(row), weights=list(row.values()))[0]
    return "\n".join(out) + "\n"


def distinct_pair(rng, sub_a, sub_b):
    while True:
        a, b = sentence(rng, sub_a), sentence(rng, sub_b)
        if a != b:
            return a, b


def pairs(rng):
    # Human score grades the relation between the two subtopics.
    rows = []
    near = [("cats", "dogs"), ("dogs", "birds"), ("stocks", "banks"), ("banks", "bonds")]
    far = [("cats", "birds"), ("stocks", "bonds")]
    plans = []
    subs = list(SUBTOPICS)
    for k in range(10):
        s = subs[k % 6]
        plans.append((s, s, 4.5))
    for k in range(10):
        plans.append((*near[k % len(near)], 3.0))
    for k in range(10):
        plans.append((*far[k % len(far)], 1.5))
    for k in range(10):
        plans.append((PETS[k % 3], MARKETS[(k // 3 + k) % 3], 0.0))
    rng.shuffle(plans)
    for k, (a, b, score) in enumerate(plans, 1):
        if rng.random() < 0.5:
            a, b = b, a
        ta, tb = distinct_pair(rng, a, b)
        rows.append(f"p{k:02d}\t{ta}\t{tb}\t{score}")
    return "id\ttext_a\ttext_b\tscore\n" + "\n".join(rows) + "\n"


def choices(rng):
    rows = []
    subs = list(SUBTOPICS)
    for k in range(20):
        sub = subs[k % 6]
        other = (MARKETS if sub in PETS else PETS)[rng.randrange(3)]
        ctx, pos = distinct_pair(rng, sub, sub)
        neg = sentence(rng, other)
        rows.append(f"c{k + 1:02d}\t{ctx}\t{pos}\t{neg}")
    return "id\tcontext\tpositive\tnegative\n" + "\n".join(rows) + "\n"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path(__file__).resolve().parent.parent / "data")
    ap.add_argument("--lines", type=int, default=6000)
    ap.add_argument("--order", type=int, default=6)
    ap.add_argument("--seed", type=int, default=20240607)
    args = ap.parse_args()
    check_markers(args.order)
    rng = random.Random(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "toy_corpus.txt").write_text(corpus(rng, args.lines))
    (args.out / "sts_toy.tsv").write_text(pairs(rng))
    (args.out / "choice_toy.tsv").write_text(choices(rng))


if __name__ == "__main__":
    main()
