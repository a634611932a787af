"""Regenerates the replay fixtures used by the stock programs.

    python3 generate.py

Writes prices-1.tsv and prices-2.tsv (about 1000 price records split over
two feeds, with globally distinct timestamps) and tweets.tsv (about 200
tweets, each mentioning one or two stocks).
"""

import random

STOCKS = ["ACME", "BOLT", "CRUX", "DYNA", "EPIC"]
PRICE_RECORDS = 1000
TWEETS = 200


def prices(rng):
    level = {s: rng.uniform(20.0, 200.0) for s in STOCKS}
    feeds = ([], [])
    for ts in range(PRICE_RECORDS):
        stock = rng.choice(STOCKS)
        step = rng.gauss(0.0, 0.012)
        if rng.random() < 0.04:
            step += rng.choice([-1, 1]) * rng.uniform(0.05, 0.12)
        level[stock] = max(1.0, level[stock] * (1.0 + step))
        feeds[ts % 2].append(f'{ts}\t("{stock}", {level[stock]:.2f})')
    return feeds


WORDS = ["rally", "dip", "earnings", "guidance", "upgrade", "selloff", "merger", "buyback"]


def tweets(rng):
    out = []
    ts = 0
    for _ in range(TWEETS):
        ts += rng.randint(1, 9)
        mentioned = rng.sample(STOCKS, rng.choice([1, 1, 1, 2]))
        text = " ".join(rng.choice(WORDS) for _ in range(rng.randint(2, 5)))
        out.append(f'{ts}\t("{" ".join(mentioned)}", "{text}")')
    return out


def write(path, lines):
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def main():
    rng = random.Random(20161024)
    first, second = prices(rng)
    write("prices-1.tsv", first)
    write("prices-2.tsv", second)
    write("tweets.tsv", tweets(rng))


if __name__ == "__main__":
    main()
