"""Spreadsheet-style oracle for the small fixture.

Recomputes every feature column with pandas/numpy directly from the raw
JSONL files and the bundled lexicon, and writes the expected tables that the
pipeline test compares against. Run from this directory:

    python3 oracle.py
"""

import json
import math
import re
from pathlib import Path

import numpy as np
import pandas as pd

HERE = Path(__file__).parent
LEXICON = HERE / "../../../data/lexicon.tsv"
DEAD_ZONE = 0.05
PCT = 99.0
UNBOUNDED = {
    "followers", "friends", "statuses", "listed", "n_lik", "n_ret",
    "r_ret", "r_lik", "social_reputation", "retweet_hindex", "liked_hindex",
}
COLUMNS = [
    "followers", "friends", "statuses", "listed", "n_ret", "n_lik", "url_count",
    "r_ret", "r_lik", "r_url", "r_has", "r_ori", "social_reputation",
    "retweet_hindex", "liked_hindex", "sentiment_score", "tweet_credibility",
    "influence", "n_pos", "n_neu", "n_neg",
]


def read_lexicon():
    weights, negators = {}, set()
    for line in LEXICON.read_text().splitlines():
        if not line.strip():
            continue
        head, _, tail = line.partition("\t")
        if head == "#negator":
            negators.add(tail.strip())
        elif head.startswith("#"):
            continue
        else:
            weights[head.strip().lower()] = float(tail)
    return weights, negators


def tokens(text):
    out = []
    for word in text.split():
        w = word.lower()
        if w.startswith(("@", "http://", "https://", "www.")):
            continue
        w = w.replace("'", "").replace("’", "")
        out.extend(t for t in re.split(r"[^0-9a-z]+", w) if t)
    return out


def polarity(text, weights, negators):
    toks = tokens(text)
    vals = []
    for i, t in enumerate(toks):
        if t in negators or t not in weights:
            continue
        sign = -1.0 if i > 0 and toks[i - 1] in negators else 1.0
        vals.append(sign * weights[t])
    return max(-1.0, min(1.0, sum(vals) / len(vals))) if vals else 0.0


def h_index(counts):
    # brute force: try every h
    return max([h for h in range(len(counts) + 1) if sum(c >= h for c in counts) >= h])


def minmax(col, clip):
    x = col.to_numpy(dtype=float)
    if clip:
        lo, hi = np.percentile(x, 100 - PCT), np.percentile(x, PCT)
    else:
        lo, hi = x.min(), x.max()
    x = np.clip(x, lo, hi)
    mn, mx = x.min(), x.max()
    if mx <= mn:
        return pd.Series(0.0, index=col.index)
    return pd.Series((x - mn) / (mx - mn), index=col.index)


def main():
    weights, negators = read_lexicon()
    users = pd.read_json(HERE / "users.jsonl", lines=True, dtype={"user_id": str}).set_index("user_id")
    tweets = pd.read_json(HERE / "tweets.jsonl", lines=True, dtype={"user_id": str, "tweet_id": "int64"})
    tweets["pol"] = [polarity(t, weights, negators) for t in tweets["text"]]
    tweets["cls"] = np.where(tweets.pol > DEAD_ZONE, "pos", np.where(tweets.pol < -DEAD_ZONE, "neg", "neu"))

    rows = []
    for uid, u in users.iterrows():
        t = tweets[tweets.user_id == uid]
        n = float(u.statuses)
        r = {"user_id": uid}
        r["followers"], r["friends"], r["statuses"], r["listed"] = (float(u[k]) for k in ["followers", "friends", "statuses", "listed"])
        r["n_ret"] = float(t.retweet_count.sum())
        r["n_lik"] = float(t.like_count.sum())
        r["url_count"] = float(t.has_url.sum())
        r["r_ret"] = r["n_ret"] / n
        r["r_lik"] = r["n_lik"] / n
        r["r_url"] = r["url_count"] / n
        r["r_has"] = float(t.has_hashtag.sum()) / n
        r["r_ori"] = (n - float(t.is_retweet_of_other.sum())) / n
        r["social_reputation"] = 2 * math.log10(1 + u.followers) + math.log10(1 + u.statuses) - math.log10(1 + u.friends)
        r["retweet_hindex"] = float(h_index(list(t.retweet_count)))
        r["liked_hindex"] = float(h_index(list(t.like_count)))
        r["n_pos"] = float((t.cls == "pos").sum())
        r["n_neu"] = float((t.cls == "neu").sum())
        r["n_neg"] = float((t.cls == "neg").sum())
        r["sentiment_score"] = (r["n_pos"] + r["n_neu"]) / len(t)
        r["tweet_credibility"] = (r["r_ret"] + r["r_lik"] + r["r_has"] + r["r_url"]) / 4 * r["r_ori"]
        rows.append(r)
    df = pd.DataFrame(rows).set_index("user_id")

    comps = ["sentiment_score", "tweet_credibility", "social_reputation", "retweet_hindex", "liked_hindex"]
    df["influence"] = sum(minmax(df[c], c in UNBOUNDED) for c in comps) / 5

    df = df[COLUMNS]
    df.to_csv(HERE / "expected_features.csv", float_format="%.17g")
    norm = pd.DataFrame({c: minmax(df[c], c in UNBOUNDED) for c in COLUMNS})
    norm.to_csv(HERE / "expected_normalized.csv", float_format="%.17g")


if __name__ == "__main__":
    main()
