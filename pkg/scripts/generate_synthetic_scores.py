#!/usr/bin/env python3
"""Regenerate the bundled synthetic score CSVs.

Ground truth used for data/synthetic_star.csv:
    greedy 2.0, beam 2.6, iter-beam 3.2 (latent quality M_i)
    12 annotators, bias B_j ~ N(0, 1), 6 scores per annotator per model
    observed = round(M_i + B_j + noise) clipped into 1..4

and for data/synthetic_binary.csv:
    greedy -0.6, beam 0.0, iter-beam 0.6 (latent logit M_i)
    12 annotators B_j ~ N(0,1), 5 turn positions T_k ~ N(0,1)
    label ~ Bernoulli(sigmoid(M_i + B_j + T_k))

Clipping and rounding to the 1..4 scale deviate from the pure generative
model on purpose: the file should look like real questionnaire output.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
DATA = HERE.parent / "src" / "dialogsearch" / "data"

STAR_TRUTH = {"greedy": 2.0, "beam": 2.6, "iter-beam": 3.2}
BINARY_TRUTH = {"greedy": -0.6, "beam": 0.0, "iter-beam": 0.6}
N_ANNOTATORS = 12
SCORES_PER_PAIR = 6
N_TURNS = 5


def write_star(rng: np.random.Generator) -> None:
    bias = rng.normal(0.0, 1.0, N_ANNOTATORS)
    with open(DATA / "synthetic_star.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["model", "annotator", "score"])
        for model, quality in STAR_TRUTH.items():
            for j in range(N_ANNOTATORS):
                for _ in range(SCORES_PER_PAIR):
                    raw = quality + bias[j] + rng.normal()
                    score = int(np.clip(round(raw), 1, 4))
                    writer.writerow([model, f"w{j:02d}", score])


def write_binary(rng: np.random.Generator) -> None:
    bias = rng.normal(0.0, 1.0, N_ANNOTATORS)
    turn = rng.normal(0.0, 1.0, N_TURNS)
    with open(DATA / "synthetic_binary.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["model", "annotator", "turn", "label"])
        for model, logit in BINARY_TRUTH.items():
            for j in range(N_ANNOTATORS):
                for k in range(N_TURNS):
                    eta = logit + bias[j] + turn[k]
                    p = 1.0 / (1.0 + np.exp(-eta))
                    label = int(rng.random() < p)
                    writer.writerow([model, f"w{j:02d}", k, label])


def main() -> None:
    write_star(np.random.default_rng(20240915))
    write_binary(np.random.default_rng(20240916))
    print(f"wrote {DATA / 'synthetic_star.csv'}")
    print(f"wrote {DATA / 'synthetic_binary.csv'}")


if __name__ == "__main__":
    main()
