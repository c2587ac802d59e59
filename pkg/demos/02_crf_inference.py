"""Exact CRF inference on a lattice small enough to enumerate by hand.

Builds a 3-position, 3-tag lattice, then compares the dynamic programs
(log-partition, marginals, Viterbi) against brute-force enumeration over
all 27 tag sequences.
"""
import itertools
import math

import numpy as np

from lexner import crf

TAGS = ["O", "B-LOC", "E-LOC"]


def main():
    rng = np.random.default_rng(4)
    K = len(TAGS)
    T = crf.init_transitions(K)
    T[:K, :K] = rng.normal(scale=0.8, size=(K, K))
    T[K, :K] = rng.normal(scale=0.5, size=K)     # start scores
    T[:K, K + 1] = rng.normal(scale=0.5, size=K)  # stop scores
    O = rng.normal(scale=1.5, size=(3, K))
    lattice = crf.TagLattice(O, T)

    print("emissions (rows = positions, cols = %s):" % TAGS)
    print(np.round(O, 3), "\n")

    scores = {y: crf.score_sequence(lattice, list(y))
              for y in itertools.product(range(K), repeat=3)}
    m = max(scores.values())
    brute = m + math.log(sum(math.exp(s - m) for s in scores.values()))
    print(f"log-partition, forward algorithm: {crf.log_partition(lattice):.10f}")
    print(f"log-partition, 27-path sum:       {brute:.10f}\n")

    marg = crf.marginals(lattice)
    print("posterior tag marginals (each row sums to 1):")
    print(np.round(marg, 4), "\n")

    path, score = crf.viterbi(lattice)
    best = max(scores, key=scores.get)
    print(f"Viterbi:     {[TAGS[t] for t in path]}  score {score:.4f}")
    print(f"brute force: {[TAGS[t] for t in best]}  score {scores[best]:.4f}")


if __name__ == "__main__":
    main()
