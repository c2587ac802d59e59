"""Walk through lexicon matching on the classic bridge sentence.

The sentence 南京市长江大桥 overlaps several dictionary words; the
interesting characters are the ones in the middle of the long entity,
where self-matched words (first-order knowledge) disagree about the
boundary but the neighbors' matches (second-order knowledge) still point
at the right words.
"""
import numpy as np

from lexner import build_lexicon, match_sentence

WORDS = ["南京", "南京市", "市长", "长江", "大桥", "长江大桥"]
SENTENCE = tuple("南京市长江大桥")


def names(lexicon, indices):
    return [lexicon.words[w] for w in indices] or ["-"]


def main():
    lexicon = build_lexicon(WORDS, None, dim=8, rng=np.random.default_rng(0))
    print(f"dictionary: {WORDS}")
    print(f"sentence:   {''.join(SENTENCE)}\n")

    sets = match_sentence(lexicon, SENTENCE)
    header = f"{'pos':>3} {'char':>4}  {'starting here':<22}{'ending here':<22}" \
             f"{'first-order':<22}{'second-order':<22}"
    print(header)
    print("-" * len(header))
    for i, ch in enumerate(SENTENCE):
        print(f"{i + 1:>3} {ch:>4}  "
              f"{','.join(names(lexicon, sets.fwd[i])):<22}"
              f"{','.join(names(lexicon, sets.bwd[i])):<22}"
              f"{','.join(names(lexicon, sets.flk[i])):<22}"
              f"{','.join(names(lexicon, sets.slk[i])):<22}")

    print()
    print("Note 京: on its own it only matches 南京, which would cut the")
    print("city name short; its neighbors contribute 南京市 as well, so the")
    print("fusion layer gets to choose the longer span.")


if __name__ == "__main__":
    main()
