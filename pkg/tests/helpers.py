"""Small builders shared across test modules."""

import numpy as np

from groupshare.corpus import Vocabulary, build_vocabulary


def vocab_of(words) -> Vocabulary:
    """Vocabulary whose token ids follow the given word order."""
    return build_vocabulary([list(words)])


def random_words(rng: np.random.Generator, count: int) -> list:
    """Distinct lowercase pseudo-words."""
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    seen = set()
    out = []
    while len(out) < count:
        length = int(rng.integers(3, 9))
        w = "".join(alphabet[i] for i in rng.integers(0, 26, size=length))
        if w in seen:
            continue
        seen.add(w)
        out.append(w)
    return out


def random_group_tsv(rng: np.random.Generator, words, n_groups: int,
                     n_pairs: int) -> list:
    """Random "key<TAB>word" lines over the given words."""
    lines = []
    for _ in range(n_pairs):
        g = int(rng.integers(0, n_groups))
        w = words[int(rng.integers(0, len(words)))]
        lines.append(f"g{g}\t{w}")
    return lines
