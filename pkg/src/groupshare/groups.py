"""Word group tables built from external lexical resources.

A group table maps vocabulary word ids to small sets of group ids. Four
source formats are supported:

  * canonical TSV: "group_key<TAB>word" per line;
  * hierarchical bit-string clusters: "bitstring<TAB>word<TAB>count",
    one group per distinct bit string;
  * tree-coded concept vocabularies: "tree_number<TAB>word" where the
    group key is the tree number truncated to a fixed dot-separated depth;
  * scored sentiment lexicons: "pos<TAB>id<TAB>score_pos<TAB>score_neg<TAB>terms"
    where a group keeps only entries with a nonzero positive or negative
    score, and terms drop their "#sense" suffix.

Group ids are dense integers assigned in order of first surviving
appearance in the source file. Words outside the vocabulary are skipped
and counted. Empty groups are never materialized.
"""

from dataclasses import dataclass, field

import numpy as np

from .corpus import Vocabulary


@dataclass
class GroupTable:
    """Membership structure between word ids and group ids."""

    vocab_size: int
    group_keys: list
    members: list            # group id -> ascending list of word ids
    membership: dict = field(repr=False)  # word id -> ascending list of group ids
    oov_skipped: int = 0
    multiword_skipped: int = 0

    @property
    def group_count(self) -> int:
        return len(self.members)

    def groups_of(self, word_id: int) -> list:
        return self.membership.get(int(word_id), [])

    def grouped_word_ids(self) -> list:
        return sorted(self.membership)

    def validate(self) -> None:
        if len(self.group_keys) != len(self.members):
            raise ValueError("group_keys and members disagree on group count")
        seen = {}
        for gid, ws in enumerate(self.members):
            if not ws:
                raise ValueError(f"group {gid} is empty")
            if list(ws) != sorted(set(ws)):
                raise ValueError(f"group {gid} members not strictly ascending")
            for w in ws:
                if not (0 <= w < self.vocab_size):
                    raise ValueError(f"group {gid} member {w} outside vocabulary")
                seen.setdefault(w, []).append(gid)
        if seen != {w: gs for w, gs in self.membership.items()}:
            raise ValueError("membership map disagrees with member lists")


class _TableBuilder:
    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab
        self.key_to_gid = {}
        self.group_keys = []
        self.pairs = set()
        self.members = []
        self.oov_skipped_words = set()
        self.multiword_skipped = 0

    def add(self, key: str, word: str) -> None:
        wid = self.vocab.index.get(word)
        if wid is None:
            self.oov_skipped_words.add(word)
            return
        gid = self.key_to_gid.get(key)
        if gid is None:
            gid = len(self.group_keys)
            self.key_to_gid[key] = gid
            self.group_keys.append(key)
            self.members.append([])
        if (gid, wid) in self.pairs:
            return
        self.pairs.add((gid, wid))
        self.members[gid].append(wid)

    def finish(self) -> GroupTable:
        keep = [g for g in range(len(self.members)) if self.members[g]]
        keys = [self.group_keys[g] for g in keep]
        members = [sorted(self.members[g]) for g in keep]
        membership = {}
        for gid, ws in enumerate(members):
            for w in ws:
                membership.setdefault(w, []).append(gid)
        table = GroupTable(
            vocab_size=self.vocab.num_rows,
            group_keys=keys,
            members=members,
            membership=membership,
            oov_skipped=len(self.oov_skipped_words),
            multiword_skipped=self.multiword_skipped,
        )
        table.validate()
        return table


def _iter_lines(lines):
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        yield lineno, line


def groups_from_tsv(lines, vocab: Vocabulary) -> GroupTable:
    """Canonical "group_key<TAB>word" lines."""
    b = _TableBuilder(vocab)
    for lineno, line in _iter_lines(lines):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ValueError(f"line {lineno}: expected 'group_key<TAB>word'")
        b.add(parts[0], parts[1])
    return b.finish()


def groups_from_brown(lines, vocab: Vocabulary) -> GroupTable:
    """Hierarchical cluster output: "bitstring<TAB>word<TAB>count"."""
    b = _TableBuilder(vocab)
    for lineno, line in _iter_lines(lines):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(
                f"line {lineno}: expected 'bitstring<TAB>word<TAB>count'"
            )
        bits, word, count = parts
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"line {lineno}: bit string {bits!r} is not binary")
        try:
            int(count)
        except ValueError:
            raise ValueError(f"line {lineno}: count {count!r} is not an integer") from None
        b.add(bits, word)
    return b.finish()


def mesh_prefix(tree_number: str, depth: int) -> str:
    """Truncate a dot-separated tree number to its first ``depth`` parts.

    "C06.552.150.125" at depth 3 becomes "C06.552.150"; numbers with fewer
    parts are kept whole.
    """
    parts = tree_number.split(".")
    if not parts[0] or not parts[0][0].isalpha() or not parts[0][1:].isdigit():
        raise ValueError(f"malformed tree number {tree_number!r}")
    for p in parts[1:]:
        if not p.isdigit():
            raise ValueError(f"malformed tree number {tree_number!r}")
    return ".".join(parts[:depth])


def groups_from_mesh(lines, vocab: Vocabulary, prefix_depth: int = 3) -> GroupTable:
    """Tree-coded concepts: "tree_number<TAB>word", grouped by prefix."""
    if prefix_depth < 1:
        raise ValueError("prefix_depth must be at least 1")
    b = _TableBuilder(vocab)
    for lineno, line in _iter_lines(lines):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ValueError(f"line {lineno}: expected 'tree_number<TAB>word'")
        try:
            key = mesh_prefix(parts[0], prefix_depth)
        except ValueError as e:
            raise ValueError(f"line {lineno}: {e}") from None
        b.add(key, parts[1])
    return b.finish()


def groups_from_sentiment_lexicon(lines, vocab: Vocabulary) -> GroupTable:
    """Scored synset lexicon; one group per synset that carries sentiment.

    Line layout: "pos<TAB>id<TAB>pos_score<TAB>neg_score<TAB>term#1 term#2".
    Synsets whose two scores are both zero are dropped. Terms lose their
    "#sense" suffix; multiword terms (containing '_') are skipped and
    counted. Lines starting with '#' are comments.
    """
    b = _TableBuilder(vocab)
    for lineno, line in _iter_lines(lines):
        if line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 5:
            raise ValueError(
                f"line {lineno}: expected at least 5 tab-separated fields"
            )
        pos, syn_id, pos_score, neg_score, terms = (
            parts[0], parts[1], parts[2], parts[3], parts[4],
        )
        try:
            p = float(pos_score)
            n = float(neg_score)
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric sentiment score") from None
        if p == 0.0 and n == 0.0:
            continue
        key = f"{pos}#{syn_id}"
        for term in terms.split():
            word = term.partition("#")[0]
            if not word:
                raise ValueError(f"line {lineno}: empty term")
            if "_" in word:
                b.multiword_skipped += 1
                continue
            b.add(key, word)
    return b.finish()


_LOADERS = {
    "tsv": groups_from_tsv,
    "brown": groups_from_brown,
    "mesh": groups_from_mesh,
    "sentilex": groups_from_sentiment_lexicon,
}


def load_groups(path, kind: str, vocab: Vocabulary, **kwargs) -> GroupTable:
    """Dispatch on resource kind; see the per-format functions."""
    loader = _LOADERS.get(kind)
    if loader is None:
        raise ValueError(
            f"unknown groups kind {kind!r}; expected one of {sorted(_LOADERS)}"
        )
    with open(path, "r", encoding="utf-8") as f:
        return loader(f, vocab, **kwargs)


def write_groups_tsv(table: GroupTable, vocab: Vocabulary, path) -> None:
    """Dump a table in the canonical TSV form.

    Lines come out in group-id order with ascending members, so loading
    the file again rebuilds an identical table and a second dump is
    byte-identical.
    """
    with open(path, "w", encoding="utf-8") as f:
        for gid, ws in enumerate(table.members):
            key = table.group_keys[gid]
            for w in ws:
                f.write(f"{key}\t{vocab.words[w]}\n")


@dataclass
class GroupEmbeddings:
    """One d-dimensional parameter row per group."""

    vectors: np.ndarray  # (group_count, d)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def init_group_embeddings(table: GroupTable, pretrained: np.ndarray) -> GroupEmbeddings:
    """Each group row is the arithmetic mean of its members' pretrained rows.

    Accumulation runs over members in ascending word-id order, summing
    first and dividing once, so the result is reproducible bit for bit.
    """
    pretrained = np.asarray(pretrained, dtype=np.float64)
    if pretrained.shape[0] < table.vocab_size:
        raise ValueError(
            f"pretrained matrix has {pretrained.shape[0]} rows, "
            f"table expects {table.vocab_size}"
        )
    dim = pretrained.shape[1]
    vectors = np.zeros((table.group_count, dim), dtype=np.float64)
    for gid, ws in enumerate(table.members):
        acc = np.zeros(dim, dtype=np.float64)
        for w in ws:
            acc += pretrained[w]
        vectors[gid] = acc / len(ws)
    return GroupEmbeddings(vectors=vectors)
