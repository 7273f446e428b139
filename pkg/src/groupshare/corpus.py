"""Datasets, vocabularies, and pretrained embedding files.

Input conventions:
  * dataset file: UTF-8, one document per line, "label<TAB>token token ...",
    tokens already whitespace-separated by upstream preprocessing;
  * embedding text format: header line "V d", then "word v1 ... vd" per line;
  * embedding binary format: ASCII header "V d\\n", then per word the word's
    UTF-8 bytes, a single space, d little-endian float32 values, and an
    optional newline.

Every vocabulary reserves two extra row ids beyond its tokens: an UNK row
for tokens unseen at build time and a PAD row whose vector stays zero and
is masked out of convolutions. Matrices produced here therefore have
``vocab.num_rows == vocab.num_tokens + 2`` rows.
"""

from dataclasses import dataclass, field

import hashlib

import numpy as np

UNK_TOKEN = "<unk>"
PAD_TOKEN = "<pad>"
_RESERVED = (UNK_TOKEN, PAD_TOKEN)


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between corpus tokens and dense integer ids.

    Token ids occupy [0, num_tokens); the UNK and PAD rows sit at
    num_tokens and num_tokens + 1.
    """

    words: tuple
    index: dict = field(repr=False)

    @property
    def num_tokens(self) -> int:
        return len(self.words)

    @property
    def unk_id(self) -> int:
        return len(self.words)

    @property
    def pad_id(self) -> int:
        return len(self.words) + 1

    @property
    def num_rows(self) -> int:
        """Row count of embedding matrices over this vocabulary."""
        return len(self.words) + 2

    def lookup(self, word: str):
        """Id for a word, the reserved rows included; None if absent."""
        if word == UNK_TOKEN:
            return self.unk_id
        if word == PAD_TOKEN:
            return self.pad_id
        return self.index.get(word)

    def decode(self, ids) -> list:
        out = []
        for i in ids:
            i = int(i)
            if i == self.unk_id:
                out.append(UNK_TOKEN)
            elif i == self.pad_id:
                out.append(PAD_TOKEN)
            else:
                out.append(self.words[i])
        return out

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for w in self.words:
            h.update(w.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


@dataclass
class Dataset:
    """Encoded documents with dense integer labels."""

    name: str
    documents: list
    labels: np.ndarray
    num_classes: int

    def __len__(self) -> int:
        return len(self.documents)


def build_vocabulary(docs, order: str = "first") -> Vocabulary:
    """Collect the distinct tokens of ``docs`` into a Vocabulary.

    order="first" assigns ids by first occurrence; order="sorted" by
    lexicographic sort. Both are deterministic for a given input.
    """
    if order not in ("first", "sorted"):
        raise ValueError(f"unknown vocabulary order {order!r}")
    if not docs:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    seen = {}
    for doc in docs:
        for tok in doc:
            if tok in _RESERVED:
                raise ValueError(f"corpus contains reserved token {tok!r}")
            if tok not in seen:
                seen[tok] = len(seen)
    if not seen:
        raise ValueError("corpus has no tokens")
    words = tuple(sorted(seen)) if order == "sorted" else tuple(seen)
    return Vocabulary(words=words, index={w: i for i, w in enumerate(words)})


def parse_line(line: str, lineno: int):
    """Split one dataset line into (raw label, token list)."""
    if "\t" not in line:
        raise ValueError(f"line {lineno}: expected 'label<TAB>tokens', got no tab")
    label, _, rest = line.partition("\t")
    label = label.strip()
    if not label:
        raise ValueError(f"line {lineno}: empty label")
    tokens = rest.split()
    if not tokens:
        raise ValueError(f"line {lineno}: document has no tokens")
    return label, tokens


def encode(lines, vocab: Vocabulary, name: str = "") -> Dataset:
    """Encode raw dataset lines against a vocabulary.

    Unknown tokens map to the UNK id. Labels that all parse as non-negative
    integers are used verbatim (num_classes = max + 1); otherwise the
    distinct label strings are sorted and densely renumbered.
    """
    raw_labels = []
    documents = []
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        label, tokens = parse_line(line, lineno)
        ids = np.array(
            [vocab.index.get(t, vocab.unk_id) for t in tokens], dtype=np.int64
        )
        raw_labels.append(label)
        documents.append(ids)
    if not documents:
        raise ValueError("dataset is empty")

    def _as_int(s):
        try:
            v = int(s)
        except ValueError:
            return None
        return v if v >= 0 else None

    ints = [_as_int(s) for s in raw_labels]
    if all(v is not None for v in ints):
        labels = np.array(ints, dtype=np.int64)
        num_classes = int(labels.max()) + 1
    else:
        mapping = {s: i for i, s in enumerate(sorted(set(raw_labels)))}
        labels = np.array([mapping[s] for s in raw_labels], dtype=np.int64)
        num_classes = len(mapping)
    return Dataset(name=name, documents=documents, labels=labels, num_classes=num_classes)


def load_dataset(path, name: str = None):
    """Read a dataset file, build its vocabulary, and encode it."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f]
    docs = [parse_line(ln, i)[1] for i, ln in enumerate(lines, start=1) if ln]
    vocab = build_vocabulary(docs)
    ds = encode(lines, vocab, name=name if name is not None else str(path))
    return ds, vocab


@dataclass(frozen=True)
class OovPolicy:
    """Distribution for rows of words absent from the embedding file."""

    seed: int = 0
    low: float = -0.25
    high: float = 0.25


def _draw_oov(rng: np.random.Generator, policy: OovPolicy, dim: int) -> np.ndarray:
    return rng.uniform(policy.low, policy.high, size=dim)


def load_pretrained(path, vocab: Vocabulary, format: str = "text",
                    oov_policy: OovPolicy = OovPolicy()) -> np.ndarray:
    """Load pretrained vectors into a (num_rows, d) float64 matrix.

    File entries not in the vocabulary are ignored. Vocabulary tokens (and
    the UNK row) missing from the file are drawn from ``oov_policy`` in
    ascending row order from one seeded generator, so the result is
    reproducible. The PAD row is zero.
    """
    if format == "text":
        entries, dim = _read_text_embeddings(path)
    elif format == "binary":
        entries, dim = _read_binary_embeddings(path)
    else:
        raise ValueError(f"unknown embedding format {format!r}")

    matrix = np.zeros((vocab.num_rows, dim), dtype=np.float64)
    present = np.zeros(vocab.num_rows, dtype=bool)
    present[vocab.pad_id] = True  # stays zero
    for word, vec in entries:
        idx = vocab.lookup(word)
        if idx is None or idx == vocab.pad_id:
            continue
        matrix[idx] = vec
        present[idx] = True
    rng = np.random.default_rng(oov_policy.seed)
    for i in range(vocab.num_rows):
        if not present[i]:
            matrix[i] = _draw_oov(rng, oov_policy, dim)
    return matrix


def random_pretrained(vocab: Vocabulary, dim: int, seed: int = 0,
                      low: float = -0.25, high: float = 0.25) -> np.ndarray:
    """Fully random embedding matrix using the OOV distribution; PAD zero."""
    if dim <= 0:
        raise ValueError("embedding dimension must be positive")
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(low, high, size=(vocab.num_rows, dim))
    matrix[vocab.pad_id] = 0.0
    return matrix


def _read_text_embeddings(path):
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise ValueError("embedding text header must be 'V d'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise ValueError("embedding text header must be two integers") from None
        if dim <= 0:
            raise ValueError("embedding dimension must be positive")
        entries = []
        for lineno, line in enumerate(f, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise ValueError(
                    f"line {lineno}: expected 1 word + {dim} values, got {len(parts)} fields"
                )
            try:
                # payload resolution is float32 in both file formats
                vec = np.array(parts[1:], dtype=np.float32).astype(np.float64)
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric embedding value") from None
            if not np.isfinite(vec).all():
                raise ValueError(f"line {lineno}: non-finite embedding value")
            entries.append((parts[0], vec))
    if len(entries) != count:
        raise ValueError(
            f"header announces {count} entries but file holds {len(entries)}"
        )
    return entries, dim


def _read_binary_embeddings(path):
    with open(path, "rb") as f:
        blob = f.read()
    nl = blob.find(b"\n")
    if nl < 0:
        raise ValueError("binary embedding file has no header line")
    header = blob[:nl].split()
    if len(header) != 2:
        raise ValueError("embedding binary header must be 'V d'")
    try:
        count, dim = int(header[0]), int(header[1])
    except ValueError:
        raise ValueError("embedding binary header must be two integers") from None
    if dim <= 0:
        raise ValueError("embedding dimension must be positive")
    pos = nl + 1
    entries = []
    for _ in range(count):
        sp = blob.find(b" ", pos)
        if sp < 0:
            raise ValueError("binary embedding payload truncated (no word terminator)")
        word = blob[pos:sp].decode("utf-8")
        pos = sp + 1
        end = pos + 4 * dim
        if end > len(blob):
            raise ValueError("binary embedding payload truncated (vector bytes)")
        vec = np.frombuffer(blob[pos:end], dtype="<f4").astype(np.float64)
        if not np.isfinite(vec).all():
            raise ValueError(f"non-finite embedding value for word {word!r}")
        pos = end
        if pos < len(blob) and blob[pos:pos + 1] == b"\n":
            pos += 1
        entries.append((word, vec))
    if pos != len(blob):
        raise ValueError("binary embedding file has trailing bytes after payload")
    return entries, dim


def _format_value(x: np.float32) -> str:
    return np.format_float_positional(x, unique=True, trim="0")


def write_pretrained(matrix: np.ndarray, vocab: Vocabulary, path,
                     format: str = "text") -> None:
    """Write vectors for the vocabulary tokens, float32 payload.

    Accepts a matrix with either num_tokens rows or num_rows rows (in the
    latter case the reserved rows are dropped). load_pretrained on the
    result reproduces the written values exactly at float32 resolution.
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("embedding matrix must be 2-D")
    if matrix.shape[0] == vocab.num_rows:
        matrix = matrix[: vocab.num_tokens]
    elif matrix.shape[0] != vocab.num_tokens:
        raise ValueError(
            f"matrix has {matrix.shape[0]} rows, vocabulary has "
            f"{vocab.num_tokens} tokens ({vocab.num_rows} rows)"
        )
    if matrix.shape[0] == 0:
        raise ValueError("refusing to write an empty embedding file")
    if not np.isfinite(matrix).all():
        raise ValueError("embedding matrix contains non-finite values")
    values = matrix.astype(np.float32)
    count, dim = values.shape

    if format == "text":
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"{count} {dim}\n")
            for i in range(count):
                word = vocab.words[i]
                _check_writable_word(word)
                f.write(word)
                for v in values[i]:
                    f.write(" ")
                    f.write(_format_value(v))
                f.write("\n")
    elif format == "binary":
        with open(path, "wb") as f:
            f.write(f"{count} {dim}\n".encode("ascii"))
            for i in range(count):
                word = vocab.words[i]
                _check_writable_word(word)
                f.write(word.encode("utf-8"))
                f.write(b" ")
                f.write(values[i].astype("<f4").tobytes())
                f.write(b"\n")
    else:
        raise ValueError(f"unknown embedding format {format!r}")


def _check_writable_word(word: str) -> None:
    if (" " in word) or ("\n" in word) or not word:
        raise ValueError(f"word {word!r} cannot be stored in embedding files")


def save_vocabulary(vocab: Vocabulary, path) -> None:
    """One token per line, in id order. Reserved rows are implicit."""
    with open(path, "w", encoding="utf-8") as f:
        for w in vocab.words:
            f.write(w)
            f.write("\n")


def load_vocabulary(path) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as f:
        words = [ln.rstrip("\n") for ln in f if ln.rstrip("\n")]
    if not words:
        raise ValueError(f"vocabulary file {path} is empty")
    if len(set(words)) != len(words):
        raise ValueError(f"vocabulary file {path} contains duplicate tokens")
    for w in words:
        if w in _RESERVED:
            raise ValueError(f"vocabulary file {path} lists reserved token {w!r}")
    return Vocabulary(words=tuple(words), index={w: i for i, w in enumerate(words)})
