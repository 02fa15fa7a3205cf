"""Words over finite ordered alphabets and their block structure.

Letters are 1-based integers in {1..N}.  Words are flat numpy arrays;
block views are (offset, length) descriptors over the same buffer, so
splitting a long word never copies letters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Encoded block letters must stay below this many bits so that numpy
# int64 arithmetic (including the +H*M shift inside couplings) is exact.
ENCODING_WIDTH_BITS = 62


class EncodingWidthError(ValueError):
    """A block alphabet does not fit the integer encoding width."""

    def __init__(self, n_letters: int, block_len: int, required_bits: int):
        self.n_letters = n_letters
        self.block_len = block_len
        self.required_bits = required_bits
        super().__init__(
            f"alphabet of {n_letters}^{block_len} encoded letters needs "
            f"{required_bits} bits, above the {ENCODING_WIDTH_BITS}-bit width"
        )


def _dtype_for(n_letters: int):
    return np.uint8 if n_letters <= 255 else np.int64


@dataclass(frozen=True)
class Word:
    """A finite word: sequence of letters in {1..alphabet}."""

    letters: np.ndarray
    alphabet: int

    def __post_init__(self):
        arr = np.asarray(self.letters)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("a word needs at least one letter")
        object.__setattr__(self, "letters", arr)

    @classmethod
    def make(cls, letters, alphabet: int, validate: bool = True) -> "Word":
        """Build a word from any integer sequence, copying into a frozen buffer."""
        if alphabet < 2:
            raise ValueError(f"alphabet size must be >= 2, got {alphabet}")
        arr = np.array(letters, dtype=_dtype_for(alphabet))
        if validate and arr.size:
            lo, hi = int(arr.min()), int(arr.max())
            if lo < 1 or hi > alphabet:
                raise ValueError(
                    f"letters must lie in 1..{alphabet}, found range {lo}..{hi}"
                )
        arr.flags.writeable = False
        return cls(arr, alphabet)

    def __len__(self) -> int:
        return int(self.letters.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Word):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(
            self.letters, other.letters
        )

    def __hash__(self):
        return hash((self.alphabet, self.letters.tobytes()))

    def literal(self) -> str:
        """Digit string for alphabets up to 9, comma-separated otherwise."""
        if self.alphabet <= 9:
            return "".join(str(int(v)) for v in self.letters)
        return ",".join(str(int(v)) for v in self.letters)

    @classmethod
    def from_literal(cls, text: str, alphabet: int) -> "Word":
        text = text.strip()
        if "," in text:
            values = [int(tok) for tok in text.split(",") if tok.strip()]
        else:
            values = [int(ch) for ch in text]
        return cls.make(values, alphabet)


@dataclass(frozen=True)
class BlockView:
    """A word of length ell*r seen as r blocks of ell letters."""

    base: Word
    block_len: int
    block_count: int = field(init=False)

    def __post_init__(self):
        n = len(self.base)
        if self.block_len < 1 or n % self.block_len != 0:
            raise ValueError(
                f"block length {self.block_len} does not divide word length {n}"
            )
        object.__setattr__(self, "block_count", n // self.block_len)

    def block(self, v: int) -> Word:
        return subword(self.base, self.block_len, v)

    def encoded(self) -> np.ndarray:
        """All blocks as integer ranks in {1..N^ell} (lexicographic order)."""
        return encode_blocks(self.base, self.block_len)


def subword(x: Word, ell: int, v: int) -> Word:
    """The v-th block of length ell (1-based v); a view, never a copy."""
    n = len(x)
    if ell < 1 or n % ell != 0:
        raise ValueError(f"block length {ell} does not divide word length {n}")
    r = n // ell
    if not 1 <= v <= r:
        raise ValueError(f"block index {v} outside 1..{r}")
    return Word(x.letters[(v - 1) * ell : v * ell], x.alphabet)


def canonical_word(m: int, r: int) -> Word:
    """Word of length r whose i-th letter is ((i-1) mod m) + 1."""
    if m < 2:
        raise ValueError(f"alphabet size must be >= 2, got {m}")
    if r < 1:
        raise ValueError(f"word length must be >= 1, got {r}")
    letters = (np.arange(r, dtype=np.int64) % m + 1).astype(_dtype_for(m))
    letters.flags.writeable = False
    return Word(letters, m)


def check_encoding_width(n_letters: int, block_len: int) -> int:
    """Return N^block_len, rejecting alphabets beyond the encoding width."""
    required = block_len * max(1, (n_letters - 1).bit_length())
    if required > ENCODING_WIDTH_BITS:
        raise EncodingWidthError(n_letters, block_len, required)
    m = n_letters**block_len
    if m.bit_length() > ENCODING_WIDTH_BITS:
        raise EncodingWidthError(n_letters, block_len, m.bit_length())
    return m


def block_encode(x: Word, lam: int) -> int:
    """Lexicographic rank of a length-lam word inside {1..N^lam}."""
    if len(x) != lam:
        raise ValueError(f"expected a word of length {lam}, got {len(x)}")
    check_encoding_width(x.alphabet, lam)
    n = x.alphabet
    rank = 0
    for v in x.letters:
        rank = rank * n + (int(v) - 1)
    return rank + 1


def block_decode(k: int, lam: int, n_letters: int) -> Word:
    """Inverse of block_encode: the word of rank k in {1..N^lam}."""
    m = check_encoding_width(n_letters, lam)
    if not 1 <= k <= m:
        raise ValueError(f"rank {k} outside 1..{m}")
    digits = np.empty(lam, dtype=np.int64)
    k -= 1
    for i in range(lam - 1, -1, -1):
        digits[i] = k % n_letters + 1
        k //= n_letters
    return Word.make(digits, n_letters, validate=False)


def encode_blocks(x: Word, ell: int) -> np.ndarray:
    """Encode every length-ell block of x as its lexicographic rank (int64)."""
    n = len(x)
    if ell < 1 or n % ell != 0:
        raise ValueError(f"block length {ell} does not divide word length {n}")
    check_encoding_width(x.alphabet, ell)
    blocks = x.letters.reshape(n // ell, ell).astype(np.int64) - 1
    weights = x.alphabet ** np.arange(ell - 1, -1, -1, dtype=np.int64)
    return blocks @ weights + 1


def hamming(x: Word, y: Word) -> int:
    """Number of positions where x and y differ."""
    if len(x) != len(y) or x.alphabet != y.alphabet:
        raise ValueError(
            f"words must share length and alphabet: "
            f"({len(x)}, {x.alphabet}) vs ({len(y)}, {y.alphabet})"
        )
    return int(np.count_nonzero(x.letters != y.letters))


def tilde_extract(w: Word, ell: int, lam: int) -> Word:
    """Keep the first lam letters of each length-ell block of w."""
    n = len(w)
    if ell < 1 or n % ell != 0:
        raise ValueError(f"block length {ell} does not divide word length {n}")
    if not 1 <= lam <= ell:
        raise ValueError(f"rate numerator {lam} outside 1..{ell}")
    if lam == ell:
        return w
    kept = np.ascontiguousarray(w.letters.reshape(n // ell, ell)[:, :lam]).ravel()
    kept.flags.writeable = False
    return Word(kept, w.alphabet)
