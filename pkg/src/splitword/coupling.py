"""Canonical coupling permutations and innovation transforms.

The canonical coupling of a word w over an ordered alphabet of size M is
the permutation sending w as close as possible to the canonical word:
position i goes to w(i) + H(w,i)*M when that value stays within range,
where H(w,i) counts prior occurrences of the letter w(i); leftover
positions are filled in increasing order with the smallest unused value.

Permutations are dense integer arrays with 1-based values, matching the
1-based letters of the words they align.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .words import Word, check_encoding_width, encode_blocks, tilde_extract


@dataclass(frozen=True)
class Coupling:
    """A permutation of {1..r} stored as values perm[i-1] = phi(i)."""

    perm: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        r = perm.size
        if r == 0:
            raise ValueError("empty permutation")
        counts = np.bincount(perm, minlength=r + 1)
        if counts[0] != 0 or not np.all(counts[1:] == 1):
            raise ValueError("values are not a permutation of 1..r")
        perm.flags.writeable = False
        object.__setattr__(self, "perm", perm)

    @property
    def degree(self) -> int:
        return int(self.perm.size)

    def __call__(self, v: int) -> int:
        if not 1 <= v <= self.degree:
            raise ValueError(f"index {v} outside 1..{self.degree}")
        return int(self.perm[v - 1])

    def inverse(self, v: int) -> int:
        if not 1 <= v <= self.degree:
            raise ValueError(f"index {v} outside 1..{self.degree}")
        return int(np.flatnonzero(self.perm == v)[0]) + 1

    def is_identity(self) -> bool:
        return bool(np.all(self.perm == np.arange(1, self.degree + 1)))


def prior_counts(letters: np.ndarray) -> np.ndarray:
    """H(w,i) for every i: occurrences of letter w(i) among w(1..i-1)."""
    letters = np.asarray(letters)
    r = letters.size
    _, codes = np.unique(letters, return_inverse=True)
    order = np.argsort(codes, kind="stable")
    sorted_codes = codes[order]
    ranks = np.arange(r, dtype=np.int64)
    starts = np.ones(r, dtype=bool)
    starts[1:] = sorted_codes[1:] != sorted_codes[:-1]
    group_start = np.maximum.accumulate(np.where(starts, ranks, 0))
    h = np.empty(r, dtype=np.int64)
    h[order] = ranks - group_start
    return h


def h_count(letters, i: int) -> int:
    """H(w,i) for a single position (1-based i)."""
    letters = np.asarray(letters)
    if not 1 <= i <= letters.size:
        raise ValueError(f"position {i} outside 1..{letters.size}")
    return int(np.count_nonzero(letters[: i - 1] == letters[i - 1]))


def canonical_coupling_of_letters(letters, m: int) -> Coupling:
    """Canonical coupling of a letter sequence over an alphabet of size m."""
    letters = np.asarray(letters, dtype=np.int64)
    r = letters.size
    if r == 0:
        raise ValueError("empty word")
    if m < 2:
        raise ValueError(f"alphabet size must be >= 2, got {m}")
    if letters.min() < 1 or letters.max() > m:
        raise ValueError(f"letters must lie in 1..{m}")
    if m * (r + 1) >= 2**62:
        raise ValueError(
            f"alphabet {m} with degree {r} overflows the coupling arithmetic width"
        )
    targets = letters + prior_counts(letters) * m
    valid = targets <= r
    perm = np.zeros(r, dtype=np.int64)
    perm[valid] = targets[valid]
    used = np.zeros(r + 1, dtype=bool)
    used[targets[valid]] = True
    perm[~valid] = np.flatnonzero(~used[1:]) + 1
    return Coupling(perm)


def canonical_coupling(w: Word, block_len: int = 1) -> Coupling:
    """Canonical coupling of w seen as blocks of block_len letters."""
    if block_len == 1:
        return canonical_coupling_of_letters(w.letters, w.alphabet)
    m = check_encoding_width(w.alphabet, block_len)
    return canonical_coupling_of_letters(encode_blocks(w, block_len), m)


def match_predicate(letters, i: int, m: int) -> tuple[bool, bool]:
    """(c(phi_w(i)) == w(i), w(i) + H(w,i)*m <= r) for 1-based position i.

    The first component is read off the constructed coupling, the second
    is the arithmetic criterion; tests assert they always agree.
    """
    letters = np.asarray(letters, dtype=np.int64)
    r = letters.size
    if not 1 <= i <= r:
        raise ValueError(f"position {i} outside 1..{r}")
    phi = canonical_coupling_of_letters(letters, m)
    target = phi(i)
    canonical_letter = (target - 1) % m + 1
    constructed = bool(canonical_letter == letters[i - 1])
    criterion = bool(letters[i - 1] + h_count(letters, i) * m <= r)
    return constructed, criterion


def partial_canonical_coupling(w: Word, ell: int, lam: int) -> Coupling:
    """Coupling of rate lam/ell: canonical coupling of the lam-prefix extraction.

    The extracted word is viewed over the alphabet of size N^lam; the
    resulting permutation has degree len(w)/ell and is applied to the full
    length-ell blocks of w.
    """
    m = check_encoding_width(w.alphabet, lam)
    extracted = tilde_extract(w, ell, lam)
    return canonical_coupling_of_letters(encode_blocks(extracted, lam), m)


# A coupling rule picks, for each time, a permutation from the previous word.
CouplingRule = Callable[[Word], Coupling]


def identity_rule(r: int) -> CouplingRule:
    perm = Coupling(np.arange(1, r + 1))
    return lambda word: perm


def full_block_rule(block_len: int) -> CouplingRule:
    """Canonical coupling of the previous word over its block alphabet."""
    return lambda word: canonical_coupling(word, block_len)


def partial_rule(ell: int, lam: int) -> CouplingRule:
    return lambda word: partial_canonical_coupling(word, ell, lam)


def change_innovations(path, rules: Mapping[int, CouplingRule]) -> dict[int, int]:
    """New innovations v'_n = rule(n)(X_{n-1})(v_n) for every window time.

    Times without a rule keep their innovation unchanged.
    """
    out: dict[int, int] = {}
    for n, v in path.V.items():
        rule = rules.get(n)
        if rule is None:
            out[n] = v
            continue
        phi = rule(path.X[n - 1])
        if phi.degree != path.schedule.ratio(n):
            raise ValueError(
                f"rule at time {n} has degree {phi.degree}, "
                f"expected {path.schedule.ratio(n)}"
            )
        out[n] = phi(v)
    return out


def recover_innovations(path, rules: Mapping[int, CouplingRule],
                        vprime: Mapping[int, int]) -> dict[int, int]:
    """Inverse transform: v_n = rule(n)(X_{n-1})^{-1}(v'_n)."""
    out: dict[int, int] = {}
    for n, v in vprime.items():
        rule = rules.get(n)
        if rule is None:
            out[n] = v
            continue
        phi = rule(path.X[n - 1])
        if phi.degree != path.schedule.ratio(n):
            raise ValueError(
                f"rule at time {n} has degree {phi.degree}, "
                f"expected {path.schedule.ratio(n)}"
            )
        out[n] = phi.inverse(v)
    return out
