"""Split-word path simulation on finite windows.

Randomness is counter-based: every draw comes from a Philox generator
keyed by (master seed, path id, role, |time|), so replicas are
bit-reproducible and parallelizable without shared state.  The law is
simulated by drawing the earliest (longest) word uniformly and folding
forward, which is exactly the process law restricted to the window.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .schedule import Schedule
from .words import Word, check_encoding_width, subword

DEFAULT_MAX_LETTERS = 1 << 22

ROLE_WORD = 0
ROLE_INNOVATION = 1


class MemoryCapError(ValueError):
    def __init__(self, ell_m: int, cap: int):
        self.ell_m = ell_m
        self.cap = cap
        size = str(ell_m) if ell_m.bit_length() <= 64 else f"~2^{ell_m.bit_length() - 1}"
        super().__init__(f"earliest word needs {size} letters, above the cap of {cap}")


class ComputeCapError(ValueError):
    def __init__(self, estimate: int, cap: int, context: str):
        self.estimate = estimate
        self.cap = cap
        super().__init__(f"{context}: estimated cost {estimate} exceeds cap {cap}")


def stream(seed: int, path_id: int, role: int, step: int = 0) -> np.random.Generator:
    """Philox generator for one (path, role, time) slot of a master seed."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & (2**64 - 1), spawn_key=(path_id, role, step)
    )
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Path:
    """One realization over the window: words X_n and innovations V_n."""

    schedule: Schedule
    X: dict[int, Word]
    V: dict[int, int]
    seed: int

    def check_splitting(self) -> None:
        s = self.schedule
        for n in s.ratio_times():
            expected = subword(self.X[n - 1], s.ell(n), self.V[n])
            if self.X[n] != expected:
                raise AssertionError(f"splitting identity fails at time {n}")


class PairMode(enum.Enum):
    INDEPENDENT_PRODUCT = "independent"
    MIRROR = "mirror"
    GREEDY_MATCH = "greedy"


def _effective_alphabet(s: Schedule) -> int:
    if s.block_len == 1:
        return s.alphabet
    return check_encoding_width(s.alphabet, s.block_len)


def _draw_word(rng: np.random.Generator, length: int, n_letters: int) -> Word:
    dtype = np.uint8 if n_letters <= 255 else np.int64
    letters = rng.integers(1, n_letters + 1, size=length, dtype=dtype)
    letters.flags.writeable = False
    return Word(letters, n_letters)


def simulate_path(
    s: Schedule,
    seed: int,
    path_id: int = 0,
    max_letters: int = DEFAULT_MAX_LETTERS,
) -> Path:
    """Draw one path: X_m uniform, V_n uniform, X_n the V_n-th block."""
    ell_m = s.ell(s.m)
    if ell_m > max_letters:
        raise MemoryCapError(ell_m, max_letters)
    n_letters = _effective_alphabet(s)
    x: dict[int, Word] = {}
    v: dict[int, int] = {}
    x[s.m] = _draw_word(stream(seed, path_id, ROLE_WORD, -s.m), ell_m, n_letters)
    for n in s.ratio_times():
        r = s.ratio(n)
        v[n] = int(stream(seed, path_id, ROLE_INNOVATION, -n).integers(1, r + 1))
        x[n] = subword(x[n - 1], s.ell(n), v[n])
    return Path(s, x, v, seed)


def simulate_pair(
    s: Schedule,
    mode: PairMode,
    n_split: int,
    seed: int,
    greedy_depth: int = 2,
    greedy_cost_cap: int = 1 << 22,
    identical_start: bool = False,
    max_letters: int = DEFAULT_MAX_LETTERS,
) -> tuple[Path, Path]:
    """Two co-immersed copies, independent up to and including time n_split.

    After n_split the second path's innovation is tied to the first one
    according to the mode: drawn independently, mirrored, or mapped through
    the assignment that best aligns the current blocks of the two previous
    words (cost: the orbit semi-metric evaluated to greedy_depth levels).
    Every mode keeps the conditional law of each innovation uniform, since
    the tie is a permutation measurable in the joint past.
    """
    if not s.m <= n_split <= 0:
        raise ValueError(f"split time {n_split} outside window {s.m}..0")
    ell_m = s.ell(s.m)
    if ell_m > max_letters:
        raise MemoryCapError(ell_m, max_letters)
    n_letters = _effective_alphabet(s)

    xa: dict[int, Word] = {}
    xb: dict[int, Word] = {}
    va: dict[int, int] = {}
    vb: dict[int, int] = {}
    xa[s.m] = _draw_word(stream(seed, 0, ROLE_WORD, -s.m), ell_m, n_letters)
    if identical_start:
        xb[s.m] = xa[s.m]
    else:
        xb[s.m] = _draw_word(stream(seed, 1, ROLE_WORD, -s.m), ell_m, n_letters)

    for n in s.ratio_times():
        r = s.ratio(n)
        va[n] = int(stream(seed, 0, ROLE_INNOVATION, -n).integers(1, r + 1))
        if n <= n_split:
            vb[n] = int(stream(seed, 1, ROLE_INNOVATION, -n).integers(1, r + 1))
        elif mode is PairMode.INDEPENDENT_PRODUCT:
            vb[n] = int(stream(seed, 1, ROLE_INNOVATION, -n).integers(1, r + 1))
        elif mode is PairMode.MIRROR:
            vb[n] = va[n]
        elif mode is PairMode.GREEDY_MATCH:
            sigma = _greedy_assignment(
                s, n, xa[n - 1], xb[n - 1], greedy_depth, greedy_cost_cap
            )
            vb[n] = sigma[va[n] - 1] + 1
        else:
            raise ValueError(f"unknown mode {mode!r}")
        xa[n] = subword(xa[n - 1], s.ell(n), va[n])
        xb[n] = subword(xb[n - 1], s.ell(n), vb[n])

    return Path(s, xa, va, seed), Path(s, xb, vb, seed)


def _greedy_assignment(
    s: Schedule,
    n: int,
    prev_a: Word,
    prev_b: Word,
    depth: int,
    cost_cap: int,
) -> list[int]:
    from .metric import assignment_min, e_exact, estimate_e_cost

    r = s.ratio(n)
    base = min(n + depth, 0)
    per_pair = estimate_e_cost(s, n, base)
    if r * r * per_pair > cost_cap:
        raise ComputeCapError(
            r * r * per_pair, cost_cap, f"greedy matching at time {n}"
        )
    ell = s.ell(n)
    cost = [
        [
            e_exact(s, n, base, subword(prev_a, ell, i + 1),
                    subword(prev_b, ell, j + 1)).value
            for j in range(r)
        ]
        for i in range(r)
    ]
    sigma, _ = assignment_min(cost)
    return sigma
