"""Adapted tree automorphisms and the exact orbit semi-metric.

The semi-metric between two words of length ell_n is the smallest
proportion of differing letters over the orbit of one word under the
block automorphisms adapted to the schedule levels n..n0.  It satisfies
a recursion: the value one level down is the minimum-cost assignment of
child blocks, averaged over the ratio.  Everything here is exact: block
distances are integers (the value times ell), assignments are solved in
integer arithmetic, and the public value is a rational with denominator
ell_n.  A brute-force enumeration of the automorphism group doubles as
an oracle for the recursion wherever the group is small enough.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import mpmath
import numpy as np

from .bigmath import DEFAULT_PRECISION_BITS, log_factorial
from .schedule import Schedule, ScheduleError
from .words import Word, hamming

DEFAULT_ENUM_CAP = 10**5
DEFAULT_E_COST_CAP = 1 << 24


class EnumerationCapError(ValueError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"automorphism count {count} exceeds cap {cap}")


class MetricCostCapError(ValueError):
    def __init__(self, estimate: int, cap: int):
        self.estimate = estimate
        self.cap = cap
        super().__init__(
            f"pairwise-table cost estimate {estimate} exceeds cap {cap}"
        )


# --------------------------------------------------------------------------
# Automorphism groups
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AutNode:
    """One adapted automorphism: a permutation of the top blocks plus one
    automorphism per block; leaves move base blocks intact."""

    length: int
    sigma: Optional[tuple[int, ...]]  # 0-based; None marks a leaf
    children: tuple["AutNode", ...] = ()


@dataclass(frozen=True)
class AutCount:
    count: int
    s_value: mpmath.mpf  # ln(count)/ell_n
    terms: dict[int, mpmath.mpf]  # k -> ln(r_k!)/ell_{k-1}


def _check_levels(s: Schedule, n: int, n0: int) -> None:
    if not (s.m <= n <= n0 <= 0):
        raise ScheduleError(
            f"levels must satisfy {s.m} <= n <= n0 <= 0, got n={n}, n0={n0}"
        )


def aut_count(
    s: Schedule, n: int, n0: int, precision_bits: int = DEFAULT_PRECISION_BITS
) -> AutCount:
    """Exact group cardinality prod (r_k!)^{ell_n/ell_{k-1}} and its log form."""
    _check_levels(s, n, n0)
    count = 1
    terms: dict[int, mpmath.mpf] = {}
    with mpmath.workprec(precision_bits):
        total = mpmath.mpf(0)
        for k in range(n + 1, n0 + 1):
            exponent = s.ell(n) // s.ell(k - 1)
            count *= math.factorial(s.ratio(k)) ** exponent
            terms[k] = log_factorial(s.ratio(k), precision_bits) / mpmath.mpf(
                s.ell(k - 1)
            )
            total += terms[k]
    return AutCount(count, total, terms)


def enumerate_aut(
    s: Schedule, n: int, n0: int, cap: int = DEFAULT_ENUM_CAP
) -> list[AutNode]:
    """All adapted automorphisms for levels n..n0, duplicate-free."""
    _check_levels(s, n, n0)
    total = aut_count(s, n, n0).count
    if total > cap:
        raise EnumerationCapError(total, cap)

    def build(level: int) -> list[AutNode]:
        if level == n0:
            return [AutNode(s.ell(n0), None)]
        r = s.ratio(level + 1)
        inner = build(level + 1)
        out = []
        for sigma in itertools.permutations(range(r)):
            for kids in itertools.product(inner, repeat=r):
                out.append(AutNode(s.ell(level), sigma, kids))
        return out

    return build(n)


def apply_aut(a: AutNode, x: Word) -> Word:
    """The action a.x = x o a^{-1}: block j moves to slot sigma(j), with the
    j-th child acting inside it."""
    if len(x) != a.length:
        raise ValueError(f"automorphism acts on length {a.length}, word has {len(x)}")
    if a.sigma is None:
        return x
    r = len(a.sigma)
    ell = a.length // r
    out = np.empty(a.length, dtype=x.letters.dtype)
    for j, (slot, child) in enumerate(zip(a.sigma, a.children)):
        out[slot * ell : (slot + 1) * ell] = apply_aut(
            child, Word(x.letters[j * ell : (j + 1) * ell], x.alphabet)
        ).letters
    out.flags.writeable = False
    return Word(out, x.alphabet)


def compose_aut(a: AutNode, b: AutNode) -> AutNode:
    """The automorphism acting as x -> a.(b.x)."""
    if a.length != b.length:
        raise ValueError("shapes differ")
    if a.sigma is None:
        return b
    if b.sigma is None:
        return a
    sigma = tuple(a.sigma[b.sigma[j]] for j in range(len(b.sigma)))
    children = tuple(
        compose_aut(a.children[b.sigma[j]], b.children[j])
        for j in range(len(b.sigma))
    )
    return AutNode(a.length, sigma, children)


# --------------------------------------------------------------------------
# Exact minimum-cost assignment
# --------------------------------------------------------------------------

def _hungarian(cost: list[list[int]]) -> list[int]:
    """Minimum-cost perfect matching on a square integer matrix.

    Shortest-augmenting-path form with potentials; exact because all
    arithmetic stays in (big) integers.  Returns assign with assign[i] = j.
    """
    n = len(cost)
    inf = 1 + (1 + max(max(row) for row in cost)) * (n + 2) ** 2
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    match = [0] * (n + 1)  # match[j] = row assigned to column j (1-based)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = -1
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    assign = [0] * n
    for j in range(1, n + 1):
        assign[match[j] - 1] = j - 1
    return assign


def assignment_min(cost: Sequence[Sequence]) -> tuple[list[int], Fraction]:
    """Assignment minimizing the total cost; exact rational arithmetic.

    Ties are broken toward the lexicographically smallest assignment by
    folding a secondary objective into the integer costs, so the result is
    a pure function of the matrix.  Returns (assign, total) with
    assign[i] = j, 0-based.
    """
    r = len(cost)
    if r == 0 or any(len(row) != r for row in cost):
        raise ValueError("cost matrix must be square and nonempty")
    rows = [[Fraction(c) for c in row] for row in cost]
    if any(c < 0 for row in rows for c in row):
        raise ValueError("cost entries must be nonnegative")
    scale = 1
    for row in rows:
        for c in row:
            scale = scale * c.denominator // math.gcd(scale, c.denominator)
    base = r + 1
    fold = base**r  # strictly above any total of the secondary objective
    combined = [
        [
            int(rows[i][j] * scale) * fold + (j + 1) * base ** (r - 1 - i)
            for j in range(r)
        ]
        for i in range(r)
    ]
    assign = _hungarian(combined)
    total = sum(rows[i][assign[i]] for i in range(r))
    return assign, total


# --------------------------------------------------------------------------
# The semi-metric, exact
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SemiMetricValue:
    """Exact rational value: numerator / ell_n with 0 <= value <= 1."""

    numerator: int
    denominator: int

    def __post_init__(self):
        if not 0 <= self.numerator <= self.denominator:
            raise ValueError(f"{self.numerator}/{self.denominator} outside [0, 1]")

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __float__(self) -> float:
        return self.numerator / self.denominator


def estimate_e_cost(s: Schedule, n: int, n0: int) -> int:
    """Cells across all pairwise tables of the recursion, the dominant cost."""
    _check_levels(s, n, n0)
    total = 0
    for k in range(n, n0 + 1):
        blocks = s.ell(n) // s.ell(k)
        total += blocks * blocks
    return total


def e_exact(
    s: Schedule,
    n: int,
    n0: int,
    x: Word,
    y: Word,
    cost_cap: int = DEFAULT_E_COST_CAP,
) -> SemiMetricValue:
    """Orbit semi-metric by the assignment recursion, bottom-up and exact.

    Level-k tables hold the integer values ell_k * e_k for every pair of
    k-level blocks of (x, y); each step up solves one exact assignment per
    parent pair and tables are dropped level by level.
    """
    _check_levels(s, n, n0)
    if len(x) != s.ell(n) or len(y) != s.ell(n):
        raise ValueError(f"words must have length ell_{n} = {s.ell(n)}")
    estimate = estimate_e_cost(s, n, n0)
    if estimate > cost_cap:
        raise MetricCostCapError(estimate, cost_cap)

    ell0 = s.ell(n0)
    blocks = s.ell(n) // ell0
    xa = x.letters.reshape(blocks, ell0)
    ya = y.letters.reshape(blocks, ell0)
    # base table: plain Hamming distances between base blocks
    table = [
        [int(np.count_nonzero(xa[i] != ya[j])) for j in range(blocks)]
        for i in range(blocks)
    ]
    for k in range(n0, n, -1):
        r = s.ratio(k)
        parents = len(table) // r
        nxt = []
        for i in range(parents):
            row = []
            for j in range(parents):
                sub = [
                    [table[i * r + a][j * r + b] for b in range(r)]
                    for a in range(r)
                ]
                row.append(_assignment_value(sub))
            nxt.append(row)
        table = nxt
    return SemiMetricValue(table[0][0], s.ell(n))


def _assignment_value(sub: list[list[int]]) -> int:
    r = len(sub)
    if r == 2:
        return min(sub[0][0] + sub[1][1], sub[0][1] + sub[1][0])
    assign = _hungarian(sub)
    return sum(sub[i][assign[i]] for i in range(r))


def e_exact_batch_ratio2(
    s: Schedule, n: int, n0: int, x_letters: np.ndarray, y_letters: np.ndarray
) -> np.ndarray:
    """Vectorized recursion for all-ratio-2 levels: same exact integers as
    e_exact, evaluated for a whole batch of word pairs at once.

    x_letters, y_letters: arrays of shape (batch, ell_n).  Returns the
    integer numerators (value times ell_n) per pair.
    """
    _check_levels(s, n, n0)
    for k in range(n + 1, n0 + 1):
        if s.ratio(k) != 2:
            raise ScheduleError("batched recursion requires every ratio to be 2")
    ell0 = s.ell(n0)
    batch = x_letters.shape[0]
    blocks = s.ell(n) // ell0
    xa = x_letters.reshape(batch, blocks, 1, ell0)
    ya = y_letters.reshape(batch, 1, blocks, ell0)
    table = (xa != ya).sum(axis=3, dtype=np.int64)
    while table.shape[1] > 1:
        a = table[:, 0::2, 0::2]
        b = table[:, 0::2, 1::2]
        c = table[:, 1::2, 0::2]
        d = table[:, 1::2, 1::2]
        table = np.minimum(a + d, b + c)
    return table[:, 0, 0]


def e_bruteforce(
    s: Schedule,
    n: int,
    n0: int,
    x: Word,
    y: Word,
    cap: int = DEFAULT_ENUM_CAP,
) -> SemiMetricValue:
    """Direct minimum of the Hamming distance over the enumerated orbit."""
    best = None
    for a in enumerate_aut(s, n, n0, cap):
        d = hamming(apply_aut(a, x), y)
        if best is None or d < best:
            best = d
            if best == 0:
                break
    return SemiMetricValue(int(best), s.ell(n))


# --------------------------------------------------------------------------
# Tail bound machinery
# --------------------------------------------------------------------------

def tail_bound(n_letters: int, alpha: float, ell: int, s_value) -> tuple[float, float]:
    """Probability bound exp(ell*(S - 2*alpha^2)) for the event that the
    semi-metric of an independent pair falls below 1 - 1/N - alpha; returns
    (bound, threshold)."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    bound = float(mpmath.exp(ell * (mpmath.mpf(s_value) - 2 * mpmath.mpf(alpha) ** 2)))
    threshold = 1.0 - 1.0 / n_letters - alpha
    return bound, threshold


@dataclass(frozen=True)
class BaseLevelChoice:
    """Latest level n0 whose in-window mass keeps the tail bound nontrivial."""

    n0: int
    s_value: float
    threshold_mass: float  # 2 (1 - 1/N)^2
    alpha_lo: float
    alpha_hi: float
    alpha_mid: float
    beta: float


def choose_n0(
    s: Schedule, precision_bits: int = DEFAULT_PRECISION_BITS
) -> BaseLevelChoice:
    """Pick the largest n0 with sum_{k<=n0} ln(r_k!)/ell_{k-1} < 2(1-1/N)^2.

    The sum runs over the window's ratio times up to n0 (the in-window part
    of the full mass); alpha may then range over (sqrt(S/2), 1-1/N) and the
    midpoint is reported together with beta = exp(ell_{n0} (S - 2 alpha^2)).
    """
    with mpmath.workprec(precision_bits):
        threshold = 2 * (1 - mpmath.mpf(1) / s.alphabet) ** 2
        # n0 = m would leave no level below it to evolve pairs through
        for n0 in range(0, s.m, -1):
            total = mpmath.mpf(0)
            for k in range(s.m + 1, n0 + 1):
                total += log_factorial(s.ratio(k), precision_bits) / mpmath.mpf(
                    s.ell(k - 1)
                )
            if total < threshold:
                alpha_lo = mpmath.sqrt(total / 2)
                alpha_hi = 1 - mpmath.mpf(1) / s.alphabet
                alpha_mid = (alpha_lo + alpha_hi) / 2
                beta = mpmath.exp(s.ell(n0) * (total - 2 * alpha_mid**2))
                return BaseLevelChoice(
                    n0,
                    float(total),
                    float(threshold),
                    float(alpha_lo),
                    float(alpha_hi),
                    float(alpha_mid),
                    float(beta),
                )
    raise ScheduleError(
        "no level qualifies: the window's factorial-series mass stays above "
        f"the threshold {float(threshold)}"
    )
