"""Length/ratio schedules and the divergence-condition machinery.

A schedule fixes a finite window of times m..0 (m <= 0), an alphabet
size N >= 2, the word lengths ell_n with ell_0 = 1, and the integer
ratios r_n = ell_{n-1}/ell_n >= 2.  Lengths are exact big integers; the
deep levels of the doubly-exponential families overflow any float.

Convergence of the series sum ln(r_n)/ell_n is undecidable from a finite
window, so classification verdicts are issued only through symbolic
family rules; explicit ratio lists always report Inconclusive together
with the numeric tail sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import mpmath

from .bigmath import DEFAULT_PRECISION_BITS, log_factorial, log_of_int

# Lengths with more bits than this are rejected at build time: one more
# tower level would not even be representable as an integer in memory.
MAX_LENGTH_BITS = 1 << 25


class ScheduleError(ValueError):
    pass


# --------------------------------------------------------------------------
# Specs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstRatio:
    """r_n = r at every level."""

    r: int


@dataclass(frozen=True)
class Tower2:
    """ell_{n-1} = 2^{ell_n}: iterated powers of two."""


@dataclass(frozen=True)
class Ex2:
    """ell_{n-1} = 4^{sqrt(ell_n)}: summable terms, but sparse extractions
    of this family have divergent terms."""


@dataclass(frozen=True)
class ExplicitRatios:
    """Ratios listed in time order, earliest first: (r_{m+1}, ..., r_0)."""

    ratios: tuple[int, ...]

    def __init__(self, ratios: Sequence[int]):
        object.__setattr__(self, "ratios", tuple(int(r) for r in ratios))


@dataclass(frozen=True)
class Extracted:
    """Subsequence of a base spec's window, keeping the listed times."""

    base: "ScheduleSpec"
    keep: tuple[int, ...]

    def __init__(self, base: "ScheduleSpec", keep: Sequence[int]):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "keep", tuple(sorted(int(k) for k in keep)))


Family = Union[ConstRatio, Tower2, Ex2, ExplicitRatios, Extracted]


@dataclass(frozen=True)
class ScheduleSpec:
    family: Family
    depth: int
    alphabet: int = 2

    def __post_init__(self):
        if self.depth < 1:
            raise ScheduleError(f"depth must be >= 1, got {self.depth}")
        if self.alphabet < 2:
            raise ScheduleError(f"alphabet size must be >= 2, got {self.alphabet}")


# --------------------------------------------------------------------------
# Schedules
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """Window m..0 with exact lengths and ratios.

    block_len > 1 marks an extracted schedule whose letters are really
    blocks of block_len base letters; the effective alphabet size is
    alphabet**block_len and is never materialized.
    """

    m: int
    alphabet: int
    lengths: dict[int, int]
    ratios: dict[int, int]
    block_len: int = 1
    spec: Optional[ScheduleSpec] = None

    def __post_init__(self):
        if self.m > 0:
            raise ScheduleError(f"earliest time must be <= 0, got {self.m}")
        if self.lengths.get(0) != 1:
            raise ScheduleError("window must end at time 0 with ell_0 = 1")
        for n in range(self.m + 1, 1):
            r = self.ratios.get(n)
            if r is None or r < 2:
                raise ScheduleError(f"ratio at time {n} missing or < 2")
            if self.lengths[n - 1] != r * self.lengths[n]:
                raise ScheduleError(
                    f"length identity violated at time {n}: "
                    f"ell_{n-1} != r_{n} * ell_{n}"
                )

    @property
    def depth(self) -> int:
        return -self.m

    def times(self) -> range:
        return range(self.m, 1)

    def ratio_times(self) -> range:
        return range(self.m + 1, 1)

    def ell(self, n: int) -> int:
        if n not in self.lengths:
            raise ScheduleError(f"time {n} outside window {self.m}..0")
        return self.lengths[n]

    def ratio(self, n: int) -> int:
        if n not in self.ratios:
            raise ScheduleError(f"no ratio at time {n} (window {self.m}..0)")
        return self.ratios[n]


def build_schedule(spec: ScheduleSpec) -> Schedule:
    """Instantiate a spec over the window -depth..0, lengths exact."""
    fam = spec.family
    if isinstance(fam, Extracted):
        base = build_schedule(spec.family.base)
        return extract_schedule(base, fam.keep)

    depth, n_letters = spec.depth, spec.alphabet
    lengths = {0: 1}
    ratios: dict[int, int] = {}
    for step in range(depth):
        n = -step  # ratio time being defined
        ell_n = lengths[n]
        if isinstance(fam, ConstRatio):
            if fam.r < 2:
                raise ScheduleError(f"ratio must be >= 2, got {fam.r}")
            ell_prev = fam.r * ell_n
        elif isinstance(fam, Tower2):
            if ell_n > MAX_LENGTH_BITS:
                raise ScheduleError(
                    f"tower level at time {n - 1} exceeds {MAX_LENGTH_BITS} bits"
                )
            ell_prev = 1 << ell_n
        elif isinstance(fam, Ex2):
            root = math.isqrt(ell_n)
            if root * root != ell_n:
                raise ScheduleError(
                    f"length {ell_n} at time {n} is not a perfect square"
                )
            if 2 * root > MAX_LENGTH_BITS:
                raise ScheduleError(
                    f"level at time {n - 1} exceeds {MAX_LENGTH_BITS} bits"
                )
            ell_prev = 4**root
        elif isinstance(fam, ExplicitRatios):
            if len(fam.ratios) != depth:
                raise ScheduleError(
                    f"{len(fam.ratios)} ratios listed for depth {depth}"
                )
            r = fam.ratios[depth - 1 - step]  # list is earliest-first
            if r < 2:
                raise ScheduleError(f"explicit ratio {r} at time {n} is < 2")
            ell_prev = r * ell_n
        else:
            raise ScheduleError(f"unknown family {fam!r}")
        if ell_prev % ell_n != 0:
            raise ScheduleError(f"non-integer ratio at time {n}")
        ratios[n] = ell_prev // ell_n
        lengths[n - 1] = ell_prev
    return Schedule(-depth, n_letters, lengths, ratios, spec=spec)


def extract_schedule(s: Schedule, keep: Sequence[int]) -> Schedule:
    """Schedule of the subsequence at the kept times.

    New lengths are ell_n/ell_{m'} with m' = max(keep); each kept letter
    is a block of ell_{m'} old letters, recorded in block_len.
    """
    kept = sorted(set(int(k) for k in keep))
    if not kept:
        raise ScheduleError("keep set is empty")
    for k in kept:
        if k not in s.lengths:
            raise ScheduleError(f"kept time {k} outside window {s.m}..0")
    m_new = kept[-1]
    unit = s.ell(m_new)
    lengths = {}
    ratios = {}
    for i, k in enumerate(kept):
        n = i - (len(kept) - 1)  # reindexed time, latest kept -> 0
        lengths[n] = s.ell(k) // unit
        if i > 0:
            ratios[n] = lengths[n - 1] // lengths[n]
    spec = None
    if s.spec is not None:
        base_keep = kept
        base_spec = s.spec
        if isinstance(base_spec.family, Extracted):
            # compose keep sets so specs never nest extractions
            outer = base_spec.family.keep
            base_keep = [outer[len(outer) - 1 + k] for k in kept]
            base_spec = base_spec.family.base
        spec = ScheduleSpec(
            Extracted(base_spec, base_keep), max(1, len(kept) - 1), s.alphabet
        )
    return Schedule(
        -(len(kept) - 1),
        s.alphabet,
        lengths,
        ratios,
        block_len=s.block_len * unit,
        spec=spec,
    )


# --------------------------------------------------------------------------
# Condition report
# --------------------------------------------------------------------------

VERDICT_DELTA = "Delta"
VERDICT_NOT_DELTA = "NotDelta"
VERDICT_INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ConditionReport:
    """Numeric divergence data plus a symbolic verdict when a rule applies.

    terms:            n -> ln(r_n)/ell_n
    tail_sums:        n -> sum of terms from n to 0 (nonincreasing in n)
    factorial_terms:  n -> ln(r_n!)/ell_{n-1} (the equivalent series form)
    """

    terms: dict[int, mpmath.mpf]
    tail_sums: dict[int, mpmath.mpf]
    factorial_terms: dict[int, mpmath.mpf]
    verdict: str
    verdict_basis: str
    precision_bits: int
    underflow_flags: tuple[int, ...] = ()


def _root_family(spec: ScheduleSpec):
    """(root family, gap list) after resolving nested extractions."""
    fam = spec.family
    if not isinstance(fam, Extracted):
        return fam, None
    keep = fam.keep
    gaps = [keep[i + 1] - keep[i] for i in range(len(keep) - 1)]
    inner = fam.base
    while isinstance(inner.family, Extracted):
        inner = inner.family.base  # keep sets were composed at build time
    return inner.family, gaps


def _symbolic_verdict(spec: Optional[ScheduleSpec]) -> tuple[str, str]:
    if spec is None:
        return VERDICT_INCONCLUSIVE, "no family information"
    fam, gaps = _root_family(spec)
    if gaps is None:
        if isinstance(fam, ConstRatio):
            return VERDICT_DELTA, (
                "constant ratio: terms ln(r)/r^|n| form a geometric series"
            )
        if isinstance(fam, Tower2):
            return VERDICT_NOT_DELTA, (
                "iterated powers of two: log2(r_n)/ell_n = "
                "(ell_n - ell_{n+1})/ell_n tends to 1"
            )
        if isinstance(fam, Ex2):
            return VERDICT_DELTA, (
                "log2(r_n)/ell_n <= 2/sqrt(ell_n), a summable bound"
            )
        return VERDICT_INCONCLUSIVE, "explicit ratios carry no symbolic rule"
    # extracted schedule: classify from the root family and the gap pattern
    if isinstance(fam, ConstRatio):
        return VERDICT_DELTA, (
            "extraction of a constant-ratio schedule: grouped terms stay "
            "dominated by a geometric series for every gap pattern"
        )
    if isinstance(fam, Tower2):
        return VERDICT_NOT_DELTA, (
            "extraction of the iterated-power family: grouped terms stay "
            "bounded away from zero"
        )
    if isinstance(fam, Ex2):
        if not gaps:
            return VERDICT_INCONCLUSIVE, "single kept time"
        if max(gaps) == 1:
            return VERDICT_DELTA, (
                "gap-free extraction keeps the summable-bound rule of the base"
            )
        if gaps[0] >= 2:
            return VERDICT_NOT_DELTA, (
                "gaps >= 2 persisting at the deep end of the window: grouped "
                "terms contain a subsequence growing to infinity"
            )
        return VERDICT_INCONCLUSIVE, (
            "gaps >= 2 die out toward the deep end; the finite window does "
            "not support a verdict"
        )
    return VERDICT_INCONCLUSIVE, "extraction of an explicit-ratio schedule"


def condition_report(
    s: Schedule, precision_bits: int = DEFAULT_PRECISION_BITS
) -> ConditionReport:
    """Tabulate both series forms and classify when a symbolic rule fires."""
    terms: dict[int, mpmath.mpf] = {}
    factorial_terms: dict[int, mpmath.mpf] = {}
    underflow = []
    with mpmath.workprec(precision_bits):
        for n in s.ratio_times():
            r = s.ratio(n)
            terms[n] = log_of_int(r, precision_bits) / mpmath.mpf(s.ell(n))
            factorial_terms[n] = log_factorial(r, precision_bits) / mpmath.mpf(
                s.ell(n - 1)
            )
            if terms[n] == 0 or factorial_terms[n] == 0:
                underflow.append(n)
        tail_sums: dict[int, mpmath.mpf] = {}
        running = mpmath.mpf(0)
        for n in range(0, s.m, -1):
            running += terms[n]
            tail_sums[n] = running
    verdict, basis = _symbolic_verdict(s.spec)
    return ConditionReport(
        terms,
        tail_sums,
        factorial_terms,
        verdict,
        basis,
        precision_bits,
        tuple(underflow),
    )


# --------------------------------------------------------------------------
# Selection plans (constructive rewording of the divergence condition)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionPlan:
    """Strictly increasing selected times with exact rational rates.

    alphas[i] pairs with times[i]; for every i with a later selected time,
    alphas[i] * ell(times[i]) / ell(times[i+1]) is an exact integer, and
    for the last selected time alphas[-1] * ell(times[-1]) is an integer.
    betas holds the rate material beta_n = log_N(r_n)/(4*ell_n) for every
    window time, rounded down to a fraction so selections stay conservative.
    """

    times: tuple[int, ...]
    alphas: tuple[Fraction, ...]
    betas: dict[int, Fraction]
    even_mass: Fraction
    odd_mass: Fraction
    strict_indices: tuple[int, ...]
    rounding_violations: tuple[int, ...]
    diagnostic: str = ""

    def is_empty(self) -> bool:
        return not self.times


def _beta_fraction(s: Schedule, n: int, precision_bits: int) -> Fraction:
    """log_N(r_n) / (4 ell_n) rounded down to a 64-bit-denominator fraction."""
    with mpmath.workprec(precision_bits):
        value = log_of_int(s.ratio(n), precision_bits) / (
            log_of_int(s.alphabet, precision_bits) * 4 * mpmath.mpf(s.ell(n))
        )
        scaled = int(mpmath.floor(value * mpmath.mpf(2**64)))
    return Fraction(scaled, 2**64)


def build_selection_plan(
    s: Schedule, precision_bits: int = DEFAULT_PRECISION_BITS
) -> SelectionPlan:
    """Deterministic greedy selection with exact integrality rounding.

    Indices with beta_n >= |n|/2^|n| are preferred (they carry the deep-end
    mass the construction needs); when fewer than two such indices exist
    in-window the filter is waived and every positive-beta index is taken.
    Rates are alpha = min(beta, 1) rounded down so that alpha * ell(t) is a
    multiple of the next selected length; indices whose rounded rate hits
    zero are dropped.  The 8/9 rounding guarantee is checked wherever the
    ratio bound rho >= 8 holds and violations are reported, not hidden.
    """
    betas = {n: _beta_fraction(s, n, precision_bits) for n in s.ratio_times()}
    strict = [n for n in s.ratio_times() if betas[n] >= Fraction(-n, 2**(-n))]
    candidates = sorted(strict)
    waived = False
    if len(candidates) < 2:
        candidates = sorted(n for n in s.ratio_times() if betas[n] > 0)
        waived = True
    if not candidates:
        return SelectionPlan(
            (), (), betas, Fraction(0), Fraction(0), tuple(strict), (),
            "no selectable index: every rate is zero at this precision",
        )

    times: list[int] = []
    alphas: list[Fraction] = []
    violations: list[int] = []
    next_kept: Optional[int] = None
    # walk from the latest candidate down, rounding against the next kept time
    for t in reversed(candidates):
        alpha = min(betas[t], Fraction(1))
        if next_kept is None:
            lam = (alpha.numerator * s.ell(t)) // alpha.denominator
            rounded = Fraction(int(lam), s.ell(t))
        else:
            ratio = Fraction(s.ell(t), s.ell(next_kept))
            rho = alpha * ratio
            floor_rho = rho.numerator // rho.denominator
            rounded = Fraction(int(floor_rho)) / ratio
            if rho >= 8 and rounded * 9 < alpha * 8:
                violations.append(t)
        if rounded <= 0:
            continue
        times.append(t)
        alphas.append(rounded)
        next_kept = t

    times.reverse()
    alphas.reverse()
    if not times:
        return SelectionPlan(
            (), (), betas, Fraction(0), Fraction(0), tuple(strict), (),
            "every candidate rounds to rate zero "
            "(window too shallow for an integer prefix)",
        )
    even_mass = sum(
        (betas[t] for i, t in enumerate(reversed(times)) if i % 2 == 0),
        Fraction(0),
    )
    odd_mass = sum(
        (betas[t] for i, t in enumerate(reversed(times)) if i % 2 == 1),
        Fraction(0),
    )
    diagnostic = "strict deep-end filter waived" if waived else ""
    return SelectionPlan(
        tuple(times),
        tuple(alphas),
        betas,
        even_mass,
        odd_mass,
        tuple(strict),
        tuple(violations),
        diagnostic,
    )


# --------------------------------------------------------------------------
# Interval extraction (keeps b-mass while damping a-mass)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IntervalExtraction:
    """Disjoint index intervals with per-interval b-mass in [mass, 2*mass).

    Interval k starts no earlier than the first index from which
    a_n <= b_n / 2^k holds onward, so the total a-mass over the union is
    at most 4 * mass while the b-mass grows without bound as intervals
    accumulate.
    """

    intervals: tuple[tuple[int, int], ...]
    complete: bool
    diagnostic: str = ""

    def indices(self) -> list[int]:
        out: list[int] = []
        for i, j in self.intervals:
            out.extend(range(i, j + 1))
        return out


def extract_index_intervals(
    a: Sequence[float], b: Sequence[float], mass: float
) -> IntervalExtraction:
    """Constructive interval selection on finite sequences.

    Returns as many complete intervals as the window allows; an empty
    result or a hypothesis failure (a not eventually dominated by damped b)
    is reported through the diagnostic, never silently.
    """
    if mass <= 0:
        raise ValueError(f"interval mass must be positive, got {mass}")
    n = len(a)
    if len(b) != n:
        raise ValueError("sequences must share a length")
    if any(x < 0 for x in a) or any(x < 0 for x in b):
        raise ValueError("sequences must be nonnegative")
    if any(x > mass for x in b):
        raise ValueError("mass must bound the b sequence")

    def first_dominated(k: int) -> Optional[int]:
        # first index from which a_i <= b_i / 2^k holds for the whole tail
        cut = None
        for i in range(n - 1, -1, -1):
            if a[i] <= b[i] / 2**k:
                cut = i
            else:
                break
        return cut

    intervals: list[tuple[int, int]] = []
    prev_end = -1
    k = 0
    while True:
        start_floor = first_dominated(k)
        if start_floor is None:
            diag = (
                f"no index from which a <= b/2^{k} holds onward; "
                "domination hypothesis fails in this window"
            )
            return IntervalExtraction(tuple(intervals), False, diag)
        i_k = max(prev_end + 1, start_floor)
        total = 0.0
        j_k = None
        for j in range(i_k, n):
            total += b[j]
            if total >= mass:
                j_k = j
                break
        if j_k is None:
            diag = "" if intervals else "window exhausted before one complete interval"
            return IntervalExtraction(tuple(intervals), bool(intervals), diag)
        intervals.append((i_k, j_k))
        prev_end = j_k
        k += 1


# --------------------------------------------------------------------------
# Spec mini-language
# --------------------------------------------------------------------------

def _split_top(text: str, sep: str = ",") -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p for p in parts if p]


def parse_spec(text: str) -> ScheduleSpec:
    """Parse the CLI schedule mini-language.

    Examples: const:r=2,depth=10,N=2  tower2:depth=4,N=2  ex2:depth=4,N=2
    ratios:[2,3,4],N=2  extract:base=(ex2:depth=4,N=2),keep=[0,-2,-4]
    Ratio lists are in time order, earliest ratio first.
    """
    text = text.strip()
    kind, _, rest = text.partition(":")
    kind = kind.lower()
    fields: dict[str, str] = {}
    positional: list[str] = []
    for part in _split_top(rest):
        key, eq, value = part.partition("=")
        if eq:
            fields[key.strip().lower()] = value.strip()
        else:
            positional.append(part.strip())

    def intfield(name: str, default: Optional[int] = None) -> int:
        if name in fields:
            return int(fields[name])
        if default is None:
            raise ScheduleError(f"spec '{text}' is missing {name}=")
        return default

    n_letters = intfield("n", 2)
    if kind == "const":
        return ScheduleSpec(ConstRatio(intfield("r")), intfield("depth"), n_letters)
    if kind == "tower2":
        return ScheduleSpec(Tower2(), intfield("depth"), n_letters)
    if kind == "ex2":
        return ScheduleSpec(Ex2(), intfield("depth"), n_letters)
    if kind == "ratios":
        if not positional:
            raise ScheduleError(f"spec '{text}' lists no ratios")
        body = positional[0].strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise ScheduleError(f"ratio list must be bracketed in '{text}'")
        ratios = [int(v) for v in body[1:-1].split(",") if v.strip()]
        return ScheduleSpec(ExplicitRatios(ratios), len(ratios), n_letters)
    if kind == "extract":
        base_text = fields.get("base")
        keep_text = fields.get("keep")
        if base_text is None or keep_text is None:
            raise ScheduleError(f"extract spec '{text}' needs base= and keep=")
        if base_text.startswith("(") and base_text.endswith(")"):
            base_text = base_text[1:-1]
        keep_text = keep_text.strip()
        if not (keep_text.startswith("[") and keep_text.endswith("]")):
            raise ScheduleError(f"keep list must be bracketed in '{text}'")
        keep = [int(v) for v in keep_text[1:-1].split(",") if v.strip()]
        base = parse_spec(base_text)
        return ScheduleSpec(Extracted(base, keep), max(1, len(keep) - 1), n_letters)
    raise ScheduleError(f"unknown schedule family '{kind}'")


def spec_to_string(spec: ScheduleSpec) -> str:
    fam = spec.family
    if isinstance(fam, ConstRatio):
        return f"const:r={fam.r},depth={spec.depth},N={spec.alphabet}"
    if isinstance(fam, Tower2):
        return f"tower2:depth={spec.depth},N={spec.alphabet}"
    if isinstance(fam, Ex2):
        return f"ex2:depth={spec.depth},N={spec.alphabet}"
    if isinstance(fam, ExplicitRatios):
        return f"ratios:[{','.join(str(r) for r in fam.ratios)}],N={spec.alphabet}"
    if isinstance(fam, Extracted):
        inner = spec_to_string(fam.base)
        keep = ",".join(str(k) for k in fam.keep)
        return f"extract:base=({inner}),keep=[{keep}],N={spec.alphabet}"
    raise ScheduleError(f"unknown family {fam!r}")
