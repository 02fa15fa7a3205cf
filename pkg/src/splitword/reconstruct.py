"""Reconstruction pipelines: do the transformed innovations determine the words?

Two regimes.  The full-coupling chain couples every level over its whole
block alphabet and measures how often the template word's offspring
matches the true path.  The partial pipeline couples only selected times
and only on a prefix of each block (rate alpha), tracks the event that
the next checkpoint word originates inside that prefix, and measures the
joint reconstruction success at a target time.

Heavy estimators sample in fixed-size batches with one counter-based
stream per (batch, role), which keeps runs bit-reproducible while letting
numpy do the letter work.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .coupling import canonical_coupling_of_letters, prior_counts
from .process import MemoryCapError, DEFAULT_MAX_LETTERS, stream
from .schedule import Schedule
from .words import (
    Word,
    check_encoding_width,
    encode_blocks,
    subword,
    tilde_extract,
)

ROLE_CODES = 0
ROLE_INNOVATION = 1
ROLE_WORD = 2


def mismatch_bound(m: int, r: int) -> float:
    """M/r + 2 (M/r)^(1/3): probability that one coupled letter misses."""
    ratio = m / r
    return ratio + 2.0 * ratio ** (1.0 / 3.0)


def _effective_alphabet(s: Schedule) -> int:
    if s.block_len == 1:
        return s.alphabet
    return check_encoding_width(s.alphabet, s.block_len)


# --------------------------------------------------------------------------
# Plans
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanPair:
    """A partially-coupled time and the checkpoint that certifies it."""

    partial_time: int
    checkpoint_time: int
    alpha: Fraction


@dataclass(frozen=True)
class ReconstructionPlan:
    pairs: tuple[PlanPair, ...]
    fill: int = 1

    def __post_init__(self):
        last = None
        for p in self.pairs:
            if not p.partial_time < p.checkpoint_time:
                raise ValueError(
                    f"pair ({p.partial_time}, {p.checkpoint_time}) is not increasing"
                )
            if last is not None and p.partial_time <= last:
                raise ValueError("pairs must be disjoint and increasing")
            if not 0 < p.alpha <= 1:
                raise ValueError(f"rate {p.alpha} outside (0, 1]")
            last = p.checkpoint_time
        if self.fill < 1:
            raise ValueError(f"fill letter must be >= 1, got {self.fill}")

    @property
    def partial_times(self) -> tuple[int, ...]:
        return tuple(p.partial_time for p in self.pairs)

    def validate_against(self, s: Schedule) -> None:
        n_letters = _effective_alphabet(s)
        for p in self.pairs:
            if p.partial_time - 1 < s.m or p.checkpoint_time > 0:
                raise ValueError(
                    f"pair ({p.partial_time}, {p.checkpoint_time}) needs times "
                    f"outside window {s.m}..0"
                )
            lam = p.alpha * s.ell(p.partial_time)
            if lam.denominator != 1 or lam < 1:
                raise ValueError(
                    f"alpha * ell({p.partial_time}) = {lam} is not a positive integer"
                )
            q = p.alpha * Fraction(s.ell(p.partial_time), s.ell(p.checkpoint_time))
            if q.denominator != 1 or q < 1:
                raise ValueError(
                    f"alpha * ell({p.partial_time}) / ell({p.checkpoint_time}) = {q} "
                    "is not a positive integer"
                )
            check_encoding_width(n_letters, int(lam))
        if self.fill > n_letters:
            raise ValueError(f"fill letter {self.fill} outside alphabet")

    @classmethod
    def from_selection(cls, selection, parity: str = "even",
                       fill: int = 1) -> "ReconstructionPlan":
        """Pair consecutive selected times; 'odd' drops the latest time first.

        Selected times carry plan indices counted back from the latest; the
        partially-coupled ones are the even indices, so shifting the parity
        reproduces the construction's optional reindexing.
        """
        times = list(selection.times)
        alphas = list(selection.alphas)
        if parity == "odd":
            times = times[:-1]
            alphas = alphas[:-1]
        elif parity != "even":
            raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
        pairs = []
        # walk from the latest backward so the kept pairs sit at even offsets
        i = len(times) - 2
        while i >= 0:
            pairs.append(PlanPair(times[i], times[i + 1], alphas[i]))
            i -= 2
        return cls(tuple(reversed(pairs)), fill)

    def to_json(self) -> str:
        times: list[int] = []
        alphas: list[str] = []
        for p in self.pairs:
            times.extend([p.partial_time, p.checkpoint_time])
            alphas.append(str(p.alpha))
        return json.dumps({"times": times, "alphas": alphas, "fill": self.fill})

    @classmethod
    def from_json(cls, text: str) -> "ReconstructionPlan":
        data = json.loads(text)
        times = [int(t) for t in data["times"]]
        if len(times) % 2 != 0:
            raise ValueError("times must pair up: even count expected")
        alphas = [_parse_fraction(a) for a in data["alphas"]]
        if len(alphas) != len(times) // 2:
            raise ValueError("one alpha per (partial, checkpoint) pair expected")
        pairs = tuple(
            PlanPair(times[2 * i], times[2 * i + 1], alphas[i])
            for i in range(len(alphas))
        )
        return cls(pairs, int(data.get("fill", 1)))


def _parse_fraction(value) -> Fraction:
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(1 << 30)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return Fraction(int(value[0]), int(value[1]))
    raise ValueError(f"cannot read a rate from {value!r}")


# --------------------------------------------------------------------------
# Template words
# --------------------------------------------------------------------------

def canonical_prefix_word(
    s: Schedule, n: int, alpha: Fraction = Fraction(1), fill: int = 1
) -> Word:
    """Word of length ell_{n-1} whose rate-alpha extraction is canonical.

    Block j carries the decoded rank ((j-1) mod N^lam) + 1 on its first
    lam = alpha*ell_n letters; remaining positions hold the fill letter.
    """
    n_letters = _effective_alphabet(s)
    alpha = Fraction(alpha)
    lam_frac = alpha * s.ell(n)
    if lam_frac.denominator != 1 or lam_frac < 1:
        raise ValueError(f"alpha * ell({n}) = {lam_frac} is not a positive integer")
    lam = int(lam_frac)
    m = check_encoding_width(n_letters, lam)
    r = s.ratio(n)
    ell = s.ell(n)
    codes = np.arange(r, dtype=np.int64) % m  # rank - 1
    dtype = np.uint8 if n_letters <= 255 else np.int64
    out = np.full((r, ell), fill, dtype=dtype)
    rest = codes.copy()
    for pos in range(lam - 1, -1, -1):
        out[:, pos] = rest % n_letters + 1
        rest //= n_letters
    flat = out.ravel()
    flat.flags.writeable = False
    return Word(flat, n_letters)


# --------------------------------------------------------------------------
# One-level full-coupling check
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StepCheck:
    time: int
    samples: int
    mismatches: int
    bound: float
    seed: int

    @property
    def frequency(self) -> float:
        return self.mismatches / self.samples

    @property
    def stderr(self) -> float:
        p = self.frequency
        return math.sqrt(p * (1 - p) / self.samples)

    @property
    def vacuous(self) -> bool:
        return self.bound >= 1.0


def _coupled_letter_mismatch(codes: np.ndarray, v: np.ndarray, m: int) -> np.ndarray:
    """Per row: does the coupled position miss the canonical letter?

    Rows are words over {1..m}; v holds 1-based positions.  The in-range
    branch is decided by arithmetic (the canonical letter at w+H*m is w);
    overflowing rows get their actual leftover slot computed.
    """
    batch, r = codes.shape
    rows = np.arange(batch)
    wv = codes[rows, v - 1].astype(np.int64)
    eq = codes == wv[:, None]
    hv = np.cumsum(eq, axis=1, dtype=np.int64)[rows, v - 1] - 1
    t = wv + hv * m
    mismatch = np.zeros(batch, dtype=bool)
    for i in np.flatnonzero(t > r):
        letter = _leftover_letter(codes[i].astype(np.int64), int(v[i]) - 1, m, r)
        mismatch[i] = letter != wv[i]
    return mismatch


def _leftover_letter(row: np.ndarray, pos: int, m: int, r: int) -> int:
    """Canonical letter at the leftover slot that position pos receives."""
    targets = row + prior_counts(row) * m
    valid = targets <= r
    used = np.zeros(r + 1, dtype=bool)
    used[targets[valid]] = True
    unused = np.flatnonzero(~used[1:]) + 1
    leftover_positions = np.flatnonzero(~valid)
    rank = int(np.searchsorted(leftover_positions, pos))
    value = int(unused[rank])
    return (value - 1) % m + 1


def full_step_check(s: Schedule, n: int, samples: int, seed: int) -> StepCheck:
    """Empirical mismatch rate of one fully-coupled level against its bound.

    Simulates the previous word as uniform block codes, applies the
    canonical coupling over the block alphabet, and compares the chosen
    block with the canonical word's block at the transformed position.
    """
    n_letters = _effective_alphabet(s)
    r = s.ratio(n)
    m = check_encoding_width(n_letters, s.ell(n))
    if samples < 1:
        raise ValueError("at least one sample required")
    batch = max(1, (1 << 21) // r)
    mismatches = 0
    done = 0
    b = 0
    dtype = np.uint8 if m <= 255 else np.int64
    while done < samples:
        take = min(batch, samples - done)
        codes = stream(seed, b, ROLE_CODES).integers(1, m + 1, size=(take, r),
                                                     dtype=dtype)
        v = stream(seed, b, ROLE_INNOVATION).integers(1, r + 1, size=take)
        mismatches += int(np.count_nonzero(_coupled_letter_mismatch(codes, v, m)))
        done += take
        b += 1
    return StepCheck(n, samples, mismatches, mismatch_bound(m, r), seed)


# --------------------------------------------------------------------------
# Full chain
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainTimeStats:
    matches: int
    samples: int
    bound: float  # per-step bound at this time, capped at 1
    envelope: float  # cumulative bound sum up to this time

    @property
    def frequency(self) -> float:
        return self.matches / self.samples


@dataclass(frozen=True)
class ChainResult:
    per_time: dict[int, ChainTimeStats]
    template_matches: int  # template word vs true earliest word
    samples: int
    seed: int


def full_chain(
    s: Schedule,
    samples: int,
    seed: int,
    plan: Optional[dict[int, str]] = None,
    max_letters: int = DEFAULT_MAX_LETTERS,
) -> ChainResult:
    """Run the composed reconstruction from the earliest time upward.

    The earliest approximation is the template word whose level-(m+1)
    blocks spell the canonical word; every 'full' time transports the
    innovation through the canonical coupling of the true previous word
    and back through the inverse coupling of the reconstructed one.
    Identity times pass innovations through untouched.
    """
    n_letters = _effective_alphabet(s)
    ell_m = s.ell(s.m)
    if ell_m > max_letters:
        raise MemoryCapError(ell_m, max_letters)
    if plan is None:
        plan = {n: "full" for n in s.ratio_times()}
    for n in s.ratio_times():
        kind = plan.get(n, "identity")
        if kind not in ("full", "identity"):
            raise ValueError(f"unknown plan entry {kind!r} at time {n}")
        if kind == "full":
            check_encoding_width(n_letters, s.ell(n))
    check_encoding_width(n_letters, s.ell(s.m + 1))

    template = canonical_prefix_word(s, s.m + 1, Fraction(1), fill=1)
    bounds = {}
    envelope = 0.0
    for n in s.ratio_times():
        if plan.get(n, "identity") == "full":
            b = min(1.0, mismatch_bound(n_letters ** s.ell(n), s.ratio(n)))
        else:
            b = 1.0
        envelope = min(envelope + b, float("inf"))
        bounds[n] = (b, envelope)

    matches = {n: 0 for n in s.ratio_times()}
    template_matches = 0
    dtype = np.uint8 if n_letters <= 255 else np.int64
    batch = max(1, (1 << 21) // ell_m)
    done = 0
    bidx = 0
    while done < samples:
        take = min(batch, samples - done)
        x_m = stream(seed, bidx, ROLE_WORD).integers(
            1, n_letters + 1, size=(take, ell_m), dtype=dtype
        )
        v_draws = {
            n: stream(seed, bidx, ROLE_INNOVATION, -n).integers(
                1, s.ratio(n) + 1, size=take
            )
            for n in s.ratio_times()
        }
        for i in range(take):
            x = Word(x_m[i], n_letters)
            xr = template
            if xr == x:
                template_matches += 1
            for n in s.ratio_times():
                v = int(v_draws[n][i])
                ell = s.ell(n)
                if plan.get(n, "identity") == "full":
                    m_alpha = n_letters**ell
                    phi = canonical_coupling_of_letters(
                        encode_blocks(x, ell), m_alpha
                    )
                    vprime = phi(v)
                    phi_rec = canonical_coupling_of_letters(
                        encode_blocks(xr, ell), m_alpha
                    )
                    w = phi_rec.inverse(vprime)
                else:
                    w = v
                x = subword(x, ell, v)
                xr = subword(xr, ell, w)
                if xr == x:
                    matches[n] += 1
        done += take
        bidx += 1

    per_time = {
        n: ChainTimeStats(matches[n], samples, bounds[n][0], bounds[n][1])
        for n in s.ratio_times()
    }
    return ChainResult(per_time, template_matches, samples, seed)


# --------------------------------------------------------------------------
# Partial pipeline
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PairStats:
    partial_time: int
    checkpoint_time: int
    alpha: Fraction
    samples: int
    a_count: int
    prefix_match_count: int
    joint_success_count: int
    a_and_match_count: int
    prefix_bound: float

    @property
    def a_frequency(self) -> float:
        return self.a_count / self.samples

    @property
    def prefix_match_frequency(self) -> float:
        return self.prefix_match_count / self.samples

    @property
    def joint_success_frequency(self) -> float:
        return self.joint_success_count / self.samples

    @property
    def conditional_success_frequency(self) -> float:
        return self.joint_success_count / self.a_count if self.a_count else 0.0


@dataclass(frozen=True)
class PipelineResult:
    target: int
    samples: int
    seed: int
    fill: int
    stats: tuple[PairStats, ...]


def origin_event(path, plan: ReconstructionPlan, k: int) -> bool:
    """Does the checkpoint word originate in the declared prefix?

    Reads only the innovations strictly between the pair's two times, so
    resampling any other innovation cannot change the outcome.
    """
    pair = plan.pairs[k]
    s = path.schedule
    lam = int(pair.alpha * s.ell(pair.partial_time))
    start = 0
    for j in range(pair.partial_time + 1, pair.checkpoint_time + 1):
        start += (path.V[j] - 1) * s.ell(j)
    return start + s.ell(pair.checkpoint_time) <= lam


def partial_pipeline(
    s: Schedule,
    plan: ReconstructionPlan,
    target: int,
    samples: int,
    seed: int,
    max_letters: int = DEFAULT_MAX_LETTERS,
) -> PipelineResult:
    """Run the partial-coupling reconstruction and collect its statistics.

    Per sample and per plan pair: whether the true word's prefix matches
    the template block chosen by the transformed innovation, whether the
    checkpoint word originates inside the prefix, and whether the offspring
    evolved to the target time reproduces the true word jointly with that
    origin event.
    """
    plan.validate_against(s)
    if not plan.pairs:
        raise ValueError("plan has no pairs")
    if target > 0 or target < plan.pairs[-1].checkpoint_time:
        raise ValueError(
            f"target {target} must lie in [{plan.pairs[-1].checkpoint_time}, 0]"
        )
    n_letters = _effective_alphabet(s)
    base_time = plan.pairs[0].partial_time - 1
    ell_base = s.ell(base_time)
    if ell_base > max_letters:
        raise MemoryCapError(ell_base, max_letters)

    partial_times = set(plan.partial_times)
    pair_info = []
    for p in plan.pairs:
        lam = int(p.alpha * s.ell(p.partial_time))
        m = check_encoding_width(n_letters, lam)
        pair_info.append(
            {
                "pair": p,
                "lam": lam,
                "m": m,
                "template": canonical_prefix_word(s, p.partial_time, p.alpha,
                                                  plan.fill),
                "bound": mismatch_bound(m, s.ratio(p.partial_time)),
            }
        )

    chain_times = list(range(base_time + 1, target + 1))
    counts = {
        k: {"a": 0, "prefix": 0, "joint": 0, "a_and_match": 0}
        for k in range(len(plan.pairs))
    }
    dtype = np.uint8 if n_letters <= 255 else np.int64
    batch = max(1, (1 << 23) // ell_base)
    done = 0
    bidx = 0
    while done < samples:
        take = min(batch, samples - done)
        base_words = stream(seed, bidx, ROLE_WORD).integers(
            1, n_letters + 1, size=(take, ell_base), dtype=dtype
        )
        v_draws = {
            n: stream(seed, bidx, ROLE_INNOVATION, -n).integers(
                1, s.ratio(n) + 1, size=take
            )
            for n in chain_times
        }
        for i in range(take):
            x: dict[int, Word] = {base_time: Word(base_words[i], n_letters)}
            v = {n: int(v_draws[n][i]) for n in chain_times}
            for n in chain_times:
                x[n] = subword(x[n - 1], s.ell(n), v[n])
            vprime = {}
            for n in chain_times:
                if n in partial_times:
                    info = pair_info[plan.partial_times.index(n)]
                    tilde_codes = encode_blocks(
                        tilde_extract(x[n - 1], s.ell(n), info["lam"]), info["lam"]
                    )
                    phi = canonical_coupling_of_letters(tilde_codes, info["m"])
                    vprime[n] = phi(v[n])
                else:
                    vprime[n] = v[n]
            for k, info in enumerate(pair_info):
                p = info["pair"]
                t_e, t_o, lam = p.partial_time, p.checkpoint_time, info["lam"]
                xr = subword(info["template"], s.ell(t_e), vprime[t_e])
                prefix_ok = bool(
                    np.array_equal(
                        x[t_e].letters[:lam], xr.letters[:lam]
                    )
                )
                start = 0
                for j in range(t_e + 1, t_o + 1):
                    start += (v[j] - 1) * s.ell(j)
                a_ok = start + s.ell(t_o) <= lam
                for n in range(t_e + 1, target + 1):
                    if n in partial_times:
                        inner = pair_info[plan.partial_times.index(n)]
                        tilde_codes = encode_blocks(
                            tilde_extract(xr, s.ell(n), inner["lam"]), inner["lam"]
                        )
                        phi_rec = canonical_coupling_of_letters(
                            tilde_codes, inner["m"]
                        )
                        w = phi_rec.inverse(vprime[n])
                    else:
                        w = vprime[n]
                    xr = subword(xr, s.ell(n), w)
                success = xr == x[target]
                c = counts[k]
                c["prefix"] += prefix_ok
                c["a"] += a_ok
                c["joint"] += success and a_ok
                c["a_and_match"] += prefix_ok and a_ok
        done += take
        bidx += 1

    stats = tuple(
        PairStats(
            info["pair"].partial_time,
            info["pair"].checkpoint_time,
            info["pair"].alpha,
            samples,
            counts[k]["a"],
            counts[k]["prefix"],
            counts[k]["joint"],
            counts[k]["a_and_match"],
            info["bound"],
        )
        for k, info in enumerate(pair_info)
    )
    return PipelineResult(target, samples, seed, plan.fill, stats)
