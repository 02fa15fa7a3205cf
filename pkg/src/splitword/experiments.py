"""Monte Carlo harness: estimators, bound checks, and reports.

Paper-style inequalities are exact in expectation; the only slack allowed
when comparing an empirical frequency against a bound is sampling noise,
fixed at three standard errors.  A probability bound at or above one is
reported Vacuous rather than counted as a pass.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    ci95: tuple[float, float]
    sample_count: int
    seed: int

    def __post_init__(self):
        if not self.ci95[0] <= self.mean <= self.ci95[1]:
            raise ValueError("confidence interval does not cover the mean")

    @classmethod
    def from_bernoulli(cls, successes: int, samples: int, seed: int) -> "Estimate":
        p = successes / samples
        se = math.sqrt(p * (1 - p) / samples)
        return cls(p, se, (p - Z95 * se, p + Z95 * se), samples, seed)

    @classmethod
    def from_values(cls, values: Sequence[float], seed: int) -> "Estimate":
        arr = np.asarray(values, dtype=float)
        mean = float(arr.mean())
        se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
        return cls(mean, se, (mean - Z95 * se, mean + Z95 * se), int(arr.size), seed)


VERDICT_PASS = "Pass"
VERDICT_FAIL = "Fail"
VERDICT_VACUOUS = "Vacuous"


@dataclass(frozen=True)
class BoundCheck:
    """Empirical estimate against a theoretical bound with 3-sigma slack.

    kind 'upper' checks mean <= bound + slack, 'lower' checks
    mean >= bound - slack.  For probability bounds, an upper bound >= 1
    (or a lower bound <= 0) certifies nothing and is marked Vacuous.
    """

    label: str
    estimate: Estimate
    bound: float
    kind: str = "upper"
    slack_sigmas: float = 3.0

    def __post_init__(self):
        if self.kind not in ("upper", "lower"):
            raise ValueError(f"kind must be 'upper' or 'lower', got {self.kind!r}")

    @property
    def slack(self) -> float:
        return self.slack_sigmas * self.estimate.stderr

    @property
    def verdict(self) -> str:
        if self.kind == "upper":
            if self.bound >= 1.0:
                return VERDICT_VACUOUS
            return (
                VERDICT_PASS
                if self.estimate.mean <= self.bound + self.slack
                else VERDICT_FAIL
            )
        if self.bound <= 0.0:
            return VERDICT_VACUOUS
        return (
            VERDICT_PASS
            if self.estimate.mean >= self.bound - self.slack
            else VERDICT_FAIL
        )

    def to_record(self) -> dict:
        return {
            "label": self.label,
            "mean": self.estimate.mean,
            "stderr": self.estimate.stderr,
            "ci95": list(self.estimate.ci95),
            "samples": self.estimate.sample_count,
            "seed": self.estimate.seed,
            "bound": self.bound,
            "kind": self.kind,
            "slack_sigmas": self.slack_sigmas,
            "verdict": self.verdict,
        }


def replica_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for one replica; distinct and reproducible per (seed, index)."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                spawn_key=(0xE5717A7E, index))
    return np.random.Generator(np.random.Philox(ss))


def mc_estimate(
    event_kernel: Callable[[np.random.Generator], bool],
    samples: int,
    seed: int,
) -> Estimate:
    """Mean of independent Bernoulli replicas of the kernel."""
    if samples < 30:
        raise ValueError(f"need at least 30 samples, got {samples}")
    successes = 0
    for i in range(samples):
        try:
            if event_kernel(replica_rng(seed, i)):
                successes += 1
        except Exception as exc:
            raise RuntimeError(f"kernel failed at replica {i}: {exc}") from exc
    return Estimate.from_bernoulli(successes, samples, seed)


def hoeffding_check(
    q: float, n: int, alpha: float, samples: int, seed: int
) -> BoundCheck:
    """P[mean of n Bernoulli(q) <= q - alpha] against exp(-2 n alpha^2)."""
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    threshold = q - alpha
    # one binomial draw per replica is the whole kernel; batch it
    rng = replica_rng(seed, 0)
    hits = 0
    done = 0
    while done < samples:
        take = min(samples - done, 1 << 16)
        z = rng.binomial(n, q, size=take) / n
        hits += int(np.count_nonzero(z <= threshold))
        done += take
    estimate = Estimate.from_bernoulli(hits, samples, seed)
    bound = math.exp(-2.0 * n * alpha * alpha)
    return BoundCheck(f"hoeffding(q={q}, n={n}, alpha={alpha})", estimate, bound)


@dataclass(frozen=True)
class BoundReport:
    checks: tuple[BoundCheck, ...]

    def __post_init__(self):
        if not self.checks:
            raise ValueError("no checks to report: misconfigured run")

    @property
    def failed(self) -> tuple[BoundCheck, ...]:
        return tuple(c for c in self.checks if c.verdict == VERDICT_FAIL)

    @property
    def exit_status(self) -> int:
        return 1 if self.failed else 0

    def to_json(self) -> str:
        return json.dumps([c.to_record() for c in self.checks], indent=2)

    def to_csv_rows(self) -> list[dict]:
        return [c.to_record() for c in self.checks]


def bound_report(checks: Sequence[BoundCheck]) -> BoundReport:
    return BoundReport(tuple(checks))
