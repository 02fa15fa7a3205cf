"""High-precision log arithmetic over big integers.

Schedule lengths grow beyond machine range after a few levels, so every
logarithm here goes through mpmath at a configurable precision (bits of
mantissa); mpmath exponents are unbounded, which keeps terms like
ln(r)/ell well-defined even when ell has hundreds of thousands of bits.
"""

from __future__ import annotations

import mpmath

DEFAULT_PRECISION_BITS = 256


def log_of_int(value: int, precision_bits: int = DEFAULT_PRECISION_BITS):
    """Natural log of a positive big integer."""
    if value <= 0:
        raise ValueError(f"log of non-positive integer {value}")
    with mpmath.workprec(precision_bits):
        return mpmath.log(mpmath.mpf(value))


def log_factorial(r: int, precision_bits: int = DEFAULT_PRECISION_BITS):
    """ln(r!) via the log-gamma function; exact in the mathematical sense."""
    if r < 0:
        raise ValueError(f"factorial of negative integer {r}")
    with mpmath.workprec(precision_bits):
        return mpmath.loggamma(mpmath.mpf(r) + 1)


def log_ratio(num: int, den: int, precision_bits: int = DEFAULT_PRECISION_BITS):
    """ln(num)/den for big integers, evaluated without forming num/den."""
    with mpmath.workprec(precision_bits):
        return log_of_int(num, precision_bits) / mpmath.mpf(den)


def mpf_str(x) -> str:
    """Stable decimal rendering used in JSON reports."""
    return mpmath.nstr(x, 17, strip_zeros=False)
