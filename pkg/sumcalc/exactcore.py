"""
Exact integer combinatorics, prime factorisations and certified constants.

Everything downstream multiplies logarithms by binomials of size ~2^n, so the
integers here are never rounded and every float carries an ErrorBounded ledger.
"""
from __future__ import annotations

import logging
import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, List, Sequence, Tuple, Union

import gmpy2
import mpmath
import numpy as np

from exceptions import ConfigurationError, DomainError
from models import ConstantPool, ErrorBounded, PrecisionContext, padded

logger = logging.getLogger(__name__)

MAX_WORKING_BITS = 1 << 24
CONSTANT_SLACK_BITS = 8
MIN_SIEVE = 1 << 16
MAX_SIEVE = 1 << 22

PositiveReal = Union[int, Fraction, mpmath.mpf]


# --------------------------- binomials --------------------------- #
def binomial_exact(n: int, k: int) -> int:
    """C(n, k) as an exact integer."""
    if n < 0 or k < 0:
        raise DomainError(f"binomial needs nonnegative arguments, got n={n}, k={k}")
    if k > n:
        raise DomainError(f"binomial undefined for k={k} > n={n}")
    return int(gmpy2.comb(n, k))


def signed_binomials(n: int) -> Iterator[Tuple[int, int]]:
    """Yield (j, (-1)^j C(n, j)) for j = 0..n by the multiplicative recurrence."""
    c = 1
    for j in range(n + 1):
        if j:
            c = c * (n - j + 1) // j
        yield j, -c if j & 1 else c


# --------------------------- primes --------------------------- #
@lru_cache(maxsize=4)
def _smallest_prime_factors(limit: int) -> np.ndarray:
    spf = np.zeros(limit + 1, dtype=np.int32)
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
    unmarked = np.nonzero(spf == 0)[0]
    spf[unmarked] = unmarked
    return spf


def _sieve_covering(j: int) -> np.ndarray:
    limit = max(MIN_SIEVE, 1 << (j - 1).bit_length())
    return _smallest_prime_factors(limit)


def primes_up_to(limit: int) -> List[int]:
    if limit < 2:
        return []
    if limit > MAX_SIEVE:
        raise DomainError(f"prime enumeration capped at {MAX_SIEVE}, asked for {limit}")
    spf = _sieve_covering(limit)
    idx = np.arange(2, limit + 1)
    return [int(p) for p in idx[spf[2 : limit + 1] == idx]]


def prime_exponents(j: int) -> List[Tuple[int, int]]:
    """Factor j >= 2 into (prime, exponent) pairs with strictly increasing primes."""
    if j < 2:
        raise DomainError(f"prime_exponents needs j >= 2, got {j}")
    factors: List[Tuple[int, int]] = []
    if j <= MAX_SIEVE:
        spf = _sieve_covering(j)
        while j > 1:
            p = int(spf[j])
            e = 0
            while j % p == 0:
                j //= p
                e += 1
            factors.append((p, e))
        return factors

    # trial division by primes past the sieve
    p = gmpy2.mpz(2)
    while p * p <= j:
        if j % p == 0:
            e = 0
            while j % p == 0:
                j //= p
                e += 1
            factors.append((int(p), e))
        p = gmpy2.next_prime(p)
    if j > 1:
        factors.append((int(j), 1))
    return factors


# --------------------------- constants --------------------------- #
def _faithful(x: mpmath.mpf, prec: int, ulps: int) -> ErrorBounded:
    return ErrorBounded(value=x, abs_error=mpmath.ldexp(abs(x) * ulps, 1 - prec))


@lru_cache(maxsize=16)
def _constant_pool(ctx: PrecisionContext, prime_limit: int) -> ConstantPool:
    prec = ctx.effective_bits + CONSTANT_SLACK_BITS
    if prec > MAX_WORKING_BITS:
        raise ConfigurationError(f"{prec} working bits exceeds the {MAX_WORKING_BITS}-bit ceiling")

    primes = primes_up_to(prime_limit)
    logger.debug("building constant pool: %d bits, %d primes", prec, len(primes))
    with mpmath.workprec(prec):
        gamma = _faithful(+mpmath.euler, prec, 1)
        zeta2 = _faithful(mpmath.pi ** 2 / 6, prec, 3)
        ln_primes = {p: _faithful(mpmath.log(p), prec, 2) for p in primes}

    ceiling = mpmath.ldexp(1, -ctx.bits)
    entries = [gamma, zeta2, *ln_primes.values()]
    if any(e.abs_error > ceiling for e in entries):
        raise ConfigurationError(f"constant pool cannot certify 2^-{ctx.bits}")
    return ConstantPool(
        bits=ctx.bits,
        prime_limit=prime_limit,
        gamma=gamma,
        zeta2=zeta2,
        ln_prime_cache=ln_primes,
    )


def constants(ctx: PrecisionContext, prime_limit: int = 64) -> ConstantPool:
    """
    Euler's gamma, pi^2/6 and ln p for every prime p <= prime_limit, each with
    abs_error <= 2^-ctx.bits. Pools are cached per (context, limit).
    """
    return _constant_pool(ctx, max(2, prime_limit))


def ln_hp(x: PositiveReal, ctx: PrecisionContext) -> ErrorBounded:
    """
    Natural logarithm with |value - ln x| <= abs_error <= 2^-bits * max(1, |ln x|).

    x is taken as exact: an int, a Fraction or an mpf.
    """
    if isinstance(x, mpmath.mpf):
        if not x > 0:
            raise DomainError(f"ln_hp needs x > 0, got {x}")
        num, den = x, 1
    else:
        q = Fraction(x)
        if q <= 0:
            raise DomainError(f"ln_hp needs x > 0, got {x}")
        num, den = q.numerator, q.denominator
    if num == den:
        return ErrorBounded.exact(0)

    prec = ctx.effective_bits + CONSTANT_SLACK_BITS
    with mpmath.workprec(prec + 16):
        # at most two roundings of relative size 2^-(prec+16)
        xv = mpmath.mpf(num) / den
    with mpmath.workprec(prec):
        value = mpmath.log(xv)
    err = mpmath.ldexp(max(mpmath.mpf(1), abs(value)), 2 - prec)
    return ErrorBounded(value=value, abs_error=err)


# --------------------------- certified sums --------------------------- #
def certified_dot(coefficients: Sequence[int], terms: Sequence[ErrorBounded]) -> ErrorBounded:
    """
    Sum of c_i * t_i at the active mpmath precision.

    The bound charges every product and every partial sum one rounding against
    the total magnitude sum |c_i t_i|, plus the propagated term errors.
    """
    if len(coefficients) != len(terms):
        raise DomainError("coefficients and terms differ in length")
    products = [t.value * c for c, t in zip(coefficients, terms) if c]
    if not products:
        return ErrorBounded.exact(0)
    value = mpmath.fsum(products)
    magnitude = mpmath.fsum(abs(p) for p in products)
    propagated = mpmath.fsum(abs(c) * t.abs_error for c, t in zip(coefficients, terms) if c)
    rounding = mpmath.ldexp(magnitude * (len(products) + 2), 2 - mpmath.mp.prec)
    return ErrorBounded(value=value, abs_error=padded(propagated + rounding))
