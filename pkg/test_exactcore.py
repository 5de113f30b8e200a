from fractions import Fraction
from math import prod

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from exceptions import ConfigurationError, DomainError
from models import ErrorBounded, PrecisionContext
from sumcalc.exactcore import (
    MAX_SIEVE,
    binomial_exact,
    certified_dot,
    constants,
    ln_hp,
    prime_exponents,
    primes_up_to,
    signed_binomials,
)

CTX = PrecisionContext()


def reference(fn, bits=400):
    with mpmath.workprec(bits):
        return fn()


# --- binomials ---


def test_binomial_exact_small_values():
    assert binomial_exact(5, 2) == 10
    assert binomial_exact(7, 0) == 1
    assert binomial_exact(7, 7) == 1


def test_binomial_exact_is_exact_for_large_n():
    big = binomial_exact(200, 100)
    assert big.bit_length() == 196
    assert big == binomial_exact(199, 99) + binomial_exact(199, 100)


def test_binomial_exact_middle_of_row_sixty_four():
    assert binomial_exact(64, 32) == 1832624140942590534


def test_binomial_exact_pascal_rule_up_to_two_hundred():
    for n in range(2, 201):
        for k in range(1, n):
            assert binomial_exact(n, k) == binomial_exact(n - 1, k - 1) + binomial_exact(n - 1, k), (n, k)


def test_binomial_exact_absorption_identity_up_to_two_hundred():
    # C(n-1, k) / (k+1) = C(n, k+1) / n, cleared of denominators
    for n in range(1, 201):
        for k in range(n):
            assert n * binomial_exact(n - 1, k) == (k + 1) * binomial_exact(n, k + 1), (n, k)


@pytest.mark.parametrize("n,k", [(-1, 0), (3, -1), (3, 4)])
def test_binomial_exact_rejects_bad_arguments(n, k):
    with pytest.raises(DomainError):
        binomial_exact(n, k)


def test_signed_binomials_row_four():
    assert list(signed_binomials(4)) == [(0, 1), (1, -4), (2, 6), (3, -4), (4, 1)]


@given(st.integers(min_value=0, max_value=300))
def test_signed_binomials_sum_to_zero(n):
    total = sum(c for _, c in signed_binomials(n))
    assert total == (1 if n == 0 else 0)


# --- primes ---


def test_primes_up_to_thirty():
    assert primes_up_to(30) == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert primes_up_to(1) == []


def test_primes_up_to_rejects_limits_past_the_sieve():
    with pytest.raises(DomainError):
        primes_up_to(MAX_SIEVE + 1)


def test_prime_exponents_examples():
    assert prime_exponents(2) == [(2, 1)]
    assert prime_exponents(360) == [(2, 3), (3, 2), (5, 1)]
    assert prime_exponents(97) == [(97, 1)]


def test_prime_exponents_beyond_sieve_uses_trial_division():
    assert prime_exponents(3 << 23) == [(2, 23), (3, 1)]
    assert prime_exponents(5 ** 11) == [(5, 11)]


def test_prime_exponents_rejects_small_j():
    with pytest.raises(DomainError):
        prime_exponents(1)


@given(st.integers(min_value=2, max_value=10 ** 7))
@settings(max_examples=200)
def test_prime_exponents_reconstructs_j(j):
    factors = prime_exponents(j)
    primes = [p for p, _ in factors]
    assert primes == sorted(set(primes))
    assert all(e >= 1 for _, e in factors)
    assert prod(p ** e for p, e in factors) == j


# --- logarithms and constants ---


def test_ln_hp_of_one_is_exact_zero():
    result = ln_hp(1, CTX)
    assert result.value == 0
    assert result.abs_error == 0


@pytest.mark.parametrize("x", [2, 3, 10, 10 ** 6, Fraction(1, 2), Fraction(22, 7)])
def test_ln_hp_contains_reference(x):
    result = ln_hp(x, CTX)
    expected = reference(lambda: mpmath.log(mpmath.mpf(Fraction(x).numerator) / Fraction(x).denominator))
    assert result.contains(expected)
    assert result.abs_error <= mpmath.ldexp(max(1, abs(result.value)), -CTX.bits)


def test_ln_hp_accepts_mpf():
    with mpmath.workprec(200):
        x = mpmath.log(10)
    result = ln_hp(x, CTX)
    assert result.contains(reference(lambda: mpmath.log(mpmath.log(10))))


@pytest.mark.parametrize("x", [0, -1, Fraction(-1, 3)])
def test_ln_hp_rejects_nonpositive(x):
    with pytest.raises(DomainError):
        ln_hp(x, CTX)


@given(
    st.fractions(min_value=Fraction(1, 1000), max_value=1000),
    st.fractions(min_value=Fraction(1, 1000), max_value=1000),
)
@settings(max_examples=50)
def test_ln_hp_is_additive_within_bounds(a, b):
    with mpmath.workprec(CTX.effective_bits):
        total = ln_hp(a, CTX) + ln_hp(b, CTX)
    assert total.overlaps(ln_hp(a * b, CTX))


def test_constants_are_certified():
    pool = constants(CTX)
    assert pool.gamma.contains(reference(lambda: +mpmath.euler))
    assert pool.zeta2.contains(reference(lambda: mpmath.pi ** 2 / 6))
    assert pool.ln_prime(7).contains(reference(lambda: mpmath.log(7)))
    ceiling = mpmath.ldexp(1, -CTX.bits)
    assert pool.gamma.abs_error <= ceiling
    assert pool.zeta2.abs_error <= ceiling


def test_constants_pool_covers_requested_primes():
    pool = constants(CTX, prime_limit=100)
    assert sorted(pool.ln_prime_cache) == primes_up_to(100)
    with pytest.raises(DomainError):
        pool.ln_prime(101)


def test_constants_reject_absurd_precision():
    with pytest.raises(ConfigurationError):
        constants(PrecisionContext(bits=1 << 25))


def test_certified_dot_exact_terms():
    terms = [ErrorBounded.exact(v) for v in (1, 2, 3)]
    with mpmath.workprec(128):
        result = certified_dot([1, -2, 1], terms)
    assert result.value == 0


def test_certified_dot_propagates_term_errors():
    terms = [ErrorBounded(value=1, abs_error=mpmath.mpf(2) ** -40)] * 2
    with mpmath.workprec(128):
        result = certified_dot([3, -5], terms)
    assert result.value == -2
    assert result.abs_error >= 8 * mpmath.mpf(2) ** -40


def test_certified_dot_length_mismatch():
    with pytest.raises(DomainError):
        certified_dot([1, 2], [ErrorBounded.exact(1)])


# --- interval model ---


def test_error_bounded_rejects_negative_radius():
    with pytest.raises(ValidationError):
        ErrorBounded(value=1, abs_error=-1)


def test_error_bounded_sign():
    assert ErrorBounded(value=1, abs_error="0.5").certified_sign() == 1
    assert ErrorBounded(value=-1, abs_error="0.5").certified_sign() == -1
    assert ErrorBounded(value="0.1", abs_error="0.5").certified_sign() == 0
    # an endpoint touching zero is not a certified sign
    assert ErrorBounded(value="0.5", abs_error="0.5").certified_sign() == 0


def test_error_bounded_endpoints_are_exact():
    tiny = mpmath.ldexp(1, -200)
    x = ErrorBounded(value=1, abs_error=tiny)
    assert x.lower == mpmath.fsub(1, tiny, exact=True)
    assert x.upper == mpmath.fadd(1, tiny, exact=True)
    assert x.lower < 1 < x.upper
    assert x.contains(x.upper)
    assert not x.contains(mpmath.fadd(x.upper, tiny, exact=True))


def test_error_bounded_arithmetic_keeps_truth_inside():
    with mpmath.workprec(60):
        third = ErrorBounded(value=mpmath.mpf(1) / 3, abs_error=mpmath.ldexp(1, -58))
        result = (third * third - third) * 9 + 2
    # (1/9 - 1/3) * 9 + 2 = 0
    assert result.contains(0)


def test_error_bounded_divides_only_by_integers():
    x = ErrorBounded.exact(1)
    with pytest.raises(TypeError):
        x / 2.0
    with pytest.raises(DomainError):
        x / 0


def test_precision_context_escalation_and_floor():
    ctx = PrecisionContext(bits=128, guard_bits=0)
    assert ctx.escalated().guard_bits == 16
    assert ctx.escalated().escalated().guard_bits == 32
    assert ctx.widened(10).bits == 138
    assert ctx.widened(10).guard_bits == ctx.guard_bits
    with pytest.raises(ValidationError):
        PrecisionContext(bits=32)
