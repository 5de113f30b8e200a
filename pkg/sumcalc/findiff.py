"""
Alternating binomial logarithmic sums with certified error bounds.

    S1(n) = sum_{j=1}^{n} (-1)^j C(n,j) ln j        c_n = -S1(n)/n
    S2(n) = sum_{j=1}^{n} (-1)^j C(n,j) (ln j)^2    w_n = -S2(n)/n

Terms reach ~2^n while the sums stay O((ln ln n)^2), so either the float sum
carries n extra bits (direct_bigfloat) or the cancellation is moved into exact
integers through ln j = sum_p e_p(j) ln p (prime_factored).
"""
from __future__ import annotations

import logging
from collections import defaultdict
from functools import lru_cache
from types import MappingProxyType
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import mpmath

from exceptions import DomainError, PrecisionLossError
from models import (
    CoeffRow,
    ConstantPool,
    DifferenceRow,
    ErrorBounded,
    PrecisionContext,
    SumMethod,
    VerificationRow,
)
from sumcalc.exactcore import certified_dot, constants, ln_hp, prime_exponents, signed_binomials

logger = logging.getLogger(__name__)

DIRECT_CUTOFF = 64
RELIABILITY_BITS = 32
POOL_BITS_QUANTUM = 512
LOG_MAGNITUDE_BITS = 4  # ln p < 16 for every prime the sieve reaches

TermFn = Callable[[int, PrecisionContext], ErrorBounded]
Terms = Union[TermFn, Sequence[ErrorBounded]]


# ----------------------------- helpers ------------------------- #
def default_method(n: int) -> SumMethod:
    return SumMethod.PRIME_FACTORED if n > DIRECT_CUTOFF else SumMethod.DIRECT_BIGFLOAT


def _require_n(n: int) -> None:
    if n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")


def _reliable(result: ErrorBounded) -> bool:
    if result.abs_error == 0:
        return True
    return result.abs_error <= mpmath.ldexp(abs(result.value), -RELIABILITY_BITS)


def _escalations(ctx: PrecisionContext) -> Iterator[PrecisionContext]:
    """ctx first, then successive guard-bit doublings up to the budget."""
    current = ctx
    yield current
    for _ in range(ctx.max_auto_escalations):
        current = current.escalated()
        logger.info("escalating to %d guard bits", current.guard_bits)
        yield current


def _cancellation_context(n: int, ctx: PrecisionContext) -> PrecisionContext:
    # C(n, n/2) * ln n sits ~n bits above the result; bits >= 64 already
    return ctx.widened(n)


def _is_exact_integer(t: ErrorBounded) -> bool:
    return t.abs_error == 0 and mpmath.isint(t.value)


# ------------------------ generic difference ------------------- #
def alt_diff(n: int, f: Terms, ctx: PrecisionContext) -> ErrorBounded:
    """
    D_n[f] = sum_{j=0}^{n} (-1)^j C(n,j) f_j.

    f is either a callable (j, ctx) -> ErrorBounded, re-evaluated at the widened
    precision on every escalation, or a ready sequence of n+1 values. Exact
    integer inputs are summed exactly.
    """
    _require_n(n)
    if not callable(f) and len(f) < n + 1:
        raise DomainError(f"f must be defined for j = 0..{n}, got {len(f)} values")

    coefficients = [c for _, c in signed_binomials(n)]
    last: Optional[ErrorBounded] = None
    wide = _cancellation_context(n, ctx)
    for attempt in _escalations(ctx):
        wide = _cancellation_context(n, attempt)
        terms = [f(j, wide) for j in range(n + 1)] if callable(f) else list(f[: n + 1])
        if all(_is_exact_integer(t) for t in terms):
            return ErrorBounded.exact(sum(c * int(t.value) for c, t in zip(coefficients, terms)))
        with mpmath.workprec(wide.effective_bits):
            last = certified_dot(coefficients, terms)
        if _reliable(last):
            return last
        logger.info("alt_diff n=%d: bound %s not reliable at %d bits", n, mpmath.nstr(last.abs_error, 3), wide.effective_bits)
    detail = f"bound {mpmath.nstr(last.abs_error, 3)} exceeds 2^-{RELIABILITY_BITS} |value|"
    raise PrecisionLossError(n, wide.effective_bits, detail)


def _log_power_term(power: int) -> TermFn:
    def term(j: int, ctx: PrecisionContext) -> ErrorBounded:
        if j == 0:
            return ErrorBounded.exact(0)
        ln_j = ln_hp(j, ctx)
        if power == 1:
            return ln_j
        with mpmath.workprec(ctx.effective_bits + 8):
            return ln_j.square()

    return term


# --------------------- exact prime coefficients ---------------- #
@lru_cache(maxsize=8)
def exponent_coefficients(n: int) -> Tuple[Mapping[int, int], Mapping[Tuple[int, int], int]]:
    """
    A_p(n) = sum_j (-1)^j C(n,j) e_p(j) and, over sorted prime pairs p <= q,
    B_{p,q}(n) = sum_j (-1)^j C(n,j) m_{p,q}(j) where m_{p,p} = e_p^2 and
    m_{p,q} = 2 e_p e_q, so that (ln j)^2 = sum B-weights of ln p ln q.
    """
    _require_n(n)
    a: Dict[int, int] = defaultdict(int)
    b: Dict[Tuple[int, int], int] = defaultdict(int)
    for j, coeff in signed_binomials(n):
        if j < 2:
            continue
        factors = prime_exponents(j)
        for i, (p, e) in enumerate(factors):
            a[p] += e * coeff
            b[(p, p)] += e * e * coeff
            for q, f in factors[i + 1 :]:
                b[(p, q)] += 2 * e * f * coeff
    return (
        MappingProxyType({p: v for p, v in a.items() if v}),
        MappingProxyType({k: v for k, v in b.items() if v}),
    )


def _dot_precision(coefficients: Iterable[int], count: int, power: int, ctx: PrecisionContext) -> int:
    top = max((abs(c).bit_length() for c in coefficients), default=0)
    return top + count.bit_length() + power * LOG_MAGNITUDE_BITS + ctx.effective_bits + 8


def _pool_for(prec: int, n: int) -> ConstantPool:
    # quantised so neighbouring n share one cached pool
    pool_bits = -(-prec // POOL_BITS_QUANTUM) * POOL_BITS_QUANTUM
    limit = 1 << (n - 1).bit_length()
    return constants(PrecisionContext(bits=pool_bits, guard_bits=0, max_auto_escalations=0), prime_limit=limit)


def _prime_factored(n: int, ctx: PrecisionContext, power: int) -> ErrorBounded:
    a_coeffs, b_coeffs = exponent_coefficients(n)
    table = a_coeffs if power == 1 else b_coeffs
    if not table:
        return ErrorBounded.exact(0)
    keys = list(table)
    coefficients = [table[k] for k in keys]

    last: Optional[ErrorBounded] = None
    prec = ctx.effective_bits
    for attempt in _escalations(ctx):
        prec = _dot_precision(coefficients, len(keys), power, attempt)
        pool = _pool_for(prec, n)
        with mpmath.workprec(prec):
            if power == 1:
                terms = [pool.ln_prime(p) for p in keys]
            else:
                terms = [pool.ln_prime(p) * pool.ln_prime(q) for p, q in keys]
            last = certified_dot(coefficients, terms)
        if _reliable(last):
            return last
    raise PrecisionLossError(n, prec, f"prime-factored bound {mpmath.nstr(last.abs_error, 3)} not reliable")


# ------------------------- the two sums ------------------------ #
def log_alt_sum(n: int, ctx: PrecisionContext, method: Optional[SumMethod] = None) -> ErrorBounded:
    """Certified S1(n) = sum_{j=1}^{n} (-1)^j C(n,j) ln j."""
    _require_n(n)
    method = method or default_method(n)
    if method is SumMethod.DIRECT_BIGFLOAT:
        return alt_diff(n, _log_power_term(1), ctx)
    return _prime_factored(n, ctx, power=1)


def log2_alt_sum(n: int, ctx: PrecisionContext, method: Optional[SumMethod] = None) -> ErrorBounded:
    """Certified S2(n) = sum_{j=1}^{n} (-1)^j C(n,j) (ln j)^2."""
    _require_n(n)
    method = method or default_method(n)
    if method is SumMethod.DIRECT_BIGFLOAT:
        return alt_diff(n, _log_power_term(2), ctx)
    return _prime_factored(n, ctx, power=2)


# ------------------------- moment assembly --------------------- #
def variance_coefficient(s1: ErrorBounded, s2: ErrorBounded, pool: ConstantPool) -> ErrorBounded:
    """v_n = pi^2/6 + n w_n - n^2 c_n^2 = pi^2/6 - S2 - S1^2 (active precision)."""
    return pool.zeta2 - s2 - s1.square()


def expectation_terms(n: int, s1: ErrorBounded, s2: ErrorBounded, pool: ConstantPool) -> CoeffRow:
    """Assemble c_n, w_n, v_n, E[Y], E[Y^2] from S1 and S2 at the active precision."""
    gamma = pool.gamma
    return CoeffRow(
        n=n,
        c_n=-s1 / n,
        w_n=-s2 / n,
        v_n=variance_coefficient(s1, s2, pool),
        # E[Y] = -n c_n - gamma
        mean_Y=s1 - gamma,
        # E[Y^2] = gamma^2 + pi^2/6 + 2 gamma n c_n + n w_n
        second_moment_Y=gamma.square() + pool.zeta2 - (gamma * s1) * 2 - s2,
    )


def coeff_row(n: int, ctx: PrecisionContext, method: Optional[SumMethod] = None) -> CoeffRow:
    s1 = log_alt_sum(n, ctx, method)
    s2 = log2_alt_sum(n, ctx, method)
    pool = constants(ctx)
    with mpmath.workprec(ctx.effective_bits):
        return expectation_terms(n, s1, s2, pool)


# ------------------------- positivity -------------------------- #
def certify_positive(n: int, ctx: PrecisionContext) -> VerificationRow:
    """Certify the sign of v_n, escalating until the interval excludes zero."""
    _require_n(n)
    attempt = ctx
    for attempt in _escalations(ctx):
        row = coeff_row(n, attempt)
        sign = row.v_n.certified_sign()
        if sign > 0:
            return VerificationRow(n=n, v_n=row.v_n, certified_positive=True)
        if sign < 0:
            logger.error("v_%d certified NONPOSITIVE: %s", n, row.v_n)
            return VerificationRow(n=n, v_n=row.v_n, certified_positive=False)
    raise PrecisionLossError(n, attempt.effective_bits, "sign of v_n not certifiable")


def verify_inequality(n_max: int, ctx: PrecisionContext, n_min: int = 1) -> List[VerificationRow]:
    """pi^2/6 > n^2 c_n^2 - n w_n, certified for each n_min <= n <= n_max."""
    if n_max < 1 or n_min < 1 or n_min > n_max:
        raise DomainError(f"need 1 <= n_min <= n_max, got {n_min}..{n_max}")
    return [certify_positive(n, ctx) for n in range(n_min, n_max + 1)]


def variance_differences(
        n_max: int, ctx: PrecisionContext, rows: Optional[Sequence[CoeffRow]] = None
) -> List[DifferenceRow]:
    """
    v_{n+1} - v_n for n = 1..n_max-1 with certified signs where possible.

    Observed monotonicity is only reported; a zero sign means the difference
    could not be separated from zero within the escalation budget.
    """
    if n_max < 2:
        raise DomainError(f"n_max must be >= 2 to form differences, got {n_max}")
    if rows is None:
        rows = [coeff_row(n, ctx) for n in range(1, n_max + 1)]
    by_n = {row.n: row for row in rows}

    out: List[DifferenceRow] = []
    for n in range(1, n_max):
        left, right = by_n[n].v_n, by_n[n + 1].v_n
        diff = _difference(left, right, ctx)
        sign = diff.certified_sign()
        if sign == 0:
            for attempt in list(_escalations(ctx))[1:]:
                left, right = coeff_row(n, attempt).v_n, coeff_row(n + 1, attempt).v_n
                diff = _difference(left, right, attempt)
                sign = diff.certified_sign()
                if sign:
                    break
        if sign > 0:
            logger.warning("v_%d > v_%d certified: %s", n + 1, n, diff)
        elif sign == 0:
            logger.info("sign of v_%d - v_%d uncertain: %s", n + 1, n, diff)
        out.append(DifferenceRow(n=n, difference=diff, certified_sign=sign))
    return out


def _difference(left: ErrorBounded, right: ErrorBounded, ctx: PrecisionContext) -> ErrorBounded:
    with mpmath.workprec(ctx.effective_bits):
        return right - left
