import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, Iterable, List, Optional, Tuple, TypeVar

import mpmath

from exceptions import DomainError
from models import (
    CoeffRow,
    DifferenceRow,
    ErrorBounded,
    ExactMomentReport,
    GapRow,
    PrecisionContext,
    QuadratureResult,
    ResidualScan,
    SumMethod,
    VerificationRow,
)
from sumcalc.asymptotics import assemble_scan, expansion_point
from sumcalc.collector import SUMMATION_REFERENCE_LIMIT, ccp_exact_min_moments, gap_row
from sumcalc.exactcore import constants
from sumcalc.findiff import certify_positive, coeff_row, variance_differences
from sumcalc.integralrep import gamma_derivative_selftest, mean_y_quad, second_moment_y_quad, variance_y_quad

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """Map in input order, across processes when workers > 1."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _check_range(n_min: int, n_max: int) -> None:
    if n_min < 1 or n_max < n_min:
        raise DomainError(f"need 1 <= n_min <= n_max, got n_min={n_min}, n_max={n_max}")


def coeff_table(
        n_min: int, n_max: int, ctx: PrecisionContext, method: Optional[SumMethod] = None, workers: int = 1
) -> List[CoeffRow]:
    _check_range(n_min, n_max)
    return parallel_map(partial(coeff_row, ctx=ctx, method=method), range(n_min, n_max + 1), workers)


def verify_table(n_max: int, ctx: PrecisionContext, workers: int = 1) -> List[VerificationRow]:
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    rows = parallel_map(partial(certify_positive, ctx=ctx), range(1, n_max + 1), workers)
    logger.info("certified %d of %d rows positive", sum(r.certified_positive for r in rows), len(rows))
    return rows


def conjecture_table(n_max: int, ctx: PrecisionContext, workers: int = 1) -> List[DifferenceRow]:
    if n_max < 2:
        raise DomainError(f"n_max must be >= 2 to form differences, got {n_max}")
    rows = coeff_table(1, n_max, ctx, workers=workers)
    return variance_differences(n_max, ctx, rows)


def asymptotics_table(
        grid: List[int], ctx: PrecisionContext, method: Optional[SumMethod] = None, workers: int = 1
) -> ResidualScan:
    if not grid:
        raise DomainError("grid must hold at least one n")
    if any(n < 3 for n in grid):
        raise DomainError(f"every grid value must be >= 3, got {grid}")
    return assemble_scan(parallel_map(partial(expansion_point, ctx=ctx, method=method), grid, workers))


def quadrature_table(
        n: int, tol: float, ctx: PrecisionContext
) -> List[Tuple[str, QuadratureResult, Optional[ErrorBounded]]]:
    """Quadrature moments of Y next to the summation values where summation is affordable."""
    row = coeff_row(n, ctx) if n <= SUMMATION_REFERENCE_LIMIT else None
    return [
        ("mean_Y", mean_y_quad(n, tol, ctx), row.mean_Y if row else None),
        ("second_moment_Y", second_moment_y_quad(n, tol, ctx), row.second_moment_Y if row else None),
        ("v_n", variance_y_quad(n, tol, ctx), row.v_n if row else None),
    ]


def selftest_table(ctx: PrecisionContext, tol: float) -> List[Tuple[str, ErrorBounded, ErrorBounded]]:
    """Gamma-derivative integrals against their constant-pool closed forms."""
    first, second = gamma_derivative_selftest(ctx, tol)
    pool = constants(ctx)
    with mpmath.workprec(ctx.effective_bits):
        expected_second = pool.gamma.square() + pool.zeta2
    return [("gamma_prime_1", first, -pool.gamma), ("gamma_second_1", second, expected_second)]


def oracle_table(
        coupons: int, players: int, tol: float, ctx: PrecisionContext
) -> Tuple[ExactMomentReport, Optional[GapRow]]:
    exact = ccp_exact_min_moments(coupons, players, tol)
    if coupons < 2:
        return exact, None
    return exact, gap_row(exact, float(coeff_row(players, ctx).v_n.value))
