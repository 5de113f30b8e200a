"""
Truncated large-n expansions of S1(n) and S2(n) and their residuals against
the certified sums.

    S1(n) ~ ln ln n + gamma + gamma/ln n - (gamma^2 + pi^2/6) / (2 (ln n)^2)     O(1/(ln n)^3)
    S2(n) ~ -(ln ln n)^2 - 2 gamma ln ln n + pi^2/6 - gamma^2
            - 2 gamma ln ln n / ln n + (gamma^2 + pi^2/6) ln ln n / (ln n)^2
            - 2 gamma^2 / ln n - (gamma^2 - pi^2/6) / (ln n)^2             O(ln ln n/(ln n)^3)

The O-constants are unknown, so residuals are reported raw and scaled by the
claimed rate; nothing here asserts a threshold.
"""
import logging
from typing import Iterable, List, Optional, Tuple

import mpmath

from exceptions import DomainError
from models import ErrorBounded, ExpansionReport, PrecisionContext, ResidualScan, SumMethod, VarianceDecayRow
from sumcalc.exactcore import constants, ln_hp
from sumcalc.findiff import log2_alt_sum, log_alt_sum, variance_coefficient

logger = logging.getLogger(__name__)

MIN_EXPANSION_N = 3


def _require_expansion_n(n: int) -> None:
    if n < MIN_EXPANSION_N:
        raise DomainError(f"expansions need n >= {MIN_EXPANSION_N} so that ln ln n > 0, got {n}")


def _logs(n: int, ctx: PrecisionContext) -> Tuple[ErrorBounded, ErrorBounded]:
    """(ln n, ln ln n), the second with the first's error pushed through."""
    ln_n = ln_hp(n, ctx)
    inner = ln_hp(ln_n.value, ctx)
    # |d ln L / dL| = 1/L
    with mpmath.workprec(ctx.effective_bits):
        spread = inner.abs_error + ln_n.abs_error / ln_n.value
    return ln_n, ErrorBounded(value=inner.value, abs_error=spread)


def fs1_truncated(n: int, ctx: PrecisionContext) -> mpmath.mpf:
    _require_expansion_n(n)
    pool = constants(ctx)
    ln_n, lnln = _logs(n, ctx)
    with mpmath.workprec(ctx.effective_bits):
        g, z, L, LL = pool.gamma.value, pool.zeta2.value, ln_n.value, lnln.value
        return LL + g + g / L - (g ** 2 + z) / (2 * L ** 2)


def fs2_truncated(n: int, ctx: PrecisionContext) -> mpmath.mpf:
    _require_expansion_n(n)
    pool = constants(ctx)
    ln_n, lnln = _logs(n, ctx)
    with mpmath.workprec(ctx.effective_bits):
        g, z, L, LL = pool.gamma.value, pool.zeta2.value, ln_n.value, lnln.value
        g2 = g ** 2
        return (
            -LL ** 2
            - 2 * g * LL
            + z
            - g2
            - 2 * g * LL / L
            + (g2 + z) * LL / L ** 2
            - 2 * g2 / L
            - (g2 - z) / L ** 2
        )


def _report(expansion: str, n: int, exact: ErrorBounded, truncated: mpmath.mpf, rate: mpmath.mpf) -> ExpansionReport:
    residual = exact.value - truncated
    return ExpansionReport(
        expansion=expansion,
        n=n,
        exact=exact,
        truncated=truncated,
        residual=residual,
        scaled_residual=residual / rate,
    )


def expansion_point(
        n: int, ctx: PrecisionContext, method: Optional[SumMethod] = None
) -> Tuple[ExpansionReport, ExpansionReport, VarianceDecayRow]:
    """Both expansion reports and v_n at one grid point."""
    _require_expansion_n(n)
    s1 = log_alt_sum(n, ctx, method)
    s2 = log2_alt_sum(n, ctx, method)
    pool = constants(ctx)
    ln_n, lnln = _logs(n, ctx)
    with mpmath.workprec(ctx.effective_bits):
        L, LL = ln_n.value, lnln.value
        r1 = _report("s1", n, s1, fs1_truncated(n, ctx), 1 / L ** 3)
        r2 = _report("s2", n, s2, fs2_truncated(n, ctx), LL / L ** 3)
        v = variance_coefficient(s1, s2, pool)
    logger.debug("n=%d residuals s1=%s s2=%s", n, mpmath.nstr(r1.residual, 5), mpmath.nstr(r2.residual, 5))
    return r1, r2, VarianceDecayRow(n=n, v_n=v)


def assemble_scan(points: Iterable[Tuple[ExpansionReport, ExpansionReport, VarianceDecayRow]]) -> ResidualScan:
    s1: List[ExpansionReport] = []
    s2: List[ExpansionReport] = []
    variance: List[VarianceDecayRow] = []
    for r1, r2, row in points:
        s1.append(r1)
        s2.append(r2)
        variance.append(row)
    scan = ResidualScan(s1=s1, s2=s2, variance=variance)
    if not scan.variance_decreasing:
        logger.warning("v_n is not decreasing along the grid")
    return scan


def residual_scan(
        n_grid: Iterable[int], ctx: PrecisionContext, method: Optional[SumMethod] = None
) -> ResidualScan:
    grid = list(n_grid)
    if not grid:
        raise DomainError("grid must hold at least one n")
    for n in grid:
        _require_expansion_n(n)
    return assemble_scan(expansion_point(n, ctx, method) for n in grid)
