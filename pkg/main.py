import sys
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import click
import typer
from dotenv import load_dotenv
from pydantic import ValidationError

import service
from exceptions import ConfigurationError, DomainError, PrecisionLossError, QuadratureError, TruncationError
from models import ExitCode, OutputConfig, OutputFormat, PrecisionContext, RngSpec
from report_emit import (
    coeff_record,
    difference_record,
    emit,
    expansion_record,
    fmt_error,
    fmt_value,
    oracle_record,
    quadrature_record,
    sim_record,
    verification_record,
)
from sumcalc.collector import sample_log_max_exp, simulate_ccp_min
from utils import check_digits, configure_logging, decimal_capacity, entropy_seed, parse_grid, parse_method, resolve_bits

# Load environment variables from .env file
load_dotenv()

# --------------------------------------------------------------------------
# Application and shared options
# --------------------------------------------------------------------------
app = typer.Typer(
    help="Certified alternating log-binomial sums, their asymptotics and coupon-collector checks.",
    add_completion=False,
    no_args_is_help=True,
)

DEFAULT_DIGITS = 30

BitsOpt = typer.Option(None, "--bits", help="Working precision in bits (env FINDIFF_BITS, default 128)")
FormatOpt = typer.Option(OutputFormat.CSV, "--format", case_sensitive=False, help="Report format")
DigitsOpt = typer.Option(None, "--digits", help="Significant digits printed for high-precision values")
OutOpt = typer.Option(None, "--out", help="Write the report here instead of stdout")
WorkersOpt = typer.Option(1, "--workers", help="Worker processes for batch computations")


class SimKind(str, Enum):
    MAXEXP = "maxexp"
    CCP = "ccp"


@contextmanager
def exit_codes() -> Iterator[None]:
    """Map library exceptions onto the exit-code contract."""
    try:
        yield
    except (DomainError, ConfigurationError, ValidationError) as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(code=ExitCode.USAGE)
    except (PrecisionLossError, QuadratureError, TruncationError) as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(code=ExitCode.PRECISION_LOSS)


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging on stderr")) -> None:
    with exit_codes():
        configure_logging(verbose)


def _setup(
        bits: Optional[int], fmt: OutputFormat, digits: Optional[int], out: Optional[Path]
) -> Tuple[PrecisionContext, OutputConfig]:
    ctx = PrecisionContext(bits=resolve_bits(bits))
    if digits is None:
        digits = min(DEFAULT_DIGITS, decimal_capacity(ctx.bits))
    check_digits(digits, ctx.bits)
    return ctx, OutputConfig(format=fmt, digits=digits, path=out)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------
@app.command()
def coeffs(
        n_min: int = typer.Option(1, "--n-min"),
        n_max: int = typer.Option(..., "--n-max"),
        method: Optional[str] = typer.Option(None, "--method", help="direct or prime (default picks by n)"),
        bits: Optional[int] = BitsOpt,
        fmt: OutputFormat = FormatOpt,
        digits: Optional[int] = DigitsOpt,
        out: Optional[Path] = OutOpt,
        workers: int = WorkersOpt,
):
    """c_n, w_n, v_n, E[Y] and E[Y^2] with certified error bounds."""
    with exit_codes():
        ctx, config = _setup(bits, fmt, digits, out)
        rows = service.coeff_table(n_min, n_max, ctx, parse_method(method), workers)
        emit([coeff_record(row, config.digits) for row in rows], config)


@app.command()
def verify(
        n_max: int = typer.Option(..., "--n-max"),
        bits: Optional[int] = BitsOpt,
        fmt: OutputFormat = FormatOpt,
        digits: Optional[int] = DigitsOpt,
        out: Optional[Path] = OutOpt,
        workers: int = WorkersOpt,
):
    """Certify v_n > 0 for every n <= n_max."""
    with exit_codes():
        ctx, config = _setup(bits, fmt, digits, out)
        rows = service.verify_table(n_max, ctx, workers)
        emit([verification_record(row, config.digits) for row in rows], config)
    failed = [row.n for row in rows if not row.certified_positive]
    if failed:
        typer.echo(f"v_n certified nonpositive at n={failed}: this contradicts a proven theorem", err=True)
        raise typer.Exit(code=ExitCode.THEOREM_CONTRADICTION)


@app.command()
def conjecture(
        n_max: int = typer.Option(..., "--n-max"),
        bits: Optional[int] = BitsOpt,
        fmt: OutputFormat = FormatOpt,
        digits: Optional[int] = DigitsOpt,
        out: Optional[Path] = OutOpt,
        workers: int = WorkersOpt,
):
    """Signs of v_{n+1} - v_n; a certified positive difference exits 4."""
    with exit_codes():
        ctx, config = _setup(bits, fmt, digits, out)
        rows = service.conjecture_table(n_max, ctx, workers)
        emit([difference_record(row, config.digits) for row in rows], config)
    if any(row.certified_sign > 0 for row in rows):
        typer.echo("found a certified increase of v_n", err=True)
        raise typer.Exit(code=ExitCode.CONJECTURE_COUNTEREXAMPLE)
    if any(row.certified_sign == 0 for row in rows):
        typer.echo("some differences could not be separated from zero", err=True)
        raise typer.Exit(code=ExitCode.PRECISION_LOSS)


@app.command()
def asymptotics(
        grid: Optional[str] = typer.Option(None, "--grid", help="Comma-separated n values (default 10,100,1000,10000)"),
        method: Optional[str] = typer.Option(None, "--method"),
        bits: Optional[int] = BitsOpt,
        fmt: OutputFormat = FormatOpt,
        digits: Optional[int] = DigitsOpt,
        out: Optional[Path] = OutOpt,
        workers: int = WorkersOpt,
):
    """Residuals of the truncated S1 and S2 expansions, with v_n along the grid."""
    with exit_codes():
        ctx, config = _setup(bits, fmt, digits, out)
        scan = service.asymptotics_table(parse_grid(grid), ctx, parse_method(method), workers)
        records = []
        for r1, r2, decay in zip(scan.s1, scan.s2, scan.variance):
            records.append(expansion_record(r1, decay, config.digits))
            records.append(expansion_record(r2, decay, config.digits))
        emit(records, config)


@app.command()
def simulate(
        kind: SimKind = typer.Argument(..., case_sensitive=False),
        n: Optional[int] = typer.Option(None, "--n", help="Sample size for maxexp"),
        coupons: Optional[int] = typer.Option(None, "--N", help="Coupon types for ccp"),
        players: int = typer.Option(1, "--players", help="Collectors for ccp"),
        trials: int = typer.Option(100_000, "--trials"),
        seed: Optional[int] = typer.Option(None, "--seed"),
        stream: int = typer.Option(0, "--stream"),
        algorithm: str = typer.Option("PCG64", "--algorithm", help="numpy bit generator"),
        bits: Optional[int] = BitsOpt,
        fmt: OutputFormat = FormatOpt,
        digits: Optional[int] = DigitsOpt,
        out: Optional[Path] = OutOpt,
        workers: int = WorkersOpt,
):
    """Monte Carlo check of E[Y], V[Y] (maxexp) or of the collector minimum (ccp)."""
    with exit_codes():
        ctx, config = _setup(bits, fmt, digits, out)
        rng = RngSpec(algorithm_id=algorithm, seed=entropy_seed(seed), stream=stream)
        if kind is SimKind.MAXEXP:
            if n is None:
                raise DomainError("maxexp needs --n")
            report = sample_log_max_exp(n, trials, rng, ctx, workers)
        else:
            if coupons is None:
                raise DomainError("ccp needs --N")
            report = simulate_ccp_min(coupons, players, trials, rng, workers)
        emit([sim_record(report, config.digits)], config)


@app.command()
def oracle(
        coupons: int = typer.Option(..., "--N", help="Coupon types"),
        players: int = typer.Option(1, "--players"),
        tol: float = typer.Option(1e-12, "--tol", help="Bound on the neglected tail"),
        bits: Optional[int] = BitsOpt,
        fmt: OutputFormat = FormatOpt,
        digits: Optional[int] = DigitsOpt,
        out: Optional[Path] = OutOpt,
):
    """Exact moments of the collector minimum, with v_n and the ratio (V/N^2)/v_n."""
    with exit_codes():
        ctx, config = _setup(bits, fmt, digits, out)
        exact, gap = service.oracle_table(coupons, players, tol, ctx)
        emit([oracle_record(exact, gap, config.digits)], config)


@app.command()
def quadrature(
        n: int = typer.Option(1, "--n"),
        tol: float = typer.Option(1e-25, "--tol", help="Relative level-to-level tolerance"),
        selftest: bool = typer.Option(False, "--selftest", help="Check the Gamma-derivative integrals instead"),
        bits: Optional[int] = BitsOpt,
        fmt: OutputFormat = FormatOpt,
        digits: Optional[int] = DigitsOpt,
        out: Optional[Path] = OutOpt,
):
    """Quadrature E[Y], E[Y^2], V[Y] next to the certified sums (heuristic errors)."""
    with exit_codes():
        ctx, config = _setup(bits, fmt, digits, out)
        if selftest:
            records = [
                {
                    "quantity": label,
                    "value": fmt_value(got.value, config.digits),
                    "est_error": fmt_error(got.abs_error),
                    "expected": fmt_value(expected.value, config.digits),
                    "expected_err": fmt_error(expected.abs_error),
                }
                for label, got, expected in service.selftest_table(ctx, tol)
            ]
        else:
            records = [
                quadrature_record(label, n, result, config.digits, summed)
                for label, result, summed in service.quadrature_table(n, tol, ctx)
            ]
        emit(records, config)


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------
def run(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return the exit code instead of exiting."""
    try:
        code = app(args=argv, standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return ExitCode.USAGE
    except click.Abort:
        return ExitCode.USAGE
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(run())
