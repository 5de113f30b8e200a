# filename: report_emit.py
# --------------------------------------------------------------- #
from typing import Dict, List, Optional, Sequence

import mpmath
import pandas as pd
import typer

from models import (
    CoeffRow,
    DifferenceRow,
    ErrorBounded,
    ExactMomentReport,
    ExpansionReport,
    GapRow,
    OutputConfig,
    OutputFormat,
    QuadratureResult,
    SimReport,
    VarianceDecayRow,
    VerificationRow,
)

Record = Dict[str, str]


# --- Scalar formatting ---


def fmt_value(x: mpmath.mpf, digits: int) -> str:
    """Plain decimal with exactly `digits` significant digits."""
    return mpmath.nstr(x, digits, strip_zeros=False, min_fixed=-mpmath.inf, max_fixed=mpmath.inf)


def fmt_error(err: mpmath.mpf) -> str:
    # always scientific
    return mpmath.nstr(err, 3, min_fixed=0, max_fixed=0)


def fmt_float(x: Optional[float], digits: int) -> str:
    if x is None:
        return ""
    return format(x, f".{min(digits, 17)}g")


def _bounded(prefix: str, x: ErrorBounded, digits: int) -> Record:
    return {prefix: fmt_value(x.value, digits), f"{prefix}_err": fmt_error(x.abs_error)}


# --- Records ---


def coeff_record(row: CoeffRow, digits: int) -> Record:
    record = {"n": str(row.n)}
    for name in ("c_n", "w_n", "v_n", "mean_Y", "second_moment_Y"):
        record.update(_bounded(name, getattr(row, name), digits))
    return record


def verification_record(row: VerificationRow, digits: int) -> Record:
    return {
        "n": str(row.n),
        **_bounded("v_n", row.v_n, digits),
        "certified_positive": str(row.certified_positive).lower(),
    }


def difference_record(row: DifferenceRow, digits: int) -> Record:
    return {
        "n": str(row.n),
        **_bounded("difference", row.difference, digits),
        "certified_sign": str(row.certified_sign),
    }


def expansion_record(report: ExpansionReport, decay: VarianceDecayRow, digits: int) -> Record:
    return {
        "expansion": report.expansion,
        "n": str(report.n),
        **_bounded("exact", report.exact, digits),
        "truncated": fmt_value(report.truncated, digits),
        "residual": fmt_value(report.residual, digits),
        "scaled_residual": fmt_value(report.scaled_residual, digits),
        **_bounded("v_n", decay.v_n, digits),
    }


def quadrature_record(
        label: str, n: int, result: QuadratureResult, digits: int, summation: Optional[ErrorBounded] = None
) -> Record:
    record = {
        "quantity": label,
        "n": str(n),
        "value": fmt_value(result.value, digits),
        "est_error": fmt_error(result.est_error),
        "levels_used": str(result.levels_used),
        "node_count": str(result.node_count),
        "summation": "",
        "summation_err": "",
    }
    if summation is not None:
        record.update({"summation": fmt_value(summation.value, digits), "summation_err": fmt_error(summation.abs_error)})
    return record


def sim_record(report: SimReport, digits: int) -> Record:
    return {
        "kind": report.kind,
        "trials": str(report.trials),
        "mean": fmt_float(report.mean, digits),
        "variance": fmt_float(report.variance, digits),
        "mean_std_err": fmt_float(report.mean_std_err, digits),
        "variance_std_err": fmt_float(report.variance_std_err, digits),
        "algorithm_id": report.rng.algorithm_id,
        "seed": str(report.rng.seed),
        "stream": str(report.rng.stream),
        "reference_mean": fmt_float(report.reference_mean, digits),
        "reference_variance": fmt_float(report.reference_variance, digits),
        "mean_z": fmt_float(report.mean_z, 4),
        "variance_z": fmt_float(report.variance_z, 4),
    }


def oracle_record(report: ExactMomentReport, gap: Optional[GapRow], digits: int) -> Record:
    return {
        "N": str(report.N),
        "n": str(report.n),
        "mean": fmt_float(report.mean, digits),
        "second_moment": fmt_float(report.second_moment, digits),
        "variance": fmt_float(report.variance, digits),
        "truncation_error": fmt_float(report.truncation_error, 3),
        "t_max": str(report.t_max),
        "v_n": fmt_float(gap.v_n if gap else None, digits),
        "ratio": fmt_float(gap.ratio if gap else None, digits),
    }


# --- Emission ---


def to_frame(records: Sequence[Record]) -> pd.DataFrame:
    return pd.DataFrame.from_records(list(records), columns=list(records[0]) if records else None).astype(str)


def render(records: Sequence[Record], fmt: OutputFormat) -> str:
    frame = to_frame(records)
    if fmt is OutputFormat.JSON:
        return frame.to_json(orient="records", indent=2) + "\n"
    return frame.to_csv(index=False)


def emit(records: List[Record], out: OutputConfig) -> None:
    """Write the table to out.path, or to stdout when no path is set."""
    text = render(records, out.format)
    if out.path is not None:
        out.path.write_text(text)
    else:
        typer.echo(text, nl=False)
