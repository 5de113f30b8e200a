import io
import json

import pandas as pd
import pytest
from typer.testing import CliRunner

import main
import service
from main import app, run
from models import DifferenceRow, ErrorBounded, ExitCode, VerificationRow

runner = CliRunner(mix_stderr=False)


def invoke(*args, env=None):
    return runner.invoke(app, list(args), env=env)


def csv_rows(result):
    return pd.read_csv(io.StringIO(result.stdout), dtype=str, keep_default_na=False)


# --- coeffs ---


def test_coeffs_csv_three_rows():
    result = invoke("coeffs", "--n-min", "1", "--n-max", "3", "--format", "csv")
    assert result.exit_code == ExitCode.SUCCESS, result.stderr
    frame = csv_rows(result)
    assert list(frame["n"]) == ["1", "2", "3"]
    assert {"c_n", "c_n_err", "w_n", "v_n", "v_n_err", "mean_Y", "second_moment_Y"} <= set(frame.columns)
    assert float(frame.loc[0, "c_n"]) == 0.0
    assert float(frame.loc[0, "v_n"]) == pytest.approx(1.6449341, abs=1e-7)
    assert float(frame.loc[1, "v_n"]) == pytest.approx(0.6840281, abs=1e-7)


def test_coeffs_prints_requested_digits_and_scientific_errors():
    result = invoke("coeffs", "--n-max", "2", "--digits", "20")
    frame = csv_rows(result)
    v2 = frame.loc[1, "v_n"]
    assert len(v2.replace("0.", "", 1)) == 20
    assert "e" in frame.loc[1, "v_n_err"]


def test_csv_and_json_carry_identical_values():
    as_csv = csv_rows(invoke("coeffs", "--n-max", "4", "--method", "direct"))
    as_json = json.loads(invoke("coeffs", "--n-max", "4", "--method", "direct", "--format", "json").stdout)
    assert as_csv.to_dict(orient="records") == as_json


def test_coeffs_bad_range_is_usage_error():
    result = invoke("coeffs", "--n-min", "5", "--n-max", "4")
    assert result.exit_code == ExitCode.USAGE
    assert "n_min" in result.stderr
    assert result.stdout == ""


def test_digits_beyond_precision_is_usage_error():
    assert invoke("coeffs", "--n-max", "2", "--bits", "64", "--digits", "25").exit_code == ExitCode.USAGE


def test_unknown_method_is_usage_error():
    assert invoke("coeffs", "--n-max", "2", "--method", "magic").exit_code == ExitCode.USAGE


def test_bits_from_environment(monkeypatch):
    seen = {}

    def spy(n_min, n_max, ctx, method=None, workers=1):
        seen["bits"] = ctx.bits
        return []

    monkeypatch.setattr(service, "coeff_table", spy)
    invoke("coeffs", "--n-max", "1", env={"FINDIFF_BITS": "192"})
    assert seen["bits"] == 192
    invoke("coeffs", "--n-max", "1", "--bits", "256", env={"FINDIFF_BITS": "192"})
    assert seen["bits"] == 256
    invoke("coeffs", "--n-max", "1", env={"FINDIFF_BITS": ""})
    assert seen["bits"] == 128


def test_bad_environment_bits_is_usage_error():
    assert invoke("coeffs", "--n-max", "1", env={"FINDIFF_BITS": "lots"}).exit_code == ExitCode.USAGE
    assert invoke("coeffs", "--n-max", "1", env={"FINDIFF_BITS": "32"}).exit_code == ExitCode.USAGE


def test_out_writes_file(tmp_path):
    target = tmp_path / "rows.json"
    result = invoke("coeffs", "--n-max", "2", "--format", "json", "--out", str(target))
    assert result.exit_code == ExitCode.SUCCESS
    assert result.stdout == ""
    assert [row["n"] for row in json.loads(target.read_text())] == ["1", "2"]


# --- verify and conjecture ---


def test_verify_small_range_succeeds():
    result = invoke("verify", "--n-max", "100")
    assert result.exit_code == ExitCode.SUCCESS, result.stderr
    frame = csv_rows(result)
    assert len(frame) == 100
    assert set(frame["certified_positive"]) == {"true"}


def test_verify_zero_is_usage_error():
    assert invoke("verify", "--n-max", "0").exit_code == ExitCode.USAGE


def test_verify_flags_a_nonpositive_value(monkeypatch):
    bad = [VerificationRow(n=1, v_n=ErrorBounded(value=-1, abs_error="0.1"), certified_positive=False)]
    monkeypatch.setattr(service, "verify_table", lambda n_max, ctx, workers=1: bad)
    assert invoke("verify", "--n-max", "1").exit_code == ExitCode.THEOREM_CONTRADICTION


def test_conjecture_small_range():
    result = invoke("conjecture", "--n-max", "3")
    assert result.exit_code == ExitCode.SUCCESS, result.stderr
    frame = csv_rows(result)
    assert list(frame["certified_sign"]) == ["-1", "-1"]
    assert float(frame.loc[0, "difference"]) == pytest.approx(-0.9609, abs=1e-4)
    assert float(frame.loc[1, "difference"]) == pytest.approx(-0.2355, abs=1e-4)


def test_conjecture_one_is_usage_error():
    assert invoke("conjecture", "--n-max", "1").exit_code == ExitCode.USAGE


@pytest.mark.parametrize(
    "signs,code",
    [
        ((-1, 1), ExitCode.CONJECTURE_COUNTEREXAMPLE),
        ((-1, 0), ExitCode.PRECISION_LOSS),
        ((1, 0), ExitCode.CONJECTURE_COUNTEREXAMPLE),
    ],
)
def test_conjecture_exit_precedence(monkeypatch, signs, code):
    rows = [
        DifferenceRow(n=i + 1, difference=ErrorBounded(value=s, abs_error="0.5"), certified_sign=s)
        for i, s in enumerate(signs)
    ]
    monkeypatch.setattr(service, "conjecture_table", lambda n_max, ctx, workers=1: rows)
    assert invoke("conjecture", "--n-max", "3").exit_code == code


# --- asymptotics, simulate, oracle, quadrature ---


def test_asymptotics_grid():
    result = invoke("asymptotics", "--grid", "10,100,1000")
    assert result.exit_code == ExitCode.SUCCESS, result.stderr
    frame = csv_rows(result)
    assert len(frame) == 6
    assert list(frame["expansion"]) == ["s1", "s2"] * 3
    assert {"residual", "scaled_residual", "v_n"} <= set(frame.columns)


def test_asymptotics_rejects_two():
    assert invoke("asymptotics", "--grid", "2,10").exit_code == ExitCode.USAGE


def test_simulate_maxexp():
    result = invoke("simulate", "maxexp", "--n", "2", "--trials", "100000", "--seed", "42")
    assert result.exit_code == ExitCode.SUCCESS, result.stderr
    record = csv_rows(result).iloc[0]
    assert float(record["mean"]) == pytest.approx(0.1159, abs=0.02)
    assert record["seed"] == "42"


def test_simulate_ccp():
    result = invoke("simulate", "ccp", "--N", "2", "--players", "2", "--trials", "100000", "--seed", "7")
    assert result.exit_code == ExitCode.SUCCESS, result.stderr
    record = csv_rows(result).iloc[0]
    assert float(record["variance"]) == pytest.approx(4 / 9, abs=0.02)
    assert abs(float(record["variance_z"])) < 5


def test_simulate_is_reproducible():
    args = ("simulate", "ccp", "--N", "5", "--players", "2", "--trials", "5000", "--seed", "11")
    assert invoke(*args).stdout == invoke(*args).stdout


def test_simulate_without_seed_logs_entropy_seed():
    result = invoke("simulate", "maxexp", "--n", "1", "--trials", "100")
    assert result.exit_code == ExitCode.SUCCESS
    assert "entropy" in result.stderr


def test_simulate_zero_types_is_usage_error():
    assert invoke("simulate", "ccp", "--N", "0", "--trials", "10", "--seed", "1").exit_code == ExitCode.USAGE


def test_oracle_two_two():
    result = invoke("oracle", "--N", "2", "--players", "2")
    assert result.exit_code == ExitCode.SUCCESS, result.stderr
    record = csv_rows(result).iloc[0]
    assert float(record["mean"]) == pytest.approx(7 / 3, abs=1e-11)
    assert float(record["variance"]) == pytest.approx(4 / 9, abs=1e-11)
    assert record["ratio"] != ""


def test_oracle_single_type():
    record = csv_rows(invoke("oracle", "--N", "1", "--players", "5")).iloc[0]
    assert float(record["variance"]) == 0.0
    assert record["ratio"] == ""


def test_quadrature_selftest():
    result = invoke("quadrature", "--selftest")
    assert result.exit_code == ExitCode.SUCCESS, result.stderr
    frame = csv_rows(result)
    for _, row in frame.iterrows():
        assert float(row["value"]) == pytest.approx(float(row["expected"]), abs=1e-15)


def test_quadrature_next_to_summation():
    frame = csv_rows(invoke("quadrature", "--n", "5", "--tol", "1e-20"))
    assert list(frame["quantity"]) == ["mean_Y", "second_moment_Y", "v_n"]
    for _, row in frame.iterrows():
        assert float(row["value"]) == pytest.approx(float(row["summation"]), abs=1e-15)


# --- entry point ---


def test_run_returns_exit_codes():
    assert run(["coeffs", "--n-max", "1"]) == ExitCode.SUCCESS
    assert run(["verify", "--n-max", "0"]) == ExitCode.USAGE
    assert run(["coeffs", "--no-such-flag"]) == ExitCode.USAGE


def test_exit_code_mapping_for_precision_loss(monkeypatch):
    from exceptions import PrecisionLossError

    def boom(*args, **kwargs):
        raise PrecisionLossError(7, 160, "forced")

    monkeypatch.setattr(main.service, "coeff_table", boom)
    result = invoke("coeffs", "--n-max", "7")
    assert result.exit_code == ExitCode.PRECISION_LOSS
    assert "n=7" in result.stderr
