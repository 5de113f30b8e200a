from __future__ import annotations

from enum import Enum, IntEnum
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional

import mpmath
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    field_validator,
    model_validator,
)

from exceptions import DomainError

DEFAULT_BITS = 128
DEFAULT_GUARD_BITS = 32
DEFAULT_ESCALATIONS = 4
SUPPORTED_BIT_GENERATORS = ("PCG64", "PCG64DXSM", "Philox", "SFC64", "MT19937")
UINT64_MAX = (1 << 64) - 1


# --- High-precision scalars ---
def _to_mpf(value: Any) -> mpmath.mpf:
    if isinstance(value, mpmath.mpf):
        return value
    if isinstance(value, bool):
        raise ValueError("booleans are not real numbers here")
    if isinstance(value, int):
        # integers enter exactly, whatever their size
        with mpmath.workprec(max(mpmath.mp.prec, value.bit_length() + 1)):
            return mpmath.mpf(value)
    if isinstance(value, (float, str)):
        return mpmath.mpf(value)
    raise ValueError(f"cannot interpret {type(value).__name__} as a high-precision real")


HPReal = Annotated[
    mpmath.mpf,
    BeforeValidator(_to_mpf),
    PlainSerializer(lambda v: mpmath.nstr(v, 40), return_type=str),
]


def rounding_bound(x: mpmath.mpf) -> mpmath.mpf:
    """Bound on the error of one round-to-nearest step that produced x."""
    return mpmath.ldexp(abs(x), 1 - mpmath.mp.prec)


def padded(err: mpmath.mpf) -> mpmath.mpf:
    """Inflate an error ledger entry so its own rounding stays covered."""
    return err + mpmath.ldexp(err, 4 - mpmath.mp.prec)


class ErrorBounded(BaseModel):
    """
    A high-precision real with a certified absolute error bound.

    Arithmetic runs at the active mpmath precision; each operation adds its
    rounding to the ledger, so callers only need to pick the precision.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    value: HPReal = Field(..., description="Midpoint of the certified interval")
    abs_error: HPReal = Field(
        default_factory=lambda: mpmath.mpf(0),
        description="Radius of the certified interval",
    )

    @field_validator("abs_error")
    @classmethod
    def _finite_nonnegative(cls, v: mpmath.mpf) -> mpmath.mpf:
        if not mpmath.isfinite(v) or v < 0:
            raise ValueError("abs_error must be finite and nonnegative")
        return v

    @classmethod
    def exact(cls, value: Any) -> "ErrorBounded":
        return cls(value=value, abs_error=0)

    @property
    def lower(self) -> mpmath.mpf:
        return mpmath.fsub(self.value, self.abs_error, exact=True)

    @property
    def upper(self) -> mpmath.mpf:
        return mpmath.fadd(self.value, self.abs_error, exact=True)

    def contains(self, x: Any) -> bool:
        return self.lower <= _to_mpf(x) <= self.upper

    def overlaps(self, other: "ErrorBounded") -> bool:
        gap = mpmath.fsub(self.value, other.value, exact=True)
        return abs(gap) <= mpmath.fadd(self.abs_error, other.abs_error, exact=True)

    def certified_sign(self) -> int:
        """+1 or -1 when the whole interval has that sign, 0 when it straddles zero."""
        if self.lower > 0:
            return 1
        if self.upper < 0:
            return -1
        return 0

    def __neg__(self) -> "ErrorBounded":
        return ErrorBounded(value=-self.value, abs_error=self.abs_error)

    def __add__(self, other: Any) -> "ErrorBounded":
        other = _lift(other)
        r = self.value + other.value
        return ErrorBounded(
            value=r,
            abs_error=padded(self.abs_error + other.abs_error + rounding_bound(r)),
        )

    __radd__ = __add__

    def __sub__(self, other: Any) -> "ErrorBounded":
        return self + (-_lift(other))

    def __rsub__(self, other: Any) -> "ErrorBounded":
        return _lift(other) + (-self)

    def __mul__(self, other: Any) -> "ErrorBounded":
        if isinstance(other, int) and not isinstance(other, bool):
            r = self.value * other
            err = abs(other) * self.abs_error + rounding_bound(r)
            return ErrorBounded(value=r, abs_error=padded(err))
        other = _lift(other)
        r = self.value * other.value
        err = (
            abs(self.value) * other.abs_error
            + abs(other.value) * self.abs_error
            + self.abs_error * other.abs_error
            + rounding_bound(r)
        )
        return ErrorBounded(value=r, abs_error=padded(err))

    __rmul__ = __mul__

    def __truediv__(self, k: int) -> "ErrorBounded":
        if not isinstance(k, int) or isinstance(k, bool):
            raise TypeError("ErrorBounded only divides by exact integers")
        if k == 0:
            raise DomainError("division by zero")
        r = self.value / k
        return ErrorBounded(value=r, abs_error=padded(self.abs_error / abs(k) + rounding_bound(r)))

    def square(self) -> "ErrorBounded":
        return self * self

    def __str__(self) -> str:
        return f"{mpmath.nstr(self.value, 20)} ± {mpmath.nstr(self.abs_error, 3)}"


def _lift(x: Any) -> ErrorBounded:
    if isinstance(x, ErrorBounded):
        return x
    return ErrorBounded.exact(x)


# --- Precision plumbing ---
class PrecisionContext(BaseModel):
    model_config = ConfigDict(frozen=True)

    bits: int = Field(DEFAULT_BITS, ge=64, description="Binary working precision")
    guard_bits: int = Field(DEFAULT_GUARD_BITS, ge=0, description="Extra bits carried on top of `bits`")
    max_auto_escalations: int = Field(
        DEFAULT_ESCALATIONS, ge=0, description="How many times guard_bits may be doubled"
    )

    @property
    def effective_bits(self) -> int:
        return self.bits + self.guard_bits

    def escalated(self) -> "PrecisionContext":
        return self.model_copy(update={"guard_bits": 2 * max(self.guard_bits, 8)})

    def widened(self, extra_bits: int) -> "PrecisionContext":
        return self.model_copy(update={"bits": self.bits + extra_bits})


class ConstantPool(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bits: int = Field(..., description="Precision the pool was certified for")
    prime_limit: int = Field(..., description="Every prime up to this bound has a cached logarithm")
    gamma: ErrorBounded = Field(..., description="Euler-Mascheroni constant")
    zeta2: ErrorBounded = Field(..., description="pi^2/6")
    ln_prime_cache: Dict[int, ErrorBounded] = Field(..., description="ln p for primes p <= prime_limit")

    def ln_prime(self, p: int) -> ErrorBounded:
        try:
            return self.ln_prime_cache[p]
        except KeyError:
            raise DomainError(f"{p} is not a cached prime (limit {self.prime_limit})") from None


# --- Finite-difference rows ---
class SumMethod(str, Enum):
    DIRECT_BIGFLOAT = "direct_bigfloat"
    PRIME_FACTORED = "prime_factored"


class CoeffRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="Number of players / sample size")
    c_n: ErrorBounded = Field(..., description="-(1/n) sum (-1)^j C(n,j) ln j")
    w_n: ErrorBounded = Field(..., description="-(1/n) sum (-1)^j C(n,j) (ln j)^2")
    v_n: ErrorBounded = Field(..., description="pi^2/6 + n w_n - n^2 c_n^2")
    mean_Y: ErrorBounded = Field(..., description="E[ln max of n unit exponentials]")
    second_moment_Y: ErrorBounded = Field(..., description="E[(ln max)^2]")


class VerificationRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    v_n: ErrorBounded
    certified_positive: bool


class DifferenceRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., description="Left index; the row holds v_{n+1} - v_n")
    difference: ErrorBounded
    certified_sign: int = Field(..., ge=-1, le=1)


# --- Quadrature ---
class QuadratureResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    value: HPReal
    est_error: HPReal = Field(..., description="Difference between the last two refinement levels")
    levels_used: int = Field(..., ge=1)
    node_count: int = Field(..., gt=0)
    level_errors: List[float] = Field(default_factory=list, description="Level-to-level differences, oldest first")

    @field_validator("est_error")
    @classmethod
    def _nonnegative(cls, v: mpmath.mpf) -> mpmath.mpf:
        if v < 0:
            raise ValueError("est_error must be nonnegative")
        return v


# --- Asymptotic expansions ---
class ExpansionReport(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    expansion: Literal["s1", "s2"]
    n: int
    exact: ErrorBounded
    truncated: HPReal
    residual: HPReal = Field(..., description="exact.value - truncated")
    scaled_residual: HPReal = Field(..., description="residual divided by the claimed O-rate")


class VarianceDecayRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    v_n: ErrorBounded


class ResidualScan(BaseModel):
    model_config = ConfigDict(frozen=True)

    s1: List[ExpansionReport]
    s2: List[ExpansionReport]
    variance: List[VarianceDecayRow]

    @staticmethod
    def _strictly_decreasing(values: List[Any]) -> bool:
        return all(b < a for a, b in zip(values, values[1:]))

    @property
    def residuals_decreasing(self) -> Dict[str, bool]:
        return {
            "s1": self._strictly_decreasing([abs(r.residual) for r in self.s1]),
            "s2": self._strictly_decreasing([abs(r.residual) for r in self.s2]),
        }

    @property
    def variance_decreasing(self) -> bool:
        return self._strictly_decreasing([row.v_n.value for row in self.variance])


# --- Monte Carlo and exact collector oracles ---
class RngSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    algorithm_id: str = Field("PCG64", description="numpy bit generator name")
    seed: int = Field(..., ge=0, le=UINT64_MAX)
    stream: int = Field(0, ge=0, le=UINT64_MAX)

    @field_validator("algorithm_id")
    @classmethod
    def _known_algorithm(cls, v: str) -> str:
        if v not in SUPPORTED_BIT_GENERATORS:
            raise ValueError(f"unsupported bit generator {v!r}; choose from {SUPPORTED_BIT_GENERATORS}")
        return v


class SimReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["maxexp", "ccp"]
    trials: int = Field(..., gt=0)
    mean: float
    variance: float = Field(..., ge=0, description="Unbiased sample variance")
    mean_std_err: float = Field(..., ge=0)
    variance_std_err: float = Field(..., ge=0)
    rng: RngSpec
    reference_mean: Optional[float] = None
    reference_variance: Optional[float] = None

    @property
    def mean_z(self) -> Optional[float]:
        if self.reference_mean is None or self.mean_std_err == 0:
            return None
        return (self.mean - self.reference_mean) / self.mean_std_err

    @property
    def variance_z(self) -> Optional[float]:
        if self.reference_variance is None or self.variance_std_err == 0:
            return None
        return (self.variance - self.reference_variance) / self.variance_std_err


class ExactMomentReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    N: int = Field(..., ge=1, description="Coupon types")
    n: int = Field(..., ge=1, description="Players")
    mean: float
    second_moment: float
    variance: float
    truncation_error: float = Field(..., ge=0)
    t_max: int = Field(..., ge=0, description="Truncation horizon")

    @model_validator(mode="after")
    def _variance_consistent(self) -> "ExactMomentReport":
        if self.variance < -self.truncation_error:
            raise ValueError("variance negative beyond truncation error")
        return self


class GapRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    N: int
    variance_scaled: float = Field(..., description="V[M]/N^2 from the exact oracle")
    v_n: float
    ratio: float


# --- Output ---
class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class OutputConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    format: OutputFormat = OutputFormat.CSV
    digits: int = Field(30, ge=1, description="Decimal digits printed for high-precision values")
    path: Optional[Path] = None


class ExitCode(IntEnum):
    SUCCESS = 0
    USAGE = 1
    PRECISION_LOSS = 2
    THEOREM_CONTRADICTION = 3
    CONJECTURE_COUNTEREXAMPLE = 4
