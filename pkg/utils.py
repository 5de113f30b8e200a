import logging
import math
import os
from typing import List, Optional

import numpy as np
from rich.console import Console
from rich.logging import RichHandler

from exceptions import ConfigurationError, DomainError
from models import DEFAULT_BITS, UINT64_MAX, SumMethod

logger = logging.getLogger(__name__)

BITS_ENV = "FINDIFF_BITS"
LOG_LEVEL_ENV = "FINDIFF_LOG_LEVEL"
DEFAULT_GRID = (10, 100, 1000, 10000)
METHOD_ALIASES = {"direct": SumMethod.DIRECT_BIGFLOAT, "prime": SumMethod.PRIME_FACTORED}


def configure_logging(verbose: bool = False) -> None:
    """Route every logger through rich on stderr; stdout stays reserved for reports."""
    level = "DEBUG" if verbose else os.getenv(LOG_LEVEL_ENV, "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        raise ConfigurationError(f"{LOG_LEVEL_ENV}={level!r} is not a logging level")
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def resolve_bits(flag: Optional[int]) -> int:
    """
    Working precision: --bits flag, then FINDIFF_BITS, then the built-in default.
    """
    if flag is not None:
        return flag
    raw = os.getenv(BITS_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_BITS
    try:
        bits = int(raw)
    except ValueError:
        raise ConfigurationError(f"{BITS_ENV}={raw!r} is not an integer") from None
    if bits < 64:
        raise ConfigurationError(f"{BITS_ENV}={bits} is below the 64-bit minimum")
    return bits


def decimal_capacity(bits: int) -> int:
    """Decimal digits a `bits`-bit mantissa can carry."""
    return math.floor(bits * math.log10(2))


def check_digits(digits: int, bits: int) -> None:
    capacity = decimal_capacity(bits)
    if digits > capacity:
        raise DomainError(f"--digits {digits} exceeds the {capacity} digits {bits} bits can carry")


def parse_grid(text: Optional[str]) -> List[int]:
    if text is None or text.strip() == "":
        return list(DEFAULT_GRID)
    try:
        grid = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise DomainError(f"grid must be comma-separated integers, got {text!r}") from None
    if not grid:
        raise DomainError("grid is empty")
    return grid


def parse_method(name: Optional[str]) -> Optional[SumMethod]:
    if name is None:
        return None
    try:
        return METHOD_ALIASES[name.lower()]
    except KeyError:
        raise DomainError(f"method must be one of {sorted(METHOD_ALIASES)}, got {name!r}") from None


def entropy_seed(seed: Optional[int]) -> int:
    if seed is not None:
        if not 0 <= seed <= UINT64_MAX:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        return seed
    fresh = int(np.random.SeedSequence().entropy) & UINT64_MAX
    logger.warning("no --seed given; using entropy seed %d", fresh)
    return fresh
