import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from exceptions import DomainError, FindiffError, TruncationError
from models import ExactMomentReport, GapRow, PrecisionContext, RngSpec, SimReport
from sumcalc.findiff import coeff_row
from sumcalc.integralrep import mean_y_quad, variance_y_quad

logger = logging.getLogger(__name__)

# --- 1. Constants and Configuration ---
CHUNK_TRIALS = 65536
HORIZON_CAP = 10 ** 7
MAX_LOG_BOUND = 700.0  # exp() of anything larger is treated as unbounded
SUMMATION_REFERENCE_LIMIT = 2000
QUADRATURE_REFERENCE_TOL = 1e-20
ORACLE_REFERENCE_LIMIT = 5000
ORACLE_REFERENCE_TOL = 1e-9

ChunkTask = Tuple[RngSpec, int, int, int, int]


# --- 2. Reproducible streams ---


def chunk_generator(rng: RngSpec, chunk: int) -> np.random.Generator:
    """Generator for one chunk; depends only on (algorithm_id, seed, stream, chunk)."""
    seq = np.random.SeedSequence(entropy=rng.seed, spawn_key=(rng.stream, chunk))
    bit_generator = getattr(np.random, rng.algorithm_id)(seq)
    return np.random.Generator(bit_generator)


def _chunk_sizes(trials: int) -> List[int]:
    full, rest = divmod(trials, CHUNK_TRIALS)
    return [CHUNK_TRIALS] * full + ([rest] if rest else [])


def _run_chunks(
        draw: Callable[[ChunkTask], np.ndarray], rng: RngSpec, trials: int, a: int, b: int, workers: int
) -> np.ndarray:
    tasks = [(rng, index, size, a, b) for index, size in enumerate(_chunk_sizes(trials))]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map keeps chunk order, so the reduction is schedule-independent
            parts = list(pool.map(draw, tasks))
    else:
        parts = [draw(task) for task in tasks]
    return np.concatenate(parts)


def _draw_log_max_exp(task: ChunkTask) -> np.ndarray:
    rng, chunk, size, n, _ = task
    gen = chunk_generator(rng, chunk)
    u = gen.random(size)
    while True:
        zeros = u == 0.0
        if not zeros.any():
            break
        u[zeros] = gen.random(int(zeros.sum()))
    # W = F^{-1}(U) = -ln(1 - U^{1/n}), Y = ln W
    w = -np.log(-np.expm1(np.log(u) / n))
    return np.log(w)


def _draw_ccp_min(task: ChunkTask) -> np.ndarray:
    rng, chunk, size, coupons, players = task
    gen = chunk_generator(rng, chunk)
    times = np.zeros((size, players), dtype=np.int64)
    # the k-th new type arrives after Geometric((N-k)/N) draws
    for k in range(coupons):
        times += gen.geometric((coupons - k) / coupons, size=(size, players))
    return times.min(axis=1).astype(np.float64)


def _summarize(samples: np.ndarray) -> Tuple[float, float, float, float]:
    count = samples.size
    mean = float(samples.mean())
    variance = float(samples.var(ddof=1))
    centred = samples - mean
    m4 = float(np.mean(centred ** 4))
    mean_se = float(np.sqrt(variance / count))
    spread = m4 - (count - 3) / (count - 1) * variance ** 2
    variance_se = float(np.sqrt(max(spread, 0.0) / count))
    return mean, variance, mean_se, variance_se


# --- 3. Samplers ---


def _maxexp_reference(n: int, ctx: PrecisionContext) -> Tuple[Optional[float], Optional[float]]:
    try:
        if n <= SUMMATION_REFERENCE_LIMIT:
            row = coeff_row(n, ctx)
            return float(row.mean_Y.value), float(row.v_n.value)
        return (
            float(mean_y_quad(n, QUADRATURE_REFERENCE_TOL, ctx).value),
            float(variance_y_quad(n, QUADRATURE_REFERENCE_TOL, ctx).value),
        )
    except FindiffError as exc:
        logger.warning("no reference for n=%d: %s", n, exc)
        return None, None


def sample_log_max_exp(
        n: int,
        trials: int,
        rng: RngSpec,
        ctx: Optional[PrecisionContext] = None,
        workers: int = 1,
) -> SimReport:
    """
    Sample Y = ln max of n unit exponentials by inversion, one uniform per
    sample, with E[Y] and v_n as references.
    """
    if n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    if trials < 2:
        raise DomainError(f"need at least 2 trials, got {trials}")
    samples = _run_chunks(_draw_log_max_exp, rng, trials, n, 0, workers)
    mean, variance, mean_se, variance_se = _summarize(samples)
    reference_mean, reference_variance = _maxexp_reference(n, ctx or PrecisionContext())
    return SimReport(
        kind="maxexp",
        trials=samples.size,
        mean=mean,
        variance=variance,
        mean_std_err=mean_se,
        variance_std_err=variance_se,
        rng=rng,
        reference_mean=reference_mean,
        reference_variance=reference_variance,
    )


def simulate_ccp_min(coupons: int, players: int, trials: int, rng: RngSpec, workers: int = 1) -> SimReport:
    """Minimum over `players` independent collectors of the time to see all `coupons` types."""
    if coupons < 1 or players < 1:
        raise DomainError(f"need N >= 1 and n >= 1, got N={coupons}, n={players}")
    if trials < 2:
        raise DomainError(f"need at least 2 trials, got {trials}")
    samples = _run_chunks(_draw_ccp_min, rng, trials, coupons, players, workers)
    mean, variance, mean_se, variance_se = _summarize(samples)

    reference_mean = reference_variance = None
    if coupons <= ORACLE_REFERENCE_LIMIT:
        try:
            exact = ccp_exact_min_moments(coupons, players, ORACLE_REFERENCE_TOL)
            reference_mean, reference_variance = exact.mean, exact.variance
        except TruncationError as exc:
            logger.warning("no oracle reference: %s", exc)
    return SimReport(
        kind="ccp",
        trials=samples.size,
        mean=mean,
        variance=variance,
        mean_std_err=mean_se,
        variance_std_err=variance_se,
        rng=rng,
        reference_mean=reference_mean,
        reference_variance=reference_variance,
    )


# --- 4. Exact oracle ---


def _survival_steps(coupons: int) -> Iterator[float]:
    """S(0), S(1), ... with S(t) = P(T_N > t), from the distinct-count chain."""
    k = np.arange(coupons + 1, dtype=np.float64)
    stay = k / coupons
    advance = (coupons - k[:-1]) / coupons
    dist = np.zeros(coupons + 1)
    dist[0] = 1.0
    while True:
        yield float(dist[:coupons].sum())
        moved = dist[:-1] * advance
        dist = dist * stay
        dist[1:] += moved


def survival_curve(coupons: int, t_max: int) -> np.ndarray:
    """P(T_N > t) for t = 0..t_max."""
    if coupons < 1:
        raise DomainError(f"N must be >= 1, got {coupons}")
    if t_max < 0:
        raise DomainError(f"t_max must be >= 0, got {t_max}")
    steps = _survival_steps(coupons)
    return np.fromiter((next(steps) for _ in range(t_max + 1)), dtype=np.float64, count=t_max + 1)


def _tail_bounds(coupons: int, players: int, t0: int) -> Tuple[float, float]:
    """
    Bounds on sum_{t>=t0} S(t)^n and sum_{t>=t0} (2t+1) S(t)^n from
    S(t) <= N (1 - 1/N)^t.
    """
    if coupons == 1:
        return (0.0, 0.0) if t0 >= 1 else (np.inf, np.inf)
    log_q = players * np.log1p(-1.0 / coupons)
    q = np.exp(log_q)
    one_minus_q = -np.expm1(log_q)
    log_head = players * np.log(coupons) + t0 * log_q
    log_first = log_head - np.log(one_minus_q)
    if log_first > MAX_LOG_BOUND:
        return np.inf, np.inf
    head = np.exp(log_head)
    first = head / one_minus_q
    second = head * ((2 * t0 + 1) / one_minus_q + 2 * q / one_minus_q ** 2)
    return float(first), float(second)


def ccp_exact_min_moments(
        coupons: int, players: int, tol: float, horizon_cap: int = HORIZON_CAP
) -> ExactMomentReport:
    """
    E[M], E[M^2] and V[M] for M the minimum of `players` i.i.d. completion
    times, summing S(t)^n until the geometric tail bound certifies the
    remaining variance contribution is below tol.
    """
    if coupons < 1 or players < 1:
        raise DomainError(f"need N >= 1 and n >= 1, got N={coupons}, n={players}")
    if not 0 < tol < 1:
        raise DomainError(f"tol must lie in (0, 1), got {tol}")

    first = second = 0.0
    bound = np.inf
    t = 0
    for t, s in enumerate(_survival_steps(coupons)):
        weight = s ** players
        first += weight
        second += (2 * t + 1) * weight
        tail1, tail2 = _tail_bounds(coupons, players, t + 1)
        bound = tail2 + (2 * first + tail1) * tail1
        if bound <= tol:
            break
        if t >= horizon_cap:
            raise TruncationError(t, f"tail bound {bound:.3e} still above tol={tol:.1e}")
    logger.debug("oracle N=%d n=%d truncated at t=%d (bound %.3e)", coupons, players, t, bound)
    return ExactMomentReport(
        N=coupons,
        n=players,
        mean=first,
        second_moment=second,
        variance=max(second - first ** 2, 0.0),
        truncation_error=bound,
        t_max=t,
    )


def gap_row(exact: ExactMomentReport, v_n: float) -> GapRow:
    scaled = exact.variance / exact.N ** 2
    return GapRow(N=exact.N, variance_scaled=scaled, v_n=v_n, ratio=scaled / v_n)


def asymptotic_gap(
        coupons_grid: Iterable[int], players: int, tol: float, ctx: PrecisionContext
) -> List[GapRow]:
    """(V[M]/N^2) / v_n along a grid of N; the ratio tends to 1 as N grows."""
    grid: Sequence[int] = list(coupons_grid)
    if any(N < 2 for N in grid):
        raise DomainError(f"every N in the grid must be >= 2, got {grid}")
    v_n = float(coeff_row(players, ctx).v_n.value)
    return [gap_row(ccp_exact_min_moments(N, players, tol), v_n) for N in grid]
