import mpmath
import pytest

from exceptions import DomainError
from models import PrecisionContext, SumMethod
from sumcalc.asymptotics import expansion_point, fs1_truncated, fs2_truncated, residual_scan
from sumcalc.integralrep import mean_y_quad, second_moment_y_quad

CTX = PrecisionContext()


def ref(fn):
    with mpmath.workprec(400):
        return fn()


GAMMA = ref(lambda: +mpmath.euler)
ZETA2 = ref(lambda: mpmath.pi ** 2 / 6)


def test_fs1_at_three_by_hand():
    expected = ref(
        lambda: mpmath.log(mpmath.log(3)) + GAMMA + GAMMA / mpmath.log(3) - (GAMMA ** 2 + ZETA2) / (2 * mpmath.log(3) ** 2)
    )
    assert abs(fs1_truncated(3, CTX) - expected) < mpmath.mpf(10) ** -30


def test_fs2_at_three_by_hand():
    def by_hand():
        L = mpmath.log(3)
        LL = mpmath.log(L)
        g2 = GAMMA ** 2
        return (
            -LL ** 2 - 2 * GAMMA * LL + ZETA2 - g2 - 2 * GAMMA * LL / L
            + (g2 + ZETA2) * LL / L ** 2 - 2 * g2 / L - (g2 - ZETA2) / L ** 2
        )

    assert abs(fs2_truncated(3, CTX) - ref(by_hand)) < mpmath.mpf(10) ** -30


@pytest.mark.parametrize("fn", [fs1_truncated, fs2_truncated])
@pytest.mark.parametrize("n", [1, 2])
def test_truncations_need_n_at_least_three(fn, n):
    with pytest.raises(DomainError):
        fn(n, CTX)


def test_fs1_increases_along_grid():
    values = [fs1_truncated(10 ** k, CTX) for k in range(1, 7)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_truncations_at_one_million_against_quadrature():
    # S1 = E[Y] + gamma and S2 = gamma^2 + pi^2/6 - 2 gamma S1 - E[Y^2]
    n = 10 ** 6
    first = mean_y_quad(n, 1e-20, CTX).value
    second = second_moment_y_quad(n, 1e-20, CTX).value
    s1 = first + GAMMA
    s2 = GAMMA ** 2 + ZETA2 - 2 * GAMMA * s1 - second
    L = mpmath.log(n)
    assert abs(s1 - fs1_truncated(n, CTX)) < 2 / L ** 3
    assert abs(s2 - fs2_truncated(n, CTX)) < 20 * mpmath.log(L) / L ** 3
    assert fs2_truncated(n, CTX) < 0


def test_expansion_point_reports():
    r1, r2, decay = expansion_point(100, CTX)
    assert (r1.expansion, r2.expansion) == ("s1", "s2")
    with mpmath.workprec(CTX.effective_bits):
        assert r1.residual == r1.exact.value - r1.truncated
    L = mpmath.log(100)
    assert abs(r1.scaled_residual - r1.residual * L ** 3) < 1e-12
    assert abs(r1.exact.value - mpmath.mpf("2.1954992220")) < 1e-8
    assert abs(decay.v_n.value - mpmath.mpf("0.0544205659")) < 1e-8


def test_residuals_stay_within_five_percent():
    scan = residual_scan([100, 300, 1000], CTX)
    for report in scan.s1:
        assert abs(report.residual) < mpmath.mpf("0.05") * abs(report.exact.value)


def test_scan_small_grid():
    scan = residual_scan([10, 100, 1000], CTX)
    assert [r.n for r in scan.s1] == [10, 100, 1000]
    assert len(scan.s2) == 3
    assert all(row.v_n.certified_sign() == 1 for row in scan.variance)
    assert scan.variance_decreasing
    scaled = [abs(r.scaled_residual) for r in scan.s1]
    assert max(scaled) < 10 * min(scaled)


def test_scan_rejects_small_n():
    with pytest.raises(DomainError):
        residual_scan([1], CTX)
    with pytest.raises(DomainError):
        residual_scan([], CTX)


def test_variance_decays_to_ten_thousand():
    scan = residual_scan([10, 100, 1000, 10000], CTX, SumMethod.PRIME_FACTORED)
    values = [row.v_n.value for row in scan.variance]
    assert all(row.v_n.certified_sign() == 1 for row in scan.variance)
    # v at 10^4 < 10^3 < 10^2 < 10, each step separated beyond the error bounds
    for bigger, smaller in zip(scan.variance, scan.variance[1:]):
        assert smaller.v_n.upper < bigger.v_n.lower
    assert values[-1] < values[0]
    assert abs(values[-1] - mpmath.mpf("0.0156223329")) < 1e-8


@pytest.mark.slow
def test_residuals_decay_up_to_one_hundred_thousand():
    scan = residual_scan([10 ** 2, 10 ** 3, 10 ** 4, 10 ** 5], CTX)
    assert scan.residuals_decreasing == {"s1": True, "s2": True}
    scaled = [abs(r.scaled_residual) for r in scan.s1]
    assert max(scaled) < 10 * min(scaled)
    assert scan.variance_decreasing
