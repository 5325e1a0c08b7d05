import math

import numpy as np
import pytest
from scipy.integrate import quad

from ustatlab import (
    InvalidArgumentError,
    UnsupportedOperationError,
    constant_kernel,
    derive_seed,
    dist_from_name,
    estimate_ell,
    example_density,
    finite,
    identity_kernel,
    moment_diagnostic,
    normal,
    pareto,
    product_kernel,
    sample,
    variance_kernel,
)
from ustatlab.distributions import pdf


def test_example_support_and_median():
    d = example_density(2.0)
    x = sample(d, 200_000, 1)
    y = np.abs(x - 2.0)
    assert np.all(y >= 1.0)
    # median of |X - a| solves u^-2 = 1/2
    assert np.median(y) == pytest.approx(math.sqrt(2), rel=0.01)


def test_example_mean_abs_deviation():
    # E|X - a| = integral_1^inf t * 2 t^-3 dt = 2, by quadrature and MC
    oracle, _ = quad(lambda t: t * 2.0 * t ** -3, 1, np.inf)
    assert oracle == pytest.approx(2.0, abs=1e-10)
    d = example_density(2.0)
    y = np.abs(sample(d, 10 ** 6, 2) - 2.0)
    se = y.std(ddof=1) / math.sqrt(len(y))
    assert abs(y.mean() - 2.0) <= 3 * se


def test_example_tail_fractions():
    d = example_density(2.0)
    y = np.abs(sample(d, 10 ** 6, 3) - 2.0)
    for u in (1.5, 2.0, 4.0):
        p = u ** -2
        frac = float(np.mean(y > u))
        assert abs(frac - p) <= 4 * math.sqrt(p / 10 ** 6)


def test_seed_determinism():
    d = example_density(-1.5)
    a = sample(d, 1000, 42)
    b = sample(d, 1000, 42)
    assert np.array_equal(a, b)
    c = sample(d, 1000, 43)
    assert not np.array_equal(a, c)


def test_finite_sampling_multinomial():
    d = finite([-1.0, 0.0, 2.0], [0.5, 0.3, 0.2])
    x = sample(d, 10 ** 6, 9)
    for pt, p in zip(d.points, d.probs):
        frac = float(np.mean(x == pt))
        assert abs(frac - p) <= 4 * math.sqrt(p * (1 - p) / 10 ** 6)


def test_finite_validation():
    with pytest.raises(InvalidArgumentError):
        finite([1.0, 2.0], [0.6, 0.5])
    with pytest.raises(InvalidArgumentError):
        finite([1.0, 2.0], [1.1, -0.1])


def test_parameter_validation():
    with pytest.raises(InvalidArgumentError):
        normal(0, 0)
    with pytest.raises(InvalidArgumentError):
        pareto(-1)
    with pytest.raises(InvalidArgumentError):
        example_density(0.0)
    with pytest.raises(InvalidArgumentError):
        sample(normal(0, 1), 0, 1)


def test_pareto_moments_and_sampling():
    d = pareto(3.0, 2.0)
    assert d.mean == pytest.approx(3.0)
    x = sample(d, 10 ** 5, 4)
    assert np.all(x >= 2.0)
    assert x.mean() == pytest.approx(3.0, rel=0.05)
    assert pareto(0.5).mean is None and pareto(1.5).variance is None


def test_derive_seed_rule():
    assert derive_seed(12345, 0) == 12345
    assert derive_seed(0, 1) == 0x9E3779B97F4A7C15
    idx = np.arange(10 ** 6, dtype=np.uint64)
    seeds = np.uint64(7) ^ (idx * np.uint64(0x9E3779B97F4A7C15))
    assert len(np.unique(seeds)) == len(idx)


def test_estimate_ell_analytic():
    est = estimate_ell(normal(1, 1), product_kernel(2), 100)
    assert est.method == "analytic-finite-var"
    assert est.ell_sq == pytest.approx(1.0)
    # identity under normal(0, 2): Var = 4
    est = estimate_ell(normal(0, 2), identity_kernel(), 10)
    assert est.ell_sq == pytest.approx(4.0)
    # variance kernel under standard normal: Var h1 = 1/2
    est = estimate_ell(normal(0, 1), variance_kernel(), 10)
    assert est.ell_sq == pytest.approx(0.5)


def test_estimate_ell_example_asymptotic():
    est = estimate_ell(example_density(2.0), product_kernel(2), math.e)
    assert est.method == "example-asymptotic"
    assert est.ell_sq == pytest.approx(4.0, rel=1e-12)
    est = estimate_ell(example_density(2.0), product_kernel(2), 10_000)
    assert est.ell_sq == pytest.approx(4.0 * math.log(10_000), rel=1e-12)


def test_truncated_second_moment_oracle():
    # E[(X-a)^2 1(|X-a| <= u)] = 2 ln u, cross-checked by quadrature
    from ustatlab.distributions import _truncated_second_moment

    d = example_density(2.0)
    k = identity_kernel()  # h1 = x - 2, slope 1
    for u in (1.5, 3.0, 10.0):
        got = _truncated_second_moment(d, k, u)
        oracle = quad(lambda t: t ** 2 * abs(t) ** -3, -u, -1)[0] + \
            quad(lambda t: t ** 2 * t ** -3, 1, u)[0]
        assert got == pytest.approx(2.0 * math.log(u), rel=1e-12)
        assert got == pytest.approx(oracle, rel=1e-9)


def test_estimate_ell_fixed_point():
    # finite-variance case: the fixed point lands on Var h1
    est = estimate_ell(normal(1, 1), product_kernel(2), 500,
                       method="truncated-fixed-point")
    assert est.method == "truncated-fixed-point"
    assert est.ell_sq == pytest.approx(1.0, rel=1e-3)
    # example family: h1 = 2(X-2), so E[h1^2 1(|h1| <= B)] = 8 ln(B/2) and
    # the fixed point solves B^2 = 8 n ln(B/2)
    n = 10_000
    est = estimate_ell(example_density(2.0), product_kernel(2), n,
                       method="truncated-fixed-point")
    b_sq = n * est.ell_sq
    assert b_sq == pytest.approx(n * 8.0 * math.log(math.sqrt(b_sq) / 2.0),
                                 rel=1e-4)


def test_estimate_ell_errors():
    with pytest.raises(InvalidArgumentError):
        estimate_ell(normal(0, 1), constant_kernel(1.0), 10)
    with pytest.raises(UnsupportedOperationError):
        estimate_ell(example_density(2.0), variance_kernel(), 100)


def test_moment_diagnostic_constant():
    md = moment_diagnostic(normal(0, 1), constant_kernel(-3.0, m=2), 1.5, 1000, 1)
    assert md.value == pytest.approx(3.0 ** 1.5, rel=1e-12)
    assert md.se == 0.0
    assert not md.suspected_infinite


def test_moment_diagnostic_example_53():
    # E|xy|^(5/3) is finite under the example density; by independence it
    # equals the square of the 1-d moment E|X|^(5/3), known by quadrature
    one_dim = quad(lambda t: abs(t) ** (5 / 3) * abs(t - 2) ** -3, -np.inf, 1)[0] \
        + quad(lambda t: abs(t) ** (5 / 3) * abs(t - 2) ** -3, 3, np.inf)[0]
    oracle = one_dim ** 2
    md = moment_diagnostic(example_density(2.0), product_kernel(2), 5 / 3,
                           200_000, 12)
    assert abs(md.value - oracle) <= 4 * md.se
    assert not md.suspected_infinite


def test_moment_diagnostic_divergent_flagged():
    md = moment_diagnostic(example_density(2.0), product_kernel(2), 2.0,
                           400_000, 5)
    assert md.suspected_infinite


def test_registry():
    assert dist_from_name("example:a=2").kind == "example"
    assert dist_from_name("normal:1,1").variance == 1.0
    assert dist_from_name("pareto:2.5,1").params == (2.5, 1.0)
    d = dist_from_name("finite:[-1,1];[0.5,0.5]")
    assert list(d.points) == [-1.0, 1.0]
    for bad in ("nope:1", "normal:1", "finite:[1];[0.9]", "example:b=2"):
        with pytest.raises(InvalidArgumentError):
            dist_from_name(bad)


def test_pdf_values():
    d = example_density(2.0)
    assert pdf(d, 2.5) == 0.0
    assert pdf(d, 4.0) == pytest.approx(0.125)
    total = quad(lambda t: pdf(d, t), -np.inf, 1)[0] + \
        quad(lambda t: pdf(d, t), 3, np.inf)[0]
    assert total == pytest.approx(1.0, rel=1e-6)
