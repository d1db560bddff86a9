import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastomono import specfun
from elastomono.errors import DomainError

from oracles import hankel_asymptotic_magnitude, jn_series, yn_series


@pytest.fixture(params=specfun.available_backends())
def backend(request):
    prev = specfun.use_backend(request.param)
    yield request.param
    specfun.use_backend(prev)


# values from the high-precision power-series oracle in tests/oracles.py
@pytest.mark.parametrize(
    "n, x, j, y",
    [
        (0, 1.0, 0.7651976865579666, 0.08825696421567696),
        (1, 1.0, 0.4400505857449335, -0.7812128213002887),
    ],
)
def test_bessel_jy_examples(backend, n, x, j, y):
    c = specfun.bessel_jy(n, x)
    assert c.j == pytest.approx(j, rel=1e-12)
    assert c.y == pytest.approx(y, rel=1e-12)
    assert c.h1 == complex(c.j, c.y)


def test_reflection_negative_order(backend):
    for n in (1, 2, 7):
        pos, neg = specfun.bessel_jy(n, 2.3), specfun.bessel_jy(-n, 2.3)
        assert neg.j == (-1) ** n * pos.j
        assert neg.y == (-1) ** n * pos.y


def test_hankel1_examples(backend):
    h = specfun.hankel1(0, 1.0)
    assert h.real == pytest.approx(0.7651976865579666, rel=1e-12)
    assert h.imag == pytest.approx(0.08825696421567696, rel=1e-12)
    assert specfun.hankel1(0, 3.7).imag == specfun.bessel_jy(0, 3.7).y
    assert abs(specfun.hankel1(0, 50.0)) == pytest.approx(hankel_asymptotic_magnitude(50.0), rel=1e-3)


def test_hankel1_deriv(backend):
    x = np.linspace(0.3, 40.0, 17)
    np.testing.assert_allclose(specfun.hankel1_deriv(0, x), -specfun.hankel1(1, x), rtol=1e-14)
    d = specfun.hankel1_deriv(1, 1.0)
    assert d == 0.5 * (specfun.hankel1(0, 1.0) - specfun.hankel1(2, 1.0))
    h = 1e-5
    for n in (0, 1, 3):
        fd = (specfun.hankel1(n, 2.0 + h) - specfun.hankel1(n, 2.0 - h)) / (2 * h)
        assert abs(specfun.hankel1_deriv(n, 2.0) - fd) <= 1e-8


def test_cross_check_log_grid(backend):
    xs = np.geomspace(0.1, 50.0, 100)
    for n in (0, 1):
        got = specfun.hankel1(n, xs)
        ref = np.array([complex(jn_series(n, x), yn_series(n, x)) for x in xs])
        assert np.max(np.abs(got - ref) / np.abs(ref)) <= 1e-10


def test_higher_orders_match_series(backend):
    xs = np.array([1e-6, 1e-3, 0.2, 3.0, 17.0, 29.9, 30.1, 44.0])
    J, Y = specfun.jy_table(xs, 40)
    for i, x in enumerate(xs):
        for n in (2, 5, 13, 40):
            jr, yr = jn_series(n, x), yn_series(n, x)
            if abs(jr) > 1e-290:
                assert J[i, n] == pytest.approx(jr, rel=1e-10)
            if math.isfinite(yr):
                assert Y[i, n] == pytest.approx(yr, rel=1e-10)


def _wronskian_residual(n, x):
    J, Y = specfun.jy_table(np.array([x]), n + 1)
    j, y = J[0], Y[0]
    # derivatives via n/x Z_n - Z_{n+1}
    jd = n / x * j[n] - j[n + 1]
    yd = n / x * y[n] - y[n + 1]
    ref = 2.0 / (math.pi * x)
    return abs(j[n] * yd - jd * y[n] - ref) / (1.0 + abs(ref))


def test_wronskian_grid(backend):
    worst = max(
        _wronskian_residual(n, x) for n in range(0, 41, 4) for x in np.geomspace(0.1, 50, 25)
    )
    assert worst <= 1e-10


@settings(max_examples=200, deadline=None)
@given(n=st.integers(0, 40), x=st.floats(0.1, 50.0))
def test_wronskian_property(n, x):
    assert _wronskian_residual(n, x) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 40), x=st.floats(0.1, 50.0))
def test_recurrence_property(n, x):
    J, _ = specfun.jy_table(np.array([x]), n + 1)
    j = J[0]
    assert abs(j[n - 1] + j[n + 1] - 2 * n / x * j[n]) <= 1e-9


def test_backends_agree():
    if len(specfun.available_backends()) < 2:
        pytest.skip("compiled kernel not built")
    x = np.geomspace(1e-6, 200.0, 400)
    out = {}
    for name in specfun.available_backends():
        prev = specfun.use_backend(name)
        out[name] = specfun.hankel_table(x, 60)
        specfun.use_backend(prev)
    a, b = out["compiled"], out["python"]
    fin = np.isfinite(a) & np.isfinite(b)
    assert (np.isfinite(a) == np.isfinite(b)).all()
    assert np.max(np.abs(a[fin] - b[fin]) / np.abs(b[fin])) < 1e-11


def test_cyl_modes_layout():
    x = np.array([0.7, 2.0])
    Z = specfun.cyl_modes("h", x, 3)
    assert Z.shape == (2, 7)
    for n in range(-3, 4):
        np.testing.assert_allclose(Z[:, n + 3], specfun.hankel1(n, x), rtol=1e-15)


@pytest.mark.parametrize("n, x", [(0, 0.0), (0, 5e-7), (0, 200.5), (121, 1.0), (-121, 1.0)])
def test_domain_errors(n, x):
    with pytest.raises(DomainError):
        specfun.bessel_jy(n, x)


def test_huge_order_tiny_argument_is_not_nan():
    J, Y = specfun.jy_table(np.array([1e-6]), 120)
    assert np.isfinite(J).all()
    assert not np.isnan(Y).any()
    assert Y[0, -1] == -np.inf
