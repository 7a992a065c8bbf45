import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_real_field
from mssolve.errors import InsufficientTimeSamples, ValidationError
from mssolve.oracle import oracle_h_norm
from mssolve.sobolev import (PeriodicField, Trajectory, h_norm, interpolation_eta, multiply, norm_table,
                             project, xt_norm)

coeff = st.floats(-10, 10, allow_nan=False)
fields = st.builds(
    lambda re, im: PeriodicField.from_modes(len(re) - 1, {k: complex(a, 0 if k == 0 else b)
                                                          for k, (a, b) in enumerate(zip(re, im))}),
    st.lists(coeff, min_size=1, max_size=12), st.lists(coeff, min_size=12, max_size=12))


def test_zero_mode_norm_is_one():
    f = PeriodicField.from_modes(3, {0: 1.0})
    for s in (0.0, 0.5, 2.0, 3.5):
        assert h_norm(f, s) == 1.0


def test_single_mode_pair():
    f = PeriodicField.from_modes(2, {1: 1.0})
    assert f.coefficient(-1) == 1.0
    assert h_norm(f, 1.0) == pytest.approx(2.0, abs=1e-15)


def test_random_field_matches_extended_precision(rng):
    for s in (2.0, 0.5, 3.5):
        f = random_real_field(rng, 40, decay=1.0)
        assert abs(h_norm(f, s) - oracle_h_norm(f, s)) <= 1e-13 * oracle_h_norm(f, s)


def test_reality_enforced():
    c = np.zeros(5, dtype=complex)
    c[3] = 1.0
    with pytest.raises(ValidationError):
        PeriodicField(c, real=True)
    assert PeriodicField(c, real=False).coefficient(1) == 1.0


def test_even_length_rejected():
    with pytest.raises(ValidationError):
        PeriodicField(np.zeros(4), real=False)


def test_values_roundtrip(rng):
    f = random_real_field(rng, 10)
    g = PeriodicField.from_values(f.values(64), 10)
    assert np.max(np.abs(g.modes - f.modes)) < 1e-14
    theta = np.linspace(0, 1, 7)
    assert np.allclose(f(theta), np.interp(theta, 2 * np.pi * np.arange(4096) / 4096, f.values(4096)),
                       atol=1e-5)


def test_derivative_of_cos():
    f = PeriodicField.from_function(np.cos, 3)
    th = np.linspace(0, 2 * np.pi, 11)
    assert np.allclose(f.derivative()(th), -np.sin(th), atol=1e-14)
    assert np.allclose(f.derivative(2)(th), -np.cos(th), atol=1e-14)


def test_multiply_matches_pointwise(rng):
    f, g = random_real_field(rng, 5), random_real_field(rng, 4)
    fg = multiply(f, g)
    th = np.linspace(0, 2 * np.pi, 9)
    # the full product has cutoff 9; compare untruncated
    assert np.allclose(multiply(f, g, 9)(th), f(th) * g(th), atol=1e-13)
    assert fg.K == 5


def test_project_identity_and_zero(rng):
    f = random_real_field(rng, 6)
    assert np.array_equal(project(f, 6).modes, f.modes)
    p0 = project(f, 0)
    assert p0.K == 0 and p0.coefficient(0) == f.coefficient(0)
    with pytest.raises(ValidationError):
        project(f, 7)


@given(fields, st.integers(0, 11), st.floats(0, 4))
def test_project_never_increases_norm(f, Kp, s):
    Kp = min(Kp, f.K)
    assert h_norm(project(f, Kp), s) <= h_norm(f, s) + 1e-12


@given(fields, st.floats(0, 4), st.floats(0, 4))
def test_norm_monotone_in_s(f, s1, s2):
    lo, hi = sorted((s1, s2))
    assert h_norm(f, lo) <= h_norm(f, hi) * (1 + 1e-12)


@given(fields, fields, st.floats(0, 3.5))
def test_triangle_inequality(f, g, s):
    assert h_norm(f + g, s) <= h_norm(f, s) + h_norm(g, s) + 1e-9


@given(fields, st.floats(1e-3, 10))
def test_interpolation_bound(f, eps):
    eta = interpolation_eta(eps, f.K)
    lhs = h_norm(f, 2.5)
    assert lhs <= eps * h_norm(f, 3.5) + eta * h_norm(f, 0.5) + 1e-9 * (1 + lhs)


def test_interpolation_eta_grows_as_eps_shrinks():
    etas = [interpolation_eta(e, 64) for e in (1.0, 0.1, 0.01)]
    assert etas[0] < etas[1] < etas[2]


# trajectories -----------------------------------------------------------------------


def test_xt_norm_zero():
    tr = Trajectory([0.0, 0.5, 1.0], [PeriodicField.zeros(3)] * 3)
    assert xt_norm(tr) == 0.0


def test_xt_norm_constant_single_mode():
    f = PeriodicField.from_modes(2, {1: 1.0})
    tr = Trajectory(np.linspace(0, 1, 5), [f] * 5)
    want = np.sqrt(2 * 2 ** 3.5) + np.sqrt(2 * 2 ** 0.5) + np.sqrt(2 * 2 ** 2)
    assert xt_norm(tr) == pytest.approx(want, rel=1e-14)


def test_xt_norm_decaying_mode_vs_quadrature():
    times = np.linspace(0, 1, 65)
    tr = Trajectory(times, [PeriodicField.from_modes(1, {1: 0.5 * np.exp(-t)}) for t in times])
    # reference: adaptive quadrature of the closed-form integrands
    with mpmath.workdps(30):
        i2 = mpmath.quad(lambda t: mpmath.e ** (-2 * t), [0, 1])
        l2 = mpmath.sqrt(2 ** 3.5 / 2 * i2)
        h1 = mpmath.sqrt(2 ** 0.5 / 2 * 2 * i2)
        want = float(l2 + h1 + mpmath.sqrt(2 ** 2 / 2))
    # trapezoid in time: the O(dt^2) quadrature error is ~3e-5 relative at 64 intervals
    assert abs(xt_norm(tr) - want) < 1e-4 * want


@given(st.floats(-5, 5))
def test_xt_norm_homogeneous(a):
    times = np.linspace(0, 1, 9)
    tr = Trajectory(times, [PeriodicField.from_modes(3, {1: np.cos(t), 3: 0.2j * t}) for t in times])
    assert xt_norm(tr.scaled(a)) == pytest.approx(abs(a) * xt_norm(tr), rel=1e-12, abs=1e-14)


def test_xt_norm_needs_two_nodes():
    with pytest.raises(InsufficientTimeSamples):
        xt_norm(Trajectory([0.0], [PeriodicField.zeros(1)]))


def test_trajectory_validation():
    with pytest.raises(ValidationError):
        Trajectory([0.0, 1.0], [PeriodicField.zeros(1), PeriodicField.zeros(2)])
    with pytest.raises(ValidationError):
        Trajectory([1.0, 0.0], [PeriodicField.zeros(1)] * 2)


def test_trajectory_interpolation_and_table():
    tr = Trajectory([0.0, 1.0], [PeriodicField.from_modes(1, {1: 0.0}), PeriodicField.from_modes(1, {1: 2.0})])
    assert tr.at(0.25).coefficient(1) == pytest.approx(0.5)
    tab = norm_table(tr)
    assert tab.shape == (2, 4)
    assert tab[1, 1] == pytest.approx(h_norm(tr[1], 0.5))
