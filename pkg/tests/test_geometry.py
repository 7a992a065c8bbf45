import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from mssolve.errors import (InsufficientTimeSamples, NonPositiveRadius, OutsideTubularNeighborhood,
                            SeparationViolation, ValidationError)
from mssolve.geometry import (InterfaceGeometry, build_interface, closest_point, cutoff, cutoff_derivative,
                              material_derivative, phase_quadrature, signed_distance, surface_gradient,
                              surface_laplacian, tubular_coordinates)
from mssolve.oracle import oracle_laplace_beltrami
from mssolve.sobolev import PeriodicField, Trajectory


def peanut(R=3.0, delta=0.1):
    return build_interface([(0, 1.0, 0.0), (2, 0.05, 0.0)], R, delta)


def rho_peanut(th):
    return 1 + 0.1 * np.cos(2 * th)


def rotating(omega=1.0):
    times = np.linspace(0, 1, 201)
    return InterfaceGeometry.from_function(lambda th, t: 1 + 0.05 * np.cos(3 * (th - omega * t)), 3, 2.0, 0.1,
                                           times)


# construction ------------------------------------------------------------------------


def test_unit_circle_normal_points_inward():
    g = build_interface([(0, 1.0, 0.0)], 2.0, 0.2)
    assert g.normal(0.0) == pytest.approx(-1.0 + 0j, abs=1e-15)
    theta = np.linspace(0, 2 * np.pi, 17)
    assert np.allclose(np.abs(g.normal(theta)), 1.0, atol=1e-12)


def test_separation_violation():
    with pytest.raises(SeparationViolation):
        build_interface([(0, 1.0, 0.0)], 1.5, 0.2)


def test_nonpositive_radius():
    with pytest.raises(NonPositiveRadius):
        build_interface([(0, 0.2, 0.0), (1, 0.3, 0.0)], 3.0, 0.01)


def test_bad_inputs():
    with pytest.raises(ValidationError):
        InterfaceGeometry(np.ones(2), 2.0, 0.1)
    with pytest.raises(ValidationError):
        InterfaceGeometry(np.ones(1), 2.0, 0.0)


def test_curvature_matches_finite_differences():
    g = peanut()
    h = 1e-5

    def X(th):
        return rho_peanut(th) * np.exp(1j * th)

    d1 = (X(h) - X(-h)) / (2 * h)
    d2 = (X(h) - 2 * X(0.0) + X(-h)) / h ** 2
    kappa_fd = np.imag(np.conj(d1) * d2) / abs(d1) ** 3
    kappa = g.snapshot(0.0, 256).kappa[0]
    assert kappa == pytest.approx(kappa_fd, rel=1e-5)
    # closed form for a polar curve
    r, r1, r2 = 1.1, 0.0, -0.4
    assert kappa == pytest.approx((r * r + 2 * r1 ** 2 - r * r2) / (r * r + r1 ** 2) ** 1.5, rel=1e-12)


def test_snapshot_length_of_circle(circle):
    assert circle.snapshot(0.0, 64).length == pytest.approx(2 * np.pi, rel=1e-14)


# distance and tubular coordinates -------------------------------------------------------


def test_signed_distance_unit_circle():
    g = InterfaceGeometry.circle(1.0, 2.0, 0.2)
    assert signed_distance((0.0, 0.0), g) == pytest.approx(1.0, abs=1e-12)
    assert signed_distance((1.5, 0.0), g) == pytest.approx(-0.5, abs=1e-12)


def test_signed_distance_matches_brute_force():
    g = peanut()
    x = 1.3 + 0.4j
    th = 2 * np.pi * np.arange(20000) / 20000
    d = np.abs(x - rho_peanut(th) * np.exp(1j * th))
    j = int(np.argmin(d))
    res = minimize_scalar(lambda a: abs(x - rho_peanut(a) * np.exp(1j * a)),
                          bracket=(th[j - 1], th[j], th[j + 1]), tol=1e-14)
    sign = 1.0 if abs(x) < rho_peanut(np.angle(x)) else -1.0
    assert signed_distance(x, g) == pytest.approx(sign * res.fun, abs=1e-8)


def test_tubular_coordinates_examples():
    g = InterfaceGeometry.circle(1.0, 2.0, 0.2)
    p = tubular_coordinates((0.9, 0.0), g)
    assert p.r == pytest.approx(0.1, abs=1e-12)
    assert min(p.s, 2 * np.pi - p.s) < 1e-12
    with pytest.raises(OutsideTubularNeighborhood):
        tubular_coordinates((0.0, 0.0), g)


@given(st.floats(0, 2 * np.pi), st.floats(-0.29, 0.29))
def test_tubular_roundtrip(s, r):
    g = peanut()
    x = g.X(r, s)
    p = tubular_coordinates(x, g)
    assert abs(g.X(p.r, p.s) - x) < 1e-10
    assert p.r == pytest.approx(signed_distance(x, g), abs=1e-12)


@given(st.floats(0, 2 * np.pi), st.floats(1e-4, 0.05))
def test_normal_points_into_enclosed_phase(s, eps):
    g = peanut()
    assert signed_distance(g.point(s) + eps * g.normal(s), g) > 0
    assert signed_distance(g.point(s) - eps * g.normal(s), g) < 0


def test_closest_point_on_curve():
    g = peanut()
    s, d = closest_point(g.point(1.234), g)
    assert d < 1e-12 and s == pytest.approx(1.234, abs=1e-10)


# surface operators ---------------------------------------------------------------------


@pytest.mark.parametrize("k", [1, 3, 7])
@pytest.mark.parametrize("r0", [0.5, 1.0])
def test_laplacian_on_circle(k, r0):
    g = InterfaceGeometry.circle(r0, 2.0, 0.1)
    h = PeriodicField.from_modes(k, {k: 0.5})
    lap = surface_laplacian(h, g)
    assert np.max(np.abs(lap.modes + k ** 2 / r0 ** 2 * h.modes)) < 1e-12


def test_constants_are_killed():
    g = peanut()
    h = PeriodicField.from_modes(4, {0: 3.0})
    gx, gy = surface_gradient(h, g)
    assert h_inf(gx) < 1e-14 and h_inf(gy) < 1e-14
    assert h_inf(surface_laplacian(h, g)) < 1e-14


def h_inf(f):
    return float(np.max(np.abs(f.modes)))


def test_laplacian_matches_arclength_oracle():
    g = peanut()
    h = PeriodicField.from_function(np.cos, 1)
    lap = surface_laplacian(h, g, K=40)
    theta = np.linspace(0, 2 * np.pi, 9, endpoint=False)
    ref = oracle_laplace_beltrami(rho_peanut, np.cos, theta)
    assert np.max(np.abs(lap(theta) - ref)) < 1e-6


def test_gradient_is_tangential(wavy):
    h = PeriodicField.from_modes(3, {1: 0.3, 3: 0.1j})
    gx, gy = surface_gradient(h, wavy, K=40)
    theta = np.linspace(0, 2 * np.pi, 11)
    grad = gx(theta) + 1j * gy(theta)
    assert np.max(np.abs(np.real(np.conj(grad) * wavy.normal(theta)))) < 1e-10


@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
def test_laplacian_integrates_to_zero(c):
    g = peanut()
    h = PeriodicField.from_modes(3, {k: complex(c[k], c[k + 3] if k else 0) for k in range(3)})
    snap = g.snapshot(0.0, 512)
    lap = surface_laplacian(h, g, K=64)
    assert abs(np.sum(lap(snap.theta) * snap.weights)) < 1e-10


# time dependence ---------------------------------------------------------------------------


def test_material_derivative_static(circle):
    times = np.linspace(0, 1, 11)
    tr = Trajectory(times, [PeriodicField.from_modes(1, {1: 0.5 * t}) for t in times])
    D = material_derivative(tr, circle)
    for f in D.fields:
        assert np.max(np.abs(f.modes - PeriodicField.from_modes(1, {1: 0.5}).modes)) < 1e-12
    const = Trajectory(times, [PeriodicField.from_modes(1, {1: 0.5})] * len(times))
    assert max(h_inf(f) for f in material_derivative(const, circle).fields) < 1e-14
    with pytest.raises(InsufficientTimeSamples):
        material_derivative(Trajectory([0.0], [tr[0]]), circle)


def test_material_derivative_rotating_curve():
    g = rotating()
    times = np.linspace(0.3, 0.5, 5)
    h = PeriodicField.from_function(np.cos, 1)
    D = material_derivative(Trajectory(times, [h] * len(times)), g)
    t, eps = 0.4, 1e-3
    for s in (0.2, 1.3, 4.0):
        x = g.point(s, t)
        # derivative of h(S(x, tau), tau) at fixed x
        fd = (np.cos(closest_point(x, g, t + eps)[0]) - np.cos(closest_point(x, g, t - eps)[0])) / (2 * eps)
        assert D.fields[2](s) == pytest.approx(fd, abs=1e-5)


def test_dS_dt_matches_projection_oracle():
    g = rotating()
    t, eps = 0.4, 1e-4
    for s in (0.2, 1.3, 4.0):
        x = g.point(s, t)
        fd = (closest_point(x, g, t + eps)[0] - closest_point(x, g, t - eps)[0]) / (2 * eps)
        assert g.dS_dt(s, t) == pytest.approx(fd, abs=1e-7)
    assert np.all(InterfaceGeometry.circle(1, 2, 0.1).dS_dt(np.linspace(0, 1, 3)) == 0)


# cut-off -------------------------------------------------------------------------------------


def test_cutoff_clauses_dense_grid():
    delta = 1.0
    s = np.linspace(-3, 3, 10001)
    xi = cutoff(s, delta)
    assert np.all(xi[np.abs(s) <= delta] == 1.0)
    assert np.all(xi[np.abs(s) > 2 * delta] == 0.0)
    band = (np.abs(s) >= delta) & (np.abs(s) <= 2 * delta)
    sx = s[band] * cutoff_derivative(s[band], delta)
    assert np.all(sx <= 0) and np.all(sx >= -4)


def test_cutoff_is_c1():
    delta = 0.3
    s = np.linspace(-1, 1, 20001)
    h = s[1] - s[0]
    fd = np.gradient(cutoff(s, delta), h)
    assert np.max(np.abs(fd - cutoff_derivative(s, delta))) < 1e-3
    # no jumps in xi': consecutive samples differ by at most max|xi''| h (about 110 h here)
    assert np.max(np.abs(np.diff(cutoff_derivative(s, delta)))) < 200 * h


@given(st.floats(0.01, 10), st.floats(-30, 30))
def test_cutoff_range(delta, s):
    assert 0.0 <= cutoff(s, delta) <= 1.0
    assert cutoff(s, delta) == cutoff(-s, delta)


# quadrature -----------------------------------------------------------------------------------


def test_phase_quadrature_areas(wavy, circle):
    for g, area in ((circle, np.pi), (wavy, np.pi * (1 + 0.05 ** 2 / 2))):
        _, wp = phase_quadrature(g, 0.0, 1)
        _, wm = phase_quadrature(g, 0.0, -1)
        assert np.sum(wp) == pytest.approx(area, rel=1e-12)
        assert np.sum(wm) == pytest.approx(np.pi * g.R ** 2 - area, rel=1e-12)


def test_phase_quadrature_points_in_phase(wavy):
    zp, _ = phase_quadrature(wavy, 0.0, 1)
    zm, _ = phase_quadrature(wavy, 0.0, -1)
    assert np.all(wavy.contains(zp)) and not np.any(wavy.contains(zm))
