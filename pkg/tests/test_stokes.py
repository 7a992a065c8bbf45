import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mssolve.elliptic import BoundaryConfig
from mssolve.errors import CoercivityViolated, CompatibilityViolated, InvalidConfig, SingularForm
from mssolve.geometry import InterfaceGeometry, phase_quadrature
from mssolve.oracle import StokesModeData, oracle_laplace_mode, oracle_stokes_mode
from mssolve.stokes import (StokesData, check_compatibility, discrete_infsup, energy_identity_residual,
                            korn_constant, lift_jump, normal_tangential, solve_two_phase_stokes,
                            stokes_estimate_report, stokes_residual)
from mssolve.verification import stokes_mode_error

B1 = BoundaryConfig(v_outer="B1")
B2 = BoundaryConfig(v_outer="B2", alpha2=1.0)
B3 = BoundaryConfig(v_outer="B3", alpha3=1.0)
FAMILIES = {"B1": B1, "B2": B2, "B3": B3}
THETA = np.linspace(0, 2 * np.pi, 17, endpoint=False)


def normal_of(g):
    return lambda th: g.normal(th)


def random_traction(rng, kmax=4):
    c = rng.normal(size=(2 * kmax + 1, 2)) @ np.array([1, 1j]) / (1 + np.abs(np.arange(-kmax, kmax + 1))) ** 2
    k = np.arange(-kmax, kmax + 1)
    return lambda th: np.exp(1j * np.multiply.outer(np.asarray(th), k)) @ c


# examples ---------------------------------------------------------------------------


def test_zero_data_zero_flow(circle):
    f = solve_two_phase_stokes(StokesData(), B1, circle)
    tr = f.interface_traces(THETA)
    for key in ("v+", "v-", "p+", "p-"):
        assert np.max(np.abs(tr[key])) < 1e-13


def test_laplace_young_balance(circle):
    f = solve_two_phase_stokes(StokesData(a=normal_of(circle)), B1, circle)
    tr = f.interface_traces(THETA)
    assert np.max(np.abs(tr["v+"])) < 1e-12 and np.max(np.abs(tr["v-"])) < 1e-12
    assert np.allclose(tr["p+"], -0.75, atol=1e-12)
    assert np.allclose(tr["p-"], 0.25, atol=1e-12)
    # pressure has zero mean over the disk
    total = sum(np.sum(w * f.pressure(z, ph)) for ph in (1, -1) for z, w in [phase_quadrature(circle, 0.0, ph)])
    assert abs(total) < 1e-12


def test_oracle_laplace_young():
    ref = oracle_stokes_mode(0, 1.0, 2.0, "B1", StokesModeData(a_r=-1.0))
    assert ref.plus["p"] - ref.minus["p"] == pytest.approx(-1.0, abs=1e-12)
    assert abs(ref.plus["vr"]) < 1e-14 and abs(ref.minus["vt"]) < 1e-14


def test_cos_normal_traction_against_oracle(circle):
    # a = cos(theta) n with n = -e_r: radial amplitude -1 on mode 1
    ref = oracle_stokes_mode(1, 1.0, 2.0, "B1", StokesModeData(a_r=-1.0))
    f = solve_two_phase_stokes(StokesData(a=lambda th: np.cos(th) * circle.normal(th)), B1, circle)
    tr = f.interface_traces(THETA)
    e = np.exp(1j * THETA)
    for sgn, o in (("+", ref.plus), ("-", ref.minus)):
        v = tr["v" + sgn] * np.conj(e)
        assert np.max(np.abs(v.real - (o["vr"] * e).real)) < 1e-7
        assert np.max(np.abs(v.imag - (o["vt"] * e).real)) < 1e-7
        assert np.max(np.abs(tr["p" + sgn] - (o["p"] * e).real)) < 1e-7


@pytest.mark.parametrize("fam", ["B1", "B2", "B3"])
@pytest.mark.parametrize("k", [0, 1, 3])
def test_random_modes_against_oracle(fam, k):
    assert stokes_mode_error(k, fam, 1.0, seed=5) < 1e-6


# compatibility ----------------------------------------------------------------------------


def test_compatibility_values(circle):
    assert check_compatibility(None, None, circle) == 0.0
    assert check_compatibility(normal_of(circle), None, circle) == pytest.approx(2 * np.pi, rel=1e-12)
    tang = normal_tangential(0.0, lambda th: 1 + np.sin(3 * th), circle)
    assert abs(check_compatibility(tang, None, circle)) < 1e-12


def test_compatibility_enforced(circle):
    data = StokesData(s=normal_of(circle))
    with pytest.raises(CompatibilityViolated):
        solve_two_phase_stokes(data, B1, circle)
    with pytest.raises(CompatibilityViolated):
        solve_two_phase_stokes(data, B2, circle)
    f = solve_two_phase_stokes(data, B3, circle)
    assert stokes_residual(f, data) < 1e-8


def test_balanced_flux_accepted(circle):
    # v- = e_r / r: the outer flux equals the interface flux of s = -e_r
    data = StokesData(s=normal_of(circle), g=lambda th: np.exp(1j * np.asarray(th)) / 2.0)
    assert abs(check_compatibility(data.s, data.g, circle)) < 1e-12
    f = solve_two_phase_stokes(data, B1, circle)
    assert stokes_residual(f, data) < 1e-8
    assert np.allclose(f.velocity(1.5 + 0j, -1), 1 / 1.5, atol=1e-10)
    with pytest.raises(CompatibilityViolated):
        solve_two_phase_stokes(StokesData(s=data.s, g=lambda th: -data.g(th)), B1, circle)


def test_lift_with_outer_flux(circle):
    s, g = normal_of(circle), (lambda th: np.exp(1j * np.asarray(th)) / 2.0)
    lift = lift_jump(s, g, circle, B1)
    assert np.max(np.abs(lift.w_tilde(circle.point(THETA)) - s(THETA))) < 1e-8
    # the shifted outer datum has no net normal flux
    th = 2 * np.pi * np.arange(256) / 256
    flux = np.mean(np.real(np.conj(np.exp(1j * th)) * lift.g_tilde(th)))
    assert abs(flux) < 1e-10


def test_coercivity_violations(circle):
    for bc in (BoundaryConfig(v_outer="B2"), BoundaryConfig(v_outer="B3")):
        with pytest.raises(CoercivityViolated):
            solve_two_phase_stokes(StokesData(a=normal_of(circle)), bc, circle)


def test_unknown_backend(circle):
    with pytest.raises(InvalidConfig):
        solve_two_phase_stokes(StokesData(), B1, circle, backend="fem")


# jump conditions, divergence and backends ----------------------------------------------------


@pytest.mark.parametrize("fam", ["B1", "B2", "B3"])
def test_jump_conditions_off_circle(wavy, fam):
    rng = np.random.default_rng(7)
    s = normal_tangential(0.0, lambda th: np.cos(2 * th), wavy)
    data = StokesData(a=random_traction(rng), s=s)
    f = solve_two_phase_stokes(data, FAMILIES[fam], wavy)
    tr = f.interface_traces(THETA)
    assert np.max(np.abs(tr["v+"] - tr["v-"] - s(THETA))) < 1e-6
    assert np.max(np.abs(tr["t+"] - tr["t-"] - data.a(THETA))) < 1e-6
    assert stokes_residual(f, data) < 1e-8


def test_divergence_free(wavy):
    f = solve_two_phase_stokes(StokesData(a=random_traction(np.random.default_rng(3))), B1, wavy)
    h = 1e-5
    for z, ph in ((0.2 + 0.3j, 1), (-0.4j, 1), (1.5 + 0.2j, -1), (-1.2 - 0.9j, -1)):
        dx = (f.velocity(z + h, ph) - f.velocity(z - h, ph)) / (2 * h)
        dy = (f.velocity(z + 1j * h, ph) - f.velocity(z - 1j * h, ph)) / (2 * h)
        assert abs(dx.real + dy.imag) < 1e-8


def test_pressure_mean_zero(wavy):
    f = solve_two_phase_stokes(StokesData(a=random_traction(np.random.default_rng(4))), B2, wavy)
    total = sum(np.sum(w * f.pressure(z, ph)) for ph in (1, -1) for z, w in [phase_quadrature(wavy, 0.0, ph)])
    assert abs(total) < 1e-9


@pytest.mark.parametrize("fam", ["B1", "B3"])
def test_bie_matches_spectral_on_circle(circle, fam):
    data = StokesData(a=random_traction(np.random.default_rng(11)))
    a = solve_two_phase_stokes(data, FAMILIES[fam], circle).interface_traces(THETA)
    b = solve_two_phase_stokes(data, FAMILIES[fam], circle, backend="bie", resolution=256).interface_traces(THETA)
    for key in ("v+", "v-", "p+", "p-"):
        assert np.max(np.abs(a[key] - b[key])) < 1e-6


def test_bie_matches_spectral_off_circle(wavy):
    data = StokesData(a=random_traction(np.random.default_rng(12)))
    a = solve_two_phase_stokes(data, B1, wavy).interface_traces(THETA)
    b = solve_two_phase_stokes(data, B1, wavy, backend="bie", resolution=256).interface_traces(THETA)
    for key in ("v+", "v-"):
        assert np.max(np.abs(a[key] - b[key])) < 1e-6


def test_uniqueness(wavy):
    data = StokesData(a=random_traction(np.random.default_rng(5)))
    a = solve_two_phase_stokes(data, B1, wavy).interface_traces(THETA)
    b = solve_two_phase_stokes(data, B1, wavy).interface_traces(THETA)
    for key in a:
        assert np.max(np.abs(a[key] - b[key])) < 1e-12


@settings(max_examples=8)
@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 1000))
def test_linearity(alpha, beta, seed):
    g = InterfaceGeometry.circle(1.0, 2.0, 0.2)
    rng = np.random.default_rng(seed)
    a1, a2 = random_traction(rng, 3), random_traction(rng, 3)
    tr = [solve_two_phase_stokes(StokesData(a=a), B1, g).interface_traces(THETA)["v-"]
          for a in (a1, a2, lambda th: alpha * a1(th) + beta * a2(th))]
    assert np.max(np.abs(tr[2] - alpha * tr[0] - beta * tr[1])) < 1e-10 * (1 + abs(alpha) + abs(beta))


# lift ------------------------------------------------------------------------------------------


def test_lift_of_zero(circle):
    lift = lift_jump(None, None, circle, B1)
    z = np.array([1.3, 1.7j, -1.5])
    assert np.max(np.abs(lift.q(z))) < 1e-14 and np.max(np.abs(lift.w(z))) < 1e-14


def test_lift_of_tangential_jump(circle):
    c = 0.8
    s = lambda th: c * 1j * np.exp(1j * np.asarray(th))  # noqa: E731
    lift = lift_jump(s, None, circle, B1)
    z = np.array([1.2, 1.5j, -1.8 + 0.1j])
    assert np.max(np.abs(lift.q(z) - lift.q(z[:1]))) < 1e-10
    assert np.max(np.abs(lift.w_tilde(circle.point(THETA)) - s(THETA))) < 1e-8
    assert np.max(np.abs(lift.divergence(z))) < 1e-10


def test_lift_of_normal_cos(circle):
    s = lambda th: np.cos(th) * circle.normal(th)  # noqa: E731
    lift = lift_jump(s, None, circle, B1)
    # q is the mode-1 harmonic in the annulus with d_r q = -cos at r0 and zero flux at R;
    # the oracle profile with unit trace has radial slope dmu_minus
    ref = oracle_laplace_mode(1, 1.0, 2.0, "neumann", 1.0)
    amp = 0.5 * (lift.q(np.array([1.0]))[0] - lift.q(np.array([-1.0]))[0])
    assert amp == pytest.approx(-1.0 / ref.dmu_minus.real, abs=1e-8)
    assert np.max(np.abs(lift.w_tilde(circle.point(THETA)) - s(THETA))) < 1e-8


def test_lift_rejects_net_flux(circle):
    with pytest.raises(CompatibilityViolated):
        lift_jump(normal_of(circle), None, circle, B1)


# energy identity --------------------------------------------------------------------------------


def test_energy_of_zero_field(circle):
    bal = energy_identity_residual(solve_two_phase_stokes(StokesData(), B1, circle), StokesData())
    assert bal.residual == 0.0 or bal.residual < 1e-30


@pytest.mark.parametrize("fam", ["B1", "B2", "B3"])
def test_energy_identity_mode_one(circle, fam):
    data = StokesData(a=lambda th: np.exp(1j * np.asarray(th)) * (0.3 + 0.5j) + np.cos(th))
    bal = energy_identity_residual(solve_two_phase_stokes(data, FAMILIES[fam], circle), data)
    assert bal.lhs > 0
    assert bal.residual <= 1e-6 * (abs(bal.lhs) + abs(bal.rhs))


def test_energy_identity_off_circle(wavy):
    data = StokesData(a=random_traction(np.random.default_rng(9)))
    bal = energy_identity_residual(solve_two_phase_stokes(data, B3, wavy), data)
    assert bal.ok and bal.lhs > 0


def test_energy_needs_spectral_field(circle):
    f = solve_two_phase_stokes(StokesData(a=normal_of(circle)), B1, circle, backend="bie", resolution=64)
    with pytest.raises(InvalidConfig):
        energy_identity_residual(f, StokesData(a=normal_of(circle)))


# Korn and inf-sup -------------------------------------------------------------------------------


def test_korn_constants():
    for bc, frozen in ((B1, 1.5953), (B3, None)):
        c16, c32 = korn_constant(bc, 2.0, 16), korn_constant(bc, 2.0, 32)
        assert np.isfinite(c16) and abs(c32 / c16 - 1) < 0.1
        if frozen is not None:
            assert c32 == pytest.approx(frozen, abs=1e-4)
    with pytest.raises(SingularForm):
        korn_constant(BoundaryConfig(v_outer="B2", alpha2=0.0), 2.0, 16)
    assert np.isfinite(korn_constant(B2, 2.0, 16))


def test_infsup_frozen_values():
    for bc, frozen in ((B1, 0.5482), (B2, 0.7319), (B3, 0.8311)):
        assert discrete_infsup(bc, 2.0, 32) == pytest.approx(frozen, abs=1e-4)


def test_infsup_one_mode_positive():
    assert discrete_infsup(B1, 2.0, 2) > 0


def test_infsup_mean_zero_constraint():
    assert B1.gamma3_empty and B2.gamma3_empty and not B3.gamma3_empty


# estimate report -------------------------------------------------------------------------------


def test_estimate_report_zero(circle):
    rep = stokes_estimate_report(solve_two_phase_stokes(StokesData(), B1, circle), StokesData())
    assert rep.lhs < 1e-12 and rep.rhs == 0.0


def test_estimate_ratio_refinement(circle):
    data = StokesData(a=lambda th: np.cos(2 * th) * circle.normal(th))
    ratios = [stokes_estimate_report(solve_two_phase_stokes(data, B1, circle, resolution=N), data).ratio
              for N in (8, 16)]
    assert ratios[0] > 0 and abs(ratios[1] / ratios[0] - 1) < 0.1


def test_estimate_ratio_bounded_in_time():
    times = np.linspace(0, 1, 21)
    g = InterfaceGeometry.from_function(lambda th, t: 1 + 0.05 * np.cos(3 * (th - t)), 3, 2.0, 0.1, times)
    ratios = []
    for t in (0.0, 0.35, 0.7):
        data = StokesData(a=lambda th, t=t: g.normal(th, t) * np.cos(th))
        ratios.append(stokes_estimate_report(solve_two_phase_stokes(data, B1, g, t), data).ratio)
    assert max(ratios) / min(ratios) < 1.1


@pytest.mark.parametrize("kmax", [6, 12])
def test_callable_data_bandwidth_detected(circle, kmax):
    data = StokesData(a=random_traction(np.random.default_rng(kmax), kmax))
    for bc in FAMILIES.values():
        assert stokes_residual(solve_two_phase_stokes(data, bc, circle), data) < 1e-10
