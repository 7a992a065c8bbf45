import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_real_field
from mssolve.elliptic import BoundaryConfig, normal_jump, solve_two_phase_laplace
from mssolve.errors import CompatibilityViolated, InvalidConfig, StepsizeTooLarge, ValidationError
from mssolve.evolution import (EvolutionProblem, InterfaceData, evolve, forcing_at, reduce_data, solve_coupled,
                               step, stokes_velocity_term)
from mssolve.geometry import InterfaceGeometry
from mssolve.ms_operator import ms_symbol
from mssolve.oracle import oracle_stokes_mode, StokesModeData
from mssolve.sobolev import PeriodicField, Trajectory, h_norm

LAM1 = ms_symbol(1, 1.0, 2.0)


def cos_k(k, K):
    return PeriodicField.from_modes(K, {k: 1.0 if k == 0 else 0.5})


def normal_of(g):
    return lambda th, t: g.normal(th, t)


# single steps ----------------------------------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 7])
def test_step_is_scalar_implicit_euler(circle, k):
    p = EvolutionProblem(circle, cos_k(k, 8), T=1.0, dt=0.01)
    h1 = step(p.h0, 0.0, 0.01, p)
    want = 0.5 / (1 + 0.01 * ms_symbol(k, 1.0, 2.0))
    assert h1.coefficient(k).real == pytest.approx(want, rel=1e-12)
    assert np.max(np.abs(np.delete(h1.modes, [8 + k, 8 - k]))) < 1e-14


def test_stepsize_too_large(circle):
    p = EvolutionProblem(circle, cos_k(1, 4), T=1.0, dt=0.5, b1=50.0)
    with pytest.raises(StepsizeTooLarge):
        step(p.h0, 0.0, 0.5, p)


def test_step_needs_reduced_data(circle):
    p = EvolutionProblem(circle, cos_k(1, 4), T=1.0, dt=0.1, data=InterfaceData(mu_outer=0.1))
    with pytest.raises(InvalidConfig):
        step(p.h0, 0.0, 0.1, p)


# whole runs ------------------------------------------------------------------------------


def test_zero_data_stays_zero(circle):
    traj, diag = evolve(EvolutionProblem(circle, PeriodicField.zeros(8), T=0.2, dt=0.05))
    assert all(np.max(np.abs(f.modes)) == 0 for f in traj.fields)
    assert diag.xt_norm == 0.0 and diag.bound_ratio == 0.0


def test_mean_is_conserved_and_modes_decay(circle, rng):
    h0 = random_real_field(rng, 12)
    traj, _ = evolve(EvolutionProblem(circle, h0, T=0.3, dt=0.01))
    c0 = [f.coefficient(0) for f in traj.fields]
    assert np.max(np.abs(np.array(c0) - c0[0])) < 1e-14
    mags = np.array([np.abs(f.modes) for f in traj.fields])
    assert np.all(np.diff(mags, axis=0) <= 1e-15)


def test_mode_one_decay_rate(circle):
    traj, _ = evolve(EvolutionProblem(circle, cos_k(1, 4), T=0.5, dt=1e-3))
    rate = -np.log(traj[-1].coefficient(1).real / 0.5) / 0.5
    assert rate == pytest.approx(LAM1, rel=0.01)


@settings(max_examples=8)
@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2 ** 16))
def test_solution_map_is_linear(alpha, beta, seed):
    g = InterfaceGeometry.from_function(lambda th, t: 1 + 0.05 * np.cos(3 * th), 4, 2.0, 0.1)
    rng = np.random.default_rng(seed)
    h1, h2 = random_real_field(rng, 8), random_real_field(rng, 8)
    g1, g2 = random_real_field(rng, 8), random_real_field(rng, 8)

    def run(h0, f):
        return evolve(EvolutionProblem(g, h0, T=0.1, dt=0.02, g=f, b2=0.5, b1=0.3))[0][-1].modes

    lhs = run(alpha * h1 + beta * h2, alpha * g1 + beta * g2)
    rhs = alpha * run(h1, g1) + beta * run(h2, g2)
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * (1 + np.max(np.abs(rhs)))


def _manufactured_error(circle, dt, scheme="imex"):
    # h* = e^{-t} cos theta; on circles A h* = lambda_1 h*
    g = lambda th, t: (LAM1 - 1) * np.exp(-t) * np.cos(th)
    traj, _ = evolve(EvolutionProblem(circle, cos_k(1, 4), T=1.0, dt=dt, g=g, scheme=scheme))
    return max(h_norm(f - cos_k(1, 4) * np.exp(-t), 0.5) for t, f in zip(traj.times, traj.fields))


def test_manufactured_first_order(circle):
    errs = [_manufactured_error(circle, dt) for dt in (0.04, 0.02, 0.01)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 0.8) and np.all(orders <= 1.2)


def test_bdf2_is_second_order(circle):
    errs = [_manufactured_error(circle, dt, "bdf2") for dt in (0.04, 0.02, 0.01)]
    # the first step is Euler, so the observed order sits a little below two
    assert np.log2(errs[1] / errs[2]) > 1.6


def test_stiff_step_is_stable(circle, rng):
    h0 = random_real_field(rng, 64)
    traj, _ = evolve(EvolutionProblem(circle, h0, T=1.0, dt=0.1))
    norms = [h_norm(f, 0.5) for f in traj.fields]
    assert np.all(np.isfinite(norms)) and max(norms) <= norms[0] * (1 + 1e-12)


def test_smooth_solution_has_rapidly_decaying_modes(circle):
    h0 = PeriodicField.from_function(lambda th: 1 / (1.5 - np.cos(th)), 48)
    traj, _ = evolve(EvolutionProblem(circle, h0, T=0.1, dt=0.01, b2=0.3))
    c = np.abs(traj[-1].modes[48:])
    k = np.arange(1, 49)
    for m in (2, 4, 8):
        w = c[1:] * k ** m
        # the tail constant C_m is attained at low k and the weighted tail vanishes
        assert np.max(w[24:]) < 1e-6 * np.max(w)


def test_time_dependent_geometry_runs():
    times = np.linspace(0, 0.3, 31)
    g = InterfaceGeometry.from_function(lambda th, t: 1 + 0.05 * np.cos(3 * (th - t)), 3, 2.0, 0.1, times)
    traj, diag = evolve(EvolutionProblem(g, cos_k(2, 12), T=0.3, dt=0.01))
    assert np.isfinite(diag.xt_norm) and diag.growth_max < 10
    assert h_norm(traj[-1], 0.5) < h_norm(traj[0], 0.5)


# data reduction -------------------------------------------------------------------------------


def test_reduce_empty_is_identity(circle):
    p = EvolutionProblem(circle, cos_k(1, 4), T=0.1, dt=0.05)
    assert reduce_data(p) is p


@pytest.mark.parametrize("form,w", [("max_reg", 1.0), ("coupled", 0.5)])
def test_reduce_outer_neumann_constant(circle, form, w):
    c = 0.7
    p = EvolutionProblem(circle, cos_k(1, 4), T=0.1, dt=0.05, g=cos_k(2, 4), form=form,
                         data=InterfaceData(mu_outer=c))
    red = reduce_data(p)
    jump = normal_jump(solve_two_phase_laplace(PeriodicField.zeros(4), a4=c, bc=BoundaryConfig(),
                                               geometry=circle), circle, K=4)
    for f in red.g.fields:
        assert np.max(np.abs(f.modes - (cos_k(2, 4).modes - w * jump.modes))) < 1e-12
    # the radial solution: jump c R / r0 in the mean
    assert red.g.fields[0].coefficient(0).real == pytest.approx(-w * c * 2.0, abs=1e-10)


def test_reduce_rejects_net_flux(circle):
    p = EvolutionProblem(circle, cos_k(1, 4), T=0.1, dt=0.05, form="coupled",
                         data=InterfaceData(velocity_jump=normal_of(circle)))
    with pytest.raises(CompatibilityViolated):
        reduce_data(p)
    ok = EvolutionProblem(circle, cos_k(1, 4), T=0.1, dt=0.05, form="coupled",
                          bc=BoundaryConfig(v_outer="B3", alpha3=1.0),
                          data=InterfaceData(velocity_jump=normal_of(circle)))
    assert reduce_data(ok).data.empty


# Stokes coupling ------------------------------------------------------------------------------


def test_stokes_term_zero_coefficients(circle):
    assert np.max(np.abs(stokes_velocity_term(cos_k(1, 4), circle).modes)) == 0.0


def test_stokes_term_against_oracle(circle):
    # traction jump n cos(theta) = -e_r cos(theta); the oracle takes polar components
    term = stokes_velocity_term(cos_k(1, 4), circle, a3=normal_of(circle))
    ref = oracle_stokes_mode(1, 1.0, 2.0, "B1", StokesModeData(a_r=-0.5))
    vn = -0.5 * (ref.plus["vr"] + ref.minus["vr"])   # (v+ + v-) . n / 2 with n = -e_r
    assert abs(term.coefficient(1) - vn) < 1e-7


def test_validation(circle):
    with pytest.raises(ValidationError):
        EvolutionProblem(circle, cos_k(1, 4), T=1.0, dt=0.1, sigma=0.0)
    with pytest.raises(ValidationError):
        EvolutionProblem(circle, cos_k(1, 4), T=1.0, dt=0.0)
    with pytest.raises(InvalidConfig):
        EvolutionProblem(circle, cos_k(1, 4), T=1.0, dt=0.1, stokes_coefficients=(1.0, None, None))
    with pytest.raises(InvalidConfig):
        EvolutionProblem(circle, cos_k(1, 4), T=1.0, dt=0.1, scheme="rk4")


def test_forcing_at_forms():
    f = PeriodicField.from_modes(2, {1: 0.5})
    assert forcing_at(None, 0.0, 3).K == 3
    assert forcing_at(f, 0.0, 1).coefficient(1) == 0.5
    tr = Trajectory([0.0, 1.0], [f, 3 * f])
    assert forcing_at(tr, 0.5, 2).coefficient(1) == pytest.approx(1.0)
    assert forcing_at(lambda th, t: t * np.cos(th), 2.0, 2).coefficient(1) == pytest.approx(1.0)


# coupled reconstruction ----------------------------------------------------------------------------


def test_coupled_zero_data(circle):
    p = EvolutionProblem(circle, PeriodicField.zeros(6), T=0.1, dt=0.05, form="coupled",
                         stokes_coefficients=(normal_of(circle), None, None))
    sol = solve_coupled(p)
    theta = np.linspace(0, 2 * np.pi, 9)
    for mu, flow in zip(sol.mu, sol.flow):
        assert np.max(np.abs(mu.trace(theta, 1))) < 1e-14
        tr = flow.interface_traces(theta)
        assert max(np.max(np.abs(tr[key])) for key in ("v+", "v-", "p+", "p-")) < 1e-14


def test_pure_ms_has_no_flow(circle):
    p = EvolutionProblem(circle, cos_k(2, 6), T=0.1, dt=0.05, form="coupled")
    sol = solve_coupled(p)
    theta = np.linspace(0, 2 * np.pi, 9)
    for flow in sol.flow:
        tr = flow.interface_traces(theta)
        assert max(np.max(np.abs(tr[key])) for key in ("v+", "v-", "p+", "p-")) < 1e-14
    assert all(f is None for f in solve_coupled(EvolutionProblem(circle, cos_k(2, 6), T=0.1, dt=0.05)).flow)


def test_coupled_residuals(wavy, rng):
    p = EvolutionProblem(wavy, random_real_field(rng, 8), T=0.1, dt=0.02, form="coupled",
                         g=random_real_field(rng, 8), b=0.2 + 0.1j, b2=0.5,
                         stokes_coefficients=(normal_of(wavy), 0.05, 0.1),
                         data=InterfaceData(mu_outer=0.2, traction=lambda th, t: 0.1 * np.cos(th)))
    sol = solve_coupled(p)
    assert len(sol.residuals) == 3
    assert sol.diagnostics.posthoc_residual_max < 1e-6
    assert sol.diagnostics.bound_ratio > 0


def test_estimate_ratio_reported(circle):
    _, diag = evolve(EvolutionProblem(circle, cos_k(2, 8), T=0.2, dt=0.02), estimate_samples=3)
    assert diag.estimate_ratio is not None and 0 < diag.estimate_ratio < np.inf
