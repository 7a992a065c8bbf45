"""
Time stepping of the linearized interface evolution.

The unknown is a height function ``h(theta, t)`` on the parameter circle.  Two
forms are supported.  ``max_reg``:

    D_t h + b . grad_Gamma h - b1 h + [d_n mu] = g,
    mu+- = sigma Lap_Gamma h +- b2 h  (+ trace datum),

and ``coupled``, where the normal-derivative jump carries a factor ``1/2``
and the mean normal velocity of a two-phase Stokes flow is added,

    D_t h + b . grad_Gamma h - b1 h + (v+ + v-) . n / 2 + [d_n mu] / 2 = g,
    [sigma(v) n] = a3 h + a4 Lap_Gamma h + a5 grad_Gamma h  (+ traction datum).

Here ``D_t h = d_t h + d_t S d_theta h`` follows the moving curve.  Data that
do not involve ``h`` are removed first by solving the elliptic and Stokes
problems once per time node (:func:`reduce_data`).  The Mullins-Sekerka
operator is then treated implicitly and everything else explicitly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .elliptic import (BoundaryConfig, _residual, field_values, mu_estimate_report, normal_jump,
                       solve_two_phase_laplace)
from .errors import (CompatibilityViolated, ImplicitSolveFailed, InvalidConfig, StepsizeTooLarge,
                     ValidationError)
from .geometry import InterfaceGeometry, surface_gradient_values, surface_laplacian_values
from .ms_operator import apply_dirichlet_trace, assemble, coefficient_values
from .sobolev import PeriodicField, Trajectory, h_norm, l2_time_norm, xt_norm
from .stokes import (COMPAT_TOL, StokesData, _compat_scale, check_compatibility, solve_two_phase_stokes,
                     stokes_residual, vector_values)

log = logging.getLogger(__name__)

GROWTH_LIMIT = 10.0
SOLVE_TOL = 1e-8
POSTHOC_TOL = 1e-6
FORMS = ("max_reg", "coupled")
SCHEMES = ("imex", "bdf2")


@dataclass(frozen=True)
class InterfaceData:
    """Data of the full system that do not depend on ``h``.

    Scalar data: ``mu_source`` (volume source of ``mu``, see
    :func:`~mssolve.elliptic.solve_two_phase_laplace`), ``mu_trace`` (added
    to both traces of ``mu``) and ``mu_outer`` (outer datum).  Vector data:
    ``force``, ``velocity_jump``, ``traction`` and ``outer_velocity``.
    Interface data may be callables ``f(theta, t)``.
    """

    mu_source: object = None
    mu_trace: object = None
    mu_outer: object = None
    force: object = None
    velocity_jump: object = None
    traction: object = None
    outer_velocity: object = None

    @property
    def elliptic_part(self) -> bool:
        return any(x is not None for x in (self.mu_source, self.mu_trace, self.mu_outer))

    @property
    def stokes_part(self) -> bool:
        return any(x is not None for x in (self.force, self.velocity_jump, self.traction, self.outer_velocity))

    @property
    def empty(self) -> bool:
        return not (self.elliptic_part or self.stokes_part)


@dataclass(frozen=True, eq=False)
class EvolutionProblem:
    """Everything needed to integrate ``h`` over ``[0, T]``.

    Parameters
    ----------
    geometry : InterfaceGeometry
    h0 : PeriodicField
        Initial height; its cutoff ``K`` is used throughout.
    T, dt : float
        Horizon and step; ``T / dt`` is rounded to the nearest integer.
    g : PeriodicField, Trajectory or callable ``g(theta, t)``, optional
    sigma : float
    b : vector coefficient, optional
        Advection field; complex values ``b_x + i b_y``.
    b1, b2 : scalar coefficients, optional
    stokes_coefficients : tuple
        ``(a3, a4, a5)`` of the traction jump; ``coupled`` form only.
    data : InterfaceData
    form : {'max_reg', 'coupled'}
    scheme : {'imex', 'bdf2'}

    Coefficients are ``None``, scalars, fields or callables ``c(theta, t)``.
    """

    geometry: InterfaceGeometry
    h0: PeriodicField
    T: float
    dt: float
    g: object = None
    sigma: float = 1.0
    b: object = None
    b1: object = None
    b2: object = None
    stokes_coefficients: tuple = (None, None, None)
    data: InterfaceData = field(default_factory=InterfaceData)
    bc: BoundaryConfig = field(default_factory=BoundaryConfig)
    form: str = "max_reg"
    scheme: str = "imex"
    backend: str = "spectral"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError("surface tension must be positive")
        if not self.T > 0:
            raise ValidationError("horizon T must be positive")
        if not self.dt > 0:
            raise ValidationError("time step must be positive")
        if self.form not in FORMS:
            raise InvalidConfig(f"form must be one of {FORMS}")
        if self.scheme not in SCHEMES:
            raise InvalidConfig(f"scheme must be one of {SCHEMES}")
        if self.form == "max_reg" and (self.data.stokes_part or self.has_stokes_term):
            raise InvalidConfig("Stokes coefficients and data need form='coupled'")

    @property
    def K(self) -> int:
        return self.h0.K

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    @property
    def ms_weight(self) -> float:
        return 0.5 if self.form == "coupled" else 1.0

    @property
    def has_stokes_term(self) -> bool:
        return any(c is not None for c in self.stokes_coefficients)


# data helpers ---------------------------------------------------------------------


def _time_dependent(x) -> bool:
    return isinstance(x, Trajectory) or (callable(x) and not isinstance(x, PeriodicField))


def _frozen(x, t: float):
    """Data at time ``t`` in the form accepted by the elliptic and Stokes solvers."""
    if isinstance(x, Trajectory):
        return x.at(t)
    if callable(x) and not isinstance(x, PeriodicField):
        return lambda theta: x(theta, t)
    return x


def forcing_at(g, t: float, K: int) -> PeriodicField:
    """The forcing as a field of cutoff ``K`` at time ``t``."""
    if g is None:
        return PeriodicField.zeros(K)
    if isinstance(g, Trajectory):
        g = g.at(t)
    if isinstance(g, PeriodicField):
        return g.padded(K) if g.K <= K else PeriodicField(g.modes[g.K - K:g.K + K + 1], g.real)
    n = 4 * K + 8
    theta = 2 * np.pi * np.arange(n) / n
    return PeriodicField.from_values(np.real(coefficient_values(g, theta, t)), K)


def _geometry_time(problem: EvolutionProblem, t: float) -> float:
    return 0.0 if problem.geometry.is_static() else float(t)


# data reduction -------------------------------------------------------------------


def _stokes_data(d: InterfaceData, t: float, traction=None) -> StokesData:
    return StokesData(f=d.force, s=_frozen(d.velocity_jump, t),
                      a=_frozen(d.traction, t) if traction is None else traction,
                      g=_frozen(d.outer_velocity, t))


def _check_compatibility(problem: EvolutionProblem, times):
    d, bc = problem.data, problem.bc
    if not bc.gamma3_empty or (d.velocity_jump is None and d.outer_velocity is None):
        return
    for t in times:
        s, g = _frozen(d.velocity_jump, t), _frozen(d.outer_velocity, t)
        tg = _geometry_time(problem, t)
        flux = check_compatibility(s, g, problem.geometry, bc, tg)
        if abs(flux) > COMPAT_TOL * _compat_scale(s, g, problem.geometry, tg):
            raise CompatibilityViolated(
                f"net flux {flux:.6e} at t={t:.6g} must vanish when no traction boundary is present")


def _reduction_term(problem: EvolutionProblem, t: float) -> PeriodicField:
    """``w [d_n mu^] + (v^+ + v^-) . n / 2`` at time ``t``."""
    d, K = problem.data, problem.K
    tg = _geometry_time(problem, t)
    out = PeriodicField.zeros(K)
    if d.elliptic_part:
        mu = solve_two_phase_laplace(_frozen(d.mu_trace, t), a1=d.mu_source, a4=_frozen(d.mu_outer, t),
                                     bc=problem.bc, geometry=problem.geometry, t=tg, backend=problem.backend)
        out = out + problem.ms_weight * normal_jump(mu, problem.geometry, tg, K)
    if d.stokes_part:
        flow = solve_two_phase_stokes(_stokes_data(d, t), problem.bc, problem.geometry, tg,
                                      backend=problem.backend)
        out = out + _mean_normal_velocity(flow, K)
    return out


def _mean_normal_velocity(flow, K: int) -> PeriodicField:
    n = 4 * K + 16
    theta = 2 * np.pi * np.arange(n) / n
    return PeriodicField.from_values(flow.normal_velocity_mean(theta), K)


def reduce_data(problem: EvolutionProblem) -> EvolutionProblem:
    """Remove the ``h``-independent data by solving for them once per time node.

    Returns a problem with empty :class:`InterfaceData` whose forcing is the
    trajectory ``g^ = g - w [d_n mu^] - (v^+ + v^-) . n / 2`` on the time grid.

    Raises
    ------
    CompatibilityViolated
        When the velocity data carry a net flux and the traction boundary is
        empty, at any time node.
    """
    if problem.data.empty:
        return problem
    times = problem.times
    _check_compatibility(problem, times)
    d = problem.data
    static = problem.geometry.is_static() and not any(
        _time_dependent(x) for x in (d.mu_trace, d.mu_outer, d.velocity_jump, d.traction, d.outer_velocity))
    fixed = _reduction_term(problem, 0.0) if static else None
    fields = []
    for t in times:
        term = fixed if static else _reduction_term(problem, t)
        fields.append(forcing_at(problem.g, t, problem.K) - term)
    return replace(problem, g=Trajectory(times, fields), data=InterfaceData())


def stokes_velocity_term(h: PeriodicField, geometry: InterfaceGeometry, t: float = 0.0, a3=None, a4=None,
                         a5=None, bc: BoundaryConfig | None = None, backend: str = "spectral") -> PeriodicField:
    """``(v+ + v-) . n / 2`` for the flow driven by the traction jump ``a3 h + a4 Lap h + a5 grad h``.

    Solved directly with the Stokes solver; :func:`~mssolve.ms_operator.assemble`
    with ``kind='Bv'`` gives the same map as a matrix.
    """
    bc = bc or BoundaryConfig()
    bc.require_coercive()
    K = h.K
    if a3 is None and a4 is None and a5 is None:
        return PeriodicField.zeros(K)
    traction = _traction_datum(h, geometry, t, a3, a4, a5)
    flow = solve_two_phase_stokes(StokesData(a=traction), bc, geometry, t, backend=backend)
    return _mean_normal_velocity(flow, K)


def _traction_datum(h, geometry, t, a3, a4, a5, extra=None):
    def traction(theta):
        theta = np.asarray(theta, dtype=float)
        out = coefficient_values(a3, theta, t) * h(theta) + 0j
        if a4 is not None:
            out = out + coefficient_values(a4, theta, t) * surface_laplacian_values(h, geometry, t, theta)
        if a5 is not None:
            out = out + np.real(coefficient_values(a5, theta, t)) * surface_gradient_values(h, geometry, t, theta)
        if extra is not None:
            out = out + vector_values(extra, theta)
        return out
    return traction


# stepping -------------------------------------------------------------------------


@dataclass(frozen=True)
class StepReport:
    residual: float
    growth: float


def _operators(problem: EvolutionProblem, t: float):
    tg = _geometry_time(problem, t)
    A0 = assemble("A0", problem.geometry, tg, problem.K, sigma=problem.sigma).matrix
    B = assemble("Bfull", problem.geometry, tg, problem.K, sigma=problem.sigma, b2=problem.b2,
                 b=problem.b, b1=problem.b1, bc=problem.bc, traction=problem.stokes_coefficients,
                 ms_weight=problem.ms_weight).matrix
    return problem.ms_weight * A0, B


def _implicit_solve(lhs: np.ndarray, rhs: np.ndarray, diagonal: bool) -> tuple[np.ndarray, float]:
    try:
        x = rhs / np.diag(lhs) if diagonal else np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise ImplicitSolveFailed(f"implicit system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise ImplicitSolveFailed("implicit solve produced non-finite values")
    res = float(np.linalg.norm(lhs @ x - rhs) / max(np.linalg.norm(rhs), 1e-300))
    if res > SOLVE_TOL and np.linalg.norm(rhs) > 0:
        raise ImplicitSolveFailed(f"implicit solve residual {res:.3e} exceeds {SOLVE_TOL:g}")
    return x, res


def _growth(B: np.ndarray, dt: float) -> float:
    return float(np.linalg.norm(np.eye(B.shape[0]) - dt * B, 2))


def step(h_n: PeriodicField, t_n: float, dt: float, problem: EvolutionProblem,
         h_prev: PeriodicField | None = None, _cache: dict | None = None) -> PeriodicField:
    """Advance one step.

    Implicit-explicit Euler

        (I + dt w A0(t_{n+1})) h_{n+1} = h_n + dt (g(t_{n+1}) - B(t_n) h_n),

    or, with ``scheme='bdf2'`` and ``h_prev`` given, the second-order
    backward difference with extrapolated explicit part.  The problem must be
    homogenized (see :func:`reduce_data`).

    Raises
    ------
    StepsizeTooLarge
        ``||I - dt B(t_n)||_2`` exceeds ``GROWTH_LIMIT``.
    ImplicitSolveFailed
    """
    return _step(h_n, t_n, dt, problem, h_prev, _cache)[0]


def _ops_cached(problem, t, cache):
    if cache is None:
        return _operators(problem, t)
    key = round(t, 14)
    if key not in cache:
        if len(cache) > 4:
            cache.pop(next(iter(cache)))
        cache[key] = _operators(problem, t)
    return cache[key]


def _step(h_n, t_n, dt, problem, h_prev, cache):
    if not problem.data.empty:
        raise InvalidConfig("reduce the data first")
    K = problem.K
    t1 = t_n + dt
    A1, _ = _ops_cached(problem, t1, cache)
    _, Bn = _ops_cached(problem, t_n, cache)
    growth = _growth(Bn, dt)
    if growth > GROWTH_LIMIT:
        raise StepsizeTooLarge(f"explicit growth factor {growth:.3g} exceeds {GROWTH_LIMIT:g}; reduce dt")
    c_n = h_n.padded(K).modes
    g1 = forcing_at(problem.g, t1, K).modes
    I = np.eye(2 * K + 1)
    if problem.scheme == "bdf2" and h_prev is not None:
        _, Bp = _ops_cached(problem, t_n - dt, cache)
        c_p = h_prev.padded(K).modes
        lhs = 1.5 * I + dt * A1
        rhs = 2 * c_n - 0.5 * c_p + dt * (g1 - 2 * (Bn @ c_n) + Bp @ c_p)
    else:
        lhs = I + dt * A1
        rhs = c_n + dt * (g1 - Bn @ c_n)
    diagonal = problem.geometry.is_circle(_geometry_time(problem, t1)) and not np.any(
        np.abs(A1 - np.diag(np.diag(A1))) > 1e-9 * max(1.0, np.max(np.abs(A1))))
    x, res = _implicit_solve(lhs, rhs, diagonal)
    out = PeriodicField(0.5 * (x + np.conj(x[::-1])), True) if h_n.real else PeriodicField(x, False)
    return out, StepReport(res, growth)


@dataclass
class Diagnostics:
    xt_norm: float
    g_norm: float
    h0_norm: float
    step_residual_max: float
    growth_max: float
    estimate_ratio: float | None = None
    posthoc_residual_max: float | None = None

    @property
    def bound_ratio(self) -> float:
        """``xt_norm(h) / (||g||_{L2 H^1/2} + ||h0||_{H^2})``."""
        den = self.g_norm + self.h0_norm
        return 0.0 if den == 0 else self.xt_norm / den

    def as_dict(self) -> dict:
        return {"xt_norm": self.xt_norm, "g_norm": self.g_norm, "h0_norm": self.h0_norm,
                "bound_ratio": self.bound_ratio, "step_residual_max": self.step_residual_max,
                "growth_max": self.growth_max, "estimate_ratio": self.estimate_ratio,
                "posthoc_residual_max": self.posthoc_residual_max}


def forcing_trajectory(problem: EvolutionProblem) -> Trajectory:
    return Trajectory(problem.times, [forcing_at(problem.g, t, problem.K) for t in problem.times])


def evolve(problem: EvolutionProblem, estimate_samples: int = 0) -> tuple[Trajectory, Diagnostics]:
    """Integrate over ``[0, T]`` on the uniform grid.

    ``estimate_samples > 1`` additionally reconstructs ``mu`` at that many
    equally spaced time nodes and reports the ratio of the two sides of the
    chemical-potential estimate.
    """
    hom = reduce_data(problem)
    times = hom.times
    dt = times[1] - times[0]
    h = hom.h0
    hs = [h]
    prev = None
    res_max, growth_max = 0.0, 0.0
    cache: dict = {}
    for n in range(hom.n_steps):
        h_new, rep = _step(h, times[n], dt, hom, prev, cache)
        res_max, growth_max = max(res_max, rep.residual), max(growth_max, rep.growth)
        prev, h = h, h_new
        hs.append(h)
    traj = Trajectory(times, hs)
    diag = Diagnostics(xt_norm(traj), l2_time_norm(forcing_trajectory(hom), 0.5), h_norm(hom.h0, 2.0),
                       res_max, growth_max)
    if estimate_samples > 1:
        idx = np.unique(np.linspace(0, len(traj) - 1, estimate_samples).round().astype(int))
        mus = [_chemical_potential(problem, traj[i], times[i]) for i in idx]
        sub = Trajectory(times[idx], [traj[i] for i in idx])
        diag.estimate_ratio = mu_estimate_report(mus, sub).ratio
    return traj, diag


# reconstruction -------------------------------------------------------------------


def _mu_traces(problem: EvolutionProblem, h: PeriodicField, t: float):
    tg = _geometry_time(problem, t)
    K = 2 * h.K + 8
    extra = _frozen(problem.data.mu_trace, t)
    out = []
    for sign in (1, -1):
        f = apply_dirichlet_trace(h, sign, problem.sigma, problem.b2, problem.geometry, tg, K)
        if extra is not None:
            n = 4 * K + 8
            theta = 2 * np.pi * np.arange(n) / n
            f = f + PeriodicField.from_values(np.real(field_values(extra, theta)), K)
        out.append(f)
    return tuple(out)


def _chemical_potential(problem: EvolutionProblem, h: PeriodicField, t: float):
    tg = _geometry_time(problem, t)
    return solve_two_phase_laplace(_mu_traces(problem, h, t), a1=problem.data.mu_source,
                                   a4=_frozen(problem.data.mu_outer, t), bc=problem.bc,
                                   geometry=problem.geometry, t=tg, backend=problem.backend)


def _flow(problem: EvolutionProblem, h: PeriodicField, t: float):
    tg = _geometry_time(problem, t)
    a3, a4, a5 = problem.stokes_coefficients
    traction = _traction_datum(h, problem.geometry, tg, a3, a4, a5, _frozen(problem.data.traction, t))
    data = _stokes_data(problem.data, t, traction)
    return solve_two_phase_stokes(data, problem.bc, problem.geometry, tg, backend=problem.backend), data


@dataclass
class CoupledSolution:
    """Height trajectory with the chemical potential and flow at output times."""

    h: Trajectory
    times: np.ndarray
    mu: list
    flow: list
    residuals: dict
    diagnostics: Diagnostics


def _mu_residual(mu, traces, problem: EvolutionProblem, t: float, n: int = 512) -> float:
    return _residual(mu, traces[0], traces[1], _frozen(problem.data.mu_outer, t), problem.bc, n)


def solve_coupled(problem: EvolutionProblem, output_times=None) -> CoupledSolution:
    """Run :func:`evolve` and rebuild ``mu`` and ``(v, p)`` at the output times.

    Every interface and outer condition is re-evaluated on a fine grid; the
    largest relative residual per time is reported in ``residuals`` and must
    stay below ``POSTHOC_TOL``.
    """
    traj, diag = evolve(problem)
    if output_times is None:
        output_times = traj.times[[0, len(traj) // 2, len(traj) - 1]]
    out_t = np.asarray(output_times, dtype=float)
    mus, flows, residuals = [], [], {}
    for t in out_t:
        i = int(np.argmin(np.abs(traj.times - t)))
        h = traj[i]
        tt = float(traj.times[i])
        traces = _mu_traces(problem, h, tt)
        mu = _chemical_potential(problem, h, tt)
        r = _mu_residual(mu, traces, problem, tt)
        mus.append(mu)
        if problem.form == "coupled":
            flow, data = _flow(problem, h, tt)
            r = max(r, stokes_residual(flow, data))
            flows.append(flow)
        else:
            flows.append(None)
        residuals[tt] = r
    diag.posthoc_residual_max = max(residuals.values())
    if diag.posthoc_residual_max > POSTHOC_TOL:
        log.warning("post hoc residual %.3e exceeds %.1e", diag.posthoc_residual_max, POSTHOC_TOL)
    return CoupledSolution(traj, out_t, mus, flows, residuals, diag)
