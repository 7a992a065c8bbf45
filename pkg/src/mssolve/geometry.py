"""
Star-shaped evolving interfaces inside a disk, tubular coordinates and
surface differential operators.

The interface at time ``t`` is ``Gamma_t = {rho(theta, t) (cos theta, sin theta)}``
and the outer domain is the disk of radius ``R``.  Points in the plane are
handled internally as complex numbers ``x + iy``.  The unit normal ``n`` points
from the annular phase ``Omega^-`` into the enclosed phase ``Omega^+``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (InsufficientTimeSamples, NonPositiveRadius, OutsideTubularNeighborhood,
                     SeparationViolation, ValidationError)
from .sobolev import PeriodicField, Trajectory

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50
_DENSE = 2048


@dataclass(frozen=True, eq=False)
class CurveSnapshot:
    """Parametrized closed curve sampled on a uniform grid in ``theta``."""

    theta: np.ndarray
    z: np.ndarray        # X0(theta)
    dz: np.ndarray       # d X0 / d theta
    ddz: np.ndarray
    normal: np.ndarray   # unit normal, complex
    speed: np.ndarray    # |dX0/dtheta|
    kappa: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights for the arclength measure."""
        return self.speed * (2 * np.pi / self.theta.size)

    @property
    def tangent(self) -> np.ndarray:
        return self.dz / self.speed

    @property
    def length(self) -> float:
        return float(np.sum(self.weights))


def _circle_snapshot(radius: float, n: int, inward: bool) -> CurveSnapshot:
    theta = 2 * np.pi * np.arange(n) / n
    e = np.exp(1j * theta)
    z = radius * e
    dz = 1j * radius * e
    ddz = -radius * e
    normal = -e if inward else e
    speed = np.full(n, float(radius))
    kappa = np.full(n, 1.0 / radius)
    return CurveSnapshot(theta, z, dz, ddz, normal, speed, kappa)


@dataclass(frozen=True)
class TubularPoint:
    r: float
    s: float
    t: float


class InterfaceGeometry:
    """Prescribed family of star-shaped curves inside the disk ``|x| < R``.

    Parameters
    ----------
    radius_modes : array_like, shape (n_times, 2K+1) or (2K+1,)
        Fourier coefficients of ``rho(., t)`` (ordered ``k=-K..K``) at each
        stored time.
    outer_radius : float
    delta : float
        Tubular half-width; ``dist(boundary, Gamma_t) > 3 delta`` is required.
    time_grid : sequence of float, optional
        Times of the stored samples.  Coefficients are interpolated by cubic
        splines in between.
    """

    def __init__(self, radius_modes, outer_radius: float, delta: float,
                 time_grid: Sequence[float] | None = None):
        modes = np.atleast_2d(np.asarray(radius_modes, dtype=complex))
        if modes.shape[1] % 2 == 0:
            raise ValidationError("radius modes must have odd length 2K+1")
        if time_grid is None:
            time_grid = np.zeros(1) if modes.shape[0] == 1 else np.linspace(0.0, 1.0, modes.shape[0])
        tg = np.asarray(time_grid, dtype=float)
        if tg.size != modes.shape[0]:
            raise ValidationError("one coefficient list per stored time is required")
        if tg.size > 1 and np.any(np.diff(tg) <= 0):
            raise ValidationError("time grid must be increasing")
        # real radius: impose conjugate symmetry
        modes = 0.5 * (modes + np.conj(modes[:, ::-1]))
        self.modes = modes
        self.Kr = (modes.shape[1] - 1) // 2
        self.R = float(outer_radius)
        self.delta = float(delta)
        self.time_grid = tg
        self._spline = CubicSpline(tg, modes, axis=0) if tg.size > 1 else None
        if self.delta <= 0:
            raise ValidationError("delta must be positive")
        self._validate()

    # construction helpers ---------------------------------------------------
    @classmethod
    def circle(cls, r0: float, R: float, delta: float) -> "InterfaceGeometry":
        return cls(np.array([r0], dtype=complex), R, delta)

    @classmethod
    def from_function(cls, rho, K: int, R: float, delta: float, time_grid=None) -> "InterfaceGeometry":
        """Sample ``rho(theta, t)`` into ``K`` radius modes per stored time."""
        tg = np.zeros(1) if time_grid is None else np.asarray(time_grid, dtype=float)
        n = 4 * K + 8
        theta = 2 * np.pi * np.arange(n) / n
        modes = [PeriodicField.from_values(rho(theta, t), K).modes for t in tg]
        return cls(np.array(modes), R, delta, tg)

    def _validate(self):
        theta = 2 * np.pi * np.arange(_DENSE) / _DENSE
        for t in self.time_grid:
            rho = self.radius(theta, t)
            if np.min(rho) <= 0:
                raise NonPositiveRadius(f"radius not positive at t={t}")
            gap = self.R - np.max(rho)
            if gap <= 3 * self.delta:
                raise SeparationViolation(
                    f"gap R - max(rho) = {gap:.6g} must exceed 3*delta = {3 * self.delta:.6g} (t={t})")
            kmax = np.max(np.abs(self.snapshot(t, _DENSE).kappa))
            if 3 * self.delta * kmax >= 1.0:
                raise SeparationViolation(
                    f"3*delta = {3 * self.delta:.6g} exceeds the curvature radius {1 / kmax:.6g} (t={t})")

    # radius and its derivatives --------------------------------------------
    def _coeffs(self, t: float, dt: int = 0) -> np.ndarray:
        if self._spline is None:
            return self.modes[0] if dt == 0 else np.zeros_like(self.modes[0])
        t = float(np.clip(t, self.time_grid[0], self.time_grid[-1]))
        return self._spline(t, dt)

    def radius(self, theta, t: float = 0.0, dtheta: int = 0, dt: int = 0) -> np.ndarray:
        c = self._coeffs(t, dt)
        k = np.arange(-self.Kr, self.Kr + 1)
        th = np.asarray(theta, dtype=float)
        return (np.exp(1j * np.multiply.outer(th, k)) @ (c * (1j * k) ** dtheta)).real

    def is_static(self) -> bool:
        return self._spline is None or np.allclose(self.modes, self.modes[0], atol=1e-14, rtol=0)

    def is_circle(self, t: float | None = None) -> bool:
        """True when ``rho`` has no non-constant modes (at ``t`` or at all times)."""
        c = self.modes if t is None else self._coeffs(t)[None, :]
        mask = np.ones(c.shape[1], dtype=bool)
        mask[self.Kr] = False
        return bool(np.all(np.abs(c[:, mask]) < 1e-14))

    def mean_radius(self, t: float = 0.0) -> float:
        return float(self._coeffs(t)[self.Kr].real)

    def radius_bounds(self, t: float = 0.0) -> tuple[float, float]:
        theta = 2 * np.pi * np.arange(_DENSE) / _DENSE
        rho = self.radius(theta, t)
        return float(rho.min()), float(rho.max())

    # parametrization ----------------------------------------------------------
    def point(self, theta, t: float = 0.0) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        return self.radius(th, t) * np.exp(1j * th)

    def tangent_vector(self, theta, t: float = 0.0) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        return (self.radius(th, t, 1) + 1j * self.radius(th, t)) * np.exp(1j * th)

    def second_derivative(self, theta, t: float = 0.0) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        r, r1, r2 = self.radius(th, t), self.radius(th, t, 1), self.radius(th, t, 2)
        return (r2 + 2j * r1 - r) * np.exp(1j * th)

    def velocity(self, theta, t: float = 0.0) -> np.ndarray:
        """``d X0 / dt`` at fixed parameter."""
        th = np.asarray(theta, dtype=float)
        return self.radius(th, t, 0, 1) * np.exp(1j * th)

    def normal(self, theta, t: float = 0.0) -> np.ndarray:
        d = self.tangent_vector(theta, t)
        return 1j * d / np.abs(d)

    def X(self, r, s, t: float = 0.0) -> np.ndarray:
        """Tubular coordinates ``X(r, s, t) = X0(s, t) + r n(s, t)``."""
        return self.point(s, t) + np.asarray(r) * self.normal(s, t)

    def dS_dt(self, theta, t: float = 0.0) -> np.ndarray:
        """``partial_t S`` evaluated at ``X0(theta, t)``."""
        d = self.tangent_vector(theta, t)
        v = self.velocity(theta, t)
        return -np.real(np.conj(v) * d) / np.abs(d) ** 2

    @lru_cache(maxsize=64)
    def snapshot(self, t: float = 0.0, n: int = 256) -> CurveSnapshot:
        theta = 2 * np.pi * np.arange(n) / n
        z = self.point(theta, t)
        dz = self.tangent_vector(theta, t)
        ddz = self.second_derivative(theta, t)
        speed = np.abs(dz)
        kappa = np.imag(np.conj(dz) * ddz) / speed ** 3
        return CurveSnapshot(theta, z, dz, ddz, 1j * dz / speed, speed, kappa)

    @lru_cache(maxsize=16)
    def outer_snapshot(self, n: int = 256) -> CurveSnapshot:
        """The outer circle with its exterior normal."""
        return _circle_snapshot(self.R, n, inward=False)

    def contains(self, x, t: float = 0.0) -> np.ndarray:
        """True for points of the enclosed phase ``Omega^+``."""
        z = _as_complex(x)
        return np.abs(z) < self.radius(np.angle(z), t)

    def __repr__(self):
        return f"InterfaceGeometry(Kr={self.Kr}, R={self.R}, delta={self.delta}, n_times={self.time_grid.size})"


def _as_complex(x) -> np.ndarray | complex:
    a = np.asarray(x)
    if np.iscomplexobj(a):
        return a
    if a.shape and a.shape[-1] == 2:
        return a[..., 0] + 1j * a[..., 1]
    raise ValidationError("points must be complex numbers or (..., 2) arrays")


def build_interface(radius_modes, R: float, delta: float, time_grid=None) -> InterfaceGeometry:
    """Validate and build an :class:`InterfaceGeometry`.

    ``radius_modes`` may be an array of coefficients, or (for a static curve)
    a list of ``(k, re, im)`` triples as read from a scenario file.
    """
    rm = radius_modes
    if isinstance(rm, PeriodicField):
        rm = rm.modes
    elif isinstance(rm, (list, tuple)) and rm and isinstance(rm[0], (list, tuple)) and len(rm[0]) == 3 \
            and not isinstance(rm[0][0], (list, tuple)):
        K = max(abs(int(e[0])) for e in rm)
        rm = PeriodicField.from_modes(K, rm).modes
    return InterfaceGeometry(rm, R, delta, time_grid)


def _project_newton(geometry: InterfaceGeometry, z: complex, t: float, theta0: float) -> float:
    th = theta0
    for _ in range(NEWTON_MAXIT):
        X = geometry.point(th, t)
        d1 = geometry.tangent_vector(th, t)
        d2 = geometry.second_derivative(th, t)
        diff = z - X
        g = -np.real(np.conj(diff) * d1)
        H = abs(d1) ** 2 - np.real(np.conj(diff) * d2)
        if H <= 0:
            H = abs(d1) ** 2
        step = g / H
        th = th - step
        if abs(step) < NEWTON_TOL:
            break
    return float(np.mod(th, 2 * np.pi))


def closest_point(x, geometry: InterfaceGeometry, t: float = 0.0) -> tuple[float, float]:
    """Parameter of the nearest curve point and the (unsigned) distance."""
    z = complex(_as_complex(x))
    theta = 2 * np.pi * np.arange(_DENSE) / _DENSE
    d = np.abs(z - geometry.point(theta, t))
    # polish the few best local minima; the global one wins
    is_min = (d <= np.roll(d, 1)) & (d <= np.roll(d, -1))
    cand = np.where(is_min)[0]
    cand = cand[np.argsort(d[cand])][:4]
    best = (np.inf, 0.0)
    for j in cand:
        th = _project_newton(geometry, z, t, theta[j])
        dist = abs(z - geometry.point(th, t))
        if dist < best[0]:
            best = (dist, th)
    return best[1], best[0]


def signed_distance(x, geometry: InterfaceGeometry, t: float = 0.0) -> float:
    """Positive in the enclosed phase, negative in the annular phase."""
    z = complex(_as_complex(x))
    _, dist = closest_point(z, geometry, t)
    return float(dist if geometry.contains(z, t) else -dist)


def tubular_coordinates(x, geometry: InterfaceGeometry, t: float = 0.0) -> TubularPoint:
    z = complex(_as_complex(x))
    s, dist = closest_point(z, geometry, t)
    if dist >= 3 * geometry.delta:
        raise OutsideTubularNeighborhood(
            f"|sdist| = {dist:.6g} is not below 3*delta = {3 * geometry.delta:.6g}")
    r = dist if geometry.contains(z, t) else -dist
    return TubularPoint(float(r), s, float(t))


# surface operators ------------------------------------------------------------


def _oversampled(h: PeriodicField, geometry: InterfaceGeometry) -> int:
    return max(8 * (h.K + geometry.Kr) + 8, 64)


def surface_gradient_values(h, geometry: InterfaceGeometry, t: float, theta) -> np.ndarray:
    """``grad_Gamma h = grad S (X0) d_s h`` as complex vectors at ``theta``."""
    d = geometry.tangent_vector(theta, t)
    return d / np.abs(d) ** 2 * h.derivative(1)(theta)


def surface_laplacian_values(h, geometry: InterfaceGeometry, t: float, theta) -> np.ndarray:
    """``Delta_Gamma h = Delta S(X0) d_s h + |grad S|^2 d_s^2 h`` at ``theta``."""
    th = np.asarray(theta, dtype=float)
    d1 = geometry.tangent_vector(th, t)
    d2 = geometry.second_derivative(th, t)
    speed = np.abs(d1)
    dspeed = np.real(np.conj(d1) * d2) / speed
    lap_S = -dspeed / speed ** 3
    return lap_S * h.derivative(1)(th) + h.derivative(2)(th) / speed ** 2


def surface_gradient(h: PeriodicField, geometry: InterfaceGeometry, t: float = 0.0,
                     K: int | None = None) -> tuple[PeriodicField, PeriodicField]:
    """Components ``(x, y)`` of the surface gradient, truncated to ``K``."""
    K = h.K if K is None else K
    n = _oversampled(h, geometry)
    theta = 2 * np.pi * np.arange(n) / n
    g = surface_gradient_values(h, geometry, t, theta)
    return PeriodicField.from_values(g.real, K, h.real), PeriodicField.from_values(g.imag, K, h.real)


def surface_laplacian(h: PeriodicField, geometry: InterfaceGeometry, t: float = 0.0,
                      K: int | None = None) -> PeriodicField:
    K = h.K if K is None else K
    n = _oversampled(h, geometry)
    theta = 2 * np.pi * np.arange(n) / n
    return PeriodicField.from_values(surface_laplacian_values(h, geometry, t, theta), K, h.real)


def material_derivative(h_traj: Trajectory, geometry: InterfaceGeometry, K: int | None = None) -> Trajectory:
    """``D_{t,Gamma} h = d_t h + d_t S(X0) d_s h`` along the trajectory.

    The advective product is resolved up to ``K`` (default ``h.K + 8 Kr``
    with ``Kr`` the cutoff of the radius), since ``d_t S`` is not band limited.
    """
    if len(h_traj) < 2:
        raise InsufficientTimeSamples("material derivative needs at least two time samples")
    K = h_traj.K + 8 * geometry.Kr if K is None else K
    dt_coeffs = h_traj.time_derivative()
    out = []
    for t, h, dc in zip(h_traj.times, h_traj.fields, dt_coeffs):
        n = max(_oversampled(h, geometry), 4 * K + 8)
        theta = 2 * np.pi * np.arange(n) / n
        adv = geometry.dS_dt(theta, t) * h.derivative(1)(theta)
        out.append(PeriodicField(dc, h.real).padded(K) + PeriodicField.from_values(adv, K, h.real))
    return Trajectory(h_traj.times, out)


# cut-off ------------------------------------------------------------------------


def _psi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _smoothstep(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    a, b = _psi(u), _psi(1.0 - np.asarray(u, dtype=float))
    return a / (a + b)


def cutoff(s, delta: float):
    """Smooth ``xi`` with ``xi=1`` on ``|s|<=delta`` and ``xi=0`` for ``|s|>2 delta``."""
    if delta <= 0:
        raise ValidationError("delta must be positive")
    s_arr = np.abs(np.asarray(s, dtype=float))
    out = 1.0 - _smoothstep((s_arr - delta) / delta)
    return float(out) if np.ndim(s) == 0 else out


def cutoff_derivative(s, delta: float):
    """Analytic derivative ``xi'(s)``."""
    s_arr = np.asarray(s, dtype=float)
    u = (np.abs(s_arr) - delta) / delta
    a, b = _psi(u), _psi(1.0 - u)
    inside = (u > 0) & (u < 1)
    da = np.zeros_like(u)
    db = np.zeros_like(u)
    da[inside] = a[inside] / u[inside] ** 2
    db[inside] = -b[inside] / (1.0 - u[inside]) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        dstep = np.where(inside, (da * b - a * db) / (a + b) ** 2, 0.0)
    out = -dstep / delta * np.sign(s_arr)
    return float(out) if np.ndim(s) == 0 else out


@lru_cache(maxsize=32)
def phase_quadrature(geometry: InterfaceGeometry, t: float, phase: int, n_r: int = 24,
                     n_theta: int = 128) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights for integrals over ``Omega^+`` (``phase=1``) or ``Omega^-``.

    Gauss-Legendre in the radial fraction between the two boundary curves,
    trapezoid in the angle.
    """
    x, w = np.polynomial.legendre.leggauss(n_r)
    u, wu = 0.5 * (x + 1), 0.5 * w
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    rho = geometry.radius(theta, t)
    if phase > 0:
        r = np.outer(u, rho)
        jac = np.outer(wu * u, rho ** 2)
    else:
        r = rho[None, :] + np.outer(u, geometry.R - rho)
        jac = wu[:, None] * r * (geometry.R - rho)[None, :]
    z = r * np.exp(1j * theta)[None, :]
    return z.ravel(), (jac * (2 * np.pi / n_theta)).ravel()


def geometry_table(geometry: InterfaceGeometry, t: float = 0.0, n: int = 256) -> np.ndarray:
    """Rows ``(theta, x, y, n_x, n_y, kappa)``."""
    snap = geometry.snapshot(t, n)
    return np.column_stack([snap.theta, snap.z.real, snap.z.imag, snap.normal.real,
                            snap.normal.imag, snap.kappa])
