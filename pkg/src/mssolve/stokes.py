"""
Two-phase Stokes problems.

Find ``(v+, p+)`` in the enclosed phase and ``(v-, p-)`` in the annular phase
with

    -Lap v + grad p = f,   div v = 0          in each phase,
    [v] = s,   [(2 D v - p I) n] = a          on Gamma_t,

and one of the outer conditions on ``|x| = R``

    B1:  v = g
    B2:  v . e_r = g . e_r,   tau . (2 D v - p I) e_r + alpha2 v . tau = g . tau
    B3:  (2 D v - p I) e_r + alpha3 v = g

Jumps are ``[q] = q+ - q-`` and ``n`` points into the enclosed phase.  When
the traction boundary is empty (B1, B2) the pressure is normalized to have
zero mean over the whole disk and the data must satisfy
``int_Gamma s . n + int_{|x|=R} g . e_r = 0``.

Vectors are complex numbers ``v_x + i v_y`` throughout; vector data on a
curve may be a complex :class:`PeriodicField` of the curve parameter, a
callable returning complex values, a complex scalar or ``None``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import _galerkin, bie
from ._bases import HarmonicBasis, PolynomialForce, StokesBasis
from .elliptic import (BoundaryConfig, EstimateReport, LeastSquares, _data_K, field_values, phase_rings,
                       ring_norm)
from .errors import BackendResolutionTooLow, CompatibilityViolated, InvalidConfig, SingularForm
from .geometry import InterfaceGeometry, phase_quadrature
from .sobolev import PeriodicField, h_norm

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
COMPAT_TOL = 1e-10
ENERGY_TOL = 1e-6
LIFT_TOL = 1e-9
SINGULAR_TOL = 1e-9
_CHUNK = 2048


# data -----------------------------------------------------------------------------


def _as_force(f) -> PolynomialForce:
    if f is None:
        return PolynomialForce()
    if isinstance(f, PolynomialForce):
        return f
    if np.isscalar(f):
        return PolynomialForce(((0, complex(f)),))
    raise InvalidConfig("body force must be a PolynomialForce, a constant or None")


@dataclass(frozen=True)
class StokesData:
    """Right-hand sides of the two-phase Stokes problem.

    Parameters
    ----------
    f : PolynomialForce or pair, optional
        Body force; a pair gives ``(f+, f-)``.
    s, a : vector data on the interface
        Velocity and traction jumps.
    g : vector data on the outer circle
        Function of the polar angle.
    """

    f: object = None
    s: object = None
    a: object = None
    g: object = None

    @property
    def forces(self) -> tuple[PolynomialForce, PolynomialForce]:
        if isinstance(self.f, (tuple, list)):
            return _as_force(self.f[0]), _as_force(self.f[1])
        f = _as_force(self.f)
        return f, f


def vector_values(data, theta) -> np.ndarray:
    """Complex samples of vector data."""
    return np.asarray(field_values(data, theta), dtype=complex)


def normal_tangential(a_n, a_t, geometry: InterfaceGeometry, t: float = 0.0):
    """Interface vector field ``a_n n + a_t tau`` with ``tau = X'/|X'|``."""
    def fn(theta):
        nrm = geometry.normal(theta, t)
        return field_values(a_n, theta) * nrm - 1j * field_values(a_t, theta) * nrm
    return fn


def polar(g_r, g_t):
    """Outer vector field ``g_r e_r + g_t e_theta`` on the outer circle."""
    def fn(theta):
        return (field_values(g_r, theta) + 1j * field_values(g_t, theta)) * np.exp(1j * np.asarray(theta))
    return fn


def _dot(u, v):
    """Euclidean inner product of complex-encoded vectors."""
    return np.real(np.conj(u) * v)


def check_compatibility(s, g, geometry: InterfaceGeometry, bc: BoundaryConfig | None = None,
                        t: float = 0.0, n: int = 1024) -> float:
    """``int_Gamma n . s ds - int_{|x|=R} e_r . g ds``.

    Must vanish when the traction boundary is empty: both phases are
    divergence free, ``n`` points into the enclosed phase and ``s = v+ - v-``,
    so the flux of ``v-`` through the outer circle equals that of ``s``
    through the interface.  ``bc`` is accepted for symmetry with the solver
    and does not change the value.
    """
    snap = geometry.snapshot(t, n)
    theta = snap.theta
    inner = np.sum(_dot(snap.normal, vector_values(s, theta)) * snap.weights)
    er = np.exp(1j * theta)
    outer = np.sum(_dot(er, vector_values(g, theta))) * geometry.R * 2 * np.pi / n
    return float(inner - outer)


def _compat_scale(s, g, geometry, t, n=1024) -> float:
    snap = geometry.snapshot(t, n)
    a = np.sum(np.abs(vector_values(s, snap.theta)) * snap.weights)
    b = np.sum(np.abs(vector_values(g, snap.theta))) * geometry.R * 2 * np.pi / n
    return float(1.0 + a + b)


# fields ---------------------------------------------------------------------------


class TwoPhaseFlowField:
    """Velocity and pressure of both phases; ``phase = +1`` is the enclosed phase."""

    backend = "abstract"

    def __init__(self, geometry: InterfaceGeometry, t: float, K: int, bc: BoundaryConfig,
                 forces: tuple[PolynomialForce, PolynomialForce]):
        self.geometry = geometry
        self.t = float(t)
        self.K = int(K)
        self.bc = bc
        self.forces = forces
        self.p_shift = 0.0

    def velocity(self, z, phase: int) -> np.ndarray:
        raise NotImplementedError

    def interface_traces(self, theta) -> dict:
        """Traces on the interface: ``v+, v-, p+, p-, t+, t-`` with ``t = sigma n``."""
        raise NotImplementedError

    def outer_traces(self, theta) -> dict:
        """Traces on ``|x| = R``: ``v, p, t`` with ``t = sigma e_r``."""
        raise NotImplementedError

    def normal_velocity_mean(self, theta) -> np.ndarray:
        """``(v+ + v-) . n / 2`` on the interface."""
        tr = self.interface_traces(theta)
        nrm = self.geometry.normal(theta, self.t)
        return 0.5 * _dot(nrm, tr["v+"] + tr["v-"])


class SpectralFlowField(TwoPhaseFlowField):
    """Goursat expansions of both phases."""

    backend = "spectral"

    def __init__(self, geometry, t, K, bc, forces, inner: StokesBasis, outer: StokesBasis,
                 c_inner, c_outer, cond: float):
        super().__init__(geometry, t, K, bc, forces)
        self.inner, self.outer = inner, outer
        self.c_inner = np.asarray(c_inner)
        self.c_outer = np.asarray(c_outer)
        self.cond = cond

    def columns(self, z, phase):
        """``(w, p, A, B)`` at the points ``z`` including the particular solution."""
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        basis, c = (self.inner, self.c_inner) if phase > 0 else (self.outer, self.c_outer)
        out = [np.empty(z.size, dtype=complex), np.empty(z.size), np.empty(z.size, dtype=complex),
               np.empty(z.size, dtype=complex)]
        for i in range(0, z.size, _CHUNK):
            sl = slice(i, i + _CHUNK)
            cols = basis.evaluate(z[sl])
            out[0][sl], out[1][sl], out[2][sl], out[3][sl] = cols.w @ c, cols.p @ c, cols.A @ c, cols.B @ c
        w, p, A, B = self.forces[0 if phase > 0 else 1].particular(z)
        return out[0] + w, out[1] + p + self.p_shift, out[2] + A, out[3] + B

    def velocity(self, z, phase):
        z = np.asarray(z, dtype=complex)
        return self.columns(z, phase)[0].reshape(z.shape)

    def pressure(self, z, phase):
        z = np.asarray(z, dtype=complex)
        return self.columns(z, phase)[1].reshape(z.shape)

    def traction(self, z, normal, phase):
        w, p, A, B = self.columns(z, phase)
        nrm = np.asarray(normal, dtype=complex).ravel()
        return (-p + 2 * np.real(A)) * nrm + 2 * B * np.conj(nrm)

    def strain_density(self, z, phase):
        """``|D v|^2``."""
        _, _, A, B = self.columns(z, phase)
        return 2 * np.real(A) ** 2 + 2 * np.abs(B) ** 2

    def interface_traces(self, theta):
        theta = np.asarray(theta, dtype=float)
        z = self.geometry.point(theta, self.t)
        nrm = self.geometry.normal(theta, self.t)
        out = {}
        for sgn, ph in (("+", 1), ("-", -1)):
            w, p, A, B = self.columns(z, ph)
            out["v" + sgn] = w
            out["p" + sgn] = p
            out["t" + sgn] = (-p + 2 * np.real(A)) * nrm + 2 * B * np.conj(nrm)
        return out

    def outer_traces(self, theta):
        theta = np.asarray(theta, dtype=float)
        er = np.exp(1j * theta)
        w, p, A, B = self.columns(self.geometry.R * er, -1)
        return {"v": w, "p": p, "t": (-p + 2 * np.real(A)) * er + 2 * B * np.conj(er)}


class BIEFlowField(TwoPhaseFlowField):
    """Cauchy data on the Nystrom nodes of both curves."""

    backend = "bie"

    def __init__(self, geometry, t, K, bc, forces, gamma, outer, L, nodal: dict, homogeneous: dict):
        super().__init__(geometry, t, K, bc, forces)
        self.gamma, self.outer_curve, self.L = gamma, outer, L
        self.nodal = nodal
        self.homogeneous = homogeneous

    def velocity(self, z, phase):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        h = self.homogeneous
        if phase > 0:
            curves = [(self.gamma, h["v+"], h["t+"])]
        else:
            gm = replace(self.gamma, normal=-self.gamma.normal)
            cm = replace(self.outer_curve, normal=-self.outer_curve.normal)
            curves = [(gm, h["v-"], -h["t-"]), (cm, h["vC"], -h["tC"])]
        v = bie.stokes_eval(z.ravel(), curves, self.L)
        w = self.forces[0 if phase > 0 else 1].particular(z.ravel())[0]
        return (v + w).reshape(z.shape)

    @staticmethod
    def _interp(nodal, theta):
        return PeriodicField.from_values(nodal, real=False)(np.asarray(theta, dtype=float))

    def interface_traces(self, theta):
        return {k: self._interp(self.nodal[k], theta) for k in ("v+", "v-", "p+", "p-", "t+", "t-")}

    def outer_traces(self, theta):
        out = {k: self._interp(self.nodal[k + "C"], theta) for k in ("v", "p", "t")}
        out["p"] = out["p"].real
        return out


# spectral backend -----------------------------------------------------------------


def _outer_rows(W, T, er, bc: BoundaryConfig):
    """Real rows of the outer condition for columns ``W`` (velocity) and ``T`` (traction)."""
    e = np.conj(er)[:, None]
    if bc.v_outer == "B1":
        return [W.real, W.imag]
    if bc.v_outer == "B2":
        return [np.real(e * W), np.imag(e * (T + bc.alpha2 * W))]
    X = T + bc.alpha3 * W
    return [X.real, X.imag]


def _outer_rhs(g, er, bc: BoundaryConfig):
    e = np.conj(er)
    if bc.v_outer == "B2":
        return [np.real(e * g), np.imag(e * g)]
    return [g.real, g.imag]


class SpectralStokesSystem:
    """Collocation matrix for one snapshot and outer condition, factorized once."""

    def __init__(self, geometry: InterfaceGeometry, t: float, bc: BoundaryConfig, N: int, M: int):
        self.geometry, self.t, self.bc, self.N, self.M = geometry, t, bc, N, M
        snap = geometry.snapshot(t, M)
        rmin, rmax = geometry.radius_bounds(t)
        self.theta = snap.theta
        self.normal = snap.normal
        self.er = np.exp(1j * self.theta)
        self.inner = StokesBasis("disk", N, rmax)
        self.outer = StokesBasis("annulus", N, geometry.R, rmin, drop_pressure_constant=bc.gamma3_empty)
        ci = self.inner.evaluate(snap.z)
        co = self.outer.evaluate(snap.z)
        cc = self.outer.evaluate(geometry.R * self.er)
        n = self.normal
        Ti, To, Tc = ci.traction(n), co.traction(n), cc.traction(self.er)
        Zi = np.zeros((M, self.inner.size))
        rows = [np.hstack([ci.w.real, -co.w.real]), np.hstack([ci.w.imag, -co.w.imag]),
                np.hstack([Ti.real, -To.real]), np.hstack([Ti.imag, -To.imag])]
        rows += [np.hstack([Zi, r]) for r in _outer_rows(cc.w, Tc, self.er, bc)]
        self.matrix = np.vstack(rows)
        self._ls = LeastSquares(self.matrix)
        self.cond = self._ls.cond

    def rhs(self, s, a, g):
        return np.concatenate([s.real, s.imag, a.real, a.imag] + _outer_rhs(g, self.er, self.bc))

    def solve(self, b):
        x = self._ls(b)
        return x[:self.inner.size], x[self.inner.size:]


@lru_cache(maxsize=32)
def spectral_stokes_system(geometry, t, bc, N, M) -> SpectralStokesSystem:
    return SpectralStokesSystem(geometry, t, bc, N, M)


def stokes_resolution(geometry: InterfaceGeometry, K: int, t: float = 0.0) -> tuple[int, int]:
    """Expansion order ``N`` and collocation count ``M`` for data of cutoff ``K``."""
    if geometry.is_circle(t):
        N = K + 4
        return N, 2 * N + 16
    N = int(1.5 * K) + 4 * geometry.Kr + 16
    return N, 2 * N + 40


def _particular_data(forces, geometry, t, theta):
    """Jumps and outer traces of the particular solutions at ``theta``."""
    z = geometry.point(theta, t)
    nrm = geometry.normal(theta, t)
    er = np.exp(1j * theta)
    vals = []
    for f in forces:
        w, p, A, B = f.particular(z)
        vals.append((w, (-p + 2 * np.real(A)) * nrm + 2 * B * np.conj(nrm)))
    w, p, A, B = forces[1].particular(geometry.R * er)
    outer = (w, (-p + 2 * np.real(A)) * er + 2 * B * np.conj(er))
    return vals[0][0] - vals[1][0], vals[0][1] - vals[1][1], outer


def _outer_condition(v, tr, er, bc: BoundaryConfig):
    """Left side of the outer condition as a complex array (components per family)."""
    e = np.conj(er)
    if bc.v_outer == "B1":
        return v
    if bc.v_outer == "B2":
        return np.real(e * v) + 1j * np.imag(e * (tr + bc.alpha2 * v))
    return tr + bc.alpha3 * v


def _outer_target(g, er, bc: BoundaryConfig):
    if bc.v_outer == "B2":
        e = np.conj(er)
        return np.real(e * g) + 1j * np.imag(e * g)
    return g


def stokes_residual(field: TwoPhaseFlowField, data: StokesData, n: int = 512) -> float:
    """Relative residual of the interface and outer conditions on ``n`` points."""
    theta = 2 * np.pi * np.arange(n) / n
    tr = field.interface_traces(theta)
    ot = field.outer_traces(theta)
    s, a, gg = (vector_values(d, theta) for d in (data.s, data.a, data.g))
    er = np.exp(1j * theta)
    r1 = np.abs(tr["v+"] - tr["v-"] - s)
    r2 = np.abs(tr["t+"] - tr["t-"] - a)
    r3 = np.abs(_outer_condition(ot["v"], ot["t"], er, field.bc) - _outer_target(gg, er, field.bc))
    scale = max(1.0, *(np.max(np.abs(x)) for x in (s, a, gg)),
                np.max(np.abs(tr["v+"])), np.max(np.abs(tr["t+"])))
    return float(max(r1.max(), r2.max(), r3.max()) / scale)


def _volume_pressure(field: SpectralFlowField) -> tuple[float, float]:
    """``int_Omega p`` and ``|Omega|`` by polar quadrature."""
    total, area = 0.0, 0.0
    n_th = max(128, 4 * field.inner.N + 32)
    for ph in (1, -1):
        z, w = phase_quadrature(field.geometry, field.t, ph, max(24, field.inner.N + 8), n_th)
        total += np.sum(w * field.columns(z, ph)[1])
        area += np.sum(w)
    return float(total), float(area)


def _solve_spectral(data, bc, geometry, t, K, N):
    circle = geometry.is_circle(t)
    N0, _ = stokes_resolution(geometry, K, t)
    N = N or N0
    forces = data.forces
    tries = 1 if circle else 3
    for _ in range(tries):
        M = 2 * N + (16 if circle else 40)
        sys = spectral_stokes_system(geometry, t, bc, N, M)
        th = sys.theta
        ps, pa, (pw, pt) = _particular_data(forces, geometry, t, th)
        s = vector_values(data.s, th) - ps
        a = vector_values(data.a, th) - pa
        g = _outer_target(vector_values(data.g, th), sys.er, bc) - _outer_condition(pw, pt, sys.er, bc)
        if bc.v_outer == "B2":
            # back to Cartesian components; the rows rotate again
            g = g * sys.er
        ci, co = sys.solve(sys.rhs(s, a, g))
        field = SpectralFlowField(geometry, t, K, bc, forces, sys.inner, sys.outer, ci, co, sys.cond)
        if bc.gamma3_empty:
            total, area = _volume_pressure(field)
            field.p_shift = -total / area
        res = stokes_residual(field, data, 2 * M)
        if res <= RESIDUAL_TOL:
            return field
        N = int(1.5 * N)
    raise BackendResolutionTooLow(
        f"boundary residual {res:.3e} exceeds {RESIDUAL_TOL:g}; raise the resolution")


# boundary integral backend --------------------------------------------------------


def _tangential_derivative(values, snap):
    """``d/ds`` of nodal values along a curve."""
    n = values.size
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0
    return np.fft.ifft(1j * k * np.fft.fft(values)) / snap.speed


def _boundary_pressure(v, tr, snap):
    """``p = -nu . t - 2 tau . d_tau v`` with ``t = sigma nu`` and ``nu = snap.normal``."""
    that = snap.dz / snap.speed
    return -_dot(snap.normal, tr) - 2 * _dot(that, _tangential_derivative(v, snap))


def _green_pressure_integral(curves) -> float:
    """``int_D p`` for harmonic ``p`` from boundary data.

    ``curves`` lists ``(snapshot, v, t, p)`` with ``snapshot.normal`` the
    outward normal of ``D`` and ``t = sigma nu``.  With ``phi = |x|^2/4``,
    ``int_D p = sum int (p d_nu phi - omega d_tau phi) ds`` where ``omega`` is
    the vorticity and ``tau = i nu``.
    """
    total = 0.0
    for snap, v, tr, p in curves:
        nu = snap.normal
        tau = 1j * nu
        sgn = _dot(tau, snap.dz / snap.speed)
        omega = _dot(tau, tr) - 2 * sgn * _dot(nu, _tangential_derivative(v, snap))
        x = snap.z
        total += np.sum((p * _dot(nu, x) / 2 - omega * _dot(tau, x) / 2) * snap.weights)
    return float(total)


def _diff_matrix(n: int) -> np.ndarray:
    """Spectral differentiation in the curve parameter on ``n`` equispaced nodes."""
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0
    return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0))


def _green_functional(snap, phi_grad) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``(l_v, l_t)`` of ``int (p d_nu phi - omega d_tau phi) ds`` on stacked ``(v, t)``.

    Uses ``p = -nu . t - 2 tau . d_tau v`` and ``omega = tau . t - 2 nu . d_tau v``
    with ``nu = snap.normal`` and ``t = sigma nu``.
    """
    n = snap.theta.size
    Ds = _diff_matrix(n) / snap.speed[:, None]
    nu = snap.normal
    tau = 1j * nu
    gphi = phi_grad(snap.z)
    a = snap.weights * _dot(nu, gphi)
    b = snap.weights * _dot(tau, gphi)
    that = snap.dz / snap.speed
    sgn = _dot(tau, that)
    # coefficients of the real and imaginary parts of t and of d_s v (s along X')
    ct = -a * nu - b * tau
    cdv = -2 * a * that + 2 * b * sgn * nu
    l_t = np.concatenate([ct.real, ct.imag])
    l_v = np.concatenate([cdv.real @ Ds, cdv.imag @ Ds])
    return l_v, l_t


class BIEStokesSystem:
    """Nystrom system for the Cauchy data on both curves.

    Unknowns are ``v+`` and ``t+`` on the interface and two real components
    per node on the outer circle whose meaning depends on the condition.
    """

    def __init__(self, geometry: InterfaceGeometry, t: float, bc: BoundaryConfig, n: int):
        n += n % 2
        self.geometry, self.t, self.bc, self.n = geometry, t, bc, n
        self.L = 4 * geometry.R
        G = geometry.snapshot(t, n)
        C = geometry.outer_snapshot(n)
        self.gamma, self.outer = G, C
        self.theta = G.theta
        L = self.L
        c = 1 / (4 * np.pi)
        S_gg = bie.stokes_single(G, G, L, True)
        S_gc = bie.stokes_single(G, C, L, False)
        S_cg = bie.stokes_single(C, G, L, False)
        S_cc = bie.stokes_single(C, C, L, True)
        D_gg = bie.stokes_double(G, G, True)
        D_gc = bie.stokes_double(G, C, False)
        D_cg = bie.stokes_double(C, G, False)
        D_cc = bie.stokes_double(C, C, True)
        I = np.eye(2 * n)
        # outer parametrization u_C = Pu x + u0, t_C = Pt x + t0
        er = C.normal
        self.er = er
        cs, sn = er.real, er.imag
        if bc.v_outer == "B1":
            Pu, Pt = np.zeros((2 * n, 2 * n)), I
        elif bc.v_outer == "B3":
            Pu, Pt = I, -bc.alpha3 * I
        else:
            tau = np.concatenate([np.diag(-sn), np.diag(cs)])
            rad = np.concatenate([np.diag(cs), np.diag(sn)])
            Pu = np.hstack([tau, np.zeros((2 * n, n))])
            Pt = np.hstack([-bc.alpha2 * tau, rad])
        self.Pu, self.Pt = Pu, Pt
        # E1: interior of the enclosed phase, E2/E3: annulus at Gamma and at C
        Z = np.zeros((2 * n, 2 * n))
        E1 = np.hstack([0.5 * I - c * D_gg, c * S_gg, Z])
        E2 = np.hstack([0.5 * I + c * D_gg, -c * S_gg, -c * S_gc @ Pt + c * D_gc @ Pu])
        E3 = np.hstack([c * D_cg, -c * S_cg, 0.5 * Pu - c * S_cc @ Pt + c * D_cc @ Pu])
        # the first-kind equations miss a pressure shift confined to one curve;
        # Green's identity for p- against log|x| removes it
        lv_g, lt_g = _green_functional(G, lambda z: 1 / np.conj(z))
        lv_c, lt_c = _green_functional(C, lambda z: 1 / np.conj(z))
        self._green = (lv_g, lt_g, lv_c, lt_c)
        E4 = np.concatenate([lv_g, lt_g, lv_c @ Pu + lt_c @ Pt])[None, :]
        self.matrix = np.vstack([E1, E2, E3, E4])
        self._blocks = dict(S_gg=S_gg, S_gc=S_gc, S_cg=S_cg, S_cc=S_cc, D_gg=D_gg, D_gc=D_gc,
                            D_cg=D_cg, D_cc=D_cc)
        self._ls = LeastSquares(self.matrix, rcond=1e-12)
        self.cond = self._ls.cond

    def outer_data(self, g):
        """``(u0, t0)`` of the outer parametrization for samples ``g``."""
        n = self.n
        er = self.er
        if self.bc.v_outer == "B1":
            return bie.stack(g), np.zeros(2 * n)
        if self.bc.v_outer == "B3":
            return np.zeros(2 * n), bie.stack(g)
        gr = _dot(er, g)
        gt = _dot(1j * er, g)
        return bie.stack(gr * er), bie.stack(gt * 1j * er)

    def solve(self, s, a, g):
        b = self._blocks
        c = 1 / (4 * np.pi)
        s_, a_ = bie.stack(s), bie.stack(a)
        u0, t0 = self.outer_data(g)
        lv_g, lt_g, lv_c, lt_c = self._green
        rhs = np.concatenate([
            np.zeros(2 * self.n),
            0.5 * s_ + c * b["D_gg"] @ s_ - c * b["S_gg"] @ a_ + c * b["S_gc"] @ t0 - c * b["D_gc"] @ u0,
            c * b["D_cg"] @ s_ - c * b["S_cg"] @ a_ - 0.5 * u0 + c * b["S_cc"] @ t0 - c * b["D_cc"] @ u0,
            [lv_g @ s_ + lt_g @ a_ - lv_c @ u0 - lt_c @ t0],
        ])
        x = self._ls(rhs)
        m = 2 * self.n
        vp, tp, xc = x[:m], x[m:2 * m], x[2 * m:]
        vC = self.Pu @ xc + u0
        tC = self.Pt @ xc + t0
        return {"v+": bie.unstack(vp), "t+": bie.unstack(tp),
                "v-": bie.unstack(vp - s_), "t-": bie.unstack(tp - a_),
                "vC": bie.unstack(vC), "tC": bie.unstack(tC)}


@lru_cache(maxsize=8)
def bie_stokes_system(geometry, t, bc, n) -> BIEStokesSystem:
    return BIEStokesSystem(geometry, t, bc, n)


def _solve_bie(data, bc, geometry, t, K, n):
    sys = bie_stokes_system(geometry, t, bc, n)
    G, C = sys.gamma, sys.outer
    th = sys.theta
    forces = data.forces
    ps, pa, (pw, pt) = _particular_data(forces, geometry, t, th)
    s = vector_values(data.s, th) - ps
    a = vector_values(data.a, th) - pa
    gg = vector_values(data.g, th)
    if bc.v_outer == "B1":
        g = gg - pw
    elif bc.v_outer == "B3":
        g = gg - pt - bc.alpha3 * pw
    else:
        er = sys.er
        g = (_dot(er, gg - pw)) * er + _dot(1j * er, gg - pt - bc.alpha2 * pw) * 1j * er
    h = sys.solve(s, a, g)
    Gm = replace(G, normal=-G.normal)
    # pressure of the homogeneous part from the boundary data
    hp = {"p+": _boundary_pressure(h["v+"], h["t+"], G),
          "p-": _boundary_pressure(h["v-"], h["t-"], G),
          "pC": _boundary_pressure(h["vC"], h["tC"], C)}
    # add the particular solutions back
    zg, zc = G.z, C.z
    nodal = {}
    for sgn, f in (("+", forces[0]), ("-", forces[1])):
        w, p, A, B = f.particular(zg)
        nodal["v" + sgn] = h["v" + sgn] + w
        nodal["p" + sgn] = hp["p" + sgn] + p
        nodal["t" + sgn] = h["t" + sgn] + (-p + 2 * np.real(A)) * G.normal + 2 * B * np.conj(G.normal)
    w, p, A, B = forces[1].particular(zc)
    nodal["vC"] = h["vC"] + w
    nodal["pC"] = hp["pC"] + p
    nodal["tC"] = h["tC"] + (-p + 2 * np.real(A)) * C.normal + 2 * B * np.conj(C.normal)
    field = BIEFlowField(geometry, t, K, bc, forces, G, C, sys.L, nodal, h)
    if bc.gamma3_empty:
        total = _green_pressure_integral([(Gm, h["v+"], -h["t+"], hp["p+"])])
        total += _green_pressure_integral([(G, h["v-"], h["t-"], hp["p-"]), (C, h["vC"], h["tC"], hp["pC"])])
        area = 0.0
        for ph, f in ((1, forces[0]), (-1, forces[1])):
            z, w = phase_quadrature(geometry, t, ph, 32, 256)
            area += np.sum(w)
            if f:
                total += np.sum(w * f.particular(z)[1])
        shift = -total / area
        field.p_shift = shift
        for key, nrm in (("+", G.normal), ("-", G.normal), ("C", C.normal)):
            nodal["p" + key] = nodal["p" + key] + shift
            nodal["t" + key] = nodal["t" + key] - shift * nrm
    for key in ("p+", "p-", "pC"):
        nodal[key] = np.real(nodal[key])
    return field


# public solver --------------------------------------------------------------------


def solve_two_phase_stokes(data: StokesData, bc: BoundaryConfig | None = None,
                           geometry: InterfaceGeometry | None = None, t: float = 0.0,
                           backend: str = "spectral", resolution: int | None = None) -> TwoPhaseFlowField:
    """Solve the two-phase Stokes problem.

    Parameters
    ----------
    data : StokesData
    bc : BoundaryConfig
        Only ``v_outer``, ``alpha2`` and ``alpha3`` are used.
    backend : {'spectral', 'bie'}
    resolution : int, optional
        Expansion order (spectral) or nodes per curve (bie).

    Raises
    ------
    CoercivityViolated
        Slip or traction condition with zero friction.
    CompatibilityViolated
        Net flux of the data is nonzero while the traction boundary is empty.
    BackendResolutionTooLow
        Spectral residual above tolerance after refinement.
    """
    if geometry is None:
        raise InvalidConfig("a geometry is required")
    bc = bc or BoundaryConfig()
    bc.require_coercive()
    if bc.gamma3_empty:
        flux = check_compatibility(data.s, data.g, geometry, bc, t)
        if abs(flux) > COMPAT_TOL * _compat_scale(data.s, data.g, geometry, t):
            raise CompatibilityViolated(
                f"net flux {flux:.6e} must vanish when no traction boundary is present")
    K = max(_data_K(data.s, data.a, data.g), 1)
    if backend == "spectral":
        return _solve_spectral(data, bc, geometry, t, K, resolution)
    if backend == "bie":
        return _solve_bie(data, bc, geometry, t, K, resolution or 256)
    raise InvalidConfig(f"unknown backend {backend!r}")


# lifting of the velocity jump -----------------------------------------------------


class LiftResult:
    """Divergence-free extension ``w~ = w + grad q`` of the velocity jump into the annulus.

    ``q`` is harmonic with ``d_n q = s . n`` on the interface and either
    ``d_r q = -g . e_r`` or a zero trace on the outer circle; ``w`` solves
    the Stokes equations with ``w = s - grad q`` on the interface and
    ``w = 0`` on the outer circle, so ``w~ = s`` on the interface.
    """

    def __init__(self, geometry, t, bc, q_basis, q_coef, q_shift, w_basis, w_coef, g):
        self.geometry, self.t, self.bc = geometry, t, bc
        self.q_basis, self.q_coef, self.q_shift = q_basis, q_coef, q_shift
        self.w_basis, self.w_coef = w_basis, w_coef
        self._g = g

    def q(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        return self.q_basis.evaluate(z)[0] @ self.q_coef + self.q_shift

    def grad_q(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        return self.q_basis.evaluate(z)[1] @ self.q_coef

    def w(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        return self.w_basis.evaluate(z).w @ self.w_coef

    def columns(self, z):
        """``(w~, p, A, B)`` of the lifted field."""
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        cols = self.w_basis.evaluate(z)
        _, G = self.q_basis.evaluate(z)
        H = self.q_basis.second(z)
        c = self.w_coef
        return (cols.w @ c + G @ self.q_coef, cols.p @ c, cols.A @ c,
                cols.B @ c + np.conj(H @ self.q_coef))

    def w_tilde(self, z) -> np.ndarray:
        return self.columns(z)[0]

    def divergence(self, z) -> np.ndarray:
        return 2 * np.real(self.columns(z)[2])

    def g_tilde(self, theta) -> np.ndarray:
        """Outer datum after the shift ``v -> v + w~``, in the encoding of the solver."""
        theta = np.asarray(theta, dtype=float)
        er = np.exp(1j * theta)
        w, p, A, B = self.columns(self.geometry.R * er)
        tr = (-p + 2 * np.real(A)) * er + 2 * B * np.conj(er)
        extra = _outer_condition(w, tr, er, self.bc)
        if self.bc.v_outer == "B2":
            extra = extra * er
        return vector_values(self._g, theta) + extra


def lift_jump(s, g, geometry: InterfaceGeometry, bc: BoundaryConfig | None = None, t: float = 0.0,
              resolution: int | None = None) -> LiftResult:
    """Construct the divergence-free lift of the velocity jump ``s``.

    Raises
    ------
    CompatibilityViolated
        When the traction boundary is empty and the net flux of ``(s, g)`` is nonzero.
    """
    bc = bc or BoundaryConfig()
    if bc.gamma3_empty:
        flux = check_compatibility(s, g, geometry, bc, t)
        if abs(flux) > COMPAT_TOL * _compat_scale(s, g, geometry, t):
            raise CompatibilityViolated(f"net flux {flux:.6e} of the lifted data is nonzero")
    K = max(_data_K(s, g), 8)
    N = resolution or stokes_resolution(geometry, K, t)[0]
    check = 2 * np.pi * np.arange(1024) / 1024
    s_chk = vector_values(s, check)
    scale = max(1.0, np.max(np.abs(s_chk)))
    for _ in range(1 if resolution else 3):
        lift = _lift(s, g, geometry, bc, t, N)
        err = np.max(np.abs(lift.w_tilde(geometry.point(check, t)) - s_chk)) / scale
        if err <= LIFT_TOL:
            return lift
        N = int(1.5 * N)
    if resolution:
        return lift
    raise BackendResolutionTooLow(f"lift trace error {err:.3e} exceeds {LIFT_TOL:g}")


def _lift(s, g, geometry, bc, t, N) -> LiftResult:
    M = 2 * N + 40
    snap = geometry.snapshot(t, M)
    theta = snap.theta
    er = np.exp(1j * theta)
    rmin, _ = geometry.radius_bounds(t)
    sv, gv = vector_values(s, theta), vector_values(g, theta)
    # harmonic potential
    hb = HarmonicBasis("annulus", N, geometry.R, rmin)
    _, Gg = hb.evaluate(snap.z)
    Vc, Gc = hb.evaluate(geometry.R * er)
    rows_g = _dot(snap.normal[:, None], Gg)
    if bc.gamma3_empty:
        # the shifted outer datum g + w~ then carries no normal flux
        rows_c = _dot(er[:, None], Gc)
        rhs_c = -_dot(er, gv)
    else:
        rows_c, rhs_c = Vc, np.zeros(M)
    qc = LeastSquares(np.vstack([rows_g, rows_c]))(np.concatenate([_dot(snap.normal, sv), rhs_c]))
    shift = 0.0
    if bc.gamma3_empty:
        z, w = phase_quadrature(geometry, t, -1, N + 8, 2 * M)
        shift = -np.sum(w * (hb.evaluate(z)[0] @ qc)) / np.sum(w)
    # Stokes correction with Dirichlet data everywhere
    sb = StokesBasis("annulus", N, geometry.R, rmin, drop_pressure_constant=True)
    cg = sb.evaluate(snap.z)
    cc = sb.evaluate(geometry.R * er)
    target = sv - Gg @ qc
    A = np.vstack([cg.w.real, cg.w.imag, cc.w.real, cc.w.imag])
    b = np.concatenate([target.real, target.imag, np.zeros(2 * M)])
    wc = LeastSquares(A)(b)
    return LiftResult(geometry, t, bc, hb, qc, shift, sb, wc, g)


# energy identity and estimates ----------------------------------------------------


class EnergyBalance(NamedTuple):
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def relative(self) -> float:
        scale = abs(self.lhs) + abs(self.rhs)
        return 0.0 if scale == 0 else self.residual / scale

    @property
    def ok(self) -> bool:
        return self.residual <= ENERGY_TOL * (abs(self.lhs) + abs(self.rhs))


def energy_identity_residual(field: TwoPhaseFlowField, data: StokesData, bc: BoundaryConfig | None = None,
                             geometry: InterfaceGeometry | None = None, t: float | None = None,
                             n: int | None = None) -> EnergyBalance:
    """Both sides of the energy identity of a solved field.

    ``lhs = sum_+- int 2 |D v|^2 + alpha int |v_tau|^2`` (``|v|^2`` for B3) and
    ``rhs = -int_Gamma a . v`` when ``f``, ``s`` and ``g`` vanish; in general the
    body-force work, the velocity-jump work and the outer data work are added
    to ``rhs``.  Needs the volume gradients, so only spectral fields qualify.
    """
    if not isinstance(field, SpectralFlowField):
        raise InvalidConfig("the energy identity needs a spectral field")
    bc = bc or field.bc
    geometry = geometry or field.geometry
    t = field.t if t is None else t
    N = field.inner.N
    n = n or max(256, 4 * N + 64)
    lhs = 0.0
    rhs = 0.0
    for ph, f in ((1, field.forces[0]), (-1, field.forces[1])):
        z, w = phase_quadrature(geometry, t, ph, N + 16, n)
        lhs += 2 * np.sum(w * field.strain_density(z, ph))
        if f:
            rhs += np.sum(w * _dot(f(z), field.velocity(z, ph)))
    snap = geometry.snapshot(t, n)
    tr = field.interface_traces(snap.theta)
    s, a = vector_values(data.s, snap.theta), vector_values(data.a, snap.theta)
    rhs -= np.sum((_dot(tr["v-"], a) + _dot(s, tr["t+"])) * snap.weights)
    er = np.exp(1j * snap.theta)
    ot = field.outer_traces(snap.theta)
    gv = vector_values(data.g, snap.theta)
    dsC = geometry.R * 2 * np.pi / n
    v, tC = ot["v"], ot["t"]
    if bc.v_outer == "B1":
        rhs += np.sum(_dot(gv, tC)) * dsC
    elif bc.v_outer == "B2":
        vt = _dot(1j * er, v)
        lhs += bc.alpha2 * np.sum(vt ** 2) * dsC
        rhs += np.sum(_dot(er, gv) * _dot(er, tC) + vt * _dot(1j * er, gv)) * dsC
    else:
        lhs += bc.alpha3 * np.sum(np.abs(v) ** 2) * dsC
        rhs += np.sum(_dot(gv, v)) * dsC
    return EnergyBalance(float(lhs), float(rhs))


def _curve_norm(data, s: float, n: int = 512) -> float:
    theta = 2 * np.pi * np.arange(n) / n
    vals = vector_values(data, theta)
    return h_norm(PeriodicField.from_values(vals, n // 2 - 1, real=False), s)


def stokes_estimate_report(field: TwoPhaseFlowField, data: StokesData) -> EstimateReport:
    """Both sides of the a priori estimate of the two-phase Stokes problem.

    ``lhs = sum_+- ||v||_{H^2} + ||p||_{H^1}`` with ring surrogates of the
    phase norms; ``rhs = ||f||_{L^2} + ||s||_{H^{3/2}} + ||a||_{H^{1/2}}``
    plus the outer datum in ``H^{3/2}`` (B1, B2) or ``H^{1/2}`` (B3), all
    interface norms taken in the curve parameter.
    """
    if not isinstance(field, SpectralFlowField):
        raise InvalidConfig("the estimate report needs volume pressures; use the spectral backend")
    n = max(4 * field.inner.N + 32, 64)
    theta = 2 * np.pi * np.arange(n) / n
    e = np.exp(1j * theta)
    lhs = 0.0
    for ph in (1, -1):
        r, w = phase_rings(field.geometry, field.t, ph)
        lhs += ring_norm(lambda rj: field.velocity(rj * e, ph), r, w, 2.0)
        lhs += ring_norm(lambda rj: field.pressure(rj * e, ph), r, w, 1.0)
    rhs = 0.0
    for ph, f in ((1, field.forces[0]), (-1, field.forces[1])):
        if f:
            z, w = phase_quadrature(field.geometry, field.t, ph)
            rhs += np.sqrt(np.sum(w * np.abs(f(z)) ** 2))
    rhs += _curve_norm(data.s, 1.5) + _curve_norm(data.a, 0.5)
    rhs += _curve_norm(data.g, 0.5 if field.bc.v_outer == "B3" else 1.5)
    return EstimateReport(float(lhs), float(rhs))


# Korn and inf-sup constants on the disk -------------------------------------------


def _outer_radius(geometry) -> float:
    return float(geometry.R if isinstance(geometry, InterfaceGeometry) else geometry)


def korn_constant(bc: BoundaryConfig, geometry, resolution: int = 32) -> float:
    """Smallest ``C`` with ``||v||_{H^1}^2 <= C^2 (||D v||^2 + alpha ||v||^2_bdry)``.

    Computed on polynomial velocities of total degree ``resolution`` on the
    disk ``|x| < R`` that satisfy the essential part of the outer condition;
    the boundary term is ``alpha2 ||v . tau||^2`` for B2 and
    ``alpha3 ||v||^2`` for B3.

    Raises
    ------
    SingularForm
        When the form vanishes on a rigid motion (zero friction).
    """
    R = _outer_radius(geometry)
    lam = np.inf
    for blk in _galerkin.blocks(R, resolution, 0):
        Z = _galerkin.constrained_basis(blk, bc.v_outer)
        Q = blk.strain
        if bc.v_outer == "B2":
            Q = Q + bc.alpha2 * blk.bnd_tan
        elif bc.v_outer == "B3":
            Q = Q + bc.alpha3 * blk.bnd_full
        H = blk.mass + blk.grad
        lam = min(lam, _galerkin.min_generalized_eig(Z.T @ Q @ Z, Z.T @ H @ Z))
    if not lam > SINGULAR_TOL:
        raise SingularForm(
            f"the coercive form has a kernel (smallest eigenvalue {lam:.3e}); rigid motions are not excluded")
    return float(1 / np.sqrt(lam))


def discrete_infsup(bc: BoundaryConfig, geometry, resolution: int = 32) -> float:
    """Smallest singular value of the discrete divergence on the disk.

    Velocities of degree ``resolution`` in the ``H^1`` norm, pressures of
    degree ``resolution // 2`` in ``L^2`` (mean-free when the traction
    boundary is empty).
    """
    R = _outer_radius(geometry)
    beta2 = np.inf
    for blk in _galerkin.blocks(R, resolution, resolution // 2):
        keep = np.ones(blk.p_mass.shape[0], dtype=bool)
        if bc.gamma3_empty and blk.p_const is not None:
            keep[blk.p_const] = False
        if not keep.any():
            continue
        Z = _galerkin.constrained_basis(blk, bc.v_outer)
        H = Z.T @ (blk.mass + blk.grad) @ Z
        Bz = blk.div[keep] @ Z
        S = Bz @ np.linalg.solve(H, Bz.T)
        Mp = blk.p_mass[np.ix_(keep, keep)]
        beta2 = min(beta2, _galerkin.min_generalized_eig(0.5 * (S + S.T), Mp))
    return float(np.sqrt(max(beta2, 0.0)))
