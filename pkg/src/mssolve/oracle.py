"""
Brute-force reference solvers.

These routines share no code with the production backends.  Two-phase
problems on concentric circles are reduced to one Fourier mode and solved by
second-order radial finite differences on uniform grids; three grid levels
are combined by Richardson extrapolation.  A value is only returned when the
two- and three-level extrapolants agree to ``RICHARDSON_TOL``.
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .errors import ExtrapolationDisagreement, ValidationError

RICHARDSON_TOL = 1e-8


def richardson(values, ratio: int = 2, exponents=(2, 4)):
    """Extrapolate a sequence computed on grids refined by ``ratio``.

    Returns the full extrapolant and the one obtained with one level less.
    """
    T = [np.asarray(v, dtype=complex) for v in values]
    history = [T[-1]]
    for p in exponents[: len(T) - 1]:
        f = ratio ** p
        T = [(f * T[i + 1] - T[i]) / (f - 1) for i in range(len(T) - 1)]
        history.append(T[-1])
    return history[-1], history[-2]


def _accept(fine, coarse, what: str):
    scale = max(1.0, float(np.max(np.abs(fine))))
    err = float(np.max(np.abs(fine - coarse))) / scale
    if err > RICHARDSON_TOL:
        raise ExtrapolationDisagreement(f"{what}: Richardson levels differ by {err:.3e}")
    return fine


def _grid_size(k: int, M: int | None, per_mode: int = 400) -> int:
    return max(1000, per_mode * abs(k)) if M is None else int(M)


# Laplace --------------------------------------------------------------------------


@dataclass(frozen=True)
class LaplaceModeResult:
    """Mode-``k`` amplitudes of a two-phase harmonic function on circles.

    ``jump`` is ``n . grad mu+ - n . grad mu-`` on ``r = r0`` with ``n = -e_r``.
    Profiles are on the coarsest grid.
    """

    k: int
    jump: complex
    dmu_plus: complex
    dmu_minus: complex
    outer_value: complex
    outer_flux: complex
    r_plus: np.ndarray
    mu_plus: np.ndarray
    r_minus: np.ndarray
    mu_minus: np.ndarray


def _d_onesided(u, h, at_end: bool):
    """Fourth-order one-sided derivative at either end of a uniform grid."""
    c = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
    return -np.dot(c, u[::-1][:5]) if at_end else np.dot(c, u[:5])


def _laplace_inner(k, r0, M, value):
    h = r0 / M
    r = h * np.arange(M + 1)
    ab = np.zeros((3, M + 1), dtype=complex)
    rhs = np.zeros(M + 1, dtype=complex)
    # row 0: regularity (mu(0)=0 for k != 0, symmetric ghost for k = 0)
    if k == 0:
        ab[1, 0], ab[0, 1] = -4 / h ** 2, 4 / h ** 2
    else:
        ab[1, 0] = 1.0
    i = np.arange(1, M)
    ab[2, i - 1] = 1 / h ** 2 - 1 / (2 * h * r[i])
    ab[1, i] = -2 / h ** 2 - k ** 2 / r[i] ** 2
    ab[0, i + 1] = 1 / h ** 2 + 1 / (2 * h * r[i])
    ab[1, M] = 1.0
    rhs[M] = value
    mu = solve_banded((1, 1), ab, rhs)
    return r, mu


def _laplace_outer(k, r0, R, M, value, bc_outer, outer_data):
    h = (R - r0) / M
    r = r0 + h * np.arange(M + 1)
    ab = np.zeros((3, M + 1), dtype=complex)
    rhs = np.zeros(M + 1, dtype=complex)
    ab[1, 0] = 1.0
    rhs[0] = value
    i = np.arange(1, M)
    ab[2, i - 1] = 1 / h ** 2 - 1 / (2 * h * r[i])
    ab[1, i] = -2 / h ** 2 - k ** 2 / r[i] ** 2
    ab[0, i + 1] = 1 / h ** 2 + 1 / (2 * h * r[i])
    if bc_outer == "dirichlet":
        ab[1, M] = 1.0
        rhs[M] = outer_data
    else:
        # ghost node eliminated with (u[M+1] - u[M-1]) / 2h = outer_data
        ab[2, M - 1] = 2 / h ** 2
        ab[1, M] = -2 / h ** 2 - k ** 2 / R ** 2
        rhs[M] = -(1 / h ** 2 + 1 / (2 * h * R)) * 2 * h * outer_data
    mu = solve_banded((1, 1), ab, rhs)
    return r, mu


def _check_bc(bc_outer: str) -> str:
    bc = bc_outer.lower()
    if bc not in ("neumann", "dirichlet"):
        raise ValidationError(f"unknown outer condition {bc_outer!r}")
    return bc


def oracle_laplace_mode(k: int, r0: float, R: float, bc_outer: str = "neumann",
                        dirichlet_values=1.0, outer_data: complex = 0.0,
                        M: int | None = None) -> LaplaceModeResult:
    """Mode ``k`` of the two-phase Dirichlet problem on concentric circles.

    Parameters
    ----------
    dirichlet_values : complex or pair
        Amplitudes ``(f+, f-)`` of ``e^{ik theta}`` prescribed on ``r = r0``.
    outer_data : complex
        ``d_r mu-`` (Neumann) or ``mu-`` (Dirichlet) amplitude at ``r = R``.
    """
    bc = _check_bc(bc_outer)
    if not 0 < r0 < R:
        raise ValidationError("need 0 < r0 < R")
    fp, fm = (dirichlet_values, dirichlet_values) if np.isscalar(dirichlet_values) else dirichlet_values
    M = _grid_size(k, M)
    levels, profiles = [], None
    for j in range(3):
        m = M * 2 ** j
        rp, up = _laplace_inner(k, r0, m, fp)
        rm, um = _laplace_outer(k, r0, R, m, fm, bc, outer_data)
        dp = _d_onesided(up, r0 / m, at_end=True)
        dm = _d_onesided(um, (R - r0) / m, at_end=False)
        if bc == "dirichlet":
            flux = _d_onesided(um, (R - r0) / m, at_end=True)
            outer_val = um[-1]
        else:
            flux, outer_val = outer_data, um[-1]
        levels.append(np.array([dp, dm, outer_val, flux]))
        if j == 0:
            profiles = (rp, up, rm, um)
    fine, coarse = richardson(levels)
    fine = _accept(fine, coarse, f"laplace mode {k}")
    dp, dm, outer_val, flux = fine
    return LaplaceModeResult(k, -dp + dm, dp, dm, outer_val, flux, *profiles)


# Stokes ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StokesModeData:
    """Complex amplitudes of ``e^{ik theta}`` in polar components.

    ``s`` and ``a`` are the velocity and traction jumps on ``r = r0`` (traction
    taken with the normal ``-e_r``), ``g`` the outer datum.
    """

    s_r: complex = 0.0
    s_t: complex = 0.0
    a_r: complex = 0.0
    a_t: complex = 0.0
    g_r: complex = 0.0
    g_t: complex = 0.0


@dataclass(frozen=True)
class StokesModeResult:
    """Interface and outer traces: dict keys ``vr, vt, p, srr, srt`` per side."""

    k: int
    plus: dict
    minus: dict
    outer: dict


class _Lin:
    """Sparse linear functional on the unknown vector."""

    def __init__(self, d=None):
        self.d = dict(d or {})

    def __add__(self, o):
        out = dict(self.d)
        for i, c in o.d.items():
            out[i] = out.get(i, 0) + c
        return _Lin(out)

    def __rmul__(self, a):
        return _Lin({i: a * c for i, c in self.d.items()})

    def __sub__(self, o):
        return self + (-1) * o


class _Phase:
    """Stream function ``Psi`` and ``W = L_k Psi`` on a uniform radial grid with ghosts."""

    def __init__(self, k, a, b, M, offset, inner):
        self.k, self.M, self.h = k, M, (b - a) / M
        self.lo = 0 if inner else -1
        self.idx = np.arange(self.lo, M + 2)
        self.r = a + self.h * self.idx
        self.n = self.idx.size
        self.offset = offset

    def psi(self, i):
        return self.offset + i - self.lo

    def w(self, i):
        return self.offset + self.n + i - self.lo

    def stencil(self, var, i):
        r, h, k = self.r[i - self.lo], self.h, self.k
        return _Lin({var(i - 1): 1 / h ** 2 - 1 / (2 * h * r), var(i): -2 / h ** 2 - k ** 2 / r ** 2,
                     var(i + 1): 1 / h ** 2 + 1 / (2 * h * r)})

    def traces(self, i):
        """Velocity, pressure and stress functionals at node ``i``."""
        r, h, k = self.r[i - self.lo], self.h, self.k
        P = _Lin({self.psi(i): 1.0})
        dP = _Lin({self.psi(i + 1): 1 / (2 * h), self.psi(i - 1): -1 / (2 * h)})
        W = _Lin({self.w(i): 1.0})
        dW = _Lin({self.w(i + 1): 1 / (2 * h), self.w(i - 1): -1 / (2 * h)})
        ddP = W - (1 / r) * dP + (k ** 2 / r ** 2) * P
        vr = (1j * k / r) * P
        vt = -1.0 * dP
        dvr = (1j * k) * ((1 / r) * dP - (1 / r ** 2) * P)
        dvt = -1.0 * ddP
        p = (1j * r / k) * dW
        srr = -1.0 * p + 2.0 * dvr
        srt = dvt - (1 / r) * vt + (1j * k / r) * vr
        return dict(vr=vr, vt=vt, p=p, srr=srr, srt=srt)


def _stokes_fd(k, r0, R, bc, alpha, data: StokesModeData, M):
    inner = _Phase(k, 0.0, r0, M, 0, True)
    outer = _Phase(k, r0, R, M, 2 * inner.n, False)
    N = 2 * (inner.n + outer.n)
    rows, rhs = [], []

    def eq(lin, val=0.0):
        rows.append(lin)
        rhs.append(val)

    eq(_Lin({inner.psi(0): 1.0}))
    eq(_Lin({inner.w(0): 1.0}))
    for i in range(1, M + 1):
        eq(_Lin({inner.w(i): 1.0}) - inner.stencil(inner.psi, i))
        eq(inner.stencil(inner.w, i))
    for i in range(0, M + 1):
        eq(_Lin({outer.w(i): 1.0}) - outer.stencil(outer.psi, i))
        eq(outer.stencil(outer.w, i))
    tp, tm, tR = inner.traces(M), outer.traces(0), outer.traces(M)
    eq(tp["vr"] - tm["vr"], data.s_r)
    eq(tp["vt"] - tm["vt"], data.s_t)
    # traction with n = -e_r
    eq(-1.0 * (tp["srr"] - tm["srr"]), data.a_r)
    eq(-1.0 * (tp["srt"] - tm["srt"]), data.a_t)
    if bc == "B1":
        eq(tR["vr"], data.g_r)
        eq(tR["vt"], data.g_t)
    elif bc == "B2":
        eq(tR["vr"], data.g_r)
        eq(tR["srt"] + alpha * tR["vt"], data.g_t)
    else:
        eq(tR["srr"] + alpha * tR["vr"], data.g_r)
        eq(tR["srt"] + alpha * tR["vt"], data.g_t)
    I, J, V = [], [], []
    for n, lin in enumerate(rows):
        for j, c in lin.d.items():
            I.append(n)
            J.append(j)
            V.append(c)
    A = sp.csr_matrix((V, (I, J)), shape=(len(rows), N), dtype=complex)
    x = spsolve(A.tocsc(), np.asarray(rhs, dtype=complex))

    def ev(tr):
        return {key: sum(c * x[j] for j, c in lin.d.items()) for key, lin in tr.items()}

    return ev(tp), ev(tm), ev(tR)


def _stokes_k0(r0, R, bc, alpha, data: StokesModeData):
    """Axisymmetric mode in closed form.

    Inside: ``v_r = 0``, ``v_t = A r``, constant pressure.  Outside:
    ``v_r = c / r``, ``v_t = B r + C / r``, constant pressure.
    """
    # unknowns (A, B, C, c, p+, p-)
    M = np.zeros((6, 6), dtype=complex)
    b = np.zeros(6, dtype=complex)
    M[0] = [0, 0, 0, -1 / r0, 0, 0]; b[0] = data.s_r
    M[1] = [r0, -r0, -1 / r0, 0, 0, 0]; b[1] = data.s_t
    # -(srr+ - srr-) with srr+ = -p+, srr- = -p- - 2c/r0^2
    M[2] = [0, 0, 0, -2 / r0 ** 2, 1, -1]; b[2] = data.a_r
    # srt+ = 0, srt- = -2C/r0^2
    M[3] = [0, 0, -2 / r0 ** 2, 0, 0, 0]; b[3] = data.a_t
    if bc == "B1":
        M[4] = [0, 0, 0, 1 / R, 0, 0]; b[4] = data.g_r
        M[5] = [0, R, 1 / R, 0, 0, 0]; b[5] = data.g_t
    else:
        if bc == "B2":
            M[4] = [0, 0, 0, 1 / R, 0, 0]
        else:
            M[4] = [0, 0, 0, -2 / R ** 2 + alpha / R, 0, -1]
        b[4] = data.g_r
        M[5] = [0, alpha * R, -2 / R ** 2 + alpha / R, 0, 0, 0]; b[5] = data.g_t
    gauge = bc != "B3"
    if gauge:
        # the radial outer row duplicates the flux row; replace it by mean-zero pressure
        flux = data.g_r * R + data.s_r * r0
        if abs(flux) > 1e-12 * max(1.0, abs(data.g_r) + abs(data.s_r)):
            raise ValidationError("axisymmetric data violate the flux compatibility condition")
        M[4] = [0, 0, 0, 0, r0 ** 2, R ** 2 - r0 ** 2]
        b[4] = 0.0
    A_, B_, C_, c_, pp, pm = np.linalg.solve(M, b)
    plus = dict(vr=0.0, vt=A_ * r0, p=pp, srr=-pp, srt=0.0)
    minus = dict(vr=c_ / r0, vt=B_ * r0 + C_ / r0, p=pm, srr=-pm - 2 * c_ / r0 ** 2,
                 srt=-2 * C_ / r0 ** 2)
    outer = dict(vr=c_ / R, vt=B_ * R + C_ / R, p=pm, srr=-pm - 2 * c_ / R ** 2, srt=-2 * C_ / R ** 2)
    return plus, minus, outer


def oracle_stokes_mode(k: int, r0: float, R: float, bc_outer: str = "B1",
                       jump_data: StokesModeData | None = None, alpha: float = 0.0,
                       M: int | None = None) -> StokesModeResult:
    """Mode ``k`` of the two-phase Stokes problem on concentric circles.

    For ``k != 0`` the velocity is ``curl`` of ``Psi(r) e^{ik theta}`` with
    ``W = L_k Psi`` and ``L_k W = 0`` in each phase; the pressure is
    ``p = i r W' / k``.  The axisymmetric mode is solved in closed form with
    the mean-zero pressure normalization for ``B1``/``B2``.
    """
    bc = bc_outer.upper()
    if bc not in ("B1", "B2", "B3"):
        raise ValidationError(f"unknown outer condition {bc_outer!r}")
    if bc in ("B2", "B3") and alpha <= 0 and k == 0:
        raise ValidationError("rigid rotation is not excluded")
    data = jump_data or StokesModeData()
    k = abs(int(k)) if k >= 0 else int(k)
    if k == 0:
        plus, minus, outer = _stokes_k0(r0, R, bc, alpha, data)
        return StokesModeResult(0, plus, minus, outer)
    # the biharmonic system loses digits to round-off on very fine grids
    M = _grid_size(k, M, per_mode=64)
    keys = ("vr", "vt", "p", "srr", "srt")
    levels = []
    for j in range(3):
        tp, tm, tR = _stokes_fd(k, r0, R, bc, alpha, data, M * 2 ** j)
        levels.append(np.array([d[q] for d in (tp, tm, tR) for q in keys]))
    fine, coarse = richardson(levels)
    fine = _accept(fine, coarse, f"stokes mode {k}")
    parts = [dict(zip(keys, fine[5 * i:5 * i + 5])) for i in range(3)]
    return StokesModeResult(k, *parts)


# norms and surface operators ------------------------------------------------------


def oracle_h_norm(f, s: float, dps: int = 50) -> float:
    """Extended-precision evaluation of ``sqrt(sum (1+k^2)^s |c_k|^2)``."""
    modes = np.asarray(getattr(f, "modes", f))
    K = (modes.size - 1) // 2
    with mpmath.workdps(dps):
        total = mpmath.mpf(0)
        for k, c in zip(range(-K, K + 1), modes):
            a = mpmath.mpf(float(c.real)) ** 2 + mpmath.mpf(float(c.imag)) ** 2
            total += (1 + mpmath.mpf(k) ** 2) ** mpmath.mpf(s) * a
        return float(mpmath.sqrt(total))


def oracle_laplace_beltrami(rho, h, theta0, n: int = 8192):
    """Laplace-Beltrami of ``h`` along ``r = rho(theta)`` by arclength differences.

    The curve is resampled at ``n`` equally spaced arclength points; the
    second difference of ``h`` in arclength is interpolated back to
    ``theta0`` with a periodic cubic spline.
    """
    from scipy.interpolate import CubicSpline

    fine = 2 * np.pi * np.arange(32 * n) / (32 * n)
    z = rho(fine) * np.exp(1j * fine)
    ds = np.abs(np.diff(np.append(z, z[0])))
    s = np.concatenate([[0.0], np.cumsum(ds)])
    L = s[-1]
    theta_of_s = CubicSpline(s, np.append(fine, 2 * np.pi), bc_type="not-a-knot")
    su = L * np.arange(n) / n
    th = theta_of_s(su)
    hv = h(th)
    d = L / n
    lap = (np.roll(hv, -1) - 2 * hv + np.roll(hv, 1)) / d ** 2
    spline = CubicSpline(np.append(su, L), np.append(lap, lap[0]), bc_type="periodic")
    s0 = np.interp(np.mod(theta0, 2 * np.pi), np.append(fine, 2 * np.pi), s)
    return spline(s0)
