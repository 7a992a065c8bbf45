"""
Nystrom discretization of the direct boundary integral formulation for the
two-phase Laplace and Stokes problems.

Each closed curve carries ``n`` trapezoid nodes.  Logarithmic kernels on a
curve against itself use Kress' product quadrature; every other kernel is
smooth and is integrated by the trapezoid rule.  The free-space kernels are

    Laplace:  G(r) = -log(|r| / L) / (2 pi)
    Stokes:   G_ij = -delta_ij log(|r| / L) + r_i r_j / |r|^2,
              T_ijk = -4 r_i r_j r_k / |r|^4

with ``L`` a fixed length much larger than the domain, which keeps the
single-layer operators invertible.  Curves are :class:`CurveSnapshot`
objects; their ``normal`` field selects the orientation used below.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .geometry import CurveSnapshot


@lru_cache(maxsize=16)
def kress_weights(n: int) -> np.ndarray:
    """Weights ``W[i, j]`` with ``sum_j W[i, j] phi(t_j) ~ int log(4 sin^2((t_i - s)/2)) phi(s) ds``."""
    if n % 2:
        raise ValueError("Kress quadrature needs an even number of nodes")
    m = n // 2
    t = 2 * np.pi * np.arange(n) / n
    p = np.arange(1, m)
    # the weights depend on t_i - t_j only
    row = -(2 * np.pi / m) * (np.cos(np.outer(t, p)) / p).sum(axis=1) - (np.pi / m ** 2) * np.cos(m * t)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return row[idx]


def _diff(target: CurveSnapshot, source: CurveSnapshot):
    return target.z[:, None] - source.z[None, :]


# Laplace --------------------------------------------------------------------------


def laplace_single(target: CurveSnapshot, source: CurveSnapshot, L: float, same: bool) -> np.ndarray:
    """Matrix of ``phi -> int G(x - y) phi(y) ds_y``."""
    n = source.theta.size
    w = source.speed * (2 * np.pi / n)
    if not same:
        r = np.abs(_diff(target, source))
        return -np.log(r / L) / (2 * np.pi) * w[None, :]
    t = source.theta
    dt = t[:, None] - t[None, :]
    r = np.abs(_diff(target, source))
    with np.errstate(divide="ignore", invalid="ignore"):
        smooth = np.log(r) - 0.5 * np.log(4 * np.sin(dt / 2) ** 2)
    np.fill_diagonal(smooth, np.log(source.speed))
    K = 0.5 * kress_weights(n) * source.speed[None, :] + (smooth - np.log(L)) * w[None, :]
    return -K / (2 * np.pi)


def laplace_double(target: CurveSnapshot, source: CurveSnapshot, same: bool) -> np.ndarray:
    """Matrix of ``u -> int u(y) d_nu_y G(x - y) ds_y`` with ``nu`` the source normal."""
    n = source.theta.size
    w = source.speed * (2 * np.pi / n)
    d = _diff(target, source)
    nu = source.normal[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.real(d * np.conj(nu)) / np.abs(d) ** 2 / (2 * np.pi)
    if same:
        diag = np.real(source.ddz * np.conj(source.normal)) / (2 * source.speed ** 2) / (2 * np.pi)
        np.fill_diagonal(K, diag)
    return K * w[None, :]


def laplace_eval(x, curves, L: float):
    """Interior value and complex gradient from Cauchy data.

    ``curves`` is a list of ``(snapshot, u, dnu_u)`` with ``nu`` the exterior
    normal of the domain stored in ``snapshot.normal``.
    """
    x = np.asarray(x, dtype=complex).ravel()
    val = np.zeros(x.size)
    grad = np.zeros(x.size, dtype=complex)
    for c, u, q in curves:
        w = c.speed * (2 * np.pi / c.theta.size)
        d = x[:, None] - c.z[None, :]
        r2 = np.abs(d) ** 2
        nu = c.normal[None, :]
        dn = np.real(d * np.conj(nu))
        val += (-np.log(np.sqrt(r2) / L) / (2 * np.pi)) @ (q * w) - (dn / r2 / (2 * np.pi)) @ (u * w)
        grad += (-d / r2 / (2 * np.pi)) @ (q * w)
        grad -= ((nu / r2 - 2 * dn * d / r2 ** 2) / (2 * np.pi)) @ (u * w)
    return val, grad


# Stokes ---------------------------------------------------------------------------


def _blocks(xx, xy, yy):
    return np.block([[xx, xy], [xy, yy]])


def stokes_single(target: CurveSnapshot, source: CurveSnapshot, L: float, same: bool) -> np.ndarray:
    """``f -> int G(y - x) f(y) ds_y`` on stacked ``(x-components, y-components)``."""
    n = source.theta.size
    w = source.speed * (2 * np.pi / n)
    d = source.z[None, :] - target.z[:, None]
    r2 = np.abs(d) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        xx, xy, yy = d.real ** 2 / r2, d.real * d.imag / r2, d.imag ** 2 / r2
    if same:
        tau = source.dz / source.speed
        for a, v in ((xx, tau.real ** 2), (xy, tau.real * tau.imag), (yy, tau.imag ** 2)):
            np.fill_diagonal(a, v)
        t = source.theta
        dt = t[:, None] - t[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            smooth = np.log(np.sqrt(r2)) - 0.5 * np.log(4 * np.sin(dt / 2) ** 2)
        np.fill_diagonal(smooth, np.log(source.speed))
        logm = 0.5 * kress_weights(n) * source.speed[None, :] + (smooth - np.log(L)) * w[None, :]
    else:
        logm = np.log(np.sqrt(r2) / L) * w[None, :]
    xx, xy, yy = xx * w, xy * w, yy * w
    return _blocks(xx - logm, xy, yy - logm)


def stokes_double(target: CurveSnapshot, source: CurveSnapshot, same: bool) -> np.ndarray:
    """``u -> PV int u_i T_ijk(y - x) nu_k ds_y`` with ``nu`` the source normal."""
    n = source.theta.size
    w = source.speed * (2 * np.pi / n)
    d = source.z[None, :] - target.z[:, None]
    r2 = np.abs(d) ** 2
    nu = source.normal[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        c = -4 * np.real(d * np.conj(nu)) / r2 ** 2
        xx, xy, yy = c * d.real ** 2, c * d.real * d.imag, c * d.imag ** 2
    if same:
        tau = source.dz / source.speed
        lim = 2 * np.real(source.ddz * np.conj(source.normal)) / source.speed ** 2
        for a, v in ((xx, tau.real ** 2), (xy, tau.real * tau.imag), (yy, tau.imag ** 2)):
            np.fill_diagonal(a, lim * v)
    return _blocks(xx * w, xy * w, yy * w)


def stokes_eval(x, curves, L: float) -> np.ndarray:
    """Velocity (complex) at interior points.

    ``curves`` is a list of ``(snapshot, u, f)`` where ``u`` is the complex
    velocity and ``f`` the complex traction ``sigma nu`` with ``nu`` the
    normal pointing into the domain.
    """
    x = np.asarray(x, dtype=complex).ravel()
    out = np.zeros(x.size, dtype=complex)
    for c, u, f in curves:
        w = c.speed * (2 * np.pi / c.theta.size)
        d = c.z[None, :] - x[:, None]
        r2 = np.abs(d) ** 2
        lg = np.log(np.sqrt(r2) / L)
        # single layer: G f = -log r f + d (d . f) / r^2
        fw = f * w
        dot_f = np.real(d * np.conj(fw[None, :]))
        out += -(1 / (4 * np.pi)) * ((-lg * fw[None, :]) + d * dot_f / r2).sum(axis=1)
        uw = u * w
        dot_u = np.real(d * np.conj(uw[None, :]))
        dn = np.real(d * np.conj(c.normal[None, :]))
        out += (1 / (4 * np.pi)) * (-4 * dot_u * dn / r2 ** 2 * d).sum(axis=1)
    return out


def stack(v) -> np.ndarray:
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag])


def unstack(v) -> np.ndarray:
    n = v.size // 2
    return v[:n] + 1j * v[n:]
