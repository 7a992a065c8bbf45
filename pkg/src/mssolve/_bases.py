"""
Exact solution bases for the two phases.

Points are complex numbers.  Every basis returns one column per real degree
of freedom.  Harmonic columns are ``Re F`` for analytic ``F``; Stokes columns
use the Goursat form

    w = u + i v = -f(z) + z conj(f'(z)) + conj(chi(z)),   p = 4 Re f'(z)

which solves ``-Lap v + grad p = 0``, ``div v = 0`` for any analytic pair
``(f, chi)``.  Complex gradients are ``d_x + i d_y``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _powers(z, L, n):
    """``(z/L)**n`` for an integer array ``n``, shape (M, len(n))."""
    return (np.asarray(z)[:, None] / L) ** np.asarray(n)[None, :]


def _dpow(z, L, n, order):
    """``d^order/dz^order (z/L)**n`` for ``n >= 0`` without 0 * inf at ``z = 0``."""
    n = np.asarray(n)
    fac = np.ones(n.shape)
    for j in range(order):
        fac = fac * (n - j)
    e = np.maximum(n - order, 0)
    return fac / L ** order * _powers(z, L, e)


@dataclass(frozen=True)
class HarmonicBasis:
    """Real harmonic functions on a disk (``kind='disk'``) or an annulus.

    Columns: constant, ``log(r/L_out)`` (annulus only), then for each power the
    real and imaginary parts of ``(z/L_out)**n`` and of ``(L_in/z)**n``.
    """

    kind: str
    N: int
    L_out: float
    L_in: float = 1.0

    @property
    def size(self) -> int:
        return 1 + 2 * self.N if self.kind == "disk" else 2 + 4 * self.N

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        n = np.arange(1, self.N + 1)
        cols_v, cols_g = [np.ones((z.size, 1))], [np.zeros((z.size, 1), dtype=complex)]
        if self.kind == "annulus":
            cols_v.append(np.log(np.abs(z) / self.L_out)[:, None])
            cols_g.append((1.0 / np.conj(z))[:, None])
        F = _powers(z, self.L_out, n)
        dF = n / self.L_out * _powers(z, self.L_out, n - 1)
        blocks = [(F, dF)]
        if self.kind == "annulus":
            G = _powers(z, self.L_in, -n)
            dG = -n / self.L_in * _powers(z, self.L_in, -n - 1)
            blocks.append((G, dG))
        for F, dF in blocks:
            for c in (1.0, 1j):
                cols_v.append(np.real(c * F))
                # grad Re(F) = conj(F')
                cols_g.append(np.conj(c * dF))
        return np.hstack(cols_v), np.hstack(cols_g)

    def second(self, z):
        """``F''`` for every column ``Re F``; ``grad Re F`` has ``d_zbar = conj(F'')``."""
        z = np.asarray(z, dtype=complex)
        n = np.arange(1, self.N + 1)
        cols = [np.zeros((z.size, 1), dtype=complex)]
        if self.kind == "annulus":
            cols.append((-1.0 / z ** 2)[:, None])
        F2 = _dpow(z, self.L_out, n, 2)
        blocks = [F2]
        if self.kind == "annulus":
            blocks.append(n * (n + 1) / self.L_in ** 2 * _powers(z, self.L_in, -n - 2))
        for F2 in blocks:
            for c in (1.0, 1j):
                cols.append(c * F2)
        return np.hstack(cols)


@dataclass(frozen=True)
class StokesColumns:
    """Velocity, pressure and the Wirtinger derivatives ``A = w_z``, ``B = w_zbar``."""

    w: np.ndarray
    p: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def traction(self, normal) -> np.ndarray:
        """``(2 D v - p I) n`` as complex numbers, one row per point."""
        nrm = np.asarray(normal)[:, None]
        return (-self.p + 2 * np.real(self.A)) * nrm + 2 * self.B * np.conj(nrm)

    def strain_energy_density(self, coef) -> np.ndarray:
        """``|D v|^2`` of the combination ``coef``."""
        A, B = self.A @ coef, self.B @ coef
        return 2 * np.real(A) ** 2 + 2 * np.abs(B) ** 2


def _goursat_f(phi, dphi, ddphi, z):
    cols = []
    for c in (1.0, 1j):
        f, df, ddf = c * phi, c * dphi, c * ddphi
        cols.append((-f + z[:, None] * np.conj(df), 4 * np.real(df),
                     -df + np.conj(df), z[:, None] * np.conj(ddf)))
    return cols


def _goursat_chi(chi, dchi):
    cols = []
    for c in (1.0, 1j):
        w = np.conj(c * chi)
        cols.append((w, np.zeros(w.shape), np.zeros(w.shape, dtype=complex), np.conj(c * dchi)))
    return cols


@dataclass(frozen=True)
class StokesBasis:
    """Goursat basis on a disk or an annulus.

    Disk: ``f = L (z/L)**n`` for ``n = 1..N+2`` and ``chi = L (z/L)**n`` for
    ``n = 0..N``.  The real multiple of ``f = z`` is the constant-pressure
    mode.  Annulus: additionally inverse powers ``(L_in/z)**m`` and the
    single-valued logarithmic pair ``f = c log z``, ``chi = -conj(c) log z``
    (net force).
    """

    kind: str
    N: int
    L_out: float
    L_in: float = 1.0
    drop_pressure_constant: bool = False

    def _terms(self, z):
        L, Li, N = self.L_out, self.L_in, self.N
        zc = z[:, None]
        out = []
        n = np.arange(1, N + 3)
        out += _goursat_f(L * _powers(z, L, n), L * _dpow(z, L, n, 1), L * _dpow(z, L, n, 2), z)
        m = np.arange(0, N + 1)
        out += _goursat_chi(L * _powers(z, L, m), L * _dpow(z, L, m, 1))
        if self.kind == "annulus":
            m = np.arange(1, N + 1)
            Q = _powers(z, Li, -m)
            out += _goursat_f(Li * Q, -m * Q * (Li / zc), m * (m + 1) / Li * Q * (Li / zc) ** 2, z)
            m = np.arange(1, N + 3)
            Q = _powers(z, Li, -m)
            out += _goursat_chi(Li * Q, -m * Q * (Li / zc))
        return out

    def evaluate(self, z) -> StokesColumns:
        z = np.asarray(z, dtype=complex).ravel()
        parts = self._terms(z)
        w = np.hstack([p[0] for p in parts])
        p = np.hstack([p[1] for p in parts])
        A = np.hstack([p[2] for p in parts])
        B = np.hstack([p[3] for p in parts])
        if self.kind == "annulus":
            lw, lp, lA, lB = [], [], [], []
            for c in (1.0, 1j):
                lw.append(-2 * c * np.log(np.abs(z) / self.L_out) + np.conj(c) * z / np.conj(z))
                lp.append(4 * np.real(c / z))
                lA.append(-c / z + np.conj(c / z))
                lB.append(-np.conj(c) * z / np.conj(z) ** 2 - c / np.conj(z))
            w = np.hstack([w, np.column_stack(lw)])
            p = np.hstack([p, np.column_stack(lp)])
            A = np.hstack([A, np.column_stack(lA)])
            B = np.hstack([B, np.column_stack(lB)])
        if self.drop_pressure_constant:
            keep = np.ones(w.shape[1], dtype=bool)
            keep[0] = False  # real multiple of f = z
            w, p, A, B = w[:, keep], p[:, keep], A[:, keep], B[:, keep]
        return StokesColumns(w, p, A, B)

    @property
    def size(self) -> int:
        n = 2 * (self.N + 2) + 2 * (self.N + 1)
        if self.kind == "annulus":
            n += 2 * self.N + 2 * (self.N + 2) + 2
        return n - (1 if self.drop_pressure_constant else 0)


# particular solutions for polynomial sources --------------------------------------


@dataclass(frozen=True)
class PolynomialSource:
    """Real scalar source ``sum Re(c_j z**n_j)``."""

    terms: tuple = ()

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return sum((np.real(c * z ** n) for n, c in self.terms), np.zeros(z.shape))

    def particular(self, z):
        """Value and complex gradient of ``u`` with ``Lap u`` equal to the source."""
        z = np.asarray(z, dtype=complex)
        val = np.zeros(z.shape)
        grad = np.zeros(z.shape, dtype=complex)
        for n, c in self.terms:
            F = c * z ** (n + 1) * np.conj(z) / (4 * (n + 1))
            val = val + np.real(F)
            # grad Re F = d_zbar F + conj(d_z F)
            grad = grad + c * z ** (n + 1) / (4 * (n + 1)) + np.conj(c * z ** n * np.conj(z) / 4)
        return val, grad

    def __bool__(self):
        return any(c != 0 for _, c in self.terms)


@dataclass(frozen=True)
class PolynomialForce:
    """Complex force density ``f_x + i f_y = sum c_j z**n_j + sum d_j conj(z)**m_j``."""

    z_terms: tuple = ()
    zbar_terms: tuple = ()

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for n, c in self.z_terms:
            out = out + c * z ** n
        for m, d in self.zbar_terms:
            out = out + d * np.conj(z) ** m
        return out

    def __bool__(self):
        return any(c != 0 for _, c in self.z_terms + self.zbar_terms)

    def particular(self, z):
        """``(w, p, A, B)`` of a particular solution of ``-Lap v + grad p = f``, ``div v = 0``."""
        z = np.asarray(z, dtype=complex)
        zb = np.conj(z)
        w = np.zeros(z.shape, dtype=complex)
        A = np.zeros(z.shape, dtype=complex)
        B = np.zeros(z.shape, dtype=complex)
        p = np.zeros(z.shape)
        for m, d in self.zbar_terms:
            # p = Re(P z^(m+1)) with grad p = conj(P) (m+1) zbar^m
            P = np.conj(d) / (m + 1)
            p = p + np.real(P * z ** (m + 1))
        for n, c in self.z_terms:
            k = n + 1
            # w0 = -c z^k zbar / (4k), then a gradient correction restores div w = 0
            w = w - c * z ** k * zb / (4 * k)
            A = A - c * z ** n * zb / 4
            B = B - c * z ** k / (4 * k)
            # phi = Re(G), G = c z^k zbar^2 / (16 k); grad phi = G_zbar + conj(G_z)
            Gzb = c * z ** k * zb / (8 * k)
            Gz = c * z ** n * zb ** 2 / 16
            w = w + Gzb + np.conj(Gz)
            # Wirtinger derivatives of grad phi
            A = A + c * z ** n * zb / 8 + np.conj(c * z ** n * zb / 8)
            B = B + c * z ** k / (8 * k) + np.conj(n * c * z ** (n - 1) * zb ** 2 / 16) if n > 0 else \
                B + c * z ** k / (8 * k)
            p = p + np.real(c * z ** n * zb) / 2
        return w, p, A, B
