"""
Periodic fields on the circle and the Sobolev-type norms used to measure them.

A :class:`PeriodicField` stores the Fourier coefficients ``c_k`` for
``k = -K..K`` of a function on ``[0, 2*pi)``::

    f(theta) = sum_k c_k exp(i k theta)

All norms use the weight ``(1 + k**2)**s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InsufficientTimeSamples, ValidationError


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """Truncated Fourier series on T^1 with coefficients ordered ``k=-K..K``."""

    modes: np.ndarray
    real: bool = True

    def __post_init__(self):
        m = np.asarray(self.modes, dtype=complex)
        if m.ndim != 1 or m.size % 2 == 0:
            raise ValidationError("modes must be a 1-D array of odd length 2K+1")
        if self.real:
            scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
            # FFT round-off is tolerated, then the symmetry is imposed exactly
            if np.max(np.abs(m - np.conj(m[::-1]))) > 1e-9 * scale:
                raise ValidationError("real field requires c_{-k} = conj(c_k)")
            m = 0.5 * (m + np.conj(m[::-1]))
        object.__setattr__(self, "modes", _freeze(m))

    # construction -------------------------------------------------------
    @classmethod
    def zeros(cls, K: int, real: bool = True) -> "PeriodicField":
        return cls(np.zeros(2 * K + 1, dtype=complex), real)

    @classmethod
    def from_modes(cls, K: int, entries, real: bool = True) -> "PeriodicField":
        """Build from ``{k: c_k}`` or ``[(k, re, im), ...]``.

        For real fields only ``k >= 0`` needs to be given; the conjugate
        partner is filled in.
        """
        c = np.zeros(2 * K + 1, dtype=complex)
        items = entries.items() if isinstance(entries, dict) else [
            (int(e[0]), complex(e[1], e[2] if len(e) > 2 else 0.0)) for e in entries
        ]
        for k, v in items:
            k = int(k)
            if abs(k) > K:
                raise ValidationError(f"mode {k} exceeds cutoff {K}")
            c[k + K] += v
            if real and k != 0:
                c[-k + K] += np.conj(v)
        if real:
            c[K] = c[K].real
        return cls(c, real)

    @classmethod
    def from_values(cls, values, K: int | None = None, real: bool | None = None) -> "PeriodicField":
        """Coefficients from samples on the uniform grid ``2*pi*j/n``."""
        v = np.asarray(values)
        n = v.size
        if K is None:
            K = (n - 1) // 2
        if real is None:
            real = not np.iscomplexobj(v) or np.max(np.abs(np.imag(v))) == 0.0
        c = np.fft.fft(v) / n
        out = np.zeros(2 * K + 1, dtype=complex)
        kmax = min(K, (n - 1) // 2)
        ks = np.arange(-kmax, kmax + 1)
        out[ks + K] = c[ks % n]
        return cls(out, real)

    @classmethod
    def from_function(cls, f: Callable, K: int, n: int | None = None, real: bool = True) -> "PeriodicField":
        n = n or max(4 * K + 4, 16)
        theta = 2 * np.pi * np.arange(n) / n
        return cls.from_values(f(theta), K, real)

    # properties ----------------------------------------------------------
    @property
    def K(self) -> int:
        return (self.modes.size - 1) // 2

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def coefficient(self, k: int) -> complex:
        if abs(k) > self.K:
            return 0j
        return complex(self.modes[k + self.K])

    # evaluation -----------------------------------------------------------
    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        vals = np.exp(1j * np.multiply.outer(theta, self.wavenumbers)) @ self.modes
        return vals.real if self.real else vals

    def values(self, n: int) -> np.ndarray:
        """Samples on the uniform ``n``-point grid (``n >= 2K+1`` is exact)."""
        K = self.K
        if n < 2 * K + 1:
            return self(2 * np.pi * np.arange(n) / n)
        c = np.zeros(n, dtype=complex)
        ks = self.wavenumbers
        c[ks % n] = self.modes
        vals = np.fft.ifft(c) * n
        return vals.real if self.real else vals

    def derivative(self, order: int = 1) -> "PeriodicField":
        return PeriodicField(self.modes * (1j * self.wavenumbers) ** order, self.real)

    def mean(self) -> float:
        return self.modes[self.K].real if self.real else self.modes[self.K]

    # algebra ---------------------------------------------------------------
    def _aligned(self, other: "PeriodicField"):
        K = max(self.K, other.K)
        return self.padded(K).modes, other.padded(K).modes

    def padded(self, K: int) -> "PeriodicField":
        if K == self.K:
            return self
        if K < self.K:
            return project(self, K)
        c = np.zeros(2 * K + 1, dtype=complex)
        c[K - self.K:K + self.K + 1] = self.modes
        return PeriodicField(c, self.real)

    def __add__(self, other):
        if isinstance(other, PeriodicField):
            a, b = self._aligned(other)
            return PeriodicField(a + b, self.real and other.real)
        c = self.modes.copy()
        c[self.K] += other
        return PeriodicField(c, self.real and np.isreal(other))

    __radd__ = __add__

    def __neg__(self):
        return PeriodicField(-self.modes, self.real)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, a):
        if isinstance(a, PeriodicField):
            return multiply(self, a)
        return PeriodicField(self.modes * a, self.real and np.isreal(a))

    __rmul__ = __mul__

    def __truediv__(self, a):
        return self * (1.0 / a)

    def __repr__(self):
        return f"PeriodicField(K={self.K}, real={self.real})"


def multiply(f: PeriodicField, g: PeriodicField, K: int | None = None) -> PeriodicField:
    """Pointwise product, truncated to ``K`` (default ``max(f.K, g.K)``)."""
    K = max(f.K, g.K) if K is None else K
    n = 2 * (f.K + g.K) + 2
    v = f.values(n) * g.values(n)
    return PeriodicField.from_values(v, K, f.real and g.real)


def as_function(data) -> Callable[[np.ndarray], np.ndarray]:
    """Turn a PeriodicField, scalar, or callable into ``theta -> values``."""
    if data is None:
        return lambda theta: np.zeros(np.shape(theta))
    if isinstance(data, PeriodicField):
        return data
    if callable(data):
        return data
    c = complex(data)
    value = c.real if c.imag == 0 else c
    return lambda theta: np.full(np.shape(theta), value)


# norms ---------------------------------------------------------------------


def sobolev_weights(K: int, s: float) -> np.ndarray:
    k = np.arange(-K, K + 1, dtype=float)
    return (1.0 + k * k) ** s


def h_norm(f: PeriodicField, s: float) -> float:
    """``sqrt(sum_k (1+k^2)^s |c_k|^2)``."""
    return float(np.sqrt(np.sum(sobolev_weights(f.K, s) * np.abs(f.modes) ** 2)))


def project(f: PeriodicField, K: int) -> PeriodicField:
    """Drop all modes with ``|k| > K``."""
    if K > f.K:
        raise ValidationError(f"cannot project cutoff {f.K} up to {K}")
    return PeriodicField(f.modes[f.K - K:f.K + K + 1], f.real)


def interpolation_eta(eps: float, K: int, s_low: float = 0.5, s_mid: float = 2.5,
                      s_high: float = 3.5) -> float:
    """Smallest ``eta`` with ``|f|_mid <= eps |f|_high + eta |f|_low`` on modes ``|k|<=K``.

    Obtained from the per-mode bound ``x^mid <= eps^2 x^high + eta^2 x^low``,
    ``x = 1+k^2``, maximized over the admissible modes.
    """
    x = 1.0 + np.arange(0, K + 1, dtype=float) ** 2
    need = (x ** s_mid - eps ** 2 * x ** s_high) / x ** s_low
    return float(np.sqrt(max(0.0, need.max())))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Periodic fields sampled on an increasing time grid."""

    times: np.ndarray
    fields: Sequence[PeriodicField] = field(default_factory=tuple)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size != len(self.fields):
            raise ValidationError("one field per time node is required")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValidationError("time grid must be strictly increasing")
        Ks = {f.K for f in self.fields}
        if len(Ks) > 1:
            raise ValidationError("trajectory fields must share one cutoff")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "fields", tuple(self.fields))

    @property
    def K(self) -> int:
        return self.fields[0].K

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i) -> PeriodicField:
        return self.fields[i]

    def coefficients(self) -> np.ndarray:
        return np.array([f.modes for f in self.fields])

    @classmethod
    def from_coefficients(cls, times, coeffs, real: bool = True) -> "Trajectory":
        return cls(np.asarray(times), [PeriodicField(c, real) for c in np.asarray(coeffs)])

    def scaled(self, a: float) -> "Trajectory":
        return Trajectory(self.times, [f * a for f in self.fields])

    def at(self, t: float) -> PeriodicField:
        """Linear interpolation in time."""
        c = self.coefficients()
        if len(self) == 1:
            return self.fields[0]
        re = np.array([np.interp(t, self.times, c[:, j].real) for j in range(c.shape[1])])
        im = np.array([np.interp(t, self.times, c[:, j].imag) for j in range(c.shape[1])])
        return PeriodicField(re + 1j * im, self.fields[0].real)

    def time_derivative(self) -> np.ndarray:
        """Coefficients of the time derivative (centered, one-sided at the ends)."""
        if len(self) < 2:
            raise InsufficientTimeSamples("time derivative needs at least two samples")
        c = self.coefficients()
        edge = 2 if len(self) >= 3 else 1
        return np.gradient(c, self.times, axis=0, edge_order=edge)


def _trapezoid(y, t):
    return float(np.trapezoid(y, t)) if hasattr(np, "trapezoid") else float(np.trapz(y, t))


def l2_time_norm(traj: Trajectory, s: float) -> float:
    w = sobolev_weights(traj.K, s)
    sq = np.sum(w * np.abs(traj.coefficients()) ** 2, axis=1)
    return float(np.sqrt(_trapezoid(sq, traj.times)))


def lp_time_norm(traj: Trajectory, s: float, p: float) -> float:
    w = sobolev_weights(traj.K, s)
    nrm = np.sqrt(np.sum(w * np.abs(traj.coefficients()) ** 2, axis=1))
    return float(_trapezoid(nrm ** p, traj.times) ** (1.0 / p))


def xt_norm(traj: Trajectory) -> float:
    """Norm of ``L2(0,T;H^{7/2}) & H1(0,T;H^{1/2})`` plus the ``H^2`` norm at ``t=0``."""
    if len(traj) < 2:
        raise InsufficientTimeSamples("xt_norm needs at least two time nodes")
    K = traj.K
    t = traj.times
    c = traj.coefficients()
    w72 = sobolev_weights(K, 3.5)
    w12 = sobolev_weights(K, 0.5)
    dc = traj.time_derivative()
    l2_part = np.sqrt(_trapezoid(np.sum(w72 * np.abs(c) ** 2, axis=1), t))
    h1_part = np.sqrt(_trapezoid(np.sum(w12 * (np.abs(c) ** 2 + np.abs(dc) ** 2), axis=1), t))
    init = h_norm(traj.fields[0], 2.0)
    return float(l2_part + h1_part + init)


def norm_table(traj: Trajectory) -> np.ndarray:
    """Rows ``(t, |h|_{1/2}, |h|_2, |h|_{7/2})``."""
    rows = [(t, h_norm(f, 0.5), h_norm(f, 2.0), h_norm(f, 3.5)) for t, f in zip(traj.times, traj.fields)]
    return np.array(rows, dtype=float)
