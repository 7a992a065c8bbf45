"""
The Mullins-Sekerka operator and its lower-order perturbations.

For a height function ``h`` on the parameter circle,

    A0 h = [d_n mu]   with   mu+- = sigma Lap_Gamma h,  Neumann outer condition,
    B0 h = jump with Dirichlet outer condition minus the Neumann one,
    B1 h = [d_n mu]   with   mu+- = +-b2 h and the configured outer condition,

all pulled back to the parameter circle.  Every operator is assembled as a
dense matrix on the Fourier coefficients ``k = -K..K``: the two-phase
Dirichlet problems are linear in the nodal traces, so their normal-derivative
maps are nodal matrices taken from the spectral collocation systems, and the
surface operators are evaluated exactly on the nodes.

The Stokes coupling term

    Bv h = (v+ + v-) . n / 2,   [sigma(v) n] = a3 h + a4 Lap_Gamma h + a5 grad_Gamma h,

is assembled the same way from the spectral Stokes system.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .elliptic import BoundaryConfig, spectral_resolution, spectral_system
from .errors import InvalidConfig, NonCircularGeometry, PowerIterationStall, ValidationError
from .geometry import InterfaceGeometry, surface_laplacian
from .sobolev import PeriodicField, Trajectory, multiply, sobolev_weights
from .stokes import spectral_stokes_system, stokes_resolution

KINDS = ("DtN", "A0", "B0", "B1", "Bv", "Bfull")
POWER_TOL = 1e-6
POWER_MAXIT = 10_000


# coefficient handling -------------------------------------------------------------


def coefficient_values(c, theta, t: float = 0.0) -> np.ndarray:
    """Nodal values of a coefficient.

    ``c`` may be ``None`` (zero), a scalar, a :class:`PeriodicField`, a
    :class:`Trajectory` (interpolated in time) or a callable ``c(theta, t)``.
    """
    theta = np.asarray(theta, dtype=float)
    if c is None:
        return np.zeros(theta.shape)
    if np.isscalar(c):
        return np.full(theta.shape, c, dtype=complex if np.iscomplexobj(c) else float)
    if isinstance(c, Trajectory):
        c = c.at(t)
    if isinstance(c, PeriodicField):
        return c(theta)
    if callable(c):
        return np.broadcast_to(np.asarray(c(theta, t)), theta.shape)
    raise InvalidConfig(f"unsupported coefficient of type {type(c).__name__}")


def _key_time(geometry: InterfaceGeometry, t: float) -> float:
    # static curves share one cache entry
    return 0.0 if geometry.is_static() else float(t)


# nodal building blocks ------------------------------------------------------------


@dataclass(frozen=True)
class _Grid:
    """Fourier synthesis and analysis on a uniform node set."""

    theta: np.ndarray
    E: np.ndarray       # nodes x modes, e^{ik theta}
    F: np.ndarray       # modes x nodes, coefficient extraction
    ik: np.ndarray

    @classmethod
    def build(cls, theta: np.ndarray, K: int) -> "_Grid":
        k = np.arange(-K, K + 1)
        E = np.exp(1j * np.outer(theta, k))
        return cls(theta, E, E.conj().T / theta.size, 1j * k)

    def derivative(self) -> np.ndarray:
        return self.E * self.ik[None, :]

    def laplacian(self, geometry: InterfaceGeometry, t: float) -> np.ndarray:
        """Nodal values of ``Lap_Gamma e^{ik theta}``."""
        d1 = geometry.tangent_vector(self.theta, t)
        d2 = geometry.second_derivative(self.theta, t)
        speed = np.abs(d1)
        lap_S = -np.real(np.conj(d1) * d2) / speed ** 4
        return self.E * (lap_S[:, None] * self.ik[None, :] + (self.ik ** 2)[None, :] / speed[:, None] ** 2)

    def gradient_factor(self, geometry: InterfaceGeometry, t: float) -> np.ndarray:
        """``grad_Gamma h = factor * d_theta h`` (complex vector per node)."""
        d = geometry.tangent_vector(self.theta, t)
        return d / np.abs(d) ** 2


@lru_cache(maxsize=16)
def _laplace_nodal(geometry: InterfaceGeometry, t: float, mu_outer: str, K: int):
    """Nodes and the maps ``f -> d_n mu+`` and ``f -> d_n mu-`` for zero outer data."""
    N, M = spectral_resolution(geometry, K, t)
    sys = spectral_system(geometry, t, mu_outer, N, M)
    nrm = np.conj(sys.normal)[:, None]
    Jp = np.real(nrm * sys.Gi) @ sys._inner.pinv
    Jm = np.real(nrm * sys.Go) @ sys._outer.pinv[:, :M]
    return sys.theta, Jp, Jm


@lru_cache(maxsize=8)
def _stokes_nodal(geometry: InterfaceGeometry, t: float, bc: BoundaryConfig, K: int):
    """Nodes and the real maps from traction jump components to ``(v+ + v-) . n / 2``."""
    N, M = stokes_resolution(geometry, K, t)
    sys = spectral_stokes_system(geometry, t, bc, N, M)
    z = geometry.point(sys.theta, t)
    W = np.hstack([sys.inner.evaluate(z).w, sys.outer.evaluate(z).w])
    mean_n = 0.5 * np.real(np.conj(sys.normal)[:, None] * W)
    pinv = sys._ls.pinv
    return sys.theta, mean_n @ pinv[:, 2 * M:3 * M], mean_n @ pinv[:, 3 * M:4 * M]


# assembly -------------------------------------------------------------------------


def _dtn_matrix(geometry, t, mu_outer, K, sign: int = 1):
    """Coefficient matrix of ``f -> [d_n mu]`` for traces ``mu+ = f``, ``mu- = sign f``."""
    theta, Jp, Jm = _laplace_nodal(geometry, _key_time(geometry, t), mu_outer, K)
    grid = _Grid.build(theta, K)
    return grid, (Jp - sign * Jm)


def _ms_matrix(geometry, t, sigma, mu_outer, K):
    grid, J = _dtn_matrix(geometry, t, mu_outer, K)
    return grid.F @ (J @ (sigma * grid.laplacian(geometry, t)))


def _a0(geometry, t, sigma, K):
    return _ms_matrix(geometry, t, sigma, "neumann", K)


def _b0(geometry, t, sigma, K):
    return _ms_matrix(geometry, t, sigma, "dirichlet", K) - _ms_matrix(geometry, t, sigma, "neumann", K)


def _b1(geometry, t, b2, mu_outer, K):
    grid, J = _dtn_matrix(geometry, t, mu_outer, K, sign=-1)
    w = coefficient_values(b2, grid.theta, t)
    return grid.F @ (J @ (w[:, None] * grid.E))


def _advection(geometry, t, b, b1, K):
    """``c d_theta - b1`` with ``c = d_t S + b . grad_Gamma``-coefficient."""
    n = max(4 * (K + geometry.Kr) + 8, 64)
    grid = _Grid.build(2 * np.pi * np.arange(n) / n, K)
    bv = coefficient_values(b, grid.theta, t)
    c = geometry.dS_dt(grid.theta, t) + np.real(np.conj(bv) * grid.gradient_factor(geometry, t))
    b1v = coefficient_values(b1, grid.theta, t)
    return grid.F @ (c[:, None] * grid.derivative() - b1v[:, None] * grid.E)


def _stokes_term(geometry, t, bc, a3, a4, a5, K):
    if a3 is None and a4 is None and a5 is None:
        return np.zeros((2 * K + 1, 2 * K + 1), dtype=complex)
    theta, Sx, Sy = _stokes_nodal(geometry, _key_time(geometry, t), bc, K)
    grid = _Grid.build(theta, K)
    v3 = coefficient_values(a3, theta, t) + 0j
    v4 = coefficient_values(a4, theta, t) + 0j
    v5 = np.real(coefficient_values(a5, theta, t)) * grid.gradient_factor(geometry, t)
    E, L, D = grid.E, grid.laplacian(geometry, t), grid.derivative()
    Ax = v3.real[:, None] * E + v4.real[:, None] * L + v5.real[:, None] * D
    Ay = v3.imag[:, None] * E + v4.imag[:, None] * L + v5.imag[:, None] * D
    return grid.F @ (Sx @ Ax + Sy @ Ay)


@dataclass(frozen=True, eq=False)
class OperatorHandle:
    """An assembled operator at one time, acting on fields of cutoff ``K``.

    ``matrix`` maps the coefficient vector ``(c_{-K}, ..., c_K)`` of the input
    to that of the output.  ``ms_weight`` multiplies the Mullins-Sekerka parts
    (``1`` for the plain evolution, ``1/2`` for the Stokes-coupled form).
    """

    kind: str
    geometry: InterfaceGeometry
    t: float
    K: int
    matrix: np.ndarray
    sigma: float = 1.0
    b2: object = None
    b: object = None
    b1: object = None
    bc: BoundaryConfig = BoundaryConfig()
    traction: tuple = (None, None, None)
    ms_weight: float = 1.0

    def apply(self, h: PeriodicField) -> PeriodicField:
        c = h.padded(self.K).modes if h.K <= self.K else h.modes[h.K - self.K:h.K + self.K + 1]
        out = self.matrix @ c
        return PeriodicField(out, real=False) if not h.real else _real_field(out)

    __call__ = apply

    def symbol(self, k: int) -> complex:
        """Diagonal entry for mode ``k`` (the Fourier multiplier on circles)."""
        return complex(self.matrix[k + self.K, k + self.K])

    def at(self, K: int) -> "OperatorHandle":
        """The same operator reassembled at another cutoff."""
        return assemble(self.kind, self.geometry, self.t, K, sigma=self.sigma, b2=self.b2, b=self.b,
                        b1=self.b1, bc=self.bc, traction=self.traction, ms_weight=self.ms_weight)


def _real_field(c: np.ndarray) -> PeriodicField:
    # restore exact conjugate symmetry lost to round-off in the nodal maps
    return PeriodicField(0.5 * (c + np.conj(c[::-1])), real=True)


def assemble(kind: str, geometry: InterfaceGeometry, t: float = 0.0, K: int = 32, sigma: float = 1.0,
             b2=None, b=None, b1=None, bc: BoundaryConfig | None = None,
             traction: tuple = (None, None, None), ms_weight: float = 1.0) -> OperatorHandle:
    """Assemble one of ``DtN, A0, B0, B1, Bv, Bfull``.

    ``Bfull`` is the explicit part of the evolution operator,

        c d_theta - b1 + w (B0 + B1) + Bv,

    where ``w = ms_weight``, ``c`` collects ``d_t S`` and the advection by
    ``b``, and ``B0`` enters only with a Dirichlet outer condition for ``mu``.
    ``traction`` is ``(a3, a4, a5)``: vector coefficients of ``h`` and
    ``Lap_Gamma h`` and a scalar coefficient of ``grad_Gamma h``.
    """
    if kind not in KINDS:
        raise InvalidConfig(f"unknown operator kind {kind!r}; expected one of {KINDS}")
    if sigma <= 0:
        raise ValidationError("surface tension must be positive")
    bc = bc or BoundaryConfig()
    K = int(K)
    a3, a4, a5 = traction
    if kind == "DtN":
        grid, J = _dtn_matrix(geometry, t, bc.mu_outer, K)
        M = grid.F @ (J @ grid.E)
    elif kind == "A0":
        M = _a0(geometry, t, sigma, K)
    elif kind == "B0":
        M = _b0(geometry, t, sigma, K)
    elif kind == "B1":
        M = _b1(geometry, t, b2, bc.mu_outer, K)
    elif kind == "Bv":
        M = _stokes_term(geometry, t, bc, a3, a4, a5, K)
    else:
        M = _advection(geometry, t, b, b1, K) + ms_weight * _b1(geometry, t, b2, bc.mu_outer, K)
        if bc.mu_outer == "dirichlet":
            M = M + ms_weight * _b0(geometry, t, sigma, K)
        M = M + _stokes_term(geometry, t, bc, a3, a4, a5, K)
    M = np.array(M, dtype=complex)
    M.setflags(write=False)
    return OperatorHandle(kind, geometry, float(t), K, M, sigma, b2, b, b1, bc, tuple(traction), ms_weight)


# public operations ----------------------------------------------------------------


def apply_dirichlet_trace(h: PeriodicField, sign: int, sigma: float, b2, geometry: InterfaceGeometry,
                          t: float = 0.0, K: int | None = None) -> PeriodicField:
    """``sigma Lap_Gamma h + sign * b2 h`` on the parameter circle."""
    if sign not in (1, -1):
        raise InvalidConfig("sign must be +1 or -1")
    K = h.K if K is None else K
    out = sigma * surface_laplacian(h, geometry, t, K)
    if b2 is None:
        return out
    if isinstance(b2, PeriodicField):
        return out + sign * multiply(b2, h, K)
    n = max(4 * (K + h.K + geometry.Kr) + 8, 64)
    theta = 2 * np.pi * np.arange(n) / n
    prod = coefficient_values(b2, theta, t) * h(theta)
    return out + sign * PeriodicField.from_values(prod, K, h.real)


def apply_A0(h: PeriodicField, geometry: InterfaceGeometry, t: float = 0.0, sigma: float = 1.0,
             K: int | None = None) -> PeriodicField:
    """Mullins-Sekerka operator with a Neumann outer condition."""
    return assemble("A0", geometry, t, h.K if K is None else K, sigma=sigma).apply(h)


def apply_B0(h: PeriodicField, geometry: InterfaceGeometry, t: float = 0.0, sigma: float = 1.0,
             K: int | None = None) -> PeriodicField:
    """Difference of the Dirichlet-outer and Neumann-outer Mullins-Sekerka operators."""
    return assemble("B0", geometry, t, h.K if K is None else K, sigma=sigma).apply(h)


def apply_B1(h: PeriodicField, geometry: InterfaceGeometry, t: float = 0.0, b2=1.0,
             mu_outer: str = "neumann", K: int | None = None) -> PeriodicField:
    """Normal-derivative jump of the two-phase problem with traces ``+-b2 h``."""
    bc = BoundaryConfig(mu_outer=mu_outer)
    return assemble("B1", geometry, t, h.K if K is None else K, b2=b2, bc=bc).apply(h)


def ms_symbol(k: int, r0: float, R: float, sigma: float = 1.0, outer_bc: str = "neumann") -> float:
    """Eigenvalue of the Mullins-Sekerka operator on mode ``k`` for concentric circles.

    With ``rho = (r0/R)^(2|k|)`` the Neumann symbol is
    ``sigma |k|^3 / r0^3 (1 + (1 - rho)/(1 + rho))``; the Dirichlet outer
    condition replaces the second fraction by its reciprocal.
    """
    if not 0 < r0 < R:
        raise NonCircularGeometry("ms_symbol needs concentric circles with 0 < r0 < R")
    k = abs(int(k))
    if k == 0:
        return 0.0
    rho = (r0 / R) ** (2 * k)
    frac = (1 - rho) / (1 + rho)
    if str(outer_bc).lower() == "dirichlet":
        frac = 1.0 / frac
    elif str(outer_bc).lower() != "neumann":
        raise InvalidConfig(f"unknown outer condition {outer_bc!r}")
    return float(sigma * k ** 3 / r0 ** 3 * (1 + frac))


def circle_radii(geometry: InterfaceGeometry, t: float = 0.0) -> tuple[float, float]:
    if not geometry.is_circle(t):
        raise NonCircularGeometry("the interface is not a circle")
    return geometry.mean_radius(t), geometry.R


def operator_norm_estimate(op, s_in: float, s_out: float, K: int | None = None,
                           tol: float = POWER_TOL, maxit: int = POWER_MAXIT, seed: int = 0) -> float:
    """Largest singular value between the weighted coefficient spaces.

    ``op`` is an :class:`OperatorHandle` (reassembled when ``K`` differs) or
    a square coefficient matrix.  Power iteration on ``W^H W`` with
    ``W = D_out M D_in^{-1}``, ``D_s = diag((1+k^2)^{s/2})``, stops when the
    estimate changes by less than ``tol`` relative.
    """
    if isinstance(op, OperatorHandle):
        if K is not None and K != op.K:
            op = op.at(K)
        M = op.matrix
    else:
        M = np.asarray(op, dtype=complex)
    Kc = (M.shape[0] - 1) // 2
    W = (np.sqrt(sobolev_weights(Kc, s_out))[:, None] * M) / np.sqrt(sobolev_weights(Kc, s_in))[None, :]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(W.shape[1]) + 1j * rng.standard_normal(W.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(maxit):
        y = W.conj().T @ (W @ x)
        lam = float(np.real(np.vdot(x, y)))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        if abs(lam - est) <= tol * abs(lam):
            return float(np.sqrt(lam))
        est = lam
    raise PowerIterationStall(f"power iteration did not reach relative {tol:g} in {maxit} steps")


def spectrum_table(geometry: InterfaceGeometry, K: int, sigma: float = 1.0, b2=1.0,
                   mu_outer: str = "neumann", t: float = 0.0) -> np.ndarray:
    """Rows ``(k, A0, B0, B1)`` of diagonal entries for ``k = 0..K``.

    On concentric circles the operators are Fourier multipliers and these
    are their symbols.
    """
    A0 = assemble("A0", geometry, t, K, sigma=sigma)
    B0 = assemble("B0", geometry, t, K, sigma=sigma)
    B1 = assemble("B1", geometry, t, K, b2=b2, bc=BoundaryConfig(mu_outer=mu_outer))
    rows = [(k, A0.symbol(k).real, B0.symbol(k).real, B1.symbol(k).real) for k in range(K + 1)]
    return np.array(rows, dtype=float)
