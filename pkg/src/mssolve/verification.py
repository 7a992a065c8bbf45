"""
Backend-versus-oracle checks on concentric circles.

Each check solves one Fourier mode with a production backend and with the
finite-difference oracle and returns the largest discrepancy.  The ``verify``
command and the acceptance tests both run these.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .elliptic import BoundaryConfig, normal_jump, solve_two_phase_laplace
from .geometry import InterfaceGeometry
from .ms_operator import assemble, ms_symbol
from .oracle import StokesModeData, oracle_laplace_mode, oracle_stokes_mode
from .sobolev import PeriodicField
from .stokes import StokesData, solve_two_phase_stokes


@dataclass
class CheckResult:
    name: str
    error: float
    tol: float
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(self.error < self.tol)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def elliptic_mode_error(k: int, mu_outer: str, r0: float = 1.0, R: float = 2.0,
                        backend: str = "spectral") -> float:
    """Jump discrepancy for the trace ``e^{ik theta} + c.c.`` (the constant for ``k = 0``)."""
    g = InterfaceGeometry.circle(r0, R, 0.1 * (R - r0))
    f = PeriodicField.from_modes(max(k, 1), {k: 1.0 if k == 0 else 0.5})
    mu = solve_two_phase_laplace(f, bc=BoundaryConfig(mu_outer=mu_outer), geometry=g, backend=backend)
    J = normal_jump(mu, g, 0.0, max(k, 1)).coefficient(k)
    ref = oracle_laplace_mode(k, r0, R, mu_outer, 1.0).jump * (1.0 if k == 0 else 0.5)
    return float(abs(J - ref) / max(1.0, abs(ref)))


def _polar_mode(k, radial, angular):
    def fn(theta):
        e = np.exp(1j * k * np.asarray(theta))
        return ((radial * e).real + 1j * (angular * e).real) * np.exp(1j * np.asarray(theta))
    return fn


def stokes_mode_error(k: int, v_outer: str, alpha: float = 1.0, seed: int = 0, r0: float = 1.0,
                      R: float = 2.0, backend: str = "spectral") -> float:
    """Largest trace discrepancy (velocity and pressure, both phases) for random mode-``k`` data."""
    rng = np.random.default_rng(seed + 97 * k)
    z = rng.normal(size=6) + 1j * rng.normal(size=6)
    data = StokesModeData(*z)
    if k == 0 and v_outer != "B3":
        # compatible axisymmetric data carry no radial velocity
        data = StokesModeData(0, data.s_t, data.a_r, data.a_t, 0, data.g_t)
    a = alpha if v_outer != "B1" else 0.0
    ref = oracle_stokes_mode(k, r0, R, v_outer, data, a)
    g = InterfaceGeometry.circle(r0, R, 0.1 * (R - r0))
    bc = BoundaryConfig(v_outer=v_outer, alpha2=a, alpha3=a)
    sd = StokesData(s=_polar_mode(k, data.s_r, data.s_t), a=_polar_mode(k, data.a_r, data.a_t),
                    g=_polar_mode(k, data.g_r, data.g_t))
    res = k + 4 if backend == "spectral" else 256
    flow = solve_two_phase_stokes(sd, bc, g, backend=backend, resolution=res)
    theta = np.linspace(0, 2 * np.pi, 13, endpoint=False)
    tr = flow.interface_traces(theta)
    e, er = np.exp(1j * k * theta), np.exp(1j * theta)
    err, scale = 0.0, 1.0
    for sgn, key in (("+", "plus"), ("-", "minus")):
        o = getattr(ref, key)
        v = tr["v" + sgn] * np.conj(er)
        for got, want in ((v.real, o["vr"]), (v.imag, o["vt"]), (tr["p" + sgn], o["p"])):
            want = (want * e).real
            err = max(err, float(np.max(np.abs(got - want))))
            scale = max(scale, float(np.max(np.abs(want))))
    return err / scale


def symbol_error(k: int, r0: float = 1.0, R: float = 2.0, sigma: float = 1.0) -> float:
    """Assembled operator diagonal versus the closed-form symbol, relative."""
    g = InterfaceGeometry.circle(r0, R, 0.1 * (R - r0))
    A = assemble("A0", g, 0.0, max(k, 1), sigma=sigma)
    lam = ms_symbol(k, r0, R, sigma)
    return float(abs(A.symbol(k) - lam) / max(1.0, lam))


def _timed(name, fn, tol) -> CheckResult:
    t0 = time.perf_counter()
    err = fn()
    return CheckResult(name, err, tol, time.perf_counter() - t0)


def run_verification(r0: float = 1.0, R: float = 2.0, kmax_elliptic: int = 32, kmax_stokes: int = 16,
                     modes=None) -> list[CheckResult]:
    """The oracle-versus-backend matrix on concentric circles."""
    out = []
    ke = modes or sorted({0, 1, 2, 3, 5, 8, 16, kmax_elliptic})
    ks = modes or sorted({0, 1, 2, 5, 8, kmax_stokes})
    for bc in ("neumann", "dirichlet"):
        for k in ke:
            out.append(_timed(f"elliptic/{bc}/k={k}", lambda: elliptic_mode_error(k, bc, r0, R), 1e-7))
    for fam in ("B1", "B2", "B3"):
        for k in ks:
            out.append(_timed(f"stokes/{fam}/k={k}", lambda: stokes_mode_error(k, fam, 1.0, 0, r0, R), 1e-6))
    for k in (1, 2, 4, 8):
        out.append(_timed(f"symbol/k={k}", lambda: symbol_error(k, r0, R), 1e-8))
    return out
