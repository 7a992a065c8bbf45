"""
Polynomial Galerkin spaces on the disk ``|x| < R`` for the Korn and inf-sup
constants.

Velocities are complex ``w = u + i v``; the space of total degree ``N`` is
spanned by ``c e^{i m theta} rho^|m| P_j^{(0,|m|)}(2 rho^2 - 1)`` with
``|m| + 2j <= N`` and ``c in {1, i}``.  Since ``div v = 2 Re w_z`` and
``|D v|^2 = 2 (Re w_z)^2 + 2 |w_zbar|^2``, the modes ``m`` and ``2 - m`` couple
and nothing else does, so every form splits into blocks labelled by
``k = |m - 1|``.  Pressures of degree ``N_p`` in block ``k`` are
``Re(c e^{i k theta}) rho^k P_j^{(0,k)}(2 rho^2 - 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, null_space
from scipy.special import eval_jacobi


def _radial(m: int, j: int, rho):
    """``F = rho^a P_j^{(0,a)}(2 rho^2 - 1)`` and ``dF/drho`` with ``a = |m|``."""
    a = abs(m)
    x = 2 * rho ** 2 - 1
    P = eval_jacobi(j, 0, a, x)
    dP = 0.5 * (j + a + 1) * eval_jacobi(j - 1, 1, a + 1, x) if j > 0 else np.zeros_like(rho)
    F = rho ** a * P
    dF = (a * rho ** (a - 1) if a > 0 else 0.0) * P + rho ** a * dP * 4 * rho
    return F, dF


@dataclass
class Block:
    """Real forms of one block: velocity DOFs and pressure DOFs."""

    k: int
    mass: np.ndarray       # L^2 of v
    grad: np.ndarray       # H^1 seminorm
    strain: np.ndarray     # |D v|^2
    bnd_full: np.ndarray   # boundary |v|^2
    bnd_tan: np.ndarray    # boundary |v . tau|^2
    c_full: np.ndarray     # boundary rows of v (both components)
    c_normal: np.ndarray   # boundary rows of v . e_r
    div: np.ndarray        # pressure x velocity
    p_mass: np.ndarray
    p_const: int | None    # index of the constant pressure, if present


def blocks(R: float, N: int, Np: int, n_r: int | None = None):
    """Yield the blocks ``k = 0, 1, ...`` of the disk forms.

    Every column is a single Fourier mode in the angle, so angular integrals
    are evaluated exactly; radial integrals use Gauss-Legendre in ``rho``.
    """
    n_r = n_r or N + 4
    x, wx = np.polynomial.legendre.leggauss(n_r)
    rho = 0.5 * (x + 1)
    wr = 0.5 * wx * rho * R ** 2
    n_b = 2 * N + 8
    theta = 2 * np.pi * np.arange(n_b) / n_b
    E = np.exp(1j * theta)
    ds = R * 2 * np.pi / n_b
    tp = 2 * np.pi
    for k in range(0, N + 2):
        modes = [1] if k == 0 else [m for m in (k + 1, 1 - k) if abs(m) <= N]
        ms, cs, fw, fA, fB, fb = [], [], [], [], [], []
        for m in modes:
            for j in range((N - abs(m)) // 2 + 1):
                F, dF = _radial(m, j, rho)
                Fb = _radial(m, j, np.array([1.0]))[0][0]
                dFr = dF / R
                mF = m * F / (rho * R)
                for c in (1.0, 1j):
                    ms.append(m)
                    cs.append(c)
                    fw.append(F)
                    fA.append(0.5 * (dFr + mF))
                    fB.append(0.5 * (dFr - mF))
                    fb.append(Fb)
        if not ms:
            continue
        ms, cs = np.array(ms), np.array(cs)
        fw, fA, fB = np.array(fw), np.array(fA), np.array(fB)
        Cc = np.conj(cs)[:, None] * cs[None, :]
        Cp = cs[:, None] * cs[None, :]
        same = ms[:, None] == ms[None, :]
        # w_z carries e^{i(m-1)theta}; Re w_z pairs m with 2 - m
        opp = (ms[:, None] - 1) + (ms[None, :] - 1) == 0

        def radial(f, g):
            return (f * wr) @ g.T

        IA = radial(fA, fA)
        mass = tp * np.real(Cc * same) * radial(fw, fw)
        grad = 2 * tp * np.real(Cc * same) * (IA + radial(fB, fB))
        reA = 0.5 * tp * np.real(Cc * same + Cp * opp) * IA
        strain = 2 * reA + 2 * tp * np.real(Cc * same) * radial(fB, fB)
        Wb = (cs * np.array(fb))[None, :] * E[:, None] ** ms[None, :]
        bnd_full = ds * np.real(Wb.conj().T @ Wb)
        vt = np.imag(np.conj(E)[:, None] * Wb)
        vn = np.real(np.conj(E)[:, None] * Wb)
        bnd_tan = ds * vt.T @ vt
        # pressure Re(d e^{ik theta}) g(rho)
        ds_, gs, p_const = [], [], None
        for j in range((Np - k) // 2 + 1) if Np >= k else []:
            Fp = _radial(k, j, rho)[0]
            for d in ((1.0,) if k == 0 else (1.0, 1j)):
                if k == 0 and j == 0:
                    p_const = len(ds_)
                ds_.append(d)
                gs.append(Fp)
        if ds_:
            d = np.array(ds_)
            g = np.array(gs)
            lv = ms - 1
            # int Re(d e^{ik th}) 2 Re(c e^{il th}) = 2 pi Re(d c [k + l = 0] + conj(d) c [k = l])
            ang = tp * np.real(d[:, None] * cs[None, :] * (k + lv[None, :] == 0)
                               + np.conj(d)[:, None] * cs[None, :] * (k == lv[None, :]))
            div = ang * radial(g, fA)
            pm = 0.5 * tp * np.real(np.conj(d)[:, None] * d[None, :] + (d[:, None] * d[None, :]) * (k == 0))
            p_mass = pm * radial(g, g)
        else:
            div = np.zeros((0, ms.size))
            p_mass = np.zeros((0, 0))
        yield Block(k, mass, grad, strain, bnd_full, bnd_tan, np.vstack([Wb.real, Wb.imag]), vn,
                    div, p_mass, p_const)


def constrained_basis(block: Block, v_outer: str) -> np.ndarray:
    """Columns spanning the velocities satisfying the essential outer condition."""
    n = block.mass.shape[0]
    if v_outer == "B1":
        C = block.c_full
    elif v_outer == "B2":
        C = block.c_normal
    else:
        return np.eye(n)
    scale = np.max(np.abs(C)) if C.size else 1.0
    return null_space(C / scale, rcond=1e-10)


def min_generalized_eig(A: np.ndarray, B: np.ndarray) -> float:
    if A.shape[0] == 0:
        return np.inf
    return float(eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])[0])
