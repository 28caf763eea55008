"""Independent reference computations used to cross-check the sparse paths.

Nothing here shares code with the sparse solvers: dense LAPACK routines,
an ODE shooting method, and arbitrary-precision arithmetic.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .model import BoundaryCoupling, eval_alpha


def dense_solve(A, b):
    return sla.lu_solve(sla.lu_factor(np.asarray(A, dtype=complex)), np.asarray(b, dtype=complex))


def dense_eig(A, M=None):
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=complex)
    if M is not None:
        M = np.asarray(M.toarray() if hasattr(M, "toarray") else M, dtype=complex)
    return sla.eigvals(A, M)


def dense_weighted_norm(T, M_in, M_out):
    """Largest generalized singular value via Cholesky whitening and SVD."""
    Li = sla.cholesky(np.asarray(M_in, dtype=complex), lower=True)
    Lo = sla.cholesky(np.asarray(M_out, dtype=complex), lower=True)
    W = Lo.conj().T @ np.asarray(T, dtype=complex) @ sla.inv(Li.conj().T)
    return float(sla.svdvals(W)[0])


def transverse_robin_eigs(alpha0, epsilon, n_trans):
    """Dense eigenvalues of the discrete 1-D Robin pencil across (0, eps)."""
    h = epsilon / (n_trans - 1)
    K = np.diag(np.full(n_trans, 2.0)) - np.eye(n_trans, k=1) - np.eye(n_trans, k=-1)
    K[0, 0] = K[-1, -1] = 1.0
    K = K.astype(complex) / h
    K[0, 0] += -1j * alpha0
    K[-1, -1] += 1j * alpha0
    w = np.full(n_trans, h)
    w[[0, -1]] *= 0.5
    return sla.eigvals(K, np.diag(w))


def _support(coupling: BoundaryCoupling):
    if coupling.kind == "step_perturbation":
        a, _, w = coupling.profile_params
        return a + 0.5 * w, [a - 0.5 * w, a + 0.5 * w]
    if coupling.kind == "gaussian_bump":
        amp, sigma = coupling.profile_params
        size = abs(coupling.c * amp)
        X = sigma * math.sqrt(2 * math.log(max(size, 1e-300) * 1e17)) if size > 0 else 1.0
        return X, []
    return 1.0, []


def shooting_ground_state(coupling: BoundaryCoupling, rtol=1e-12, n_scan=400):
    """Lowest eigenvalue of -psi'' + alpha(x)^2 psi on the whole line.

    The profile must equal ``alpha0`` outside a bounded interval (exactly for
    steps, to below 1e-17 for Gaussians).  Returns ``None`` when no eigenvalue
    lies below ``alpha0^2``.  Decaying tails ``exp(-kappa |x|)`` are matched
    at both ends of the support and the mismatch is bracketed and bisected.
    """
    X, kinks = _support(coupling)
    edge = coupling.alpha0**2
    breaks = sorted({-X, X, *(-k for k in kinks), *kinks})
    breaks = [b for b in breaks if -X <= b <= X]

    def mismatch(mu):
        kappa = math.sqrt(edge - mu)
        y = np.array([1.0, kappa])
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            sol = solve_ivp(lambda x, v: [v[1], (eval_alpha(coupling, x) ** 2 - mu) * v[0]],
                            (lo, hi), y, method="DOP853", rtol=rtol, atol=1e-14 * max(1.0, abs(y).max()))
            y = sol.y[:, -1]
            scale = abs(y).max()
            y = y / scale
        return (y[1] + kappa * y[0]) / math.hypot(y[0], y[1])

    xs = np.linspace(-X, X, 2001)
    vmin = float(np.min(eval_alpha(coupling, xs) ** 2))
    if vmin >= edge:
        return None
    grid = vmin + (edge - vmin) * (1 - np.geomspace(1, 1e-12, n_scan))
    grid = grid[grid < edge]
    vals = [mismatch(m) for m in grid]
    for i in range(len(grid) - 1):
        if np.sign(vals[i]) != np.sign(vals[i + 1]):
            return brentq(mismatch, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-14)
    return None


def lemma22_reference(a, xd, dps=50):
    """``dps``-digit values of |e^{-i a xd} - 1| and |e^{-i a xd} - 1 + i a xd|.

    The working precision grows with ``-log10(a xd)`` so that the second
    quantity, which cancels to order (a xd)^2, keeps ``dps`` digits.
    """
    t = abs(float(a) * float(xd))
    extra = 0 if t == 0 or t >= 1 else int(2 * -math.log10(t)) + 5
    with mpmath.workdps(dps + extra):
        t = mpmath.mpf(a) * mpmath.mpf(xd)
        e = mpmath.exp(-1j * t)
        return abs(e - 1), abs(e - 1 + 1j * t)


def constants_reference(alpha_sup, grad_sup, epsilon, dps=50):
    """High-precision evaluation of (C, C(eps), C1(eps), C0)."""
    with mpmath.workdps(dps):
        a, g, e = (mpmath.mpf(str(v)) for v in (alpha_sup, grad_sup, epsilon))
        ip2 = 1 / mpmath.pi**2
        C = mpmath.sqrt(ip2 + (g + 2 * a) ** 2 / 3)
        s = e * a**2 / (2 * mpmath.sqrt(5))
        C1 = mpmath.sqrt(s**2 + (s + a * mpmath.sqrt(a**2 + g**2 * e**2) / mpmath.sqrt(3)) ** 2)
        C0 = (g + a) / mpmath.sqrt(3)
        Ce = mpmath.sqrt(ip2 + (C0 + C1) ** 2)
        return C, Ce, C1, C0
