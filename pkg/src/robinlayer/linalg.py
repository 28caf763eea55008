"""Complex sparse kernels: pencil solves, weighted operator norms, shift-invert Arnoldi."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment

log = logging.getLogger(__name__)


class PencilSingular(ArithmeticError):
    """``A + shift * M`` could not be factorized."""


class ShiftOnSpectrum(PencilSingular):
    """The shift-invert target is (numerically) an eigenvalue."""


class NoConvergence(RuntimeError):
    def __init__(self, msg, iterations):
        super().__init__(f"{msg} after {iterations} iterations")
        self.iterations = iterations


def _as_csc(A, n=None):
    if A is None:
        return sp.identity(n, dtype=complex, format="csc")
    return sp.csc_matrix(A, dtype=complex)


class LinearSolver:
    """Solves ``(A + shift * M) x = b`` for a pencil ``(A, M)``.

    Sparse LU is used up to ``size_threshold`` unknowns, GMRES(50) with an
    incomplete-LU preconditioner above.  The factorization is built once and
    reused by every subsequent :meth:`solve` / :meth:`solve_adjoint` call.
    """

    def __init__(self, A, M=None, shift=1.0, method="auto", tolerance=1e-10,
                 max_iter=2000, size_threshold=400_000):
        A = _as_csc(A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("pencil matrices must be square")
        M = _as_csc(M, n)
        if M.shape != A.shape:
            raise ValueError("pencil matrices differ in size")
        self.shift = complex(shift)
        self.system = (A + self.shift * M).tocsc()
        self.tolerance = tolerance
        self.max_iter = max_iter
        if method == "auto":
            method = "sparse_lu" if n <= size_threshold else "gmres"
        if method not in ("sparse_lu", "gmres"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self._adjoint = None
        if method == "sparse_lu":
            try:
                self._lu = spla.splu(self.system)
            except RuntimeError as exc:
                raise PencilSingular(str(exc)) from exc
            diagU = self._lu.U.diagonal()
            scale = np.max(np.abs(diagU)) if diagU.size else 1.0
            if np.min(np.abs(diagU)) <= 1e-14 * scale:
                raise PencilSingular("factorization has a (numerically) zero pivot")
        else:
            self._ilu = spla.spilu(self.system, drop_tol=0.0, fill_factor=1.0)

    @property
    def shape(self):
        return self.system.shape

    def _check(self, mat, x, b):
        if not np.all(np.isfinite(x)):
            raise PencilSingular("solve produced non-finite values")
        nb = np.linalg.norm(b)
        res = np.linalg.norm(mat @ x - b)
        if res > self.tolerance * max(nb, np.finfo(float).tiny):
            raise NoConvergence(f"relative residual {res / nb:.3e} above {self.tolerance:.1e}", 1)
        return x

    def _gmres(self, mat, prec, b):
        P = spla.LinearOperator(mat.shape, matvec=prec.solve, dtype=complex)
        info_iters = []
        x, info = spla.gmres(mat, b, rtol=self.tolerance * 0.5, atol=0.0, restart=50,
                             maxiter=self.max_iter, M=P,
                             callback=lambda r: info_iters.append(r), callback_type="pr_norm")
        if info != 0:
            raise NoConvergence("GMRES stagnated", len(info_iters))
        return x

    def solve(self, b):
        b = np.asarray(b, dtype=complex)
        if self.method == "sparse_lu":
            x = self._lu.solve(b)
        else:
            x = self._gmres(self.system, self._ilu, b)
        return self._check(self.system, x, b) if b.ndim == 1 else x

    def solve_adjoint(self, b):
        """Solve ``(A + shift * M)^H x = b``."""
        b = np.asarray(b, dtype=complex)
        adj = self.system.conj().T.tocsc()
        if self.method == "sparse_lu":
            x = self._lu.solve(b, trans="H")
        else:
            if self._adjoint is None:
                self._adjoint = spla.spilu(adj, drop_tol=0.0, fill_factor=1.0)
            x = self._gmres(adj, self._adjoint, b)
        return self._check(adj, x, b) if b.ndim == 1 else x


def solve(pencil, shift, b, **kwargs):
    """One-shot solve of ``(A + shift * M) x = b`` for ``pencil = (A, M)``."""
    A, M = pencil
    return LinearSolver(A, M, shift=shift, **kwargs).solve(b)


# -- weighted operator norm ------------------------------------------------

@dataclass
class NormEstimate:
    value: float
    converged: bool
    rel_change: float
    iterations: int
    history: list = field(default_factory=list, repr=False)

    def __float__(self):
        return self.value


def _gram_solver(G):
    if sp.issparse(G):
        d = G.diagonal()
        if G.nnz == np.count_nonzero(d):
            return lambda x: x / d
        lu = spla.splu(sp.csc_matrix(G, dtype=complex))
        return lu.solve
    cho = sla.cho_factor(np.asarray(G))
    return lambda x: sla.cho_solve(cho, x)


def _dense_adjoint(apply, n, m):
    cols = [apply(e) for e in np.eye(n, dtype=complex)]
    T = np.column_stack(cols) if cols else np.zeros((m, n), complex)
    return lambda y: T.conj().T @ y


def _inner(G, x, y):
    return np.vdot(y, G @ x)


def weighted_opnorm(apply, M_in, M_out, n, iters=500, seed=0, apply_adjoint=None,
                    tol=1e-6, method="power") -> NormEstimate:
    """Estimate ``sup |T f|_{M_out} / |f|_{M_in}`` for the linear map ``apply``.

    ``apply_adjoint`` must realise the Euclidean adjoint ``T^H``; if omitted
    it is formed densely (small problems only).  ``method="power"`` runs
    power iteration on the ``M_in``-adjoint composition ``T* T`` with a seeded
    complex Gaussian start and stops once the Rayleigh-quotient estimate
    changes by less than ``tol`` over three consecutive iterates.
    ``method="lanczos"`` hands the same composition to ARPACK, which is far
    less sensitive to clustered top singular values.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    if apply_adjoint is None:
        m = len(apply(x))
        apply_adjoint = _dense_adjoint(apply, n, m)
    inv_in = _gram_solver(M_in)

    def normal(v):
        # M_in^{-1} T^H M_out T v
        return inv_in(apply_adjoint(M_out @ apply(v)))

    if method == "lanczos" and n <= 32:
        # ARPACK needs k < n - 1; tiny problems go through a dense eigensolve
        A = np.column_stack([apply_adjoint(M_out @ apply(e)) for e in np.eye(n, dtype=complex)])
        Md = M_in.toarray() if sp.issparse(M_in) else np.asarray(M_in)
        top = sla.eigh(0.5 * (A + A.conj().T), Md, eigvals_only=True)[-1]
        return NormEstimate(float(np.sqrt(max(top, 0.0))), True, 0.0, 1)
    if method == "lanczos":
        A = spla.LinearOperator((n, n), matvec=lambda v: apply_adjoint(M_out @ apply(v)), dtype=complex)
        Minv = spla.LinearOperator((n, n), matvec=inv_in, dtype=complex)
        Mop = M_in if sp.issparse(M_in) else np.asarray(M_in)
        try:
            vals = spla.eigsh(A, k=1, M=Mop, Minv=Minv, which="LA", v0=x, tol=tol * 1e-3,
                              maxiter=iters)[0]
            return NormEstimate(float(np.sqrt(max(vals[0].real, 0.0))), True, 0.0, iters)
        except spla.ArpackNoConvergence as exc:
            vals = exc.eigenvalues
            value = float(np.sqrt(max(vals[0].real, 0.0))) if len(vals) else float("nan")
            return NormEstimate(value, False, float("nan"), iters)

    x = x / np.sqrt(_inner(M_in, x, x).real)
    history = []
    small = 0
    rel = float("inf")
    for it in range(1, iters + 1):
        y = apply(x)
        history.append(float(np.sqrt(max(_inner(M_out, y, y).real, 0.0))))
        if len(history) > 1:
            rel = abs(history[-1] - history[-2]) / max(history[-1], np.finfo(float).tiny)
            small = small + 1 if rel < tol else 0
            if small >= 3:
                return NormEstimate(max(history), True, rel, it, history)
        z = normal(x)
        nz = np.sqrt(max(_inner(M_in, z, z).real, 0.0))
        if nz == 0.0:
            return NormEstimate(history[-1], True, 0.0, it, history)
        x = z / nz
    log.warning("power iteration unconverged after %d iterations (rel change %.2e)", iters, rel)
    return NormEstimate(max(history), False, rel, iters, history)


# -- shift-invert Arnoldi ---------------------------------------------------

@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    n_converged: int
    vectors: np.ndarray = field(repr=False, default=None)
    bounds: np.ndarray = field(repr=False, default=None)
    restarts: int = 0

    @property
    def converged(self) -> np.ndarray:
        return self.residuals <= self.bounds


def _onenorm(A):
    return float(spla.norm(A, 1)) if sp.issparse(A) else float(np.linalg.norm(A, 1))


def shift_invert_arnoldi(A, M, target, k, tol=1e-10, ncv=None, max_restarts=300, seed=0,
                         solver_kwargs=None) -> EigenResult:
    """``k`` eigenvalues of ``A v = lambda M v`` nearest ``target``.

    Krylov-Schur restarted Arnoldi on ``(A - target M)^{-1} M``; Ritz values
    ``theta`` are mapped back by ``lambda = target + 1 / theta``.  Residuals
    are recomputed from scratch as ``|A v - lambda M v|_2 / |v|_2`` and a pair
    counts as converged when that residual is at most
    ``tol * (|A|_1 + |lambda| |M|_1)``.
    """
    A = sp.csr_matrix(A, dtype=complex)
    n = A.shape[0]
    M = sp.identity(n, dtype=complex, format="csr") if M is None else sp.csr_matrix(M, dtype=complex)
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    target = complex(target)
    try:
        lin = LinearSolver(A, M, shift=-target, **(solver_kwargs or {}))
    except PencilSingular as exc:
        raise ShiftOnSpectrum(f"pencil singular at target {target}: {exc}") from exc

    def op(v):
        return lin._lu.solve(M @ v) if lin.method == "sparse_lu" else lin.solve(M @ v)

    m = min(n, ncv or max(2 * k + 20, 40))
    rng = np.random.default_rng(seed)
    V = np.zeros((n, m + 1), dtype=complex)
    H = np.zeros((m + 1, m), dtype=complex)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    V[:, 0] = v0 / np.linalg.norm(v0)
    start = 0
    normA, normM = _onenorm(A), _onenorm(M)
    restarts = 0

    while True:
        for j in range(start, m):
            w = op(V[:, j])
            wnorm0 = np.linalg.norm(w)
            h = np.zeros(j + 1, dtype=complex)
            for _ in range(2):
                c = V[:, : j + 1].conj().T @ w
                w = w - V[:, : j + 1] @ c
                h += c
            H[: j + 1, j] = h
            beta = np.linalg.norm(w)
            if j + 1 >= n or beta <= 1e-13 * max(wnorm0, 1e-300):
                # invariant subspace: continue with a fresh orthogonal direction
                H[j + 1, j] = 0.0
                if j + 1 < n:
                    r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
                    for _ in range(2):
                        r -= V[:, : j + 1] @ (V[:, : j + 1].conj().T @ r)
                    V[:, j + 1] = r / np.linalg.norm(r)
                else:
                    V[:, j + 1] = 0.0
            else:
                H[j + 1, j] = beta
                V[:, j + 1] = w / beta

        Hm = H[:m, :m]
        theta, Y = sla.eig(Hm)
        order = np.argsort(-np.abs(theta), kind="stable")
        want = order[:k]
        Y = Y / np.linalg.norm(Y, axis=0)
        ritz_res = np.abs(H[m, :m] @ Y[:, want])
        done = np.all(ritz_res <= tol * np.abs(theta[want]))
        if done or restarts >= max_restarts:
            X = V[:, :m] @ Y[:, want]
            lam = target + 1.0 / theta[want]
            X = X / np.linalg.norm(X, axis=0)
            res = np.linalg.norm(A @ X - (M @ X) * lam, axis=0)
            bounds = tol * (normA + np.abs(lam) * normM)
            idx = np.argsort(np.abs(lam - target), kind="stable")
            lam, res, X, bounds = lam[idx], res[idx], X[:, idx], bounds[idx]
            result = EigenResult(lam, res, int(np.sum(res <= bounds)), X, bounds, restarts)
            if not done:
                log.warning("Arnoldi stopped after %d restarts with %d/%d converged",
                            restarts, result.n_converged, k)
            return result

        restarts += 1
        p = min(max(k + (m - k) // 2, k + 1), m - 1)
        cutoff = np.sort(np.abs(theta))[::-1][p - 1]
        T, Z, sdim = sla.schur(Hm, output="complex", sort=lambda z: abs(z) >= cutoff * (1 - 1e-12))
        p = min(max(sdim, k), m - 1)
        Vnew = np.zeros_like(V)
        Vnew[:, :p] = V[:, :m] @ Z[:, :p]
        Vnew[:, p] = V[:, m]
        Hnew = np.zeros_like(H)
        Hnew[:p, :p] = T[:p, :p]
        Hnew[p, :p] = H[m, :m] @ Z[:, :p]
        V, H, start = Vnew, Hnew, p


def match_eigenvalues(a, b):
    """Minimal-cost bipartite matching on ``|a_i - b_j|``.

    Returns ``(rows, cols, costs)``; unmatched entries are simply absent.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return rows, cols, cost[rows, cols]
