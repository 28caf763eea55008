"""Deterministic self-checks: exponential estimates, constants and linear-algebra oracles."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import oracles
from .linalg import LinearSolver, match_eigenvalues, shift_invert_arnoldi, weighted_opnorm
from .model import constants_from_norms, lemma22_kernels


def lemma22_suite(n=1_000_000, seed=0):
    """Count violations of the three pointwise estimates over random triples."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(-5, 5, n)
    g = rng.uniform(0, 5, n)
    xd = rng.uniform(0, 1, n)
    l1, r1, l2, r2, l3, r3 = lemma22_kernels(a, g, xd)
    return {"samples": n, "violations": [int(np.sum(l1 > r1)), int(np.sum(l2 > r2)), int(np.sum(l3 > r3))]}


def constants_suite():
    worst = 0.0
    for a, g, e in [(1.0, 0.0, 0.1), (1.5, 0.3, 0.05), (0.0, 0.0, 1.0), (3.0, 2.0, 0.2)]:
        got = constants_from_norms(a, g, e)
        ref = oracles.constants_reference(a, g, e)
        for x, y in zip((got.C, got.C_eps, got.C1_eps, got.C0), ref):
            if y != 0:
                worst = max(worst, abs(x - float(y)) / float(y))
            else:
                worst = max(worst, abs(x))
    return {"max_rel_error": worst}


def random_sparse(n, density, seed, shift=0.0):
    rng = np.random.default_rng(seed)
    A = sp.random(n, n, density=density, random_state=rng, data_rvs=rng.standard_normal)
    B = sp.random(n, n, density=density, random_state=rng, data_rvs=rng.standard_normal)
    return (A + 1j * B + shift * sp.identity(n)).tocsr()


def linalg_suite(seed=0):
    rng = np.random.default_rng(seed)
    out = {}
    A = random_sparse(50, 0.1, seed, shift=4.0)
    b = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    x = LinearSolver(A, None, shift=0.0).solve(b)
    out["solve_err"] = float(np.max(np.abs(x - oracles.dense_solve(A.toarray(), b))))

    A = random_sparse(30, 0.2, seed + 1, shift=2.0)
    res = shift_invert_arnoldi(A, None, 0.3 + 0.1j, 30)
    _, _, cost = match_eigenvalues(res.eigenvalues, oracles.dense_eig(A))
    out["arnoldi_full_err"] = float(cost.max())
    out["arnoldi_converged"] = int(res.n_converged)

    T = rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40))
    G1 = rng.standard_normal((40, 40))
    G2 = rng.standard_normal((40, 40))
    Min = G1 @ G1.T + 40 * np.eye(40)
    Mout = G2 @ G2.T + 40 * np.eye(40)
    est = weighted_opnorm(lambda v: T @ v, Min, Mout, 40, iters=20000, tol=1e-14, seed=seed)
    ref = oracles.dense_weighted_norm(T, Min, Mout)
    out["opnorm_rel_err"] = abs(est.value - ref) / ref
    return out


def run(samples=1_000_000, seed=0):
    lem = lemma22_suite(samples, seed)
    const = constants_suite()
    lin = linalg_suite(seed)
    checks = {
        "lemma22_zero_violations": sum(lem["violations"]) == 0,
        "constants_rel_1e-12": const["max_rel_error"] <= 1e-12,
        "solve_matches_dense_1e-10": lin["solve_err"] <= 1e-10,
        "arnoldi_full_spectrum_1e-8": lin["arnoldi_full_err"] <= 1e-8 and lin["arnoldi_converged"] == 30,
        "opnorm_matches_gsvd_1e-8": lin["opnorm_rel_err"] <= 1e-8,
    }
    return {"passed": all(checks.values()), "checks": checks, "lemma22": lem,
            "constants": const, "linalg": lin}
