"""Resolvent differences between the layer operator and the effective operator.

For a layer vector ``f`` the layer resolvent is ``(K + M)^{-1} M f`` and the
effective one is ``lift (K0 + M0)^{-1} M0 avg f``.  Their difference is
measured as an L2 -> L2 operator norm, and (after multiplying the effective
part by ``1 + Q``) as an L2 -> W^1_2 operator norm.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .assembly import LayerGrid, OperatorSet, assemble_operators, build_grid, default_n_trans
from .linalg import LinearSolver, weighted_opnorm
from .model import BoundaryCoupling, Corrector, eval_corrector, theorem_constants

RICHARDSON_ORDER = 2

log = logging.getLogger(__name__)


class ResolventPair:
    """Factorized ``H_eps + 1`` and ``H0 + 1`` on one grid."""

    def __init__(self, ops: OperatorSet):
        self.ops = ops
        self.layer = LinearSolver(ops.H_eps, ops.M_L2, shift=1.0, tolerance=1e-9)
        self.effective = LinearSolver(ops.H0, ops.M0_L2, shift=1.0, tolerance=1e-9)
        lat, xd = ops.grid.dof_coordinates()
        xp = lat[:, 0] if ops.grid.d == 2 else lat
        self.q = 1.0 + eval_corrector(Corrector(ops.coupling), xp, xd)

    # layer resolvent f -> (H_eps + 1)^{-1} f and its Euclidean adjoint
    def r_layer(self, f):
        return self.layer.solve(self.ops.M_L2 @ f)

    def r_layer_adj(self, g):
        return self.ops.M_L2 @ self.layer.solve_adjoint(g)

    # f -> lift (H0 + 1)^{-1} P f, and adjoint
    def r_eff(self, f):
        ops = self.ops
        return ops.lift @ self.effective.solve(ops.M0_L2 @ (ops.average @ f))

    def r_eff_adj(self, g):
        ops = self.ops
        w = self.effective.solve_adjoint(ops.lift.conj().T @ g)
        return ops.average.conj().T @ (ops.M0_L2 @ w)

    def diff(self, f, corrected=False):
        eff = self.r_eff(f)
        return self.r_layer(f) - (self.q * eff if corrected else eff)

    def diff_adj(self, g, corrected=False):
        return self.r_layer_adj(g) - self.r_eff_adj(np.conj(self.q) * g if corrected else g)

    def perp(self, f):
        return f - self.ops.P_eps @ f

    def lemma21(self, f):
        return self.r_layer(self.perp(f))

    def lemma21_adj(self, g):
        return self.perp_adj(self.r_layer_adj(g))

    def perp_adj(self, g):
        return g - self.ops.P_eps.conj().T @ g


def apply_diff_L2(ops: OperatorSet, f, pair: ResolventPair | None = None):
    """``(H_eps + 1)^{-1} f - lift (H0 + 1)^{-1} avg f``."""
    return (pair or ResolventPair(ops)).diff(np.asarray(f, dtype=complex))


def apply_diff_W1(ops: OperatorSet, corr: Corrector, f, pair: ResolventPair | None = None):
    """``(H_eps + 1)^{-1} f - (1 + Q) lift (H0 + 1)^{-1} avg f``."""
    if corr.coupling != ops.coupling:
        raise ValueError("corrector and operators use different couplings")
    return (pair or ResolventPair(ops)).diff(np.asarray(f, dtype=complex), corrected=True)


def wnorm(G, u):
    return math.sqrt(max(np.vdot(u, G @ u).real, 0.0))


@dataclass
class ResolventDiffReport:
    epsilon: float
    norm_L2: float
    bound_L2: float
    norm_W1_corrected: float
    bound_W1: float
    norm_W1_uncorrected: float
    lemma21_ratio: float
    lemma21_bound: float
    converged: bool
    L: float
    n_lat: int
    n_trans: int
    lateral_bc: str
    d: int
    seed: int
    probes: int
    margin: float | None = None
    margin_W1: float | None = None

    def row(self):
        return asdict(self)


def estimate_theorem_norms(grid: LayerGrid, coupling: BoundaryCoupling, probes=50, seed=0,
                           method="lanczos", iters=500) -> ResolventDiffReport:
    """Operator norms of both resolvent differences plus the transverse-projection probe ratio."""
    const = theorem_constants(coupling, grid.epsilon)
    ops = assemble_operators(grid, coupling)
    pair = ResolventPair(ops)
    n = grid.n_dof
    kw = dict(n=n, iters=iters, seed=seed, method=method)
    e_l2 = weighted_opnorm(pair.diff, ops.M_L2, ops.M_L2, apply_adjoint=pair.diff_adj, **kw)
    e_w1 = weighted_opnorm(lambda f: pair.diff(f, True), ops.M_L2, ops.M_W1,
                           apply_adjoint=lambda g: pair.diff_adj(g, True), **kw)
    e_unc = weighted_opnorm(pair.diff, ops.M_L2, ops.M_W1, apply_adjoint=pair.diff_adj, **kw)

    rng = np.random.default_rng(seed)
    ratio = 0.0
    for _ in range(probes):
        f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        f /= wnorm(ops.M_L2, f)
        pf = pair.perp(f)
        ratio = max(ratio, wnorm(ops.M_W1, pair.r_layer(pf)) / wnorm(ops.M_L2, pf))

    return ResolventDiffReport(
        epsilon=grid.epsilon,
        norm_L2=e_l2.value, bound_L2=const.C * grid.epsilon,
        norm_W1_corrected=e_w1.value, bound_W1=const.C_eps * grid.epsilon,
        norm_W1_uncorrected=e_unc.value,
        lemma21_ratio=ratio, lemma21_bound=grid.epsilon / math.pi,
        converged=bool(e_l2.converged and e_w1.converged and e_unc.converged),
        L=grid.L, n_lat=grid.n_lat, n_trans=grid.n_trans, lateral_bc=grid.lateral_bc,
        d=grid.d, seed=seed, probes=probes)


def refine(grid: LayerGrid) -> LayerGrid:
    """Halve both spacings."""
    n_lat = 2 * grid.n_lat if grid.lateral_bc == "periodic" else 2 * grid.n_lat - 1
    return build_grid(grid.d, grid.L, n_lat, grid.epsilon, 2 * grid.n_trans - 1, grid.lateral_bc)


def richardson_margin(coarse, fine, order=RICHARDSON_ORDER):
    """Relative error estimate of the fine value from two resolutions."""
    return abs(fine - coarse) / (2**order - 1) / max(abs(fine), np.finfo(float).tiny)


def estimate_with_margin(grid, coupling, probes=50, seed=0, method="lanczos"):
    """Report on ``refine(grid)`` with Richardson margins against ``grid``."""
    coarse = estimate_theorem_norms(grid, coupling, probes, seed, method)
    fine = estimate_theorem_norms(refine(grid), coupling, probes, seed, method)
    fine.margin = richardson_margin(coarse.norm_L2, fine.norm_L2)
    fine.margin_W1 = richardson_margin(coarse.norm_W1_corrected, fine.norm_W1_corrected)
    return fine


def truncation_sensitivity(grid, coupling, method="lanczos"):
    """Relative change of the L2 difference norm when the box half-width doubles."""
    n_lat = 2 * grid.n_lat if grid.lateral_bc == "periodic" else 2 * grid.n_lat - 1
    big = build_grid(grid.d, 2 * grid.L, n_lat, grid.epsilon, grid.n_trans, grid.lateral_bc)
    a = estimate_theorem_norms(grid, coupling, probes=0, method=method).norm_L2
    b = estimate_theorem_norms(big, coupling, probes=0, method=method).norm_L2
    return abs(b - a) / b


@dataclass(frozen=True)
class GridPolicy:
    """Fixed lateral grid; transverse nodes scale with epsilon."""

    d: int = 2
    L: float = 12.0
    n_lat: int = 241
    lateral_bc: str = "dirichlet"
    n_trans_floor: int = 6

    def grid(self, epsilon) -> LayerGrid:
        h = 2 * self.L / (self.n_lat if self.lateral_bc == "periodic" else self.n_lat - 1)
        n_trans = default_n_trans(epsilon, h, floor=self.n_trans_floor)
        return build_grid(self.d, self.L, self.n_lat, epsilon, n_trans, self.lateral_bc)


@dataclass
class RateFit:
    epsilons: list
    norms: list
    slope: float
    intercept: float
    r_squared: float
    excluded: list = field(default_factory=list)


def fit_rate(epsilons, norms, excluded=()) -> RateFit:
    """Least-squares line through ``(log eps, log norm)``; non-positive norms are skipped."""
    eps = np.asarray(epsilons, dtype=float)
    val = np.asarray(norms, dtype=float)
    keep = np.isfinite(val) & (val > 0)
    excluded = list(excluded) + [float(e) for e in eps[~keep]]
    if keep.sum() < 2:
        return RateFit(list(map(float, eps)), list(map(float, val)), math.nan, math.nan, 0.0, excluded)
    x, y = np.log(eps[keep]), np.log(val[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(list(map(float, eps)), list(map(float, val)), float(slope),
                   float(intercept), min(max(r2, 0.0), 1.0), excluded)


NORM_FIELDS = {
    "L2": "norm_L2",
    "W1": "norm_W1_corrected",
    "W1_uncorrected": "norm_W1_uncorrected",
    "lemma21": "lemma21_ratio",
}


def rate_sweep(coupling: BoundaryCoupling, epsilons, policy: GridPolicy = GridPolicy(),
               probes=50, seed=0, margins=False, threads=1, method="lanczos"):
    """Reports per epsilon (ascending) and a log-log rate fit per norm."""
    epsilons = sorted(float(e) for e in epsilons)
    if len(epsilons) < 4:
        raise ValueError("rate sweep needs at least 4 epsilons")
    if epsilons[-1] / epsilons[0] < 10 * (1 - 1e-12):
        log.warning("epsilon sweep spans less than a decade (%.3g .. %.3g)", epsilons[0], epsilons[-1])

    def one(eps):
        g = policy.grid(eps)
        if margins:
            return estimate_with_margin(g, coupling, probes, seed, method)
        return estimate_theorem_norms(g, coupling, probes, seed, method)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            reports = list(pool.map(one, epsilons))
    else:
        reports = [one(e) for e in epsilons]
    good = [r for r in reports if r.converged]
    bad = [r.epsilon for r in reports if not r.converged]
    fits = {}
    for key, attr in NORM_FIELDS.items():
        fits[key] = fit_rate([r.epsilon for r in good], [getattr(r, attr) for r in good], bad)
    return reports, fits
