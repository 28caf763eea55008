"""Spectra of the discrete layer and effective operators.

Covers the numerical-range enclosure of the layer spectrum, the threshold
alpha0^2 of the essential spectrum, the weakly coupled eigenvalue emerging
below it, and eigenvalue trajectories along a coupling sweep.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (LayerGrid, OperatorSet, assemble_form_heps, assemble_h0,
                       assemble_operators, lateral_alpha, lateral_mass)
from .linalg import match_eigenvalues, shift_invert_arnoldi
from .model import BoundaryCoupling, sup_norms

RE_TOL = 1e-8
RESIDUAL_FACTOR = 10.0


def threshold(coupling: BoundaryCoupling) -> float:
    """Bottom of the essential spectrum: alpha at lateral infinity, squared."""
    if coupling.kind == "sampled":
        _, a = coupling.samples
        return float(min(a[0] ** 2, a[-1] ** 2))
    return coupling.alpha0**2


def box_mode_spacing(grid: LayerGrid) -> float:
    """Lowest non-trivial energy of -d^2/dx^2 on the truncation box."""
    if grid.lateral_bc == "periodic":
        return (math.pi / grid.L) ** 2
    return (math.pi / (2 * grid.L)) ** 2


def in_enclosure(z, alpha_sup, tol_re=RE_TOL, tol_im=0.0):
    """Numerical-range enclosure ``Re z >= 0, |Im z| <= 2 |alpha|_inf sqrt(Re z)``."""
    z = complex(z)
    return z.real >= -tol_re and abs(z.imag) <= 2 * alpha_sup * math.sqrt(max(z.real, 0.0)) + tol_im


@dataclass
class SpectrumReport:
    operator: str
    eigenvalues: list
    residuals: list
    threshold: float
    edge_band: float
    below_threshold: list
    enclosure_violations: list
    n_requested: int
    n_converged: int
    near: complex
    alpha_sup: float
    grid: dict = field(default_factory=dict)
    coupling: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.n_converged >= self.n_requested


def operator_residuals(K, M, lam, X):
    """``|K v - lam M v|_{M^-1} / |v|_M`` per column; the operator residual for diagonal ``M``."""
    m = M.diagonal().real
    R = K @ X - (M @ X) * lam
    num = np.sqrt(np.sum(np.abs(R) ** 2 / m[:, None], axis=0))
    den = np.sqrt(np.sum(np.abs(X) ** 2 * m[:, None], axis=0))
    return num / den


def pencil_spectrum(K, M, near, k, tol=1e-10, seed=0):
    res = shift_invert_arnoldi(K, M, near, k, tol=tol, seed=seed)
    ok = res.residuals <= res.bounds
    lam = res.eigenvalues[ok]
    return lam, operator_residuals(K, M, lam, res.vectors[:, ok])


def compute_spectrum(ops: OperatorSet, which="H_eps", near=0.0, k=6, edge_band=None,
                     tol=1e-10, seed=0) -> SpectrumReport:
    """``k`` eigenvalues near ``near`` with the enclosure check applied to each.

    ``edge_band`` eigenvalues just below the threshold are treated as box
    artifacts; it defaults to ten box-mode spacings for the layer operator and
    to zero for the self-adjoint effective operator, whose box modes all sit
    above the threshold.
    """
    if which == "H_eps":
        K, M = ops.H_eps, ops.M_L2
    elif which == "H0":
        K, M = ops.H0, ops.M0_L2
    else:
        raise ValueError(f"unknown operator {which!r}")
    return _report(K, M, which, ops.grid, ops.coupling, near, k, edge_band, tol, seed)


def _report(K, M, which, grid, coupling, near, k, edge_band, tol, seed):
    lam, resid = pencil_spectrum(K, M, near, k, tol, seed)
    if which == "H0":
        lam = lam.real + 0j if np.all(np.abs(lam.imag) <= 1e-10 * np.maximum(1, np.abs(lam))) else lam
    edge = threshold(coupling)
    if edge_band is None:
        edge_band = 10 * box_mode_spacing(grid) if which == "H_eps" else 0.0
    a_sup = sup_norms(coupling)[0]
    violations = []
    if which == "H_eps":
        for z, r in zip(lam, resid):
            if not in_enclosure(z, a_sup, RE_TOL, RESIDUAL_FACTOR * r):
                violations.append({
                    "re": z.real, "im": z.imag, "residual": float(r),
                    "re_margin": z.real,
                    "im_margin": 2 * a_sup * math.sqrt(max(z.real, 0.0)) - abs(z.imag)})
    below = [complex(z) for z in lam if z.real < edge - edge_band]
    return SpectrumReport(
        operator=which, eigenvalues=[complex(z) for z in lam], residuals=[float(r) for r in resid],
        threshold=edge, edge_band=edge_band, below_threshold=below,
        enclosure_violations=violations, n_requested=k, n_converged=len(lam), near=complex(near),
        alpha_sup=a_sup, grid=dataclasses.asdict(grid), coupling=coupling_dict(coupling))


def coupling_dict(coupling):
    return {"kind": coupling.kind, "alpha0": coupling.alpha0, "c": coupling.c,
            "profile_params": list(coupling.profile_params)}


def h0_spectrum(grid: LayerGrid, coupling: BoundaryCoupling, near, k, edge_band=0.0, tol=1e-10):
    """Effective-operator spectrum without assembling any layer matrix."""
    K0 = assemble_h0(grid, coupling)
    return _report(K0, lateral_mass(grid), "H0", grid, coupling, near, k, edge_band, tol, 0)


def lowest_h0(grid: LayerGrid, coupling: BoundaryCoupling, below=None):
    """Lowest eigenvalue of the (real symmetric) effective pencil.

    ``below`` is a shift known to lie under the lowest eigenvalue; closer
    shifts converge much faster when box modes crowd the bottom.  Without it
    the minimum of alpha^2 is used, which is always a lower bound.
    """
    K0 = assemble_h0(grid, coupling).real.tocsc()
    m = lateral_mass(grid).diagonal().real
    s = 1 / np.sqrt(m)
    A = sp.diags(s) @ K0 @ sp.diags(s)
    vmin = float(np.min(lateral_alpha(grid, coupling, power=2)))
    sigma = vmin - 1e-3 if below is None else max(below, vmin - 1e-3)
    val = spla.eigsh(A.tocsc(), k=2, sigma=sigma, which="LM", tol=1e-14,
                     v0=np.ones(A.shape[0]))[0]
    return float(np.min(val))


# -- weak coupling -------------------------------------------------------------

@dataclass
class WeakCouplingReport:
    c_values: list
    mu: list
    prediction: list
    residual_over_c3: list
    integral_beta: float
    threshold: float
    edge_band: float
    operator: str
    K_fit: float | None = None


def weak_coupling_prediction(alpha0, c, integral_beta):
    return alpha0**2 - c**2 * alpha0**2 * integral_beta**2


def weak_coupling_sweep(grid: LayerGrid, template: BoundaryCoupling, c_values, which="H0",
                        edge_band=None) -> WeakCouplingReport:
    """Track the eigenvalue emerging below alpha0^2 as the coupling strength varies.

    ``template`` fixes alpha0 and the profile; its ``c`` is replaced by each
    entry of ``c_values``.  Entries without an eigenvalue below the threshold
    are recorded as ``None``.
    """
    a0 = template.alpha0
    ib = template.integral_beta(grid.d)
    edge = a0**2
    if edge_band is None:
        edge_band = 10 * box_mode_spacing(grid) if which == "H_eps" else 0.0
    mus, preds, ratios = [], [], []
    for c in c_values:
        coupling = dataclasses.replace(template, c=float(c))
        pred = weak_coupling_prediction(a0, c, ib)
        gap = max(edge - pred, 1e-8)
        target = edge - 2 * gap
        if which == "H0":
            mu = lowest_h0(grid, coupling, below=target)
        else:
            K, M = assemble_form_heps(grid, coupling)
            lam, _ = pencil_spectrum(K, M, target, 4)
            mu = float(min(lam.real)) if len(lam) else math.inf
        if mu < edge - edge_band:
            mus.append(mu)
            ratios.append(abs(mu - pred) / abs(c) ** 3 if c != 0 else math.nan)
        else:
            mus.append(None)
            ratios.append(None)
        preds.append(pred)
    present = [r for r in ratios if r is not None and math.isfinite(r)]
    return WeakCouplingReport(list(map(float, c_values)), mus, preds, ratios, ib, edge, edge_band,
                              which, max(present) if present else None)


# -- trajectories ------------------------------------------------------------

@dataclass
class Trajectory:
    c_values: list
    lowest: list
    below: list
    threshold: float
    c_emerge: float | None
    c_return: float | None
    c_min: float | None
    mu_min: float | None

    @property
    def pattern(self) -> str:
        """'emerge-min-return', 'emerge', or 'none'."""
        if self.c_emerge is None:
            return "none"
        return "emerge-min-return" if self.c_return is not None else "emerge"


def coupling_trajectory(grid: LayerGrid, template: BoundaryCoupling, c_values) -> Trajectory:
    """Lowest effective eigenvalue along an ordered coupling sweep.

    Threshold crossings are located by linear interpolation between
    neighbouring sweep points.
    """
    edge = template.alpha0**2
    cs = [float(c) for c in c_values]
    lows = [lowest_h0(grid, dataclasses.replace(template, c=c)) for c in cs]
    tol = 1e-12 * max(1.0, edge)
    below = [mu < edge - tol for mu in lows]
    crossings = []
    for i in range(len(cs) - 1):
        if below[i] != below[i + 1]:
            t = (edge - lows[i]) / (lows[i + 1] - lows[i]) if lows[i + 1] != lows[i] else 0.5
            crossings.append(cs[i] + t * (cs[i + 1] - cs[i]))
    if below and below[0]:
        crossings.insert(0, cs[0])
    c_emerge = crossings[0] if crossings else None
    c_return = crossings[1] if len(crossings) > 1 else None
    if any(below):
        i = int(np.argmin(lows))
        c_min, mu_min = cs[i], lows[i]
    else:
        c_min = mu_min = None
    return Trajectory(cs, lows, below, edge, c_emerge, c_return, c_min, mu_min)


def track(sequence, jump_factor=5.0):
    """Nearest-neighbour continuation through a list of eigenvalue arrays.

    Starts from the entry of smallest real part; a step is rejected (``None``)
    when the jump exceeds ``jump_factor`` times the running trend.
    """
    path = []
    prev = None
    trend = None
    for vals in sequence:
        vals = np.asarray(vals, dtype=complex)
        if len(vals) == 0:
            path.append(None)
            continue
        if prev is None:
            z = vals[np.argmin(vals.real)]
        else:
            z = vals[np.argmin(np.abs(vals - prev))]
            jump = abs(z - prev)
            if trend is not None and trend > 0 and jump > jump_factor * trend:
                path.append(None)
                continue
            trend = jump if trend is None else 0.5 * (trend + jump)
        path.append(complex(z))
        prev = z
    return path


# -- layer vs effective ---------------------------------------------------------

@dataclass
class PairedSpectra:
    epsilon: float
    lam_eps: list
    lam_0: list
    distance: list
    below_threshold: list
    unmatched_eps: list
    unmatched_0: list


def compare_heps_h0_spectra(grid: LayerGrid, coupling: BoundaryCoupling, k=4) -> PairedSpectra:
    """Pair the ``k`` lowest eigenvalues of both operators on one grid.

    On a truncated box every eigenvalue is discrete, so the comparison uses
    the lowest ``k`` regardless of the threshold and flags those below it.
    """
    ops = assemble_operators(grid, coupling)
    near = float(np.min(lateral_alpha(grid, coupling, power=2))) - 0.5
    lam0, _ = pencil_spectrum(ops.H0, ops.M0_L2, near, k)
    lame, _ = pencil_spectrum(ops.H_eps, ops.M_L2, near, k)
    lam0 = np.sort(lam0.real)
    rows, cols, cost = match_eigenvalues(lame, lam0)
    edge = threshold(coupling)
    return PairedSpectra(
        epsilon=grid.epsilon,
        lam_eps=[complex(lame[i]) for i in rows],
        lam_0=[float(lam0[j]) for j in cols],
        distance=[float(c) for c in cost],
        below_threshold=[bool(lam0[j] < edge) for j in cols],
        unmatched_eps=[complex(z) for i, z in enumerate(lame) if i not in set(rows)],
        unmatched_0=[float(z) for j, z in enumerate(lam0) if j not in set(cols)])
