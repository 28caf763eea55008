"""Boundary coupling, closed-form constants and the corrector.

The coupling alpha enters the Robin condition du/dx_d + i alpha(x') u = 0 on
both faces of the layer.  Everything here is scalar and pure; the discrete
operators live in :mod:`robinlayer.assembly`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

KINDS = ("constant", "step_perturbation", "gaussian_bump", "sampled")


class DomainError(ValueError):
    """Query outside the region where a coupling is defined."""


class HypothesisViolation(ValueError):
    """The coupling is not in W^1_inf, so the convergence estimates do not apply."""


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


@dataclass(frozen=True)
class BoundaryCoupling:
    """alpha(x') = alpha0 + c * beta(x') for a radial profile beta.

    ``profile_params`` is ``(half_width, amplitude, smoothing)`` for
    ``step_perturbation`` and ``(amplitude, sigma)`` for ``gaussian_bump``.
    A ``sampled`` coupling carries ``samples = (x, alpha)`` on a uniform
    one-dimensional grid and is only usable for d = 2.
    """

    kind: str
    alpha0: float = 0.0
    c: float = 0.0
    profile_params: tuple = ()
    samples: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown coupling kind {self.kind!r}")
        p = tuple(float(v) for v in self.profile_params)
        object.__setattr__(self, "profile_params", p)
        if self.kind == "step_perturbation":
            if len(p) != 3:
                raise ValueError("step profile needs (half_width, amplitude, smoothing)")
            half_width, _, w = p
            if half_width <= 0 or w < 0 or w > 2 * half_width:
                raise ValueError("step profile needs half_width > 0 and 0 <= smoothing <= 2*half_width")
        elif self.kind == "gaussian_bump":
            if len(p) != 2 or p[1] <= 0:
                raise ValueError("gaussian profile needs (amplitude, sigma > 0)")
        elif self.kind == "sampled":
            if self.samples is None:
                raise ValueError("sampled coupling needs samples")
            x, a = (np.asarray(v, dtype=float) for v in self.samples)
            if x.ndim != 1 or x.shape != a.shape or x.size < 3:
                raise ValueError("samples must be two equal 1-D arrays with >= 3 entries")
            dx = np.diff(x)
            if np.any(dx <= 0) or not np.allclose(dx, dx[0], rtol=1e-9, atol=0):
                raise ValueError("samples must lie on a uniform increasing grid")
            x.setflags(write=False)
            a.setflags(write=False)
            object.__setattr__(self, "samples", (x, a))

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, alpha0):
        return cls("constant", alpha0=float(alpha0))

    @classmethod
    def step(cls, alpha0, c, half_width=1.0, amplitude=1.0, smoothing=0.0):
        return cls("step_perturbation", float(alpha0), float(c), (half_width, amplitude, smoothing))

    @classmethod
    def gauss(cls, alpha0, amplitude=1.0, sigma=1.0, c=1.0):
        return cls("gaussian_bump", float(alpha0), float(c), (amplitude, sigma))

    @classmethod
    def from_csv(cls, path):
        """Read a sampled coupling from a CSV file with header ``x,alpha``."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if header != ["x", "alpha"]:
                raise ValueError(f"{path}: expected header 'x,alpha', got {','.join(header)!r}")
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
        x, a = np.array(rows).T
        return cls("sampled", samples=(x, a))

    @property
    def norms_are_lower_bounds(self) -> bool:
        """Sampled sup norms are grid maxima, hence only lower bounds."""
        return self.kind == "sampled"

    # -- profile ----------------------------------------------------------
    def _profile(self, r):
        """beta as a function of |x'|."""
        if self.kind == "step_perturbation":
            a, amp, w = self.profile_params
            if w == 0.0:
                return amp * (r <= a).astype(float)
            return amp * (1.0 - _smoothstep((r - (a - 0.5 * w)) / w))
        if self.kind == "gaussian_bump":
            amp, sigma = self.profile_params
            return amp * np.exp(-0.5 * (r / sigma) ** 2)
        return np.zeros_like(r)

    def _profile_slope(self, r):
        """|d beta / dr|; infinite slope is never produced here."""
        if self.kind == "step_perturbation":
            a, amp, w = self.profile_params
            if w == 0.0:
                return np.zeros_like(r)
            s = np.clip((r - (a - 0.5 * w)) / w, 0.0, 1.0)
            return abs(amp) * 6.0 * s * (1.0 - s) / w
        if self.kind == "gaussian_bump":
            amp, sigma = self.profile_params
            return abs(amp) * r / sigma**2 * np.exp(-0.5 * (r / sigma) ** 2)
        return np.zeros_like(r)

    def integral_beta(self, d=2):
        """Integral of beta over R^{d-1}."""
        if self.kind == "step_perturbation":
            a, amp, w = self.profile_params
            if d == 2:
                return 2.0 * a * amp
            inner = 0.5 * (a - 0.5 * w) ** 2
            if w > 0:
                ramp, _ = integrate.quad(
                    lambda r: r * (1.0 - float(_smoothstep((r - (a - 0.5 * w)) / w))),
                    a - 0.5 * w, a + 0.5 * w, epsabs=1e-14, epsrel=1e-13)
            else:
                ramp = 0.0
            return 2.0 * math.pi * amp * (inner + ramp)
        if self.kind == "gaussian_bump":
            amp, sigma = self.profile_params
            return amp * sigma * math.sqrt(2 * math.pi) if d == 2 else amp * 2 * math.pi * sigma**2
        return 0.0


def _radius(xp):
    xp = np.asarray(xp, dtype=float)
    if xp.ndim >= 2:
        return np.sqrt(np.sum(xp**2, axis=-1)), xp[..., 0], xp.shape[-1]
    return np.abs(xp), xp, 1


def eval_alpha(coupling: BoundaryCoupling, xp):
    """Evaluate alpha at lateral points.

    ``xp`` is a scalar or 1-D array of points on the line (d = 2), or an
    array whose last axis holds the d-1 coordinates.
    """
    r, x1, dim = _radius(xp)
    if coupling.kind == "constant":
        out = np.full(r.shape, coupling.alpha0)
    elif coupling.kind == "sampled":
        if dim != 1:
            raise DomainError("sampled couplings are one-dimensional")
        xs, a = coupling.samples
        if np.any(x1 < xs[0]) or np.any(x1 > xs[-1]):
            raise DomainError(f"point outside sample box [{xs[0]}, {xs[-1]}]")
        out = np.interp(x1, xs, a)
    else:
        out = coupling.alpha0 + coupling.c * coupling._profile(r)
    return float(out) if np.ndim(out) == 0 else out


def eval_grad_abs(coupling: BoundaryCoupling, xp):
    """|grad' alpha| at lateral points (zero-smoothing steps report 0 off the jump)."""
    r, x1, dim = _radius(xp)
    if coupling.kind == "constant":
        out = np.zeros(r.shape)
    elif coupling.kind == "sampled":
        if dim != 1:
            raise DomainError("sampled couplings are one-dimensional")
        xs, a = coupling.samples
        if np.any(x1 < xs[0]) or np.any(x1 > xs[-1]):
            raise DomainError(f"point outside sample box [{xs[0]}, {xs[-1]}]")
        out = np.interp(x1, xs, np.abs(np.gradient(a, xs)))
    else:
        out = abs(coupling.c) * coupling._profile_slope(r)
    return float(out) if np.ndim(out) == 0 else out


def sup_norms(coupling: BoundaryCoupling) -> tuple[float, float]:
    """Return ``(||alpha||_inf, ||grad' alpha||_inf)``.

    A sharp step has an unbounded gradient and reports ``inf``.  Sampled
    couplings report grid maxima with a centred-difference gradient; see
    :attr:`BoundaryCoupling.norms_are_lower_bounds`.
    """
    kind = coupling.kind
    if kind == "constant":
        return abs(coupling.alpha0), 0.0
    if kind == "sampled":
        xs, a = coupling.samples
        return float(np.max(np.abs(a))), float(np.max(np.abs(np.gradient(a, xs))))
    a0, c = coupling.alpha0, coupling.c
    if kind == "step_perturbation":
        _, amp, w = coupling.profile_params
        sup = max(abs(a0), abs(a0 + c * amp))
        if c * amp == 0:
            return sup, 0.0
        return sup, (1.5 * abs(c * amp) / w if w > 0 else math.inf)
    amp, sigma = coupling.profile_params
    sup = max(abs(a0), abs(a0 + c * amp))
    return sup, abs(c * amp) * math.exp(-0.5) / sigma


@dataclass(frozen=True)
class TheoremConstants:
    C: float
    C_eps: float
    C1_eps: float
    C0: float
    epsilon: float


def constants_from_norms(alpha_sup, grad_sup, epsilon) -> TheoremConstants:
    """Closed-form constants of the two resolvent estimates.

    Double-precision evaluation; the tests cross-check against a 50-digit
    reference with relative error below 1e-12.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    a, g = float(alpha_sup), float(grad_sup)
    if not math.isfinite(g) or not math.isfinite(a):
        raise HypothesisViolation("alpha must lie in W^1_inf (finite sup norms of alpha and its gradient)")
    if a < 0 or g < 0:
        raise ValueError("sup norms are nonnegative")
    inv_pi2 = 1.0 / math.pi**2
    C = math.sqrt(inv_pi2 + (g + 2.0 * a) ** 2 / 3.0)
    s = epsilon * a * a / (2.0 * math.sqrt(5.0))
    C1 = math.hypot(s, s + a * math.sqrt(a * a + (g * epsilon) ** 2) / math.sqrt(3.0))
    C0 = (g + a) / math.sqrt(3.0)
    C_eps = math.sqrt(inv_pi2 + (C0 + C1) ** 2)
    return TheoremConstants(C=C, C_eps=C_eps, C1_eps=C1, C0=C0, epsilon=float(epsilon))


def theorem_constants(coupling: BoundaryCoupling, epsilon) -> TheoremConstants:
    a, g = sup_norms(coupling)
    return constants_from_norms(a, g, epsilon)


def lemma22_kernels(a, g, xd):
    """Pointwise sides of the three elementary exponential estimates.

    Returns ``(lhs1, rhs1, lhs2, rhs2, lhs3, rhs3)`` for

    * ``|exp(-i a xd) - 1| <= |a| xd``
    * ``|exp(-i a xd) - 1 + i a xd| <= a^2 xd^2 / 2``
    * ``|grad(exp(-i a xd) - 1 + i a xd)| <= |a| xd sqrt(a^2 + g^2 xd^2)``

    with ``a = alpha(x')`` and ``g = |grad' alpha(x')|``.  The left sides are
    written as the right-side prefactor times a factor in [0, 1], which keeps
    the comparison free of cancellation for tiny ``a * xd``.
    """
    a = np.asarray(a, dtype=float)
    g = np.asarray(g, dtype=float)
    xd = np.asarray(xd, dtype=float)
    if np.any(xd < 0):
        raise ValueError("xd must be nonnegative")
    theta = np.abs(a) * xd
    # |e^{-i t} - 1| = t |sinc(t / 2pi)|
    chord = np.abs(np.sinc(theta / (2 * np.pi)))
    rhs1 = theta
    lhs1 = theta * chord
    # e^{-it} - 1 + it = -2 sin^2(t/2) + i (t - sin t); divide by t^2/2
    small = theta < 0.5
    t = np.where(small, theta, 1.0)
    series = t / 3.0 * (1 - t**2 / 20.0 * (1 - t**2 / 42.0 * (1 - t**2 / 72.0 * (1 - t**2 / 110.0))))
    with np.errstate(divide="ignore", invalid="ignore"):
        big = 2.0 * (theta - np.sin(theta)) / theta**2
    odd = np.where(small, series, big)
    rhs2 = 0.5 * theta**2
    lhs2 = rhs2 * np.sqrt(chord**4 + odd**2)
    # grad(...) = i (1 - e^{-i a xd}) (xd grad' alpha, alpha)
    scale = np.sqrt(a * a + (g * xd) ** 2)
    rhs3 = theta * scale
    lhs3 = lhs1 * scale
    return lhs1, rhs1, lhs2, rhs2, lhs3, rhs3


@dataclass(frozen=True)
class Corrector:
    """Multiplier Q(x', x_d) = -i alpha(x') x_d restoring W^1 accuracy."""

    coupling: BoundaryCoupling

    def __call__(self, xp, xd):
        return eval_corrector(self, xp, xd)


def eval_corrector(corr: Corrector, xp, xd):
    xd = np.asarray(xd, dtype=float)
    if np.any(xd < 0):
        raise ValueError("xd must be nonnegative")
    val = -1j * eval_alpha(corr.coupling, xp) * xd
    return complex(val) if np.ndim(val) == 0 else val


def from_preset(name, **params) -> BoundaryCoupling:
    """Build a coupling from a CLI preset name.

    ``"constant"``, ``"step"``, ``"gauss"`` or ``"sampled:<path>"``.
    """
    if name == "constant":
        return BoundaryCoupling.constant(params.get("alpha0", 0.0))
    if name == "step":
        return BoundaryCoupling.step(
            params.get("alpha0", 1.0), params.get("c", 0.0),
            half_width=params.get("half_width", 1.0),
            amplitude=params.get("amplitude", 1.0),
            smoothing=params.get("smoothing", 0.0))
    if name == "gauss":
        return BoundaryCoupling.gauss(
            params.get("alpha0", 0.0), amplitude=params.get("amplitude", 1.0),
            sigma=params.get("sigma", 1.0), c=params.get("c", 1.0))
    if name.startswith("sampled:"):
        return BoundaryCoupling.from_csv(Path(name.split(":", 1)[1]))
    raise ValueError(f"unknown coupling preset {name!r}")
