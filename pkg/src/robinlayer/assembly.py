"""Discrete layer operators on a truncated tensor grid.

The layer operator is assembled from its sesquilinear form

    h[u] = int |grad u|^2 + i int alpha |u(., eps)|^2 - i int alpha |u(., 0)|^2

with a vertex-centred finite-volume rule: edge differences for the gradient,
trapezoid (lumped) mass, and diagonal trace terms on the two face rows.  All
matrices are returned in the *form* representation, i.e. the pencil
``(K, M)`` with ``K`` the stiffness and ``M`` the lumped mass, so that
``(K + s M) u = M f`` realises ``(H + s) u = f``.

Degrees of freedom are ordered lateral-major, transverse-minor.  For a
``dirichlet`` lateral closure the box-boundary nodes carry the value zero and
are not unknowns; the grid quadrature still covers them.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .model import BoundaryCoupling, eval_alpha


class InvalidGrid(ValueError):
    pass


@dataclass(frozen=True)
class LayerGrid:
    d: int
    L: float
    n_lat: int
    epsilon: float
    n_trans: int
    lateral_bc: str = "dirichlet"

    def __post_init__(self):
        if self.d not in (2, 3):
            raise InvalidGrid("d must be 2 or 3")
        if not self.L > 0 or not self.epsilon > 0:
            raise InvalidGrid("L and epsilon must be positive")
        if self.n_lat < 3:
            raise InvalidGrid("n_lat must be >= 3")
        if self.n_trans < 2:
            raise InvalidGrid("n_trans must be >= 2 so that both faces carry nodes")
        if self.lateral_bc not in ("dirichlet", "periodic"):
            raise InvalidGrid(f"unknown lateral_bc {self.lateral_bc!r}")

    # -- 1-D factors --------------------------------------------------------
    @property
    def h_lat(self) -> float:
        if self.lateral_bc == "periodic":
            return 2 * self.L / self.n_lat
        return 2 * self.L / (self.n_lat - 1)

    @property
    def h_trans(self) -> float:
        return self.epsilon / (self.n_trans - 1)

    @property
    def axis(self) -> np.ndarray:
        """All lateral nodes along one axis."""
        return -self.L + self.h_lat * np.arange(self.n_lat)

    @property
    def axis_weights(self) -> np.ndarray:
        w = np.full(self.n_lat, self.h_lat)
        if self.lateral_bc == "dirichlet":
            w[[0, -1]] *= 0.5
        return w

    @property
    def free_axis(self) -> np.ndarray:
        if self.lateral_bc == "periodic":
            return np.arange(self.n_lat)
        return np.arange(1, self.n_lat - 1)

    @property
    def xd(self) -> np.ndarray:
        return np.linspace(0.0, self.epsilon, self.n_trans)

    @property
    def trans_weights(self) -> np.ndarray:
        w = np.full(self.n_trans, self.h_trans)
        w[[0, -1]] *= 0.5
        return w

    # -- tensor quantities ----------------------------------------------------
    @property
    def node_count(self) -> int:
        return self.n_lat ** (self.d - 1) * self.n_trans

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights of every grid node (box boundary included)."""
        lat = self.axis_weights if self.d == 2 else np.kron(self.axis_weights, self.axis_weights)
        return np.kron(lat, self.trans_weights)

    @property
    def volume(self) -> float:
        return (2 * self.L) ** (self.d - 1) * self.epsilon

    @property
    def n_free_lat(self) -> int:
        return len(self.free_axis) ** (self.d - 1)

    @property
    def n_dof(self) -> int:
        return self.n_free_lat * self.n_trans

    @property
    def lateral_points(self) -> np.ndarray:
        """Free lateral nodes, shape ``(n_free_lat, d - 1)``."""
        x = self.axis[self.free_axis]
        if self.d == 2:
            return x[:, None]
        X, Y = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def lateral_weights(self) -> np.ndarray:
        w = self.axis_weights[self.free_axis]
        return w if self.d == 2 else np.kron(w, w)

    def dof_coordinates(self):
        """``(x', x_d)`` of every unknown: arrays of shape (n_dof, d-1) and (n_dof,)."""
        lat = np.repeat(self.lateral_points, self.n_trans, axis=0)
        xd = np.tile(self.xd, self.n_free_lat)
        return lat, xd

    def interpolate(self, func):
        """Nodal values of ``func(xp, xd)`` with ``xp`` of shape (n, d-1)."""
        lat, xd = self.dof_coordinates()
        return np.asarray(func(lat, xd), dtype=complex)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def build_grid(d, L, n_lat, epsilon, n_trans, lateral_bc="dirichlet") -> LayerGrid:
    return LayerGrid(int(d), float(L), int(n_lat), float(epsilon), int(n_trans), lateral_bc)


def default_n_trans(epsilon, h_lat, floor=2):
    """Transverse node count resolving the linear-in-x_d corrector profile."""
    return max(floor, 2, math.ceil(8 * epsilon / h_lat))


def _csr(A):
    A = sp.csr_matrix(A, dtype=complex)
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def _lateral_1d(grid: LayerGrid):
    """Stiffness and lumped mass of -d^2/dx^2 along one lateral axis (free nodes)."""
    h = grid.h_lat
    m = len(grid.free_axis)
    K = sp.diags([np.full(m, 2.0), -np.ones(m - 1), -np.ones(m - 1)], [0, 1, -1], format="lil")
    if grid.lateral_bc == "periodic":
        K[0, m - 1] = -1.0
        K[m - 1, 0] = -1.0
    return sp.csr_matrix(K) / h, sp.diags(np.full(m, h))


def _lateral(grid: LayerGrid):
    K1, M1 = _lateral_1d(grid)
    if grid.d == 2:
        return K1.tocsr(), M1.tocsr()
    return (sp.kron(K1, M1) + sp.kron(M1, K1)).tocsr(), sp.kron(M1, M1).tocsr()


def _transverse(grid: LayerGrid):
    n, h = grid.n_trans, grid.h_trans
    main = np.full(n, 2.0)
    main[[0, -1]] = 1.0
    K = sp.diags([main, -np.ones(n - 1), -np.ones(n - 1)], [0, 1, -1]) / h
    return K.tocsr(), sp.diags(grid.trans_weights).tocsr()


SUBCELL = 64


def _is_discontinuous(coupling: BoundaryCoupling) -> bool:
    return coupling.kind == "step_perturbation" and coupling.profile_params[2] == 0 and coupling.c != 0


def _cell_average(grid: LayerGrid, coupling: BoundaryCoupling, power):
    """Mean of alpha**power over each free node's dual cell (midpoint subsampling)."""
    h = grid.h_lat
    off = h * ((np.arange(SUBCELL) + 0.5) / SUBCELL - 0.5)
    x = grid.axis[grid.free_axis]
    if grid.d == 2:
        vals = eval_alpha(coupling, (x[:, None] + off[None, :])[..., None]) ** power
        return vals.mean(axis=1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    ox, oy = np.meshgrid(off, off, indexing="ij")
    pts = np.stack([X.ravel()[:, None] + ox.ravel()[None, :],
                    Y.ravel()[:, None] + oy.ravel()[None, :]], axis=-1)
    return (eval_alpha(coupling, pts) ** power).mean(axis=1)


def lateral_alpha(grid: LayerGrid, coupling: BoundaryCoupling, power=1) -> np.ndarray:
    """``alpha**power`` at the free lateral nodes.

    Sharp steps use dual-cell averages instead of point values; a node on
    the jump would otherwise cost a first-order eigenvalue error.
    """
    if _is_discontinuous(coupling):
        return _cell_average(grid, coupling, power)
    pts = grid.lateral_points
    return np.atleast_1d(eval_alpha(coupling, pts[:, 0] if grid.d == 2 else pts)) ** power


def assemble_form_heps(grid: LayerGrid, coupling: BoundaryCoupling):
    """Stiffness (full form h_eps) and lumped mass of the layer operator."""
    K_lat, M_lat = _lateral(grid)
    K_t, M_t = _transverse(grid)
    alpha = lateral_alpha(grid, coupling)
    faces = np.zeros(grid.n_trans, dtype=complex)
    faces[0], faces[-1] = -1j, 1j
    trace = sp.kron(sp.diags(alpha * grid.lateral_weights), sp.diags(faces))
    K = sp.kron(K_lat, M_t) + sp.kron(M_lat, K_t) + trace
    return _csr(K), _csr(sp.kron(M_lat, M_t))


def assemble_h0(grid: LayerGrid, coupling: BoundaryCoupling):
    """Stiffness of -Laplacian' + alpha^2 on the free lateral nodes (mass = M0_L2)."""
    K_lat, _ = _lateral(grid)
    alpha2 = lateral_alpha(grid, coupling, power=2)
    return _csr(K_lat + sp.diags(alpha2 * grid.lateral_weights))


def lateral_mass(grid: LayerGrid):
    """Lumped lateral mass ``M0_L2`` without building any layer matrix."""
    return _csr(sp.diags(grid.lateral_weights))


def assemble_projection(grid: LayerGrid):
    """Return ``(P_eps, lift, average)``; ``P_eps = lift @ average``."""
    I = sp.identity(grid.n_free_lat, format="csr")
    avg = sp.kron(I, sp.csr_matrix(grid.trans_weights[None, :] / grid.epsilon))
    lift = sp.kron(I, sp.csr_matrix(np.ones((grid.n_trans, 1))))
    return _csr(lift @ avg), _csr(lift), _csr(avg)


def gram_matrices(grid: LayerGrid):
    """``(M_L2, M_W1, M0_L2)``: layer L2, layer W^1_2 and lateral L2 Grams."""
    K_lat, M_lat = _lateral(grid)
    K_t, M_t = _transverse(grid)
    M = sp.kron(M_lat, M_t)
    grad = sp.kron(K_lat, M_t) + sp.kron(M_lat, K_t)
    return _csr(M), _csr(M + grad), _csr(M_lat)


@dataclass(frozen=True)
class OperatorSet:
    grid: LayerGrid
    coupling: BoundaryCoupling
    H_eps: sp.csr_matrix
    H0: sp.csr_matrix
    P_eps: sp.csr_matrix
    lift: sp.csr_matrix
    average: sp.csr_matrix
    M_L2: sp.csr_matrix
    M_W1: sp.csr_matrix
    M0_L2: sp.csr_matrix


def assemble_operators(grid: LayerGrid, coupling: BoundaryCoupling) -> OperatorSet:
    K, _ = assemble_form_heps(grid, coupling)
    P, lift, avg = assemble_projection(grid)
    M, MW1, M0 = gram_matrices(grid)
    return OperatorSet(grid, coupling, K, assemble_h0(grid, coupling), P, lift, avg, M, MW1, M0)


def transverse_flip(grid: LayerGrid) -> np.ndarray:
    """Permutation realising x_d -> eps - x_d on the unknowns."""
    idx = np.arange(grid.n_dof).reshape(grid.n_free_lat, grid.n_trans)
    return idx[:, ::-1].ravel()


def write_matrix_market(path, A, comment=""):
    scipy.io.mmwrite(str(path), sp.coo_matrix(A, dtype=complex), comment=comment,
                     field="complex", symmetry="general")


def read_matrix_market(path):
    return _csr(scipy.io.mmread(str(path)))
