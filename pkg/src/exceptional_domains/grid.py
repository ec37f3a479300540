"""Tensor grids in (log r, tau) and the differentiation matrices on them.

Radial nodes are ``r_i = exp(xi_i)`` with ``xi`` uniform on ``[0, log r_max]``;
derivatives in ``xi`` use explicit finite-difference stencils of a fixed
even order. The angular nodes ``tau_j = j pi / (m - 1)`` carry an even
2 pi-periodic function, differentiated exactly through its cosine
interpolant.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sps

from .errors import ContractError, DomainError

__all__ = [
    "GridConfig",
    "GridField",
    "cosine_matrices",
    "fd_weights",
    "radial_matrices",
]


@dataclass(frozen=True)
class GridConfig:
    """Discretization parameters.

    ``n_r`` counts radial nodes including ``r = 1``; ``m_tau`` counts angular
    nodes on ``[0, pi]`` including both ends; ``order`` is the radial stencil
    order.
    """

    r_max: float = 50.0
    n_r: int = 400
    m_tau: int = 32
    order: int = 6

    def __post_init__(self):
        if not self.r_max > 1:
            raise DomainError(f"r_max must exceed 1, got {self.r_max!r}")
        if self.order < 2 or self.order % 2:
            raise DomainError("stencil order must be an even integer >= 2")
        if self.n_r < self.order + 3:
            raise DomainError(f"n_r={self.n_r} too small for order {self.order} stencils")
        if self.m_tau < 2:
            raise DomainError("m_tau must be >= 2")

    def refined(self, factor: float = 1.5) -> "GridConfig":
        return GridConfig(self.r_max, int(round(self.n_r * factor)), int(round(self.m_tau * factor)), self.order)

    @property
    def xi(self) -> np.ndarray:
        return np.linspace(0.0, math.log(self.r_max), self.n_r)

    @property
    def r_nodes(self) -> np.ndarray:
        r = np.exp(self.xi)
        r[0] = 1.0
        return r

    @property
    def tau_nodes(self) -> np.ndarray:
        return np.linspace(0.0, math.pi, self.m_tau)

    @property
    def h(self) -> float:
        return math.log(self.r_max) / (self.n_r - 1)

    def to_dict(self) -> dict:
        return {"r_max": self.r_max, "n_r": self.n_r, "m_tau": self.m_tau, "order": self.order}


def fd_weights(x0: float, nodes, m: int) -> np.ndarray:
    """Weights of the ``m``-th derivative at ``x0`` from values at ``nodes``.

    Solves the moment (Vandermonde) system; adequate for the <= 9 point
    stencils used here.
    """
    nodes = np.asarray(nodes, dtype=float)
    dx = nodes - x0
    scale = np.max(np.abs(dx)) or 1.0
    A = np.vander(dx / scale, len(nodes), increasing=True).T
    b = np.zeros(len(nodes))
    b[m] = math.factorial(m)
    return np.linalg.solve(A, b) / scale**m


def _stencil_rows(x, m, order):
    n = len(x)
    rows, cols, vals = [], [], []
    half = order // 2
    for i in range(n):
        if half <= i < n - half:
            lo, hi = i - half, i + half + 1
        else:
            # one extra point keeps the off-centre second derivative at full order
            width = order + 2 if m == 2 else order + 1
            lo = 0 if i < half else n - width
            hi = lo + width
        idx = np.arange(lo, hi)
        rows.extend([i] * len(idx))
        cols.extend(idx)
        vals.extend(fd_weights(x[i], x[idx], m))
    return sps.csr_array((vals, (rows, cols)), shape=(n, n))


@lru_cache(maxsize=16)
def radial_matrices(config: GridConfig):
    """Sparse first and second ``xi``-derivative matrices (cached; do not mutate)."""
    x = config.xi
    return _stencil_rows(x, 1, config.order), _stencil_rows(x, 2, config.order)


@lru_cache(maxsize=16)
def cosine_matrices(m: int):
    """Matrices for the cosine interpolant on ``tau_j = j pi/(m-1)``.

    Returns ``(C, E, D1, D2)``: ``C`` maps node values to cosine
    coefficients, ``E`` evaluates coefficients at the nodes (``E @ C = I``),
    ``D1``/``D2`` differentiate node values once/twice. Cached; do not mutate.
    """
    tau = np.linspace(0.0, math.pi, m)
    k = np.arange(m)
    E = np.cos(np.outer(tau, k))
    if m == 1:
        return np.ones((1, 1)), E, np.zeros((1, 1)), np.zeros((1, 1))
    w = np.ones(m)
    w[0] = w[-1] = 0.5
    C = (2.0 / (m - 1)) * (E * w[:, None]).T
    C[0] *= 0.5
    C[-1] *= 0.5
    S = np.sin(np.outer(tau, k))
    D1 = (S * (-k)) @ C
    D2 = (E * (-(k**2))) @ C
    return C, E, D1, D2


@dataclass
class GridField:
    """Node values ``values[i, j] = w(r_i, tau_j)`` with grid metadata."""

    values: np.ndarray
    config: GridConfig
    spec: object = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.config.n_r, self.config.m_tau):
            raise ContractError(
                f"field shape {self.values.shape} does not match grid ({self.config.n_r}, {self.config.m_tau})"
            )

    @property
    def r_nodes(self):
        return self.config.r_nodes

    @property
    def tau_nodes(self):
        return self.config.tau_nodes

    @classmethod
    def from_function(cls, func, config: GridConfig, spec=None) -> "GridField":
        R, Tau = np.meshgrid(config.r_nodes, config.tau_nodes, indexing="ij")
        return cls(func(R, Tau), config, spec)

    def cosine_modes(self) -> np.ndarray:
        """Cosine coefficients in ``tau`` for every radial node, shape ``(n_r, m_tau)``."""
        C, _, _, _ = cosine_matrices(self.config.m_tau)
        return self.values @ C.T

    def tau_mean(self) -> np.ndarray:
        return self.cosine_modes()[:, 0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("r,tau,value\n")
        for i, r in enumerate(self.r_nodes):
            for j, t in enumerate(self.tau_nodes):
                buf.write(f"{r:.17g},{t:.17g},{self.values[i, j]:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, config: GridConfig, spec=None) -> "GridField":
        rows = list(csv.DictReader(io.StringIO(text)))
        if len(rows) != config.n_r * config.m_tau:
            raise ContractError("CSV row count does not match the grid")
        vals = np.array([float(row["value"]) for row in rows]).reshape(config.n_r, config.m_tau)
        return cls(vals, config, spec)
