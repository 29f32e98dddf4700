"""Dense symmetric eigensolver wrapper, heat-kernel propagation, and graph Cheeger sweeps.

One decomposition of the symmetric normalized Laplacian serves every query on
an interval: closed-form propagation, Rayleigh quotients, the second
eigenpair, and tie-time detection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .laplacian import WeightedGraph

__all__ = [
    "SpectralConfig",
    "DEFAULT_SPECTRAL_CONFIG",
    "SpectralDecomposition",
    "decompose",
    "heat_propagate",
    "rayleigh_quotient",
    "lambda2_u2",
    "graph_cheeger_sweep",
]


@dataclass(frozen=True)
class SpectralConfig:
    """Central record for all spectral tolerances."""

    symmetry_tol: float = 1e-12
    reconstruction_tol: float = 1e-8
    eigenvalue_slack: float = 1e-8
    zero_eigenvalue_tol: float = 1e-8
    max_nodes: int = 4096


DEFAULT_SPECTRAL_CONFIG = SpectralConfig()


class SpectralDecomposition:
    """Eigendecomposition of ``D^{-1/2} (D - A) D^{-1/2}`` for one graph.

    ``vectors`` holds orthonormal columns ``q_j`` with eigenvalues ascending;
    the random-walk eigenvectors in the paper-facing convention are
    ``u_j = D^{1/2} q_j`` (so that ``D^{-1/2} u_j`` is orthonormal).
    """

    def __init__(self, graph: WeightedGraph, eigenvalues: np.ndarray, vectors: np.ndarray):
        self.graph = graph
        self.eigenvalues = eigenvalues
        self.vectors = vectors
        self.sqrt_degree = np.sqrt(graph.node_degree)
        self.inv_sqrt_degree = 1.0 / self.sqrt_degree

    @property
    def m(self) -> int:
        return self.graph.m

    def reconstruction_error(self) -> float:
        N = self.graph.sym_normalized_laplacian()
        R = (self.vectors * self.eigenvalues[None, :]) @ self.vectors.T
        return float(np.max(np.abs(R - N)))

    def propagate(self, rho: np.ndarray, delta: float) -> np.ndarray:
        return heat_propagate(self, rho, delta)

    def decay_rates(self) -> np.ndarray:
        """Eigenvalues snapped to exact zero within roundoff of zero.

        The operator is positive semidefinite, so tiny negative values are
        noise that would amplify over long horizons, and tiny positive values
        on stationary modes would leak mass; both snap to zero.  Genuine
        spectral gaps at desk scale sit far above the snap threshold.
        """
        ev = self.eigenvalues
        return np.where(np.abs(ev) <= 1e-12, 0.0, np.maximum(ev, 0.0))

    def mu_expansion(self, rho0: np.ndarray):
        """Coefficients of the degree-normalized state as a sum of decaying modes.

        Returns ``(M, lam)`` with ``mu_k(delta) = sum_j M[k, j] exp(-lam_j delta)``.
        """
        c = self.vectors.T @ (np.asarray(rho0, dtype=np.float64) * self.inv_sqrt_degree)
        M = self.inv_sqrt_degree[:, None] * self.vectors * c[None, :]
        return M, self.decay_rates()


def decompose(Gw: WeightedGraph, config: SpectralConfig = DEFAULT_SPECTRAL_CONFIG) -> SpectralDecomposition:
    """Full dense eigendecomposition of the symmetric normalized Laplacian.

    Uses LAPACK's symmetric solver (tridiagonal reduction); eigenvalues come
    back ascending.  Rejects weight matrices that are not symmetric to within
    ``config.symmetry_tol`` (relative to the largest magnitude entry) and
    graphs above the dense-size guard.
    """
    if Gw.m > config.max_nodes:
        raise ValueError(f"dense decomposition limited to m <= {config.max_nodes}")
    W = Gw.weights
    scale = max(1.0, float(np.max(np.abs(W))) if W.size else 0.0)
    if float(np.max(np.abs(W - W.T))) > config.symmetry_tol * scale:
        raise ValueError("weight matrix is not symmetric")
    lam, Q = np.linalg.eigh(Gw.sym_normalized_laplacian())
    return SpectralDecomposition(Gw, lam, Q)


def heat_propagate(dec: SpectralDecomposition, rho: np.ndarray, delta: float) -> np.ndarray:
    """Closed-form heat step ``exp(-delta L) rho`` through the decomposition.

    Computed as ``D^{1/2} Q exp(-delta Lam) Q^T D^{-1/2} rho``; total mass is
    preserved to roundoff.
    """
    if delta < 0:
        raise ValueError(f"propagation time must be nonnegative, got {delta}")
    rho = np.asarray(rho, dtype=np.float64)
    c = dec.vectors.T @ (rho * dec.inv_sqrt_degree)
    c = c * np.exp(-delta * dec.decay_rates())
    return dec.sqrt_degree * (dec.vectors @ c)


def rayleigh_quotient(Gw: WeightedGraph, x: np.ndarray) -> float:
    """Graph Rayleigh quotient: edge energy over the degree-weighted norm.

    Self-loops contribute nothing to the numerator.
    """
    x = np.asarray(x, dtype=np.float64)
    denom = float(np.sum(x * x * Gw.node_degree))
    if denom == 0.0:
        raise ValueError("rayleigh_quotient needs a nonzero vector")
    diff = x[:, None] - x[None, :]
    num = 0.5 * float(np.sum(Gw.weights * diff * diff))  # each pair counted once
    return num / denom


def lambda2_u2(dec: SpectralDecomposition):
    """Second eigenvalue and eigenvector in the ``u = D^{1/2} q`` convention."""
    if dec.m < 2:
        raise ValueError("second eigenpair needs at least 2 nodes")
    lam2 = float(dec.eigenvalues[1])
    u2 = dec.sqrt_degree * dec.vectors[:, 1]
    return lam2, u2


def graph_cheeger_sweep(Gw: WeightedGraph, x: np.ndarray):
    """Best sweep cut of the graph by the ordering of ``x``.

    Returns ``(subset, conductance)``.  Ties in ``x`` never split; ties in
    conductance break toward smaller cardinality, then lexicographic order.
    Sweeping ``u2 / degree`` certifies the Cheeger bound
    ``phi <= sqrt(2 lambda2)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.ptp(x) == 0.0:
        raise ValueError("graph_cheeger_sweep needs a non-constant vector")
    m = Gw.m
    order = np.argsort(-x, kind="stable")
    xs = x[order]
    offdiag = Gw.weights.copy()
    np.fill_diagonal(offdiag, 0.0)
    vols = np.cumsum(Gw.node_degree[order])
    best = None
    cut = 0.0
    inside = np.zeros(m, dtype=bool)
    for b in range(1, m):
        v = order[b - 1]
        # Moving v into the prefix flips its boundary contribution.
        cut += float(offdiag[v, ~inside].sum()) - float(offdiag[v, inside].sum())
        inside[v] = True
        if xs[b - 1] == xs[b]:
            continue  # tie: not a sweep boundary
        phi = cut / min(float(vols[b - 1]), Gw.volume - float(vols[b - 1]))
        for side in (order[:b], order[b:]):
            subset = tuple(sorted(int(u) for u in side))
            key = (len(subset), subset)
            if (
                best is None
                or phi < best[0] - 1e-12
                or (phi <= best[0] + 1e-12 and key < (best[1], best[2]))
            ):
                best = (phi, key[0], subset)
    assert best is not None
    return best[2], best[0]
