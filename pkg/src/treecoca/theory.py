"""Convergence-rate constants and bound curves for tree-structured dual ascent.

The per-round contraction at a node with K children is::

    1 - (1 - theta) * (1/K) * lam*m*gamma / (rho + lam*m*gamma)

where theta is the worst child's improvement factor and rho >= rho_min
measures how strongly the children's data blocks interfere. Raising that to a
node's inner iteration count gives the node's own theta for its parent.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from treecoca.model import DataPartition, Dataset, NodeKind, TreeTopology


class BlocksOverlap(ValueError):
    pass


@dataclass(frozen=True)
class BoundParams:
    theta: float
    rho: float
    gamma: float
    C: float
    K: int
    delta: float | None = None
    s: float | None = None
    m_tilde: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.rho < 0.0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        if not 0.0 < self.C <= 1.0:
            raise ValueError(f"C must lie in (0, 1], got {self.C}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.delta is not None and not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")

    @classmethod
    def for_star(
        cls, dataset: Dataset, partition: DataPartition, H: int, *, rho: float | None = None
    ) -> BoundParams:
        """Constants for a star over ``partition`` with H local steps per leaf."""
        gamma = dataset.loss.gamma
        blocks = list(partition.blocks.values())
        sizes = [b.size for b in blocks]
        lmg = dataset.lam_m * gamma
        if rho is None:
            rho = rho_min(dataset, blocks)
        theta = max(theta_leaf(dataset.lam, dataset.m, gamma, mb, H) for mb in sizes)
        return cls(
            theta=theta, rho=rho, gamma=gamma, C=line_search_eta(lmg, rho), K=len(blocks),
            delta=1.0 / max(sizes), s=1.0, m_tilde=max(sizes),
        )

    @property
    def factor(self) -> float:
        return contraction(self.theta, self.K, self.C)


def theta_local(m_tilde: int, s: float, H: int) -> float:
    """``(1 - s/m_tilde)^H``."""
    if m_tilde < 1 or H < 1:
        raise ValueError("need m_tilde >= 1 and H >= 1")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"step size must lie in [0, 1], got {s}")
    return (1.0 - s / m_tilde) ** H


def theta_leaf(lam: float, m: int, gamma: float, m_B: int, H: int) -> float:
    """Improvement factor of H LocalSDCA steps on a leaf holding ``m_B`` points."""
    if H < 1:
        raise ValueError(f"H must be >= 1, got {H}")
    if lam <= 0 or m < 1 or gamma <= 0 or m_B < 1:
        raise ValueError("lam, m, gamma and m_B must be positive")
    lmg = lam * m * gamma
    return (1.0 - lmg / (1.0 + lmg) / m_B) ** H


def line_search_eta(lam_m_gamma: float, rho: float) -> float:
    """``lam*m*gamma / (lam*m*gamma + rho)``, the C constant of the bounds."""
    return lam_m_gamma / (lam_m_gamma + rho)


def contraction(theta: float, K: int, C: float) -> float:
    return 1.0 - (1.0 - theta) * C / K


# --------------------------------------------------------------------------
# rho_min


def interference_matrix(dataset: Dataset, blocks: Sequence[np.ndarray]) -> np.ndarray:
    """``lam^2 m^2 (BlockDiag(G_kk) - G)`` with ``G = A^T A`` over the blocks' columns.

    Because ``A = X / (lam m)`` this is just ``BlockDiag(X_k^T X_k) - X^T X``.
    """
    idx = [np.asarray(b, dtype=np.int64) for b in blocks]
    if any(b.size == 0 for b in idx):
        raise ValueError("blocks must be nonempty")
    flat = np.concatenate(idx)
    if np.unique(flat).size != flat.size:
        raise BlocksOverlap("blocks share coordinates")
    X = dataset.features[:, flat]
    M = -(X.T @ X)
    start = 0
    for b in idx:
        stop = start + b.size
        M[start:stop, start:stop] = 0.0
        start = stop
    return M


def power_iteration_max(
    M: np.ndarray, shift: float, *, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0
) -> float:
    """Largest eigenvalue of symmetric ``M`` given ``M + shift*I`` is PSD.

    Iterates on the shifted matrix so the wanted eigenvalue dominates, stops
    once the Rayleigh residual ``||Bx - theta x||`` falls below
    ``tol * theta`` and undoes the shift.
    """
    n = M.shape[0]
    B = M + shift * np.eye(n)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    theta = 0.0
    for _ in range(max_iter):
        y = B @ x
        theta = float(x @ y)
        resid = np.linalg.norm(y - theta * x)
        ny = np.linalg.norm(y)
        if ny == 0.0 or resid <= tol * abs(theta):
            break
        x = y / ny
    return theta - shift


def rho_min(dataset: Dataset, blocks: Sequence[np.ndarray], *, tol: float = 1e-8, seed: int = 0) -> float:
    """Smallest rho for which the interference term is bounded, clamped at 0.

    ``max_alpha lam^2 m^2 (sum_k ||A_k alpha_k||^2 - ||A alpha||^2) / ||alpha||^2``
    evaluated by shifted power iteration; a single block gives exactly 0.
    """
    M = interference_matrix(dataset, blocks)
    if len(blocks) == 1:
        return 0.0
    # eigenvalues of M are >= -lambda_max(X^T X) >= -trace(X^T X)
    shift = float(sum(dataset.sq_norms[np.asarray(b)].sum() for b in blocks))
    return max(0.0, power_iteration_max(M, shift, tol=tol, seed=seed))


# --------------------------------------------------------------------------
# bound curves


def bound_curve_star(params: BoundParams, T: int, initial_gap: float) -> np.ndarray:
    """Bound on expected dual suboptimality after t = 0..T rounds."""
    if initial_gap < 0:
        raise ValueError("initial suboptimality must be >= 0")
    return initial_gap * params.factor ** np.arange(T + 1)


@dataclass(frozen=True)
class NodeBound:
    theta: float
    """Improvement factor this node guarantees to its parent (per call)."""
    factor: float
    """Per-inner-iteration contraction at this node (1 - theta for leaves)."""
    rho: float
    K: int


def node_bounds(
    topology: TreeTopology,
    dataset: Dataset,
    partition: DataPartition,
    gamma: float | None = None,
    *,
    rho_override: dict[int, float] | None = None,
) -> dict[int, NodeBound]:
    """Bottom-up evaluation of every node's improvement factor.

    Leaves use the LocalSDCA factor, internal nodes take the worst child
    theta, their own K and rho_min over their children's blocks, raised to
    their T. The root entry's ``factor`` is the per-round contraction.
    """
    gamma = dataset.loss.gamma if gamma is None else gamma
    lmg = dataset.lam_m * gamma
    out: dict[int, NodeBound] = {}

    def visit(i: int) -> NodeBound:
        node = topology[i]
        if node.is_leaf:
            th = theta_leaf(dataset.lam, dataset.m, gamma, partition[i].size, node.iterations)
            out[i] = NodeBound(th, th, 0.0, 0)
            return out[i]
        kids = [visit(c) for c in node.children]
        blocks = [partition.indices_under(topology, c) for c in node.children]
        if rho_override and i in rho_override:
            rho = rho_override[i]
        else:
            rho = rho_min(dataset, blocks)
        worst = max(k.theta for k in kids)
        K = len(node.children)
        f = contraction(worst, K, line_search_eta(lmg, rho))
        reps = 1 if node.kind is NodeKind.ROOT else node.iterations
        out[i] = NodeBound(f**reps, f, rho, K)
        return out[i]

    visit(topology.root)
    return out


def bound_curve_tree(
    topology: TreeTopology,
    dataset: Dataset,
    partition: DataPartition,
    gamma: float | None,
    initial_gap: float,
    R: int | None = None,
) -> np.ndarray:
    """Bound on expected dual suboptimality after t = 0..R root rounds."""
    if initial_gap < 0:
        raise ValueError("initial suboptimality must be >= 0")
    rounds = topology[topology.root].iterations if R is None else R
    root = node_bounds(topology, dataset, partition, gamma)[topology.root]
    return initial_gap * root.factor ** np.arange(rounds + 1)
