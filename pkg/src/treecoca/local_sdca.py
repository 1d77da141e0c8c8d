"""Leaf-node stochastic dual coordinate ascent over one data block."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from treecoca.losses import coordinate_delta
from treecoca.model import Dataset


class EmptyBlock(ValueError):
    pass


@dataclass(frozen=True)
class LeafUpdate:
    """Accumulated change of one LocalSDCA call.

    ``delta_alpha[j]`` belongs to global coordinate ``indices[j]``; coordinates
    outside ``indices`` are untouched.
    """

    indices: np.ndarray
    delta_alpha: np.ndarray
    delta_w: np.ndarray
    coordinate_steps: int


@numba.njit(cache=True, nogil=True)
def _sdca_steps(X, y, sq_norms, cols, alpha_block, w, delta_alpha, delta_w, picks, kind, gamma, lam_m):
    d = X.shape[0]
    inv = 1.0 / lam_m
    for h in range(picks.shape[0]):
        j = picks[h]
        i = cols[j]
        xw = 0.0
        for r in range(d):
            xw += X[r, i] * w[r]
        a = alpha_block[j]
        step = coordinate_delta(kind, gamma, xw, sq_norms[i], y[i], a, lam_m)
        if step == 0.0:
            continue
        if kind == 1:
            # keep the hinge iterate exactly inside y*alpha in [0, 1]
            new = a + step
            yb = y[i] * new
            if yb < 0.0:
                new = 0.0
            elif yb > 1.0:
                new = y[i]
            step = new - a
        alpha_block[j] = a + step
        delta_alpha[j] += step
        c = step * inv
        for r in range(d):
            w[r] += c * X[r, i]
            delta_w[r] += c * X[r, i]


def draw_coordinates(rng: np.random.Generator, block_size: int, H: int) -> np.ndarray:
    """H positions within the block, i.i.d. uniform with replacement."""
    return rng.integers(0, block_size, size=H, dtype=np.int64)


def local_sdca(
    dataset: Dataset,
    block: np.ndarray,
    alpha_block: np.ndarray,
    w_in: np.ndarray,
    H: int,
    rng: np.random.Generator,
    *,
    check: bool = False,
) -> LeafUpdate:
    """Run H randomized exact coordinate steps on ``block``.

    ``alpha_block`` holds the current dual values of the block's coordinates
    (aligned with ``block``) and ``w_in`` must equal ``A alpha`` for the full
    current alpha. Neither input is modified. With ``check`` the accumulated
    ``delta_w`` is compared against a fresh ``A_Q delta_alpha``.
    """
    block = np.asarray(block, dtype=np.int64)
    if block.size == 0:
        raise EmptyBlock("leaf owns no coordinates")
    if H < 1:
        raise ValueError(f"H must be >= 1, got {H}")
    alpha_local = np.array(alpha_block, dtype=np.float64, copy=True)
    if alpha_local.shape != block.shape:
        raise ValueError("alpha_block must align with block")
    w = np.array(w_in, dtype=np.float64, copy=True)
    delta_alpha = np.zeros(block.size)
    delta_w = np.zeros(dataset.d)
    picks = draw_coordinates(rng, block.size, H)
    _sdca_steps(
        dataset.features, dataset.labels, dataset.sq_norms, block, alpha_local, w,
        delta_alpha, delta_w, picks, int(dataset.loss.kind), float(dataset.loss.gamma), dataset.lam_m,
    )
    if check:
        fresh = dataset.features[:, block] @ delta_alpha / dataset.lam_m
        err = np.linalg.norm(delta_w - fresh)
        if err > 1e-10 * (1.0 + np.linalg.norm(delta_w)):
            raise AssertionError(f"leaf delta_w drifted from A_Q delta_alpha by {err:.3e}")
    return LeafUpdate(block, delta_alpha, delta_w, H)
