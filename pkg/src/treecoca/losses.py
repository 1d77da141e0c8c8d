"""Losses, their conjugates, primal/dual objectives and the exact coordinate step.

Two 1/gamma-smooth losses are supported:

* squared loss ``l(a) = (a - y)^2 / 2`` (gamma = 1), conjugate
  ``l*(u) = u^2/2 + u y``;
* smoothed hinge with margin band gamma in (0, 1]::

      l(a) = 0                      if y a >= 1
             1 - y a - gamma/2      if y a <= 1 - gamma
             (1 - y a)^2 / (2 gamma) otherwise

  with conjugate ``l*(u) = y u + gamma u^2 / 2`` on ``-y u in [0, 1]`` and
  +inf elsewhere.

The dual variable enters through ``l*(-alpha_i)``, so the hinge dual is
feasible iff ``y_i alpha_i in [0, 1]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numba
import numpy as np

if TYPE_CHECKING:
    from treecoca.model import Dataset

# Feasibility slack for the hinge conjugate domain; iterates are clipped to the
# box exactly, this only absorbs rounding in callers that build alpha by hand.
DOMAIN_TOL = 1e-12


class LossKind(enum.IntEnum):
    SQUARED = 0
    SMOOTH_HINGE = 1


class ConjugateDomainViolation(ValueError):
    pass


@dataclass(frozen=True)
class LossSpec:
    kind: LossKind = LossKind.SQUARED
    gamma: float = 1.0

    def __post_init__(self) -> None:
        kind = LossKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is LossKind.SQUARED:
            if self.gamma != 1.0:
                raise ValueError("squared loss is 1-smooth; gamma must be 1")
        elif not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"smooth hinge needs 0 < gamma <= 1, got {self.gamma}")

    @classmethod
    def squared(cls) -> LossSpec:
        return cls(LossKind.SQUARED, 1.0)

    @classmethod
    def smooth_hinge(cls, gamma: float = 1.0) -> LossSpec:
        return cls(LossKind.SMOOTH_HINGE, gamma)

    @classmethod
    def parse(cls, text: str, gamma: float | None = None) -> LossSpec:
        key = text.strip().lower().replace("-", "_")
        if key in ("squared", "square", "ridge", "squaredloss"):
            return cls.squared()
        if key in ("smooth_hinge", "smoothhinge", "hinge"):
            return cls.smooth_hinge(1.0 if gamma is None else gamma)
        raise ValueError(f"unknown loss {text!r}")

    def value(self, a, y):
        """Elementwise ``l(a)`` for labels ``y``."""
        a = np.asarray(a, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.kind is LossKind.SQUARED:
            return 0.5 * (a - y) ** 2
        g = self.gamma
        z = 1.0 - y * a
        return np.where(z <= 0.0, 0.0, np.where(z >= g, z - 0.5 * g, z * z / (2.0 * g)))

    def conjugate(self, u, y):
        """Elementwise ``l*(u)``; +inf outside the hinge domain."""
        u = np.asarray(u, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.kind is LossKind.SQUARED:
            return 0.5 * u * u + u * y
        b = -y * u
        val = y * u + 0.5 * self.gamma * u * u
        ok = (b >= -DOMAIN_TOL) & (b <= 1.0 + DOMAIN_TOL)
        return np.where(ok, val, np.inf)


@numba.njit(cache=True, nogil=True)
def coordinate_delta(kind, gamma, xw, xx, y, a, lam_m):
    """Exact maximizer of the one-coordinate dual subproblem.

    ``xw = x_i . w``, ``xx = ||x_i||^2``, ``a`` the current alpha_i. The
    returned step moves alpha_i to ``a + delta``; for the hinge the new value
    is exactly ``y * clip(q, 0, 1)``.
    """
    if kind == 0:
        return (y - xw - a) / (1.0 + xx / lam_m)
    q = (1.0 - y * xw - gamma * a * y) / (xx / lam_m + gamma) + a * y
    if q < 0.0:
        q = 0.0
    elif q > 1.0:
        q = 1.0
    return y * q - a


def coordinate_max(loss: LossSpec, dataset: Dataset, w: np.ndarray, alpha_i: float, i: int) -> float:
    """Step for coordinate ``i`` maximizing
    ``-(lam m/2)||w + delta x_i/(lam m)||^2 - l*_i(-(alpha_i + delta))``."""
    x = dataset.features[:, i]
    return float(
        coordinate_delta(
            int(loss.kind), float(loss.gamma), float(x @ w), float(dataset.sq_norms[i]),
            float(dataset.labels[i]), float(alpha_i), dataset.lam_m,
        )
    )


def _check_dim(vec: np.ndarray, n: int, what: str) -> np.ndarray:
    from treecoca.model import DimensionMismatch

    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (n,):
        raise DimensionMismatch(f"{what} has shape {vec.shape}, expected ({n},)")
    return vec


def primal_objective(dataset: Dataset, w: np.ndarray) -> float:
    """``P(w) = (lam/2)||w||^2 + (1/m) sum_i l_i(w . x_i)``."""
    w = _check_dim(w, dataset.d, "w")
    margins = dataset.features.T @ w
    losses = dataset.loss.value(margins, dataset.labels)
    return float(0.5 * dataset.lam * (w @ w) + losses.sum() / dataset.m)


def dual_conjugate_sum(dataset: Dataset, alpha: np.ndarray) -> float:
    """``sum_i l*_i(-alpha_i)``, raising on hinge-domain violations."""
    vals = dataset.loss.conjugate(-alpha, dataset.labels)
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise ConjugateDomainViolation(
            f"alpha[{bad}] = {alpha[bad]!r} with label {dataset.labels[bad]!r} is outside y*alpha in [0, 1]"
        )
    return float(vals.sum())


def dual_objective(dataset: Dataset, alpha: np.ndarray, w: np.ndarray | None = None) -> float:
    """``D(alpha) = -(lam/2)||A alpha||^2 - (1/m) sum_i l*_i(-alpha_i)``.

    ``w`` may be passed when the caller already holds ``A alpha``.
    """
    alpha = _check_dim(alpha, dataset.m, "alpha")
    if w is None:
        w = dataset.primal_from_dual(alpha)
    return float(-0.5 * dataset.lam * (w @ w) - dual_conjugate_sum(dataset, alpha) / dataset.m)


def duality_gap(dataset: Dataset, alpha: np.ndarray) -> float:
    w = dataset.primal_from_dual(_check_dim(alpha, dataset.m, "alpha"))
    return primal_objective(dataset, w) - dual_objective(dataset, alpha, w)


def ridge_optimum(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form optimum for squared loss: ``(w*, alpha*)``.

    ``w* = (lam I + X X^T / m)^-1 X y / m`` and ``alpha*_i = y_i - w*.x_i``.
    """
    if dataset.loss.kind is not LossKind.SQUARED:
        raise ValueError("closed form only exists for squared loss")
    X, y, m = dataset.features, dataset.labels, dataset.m
    lhs = dataset.lam * np.eye(dataset.d) + X @ X.T / m
    w = np.linalg.solve(lhs, X @ y / m)
    return w, y - X.T @ w
