"""
Sample-index pairs for incomplete U-statistics.

A PairSelection holds the two index functions f1, f2 (as arrays of length K).
Confounder-driven pruning keeps the K pairs whose confounder differences
|z(l) - z(l')| are smallest, with K = floor(L * alpha / 2).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import InvalidAlpha, InvalidBudget, InvalidInput, ShapeError
from kernels import as_samples

logger = logging.getLogger(__name__)

CONFOUNDER = "confounder"
RANDOM = "random"
COMPLETE = "complete"
DISJOINT = "disjoint"
MODES = (CONFOUNDER, RANDOM, COMPLETE, DISJOINT)


def max_pairs(L: int) -> int:
    return L * (L - 1) // 2


def _check_L(L):
    if int(L) != L or L < 2:
        raise InvalidInput(f"need an integer L >= 2, got {L}")
    return int(L)


def pair_budget(L: int, alpha: float) -> int:
    """K = floor(L * alpha / 2), clamped to [1, K_max]."""
    L = _check_L(L)
    if not math.isfinite(alpha) or alpha < 1 or alpha > L - 1:
        raise InvalidAlpha(f"alpha must lie in [1, {L - 1}] for L={L}, got {alpha}")
    K = math.floor(L * alpha / 2)
    return min(max(K, 1), max_pairs(L))


def pair_fraction(L: int, alpha: float) -> float:
    return pair_budget(L, alpha) / max_pairs(L)


def _check_budget(L, K):
    if int(K) != K or K < 1 or K > max_pairs(L):
        raise InvalidBudget(f"K must lie in [1, {max_pairs(L)}] for L={L}, got {K}")
    return int(K)


@dataclass(frozen=True)
class PairSelection:
    f1: np.ndarray
    f2: np.ndarray
    L: int
    alpha: Optional[float] = None
    mode: str = CONFOUNDER

    def __post_init__(self):
        f1 = np.asarray(self.f1, dtype=np.int64)
        f2 = np.asarray(self.f2, dtype=np.int64)
        object.__setattr__(self, "f1", f1)
        object.__setattr__(self, "f2", f2)
        if self.mode not in MODES:
            raise InvalidInput(f"unknown selection mode {self.mode!r}")
        if f1.ndim != 1 or f1.shape != f2.shape:
            raise ShapeError("f1 and f2 must be 1-D arrays of equal length")
        _check_budget(self.L, f1.size)
        if f1.min() < 0 or f2.min() < 0 or f1.max() >= self.L or f2.max() >= self.L:
            raise ShapeError(f"pair index out of range for L={self.L}")
        if np.any(f1 == f2):
            raise ShapeError("a pair repeats the same index")
        keys = np.minimum(f1, f2) * self.L + np.maximum(f1, f2)
        if np.unique(keys).size != keys.size:
            raise ShapeError("pair list contains duplicates")

    @property
    def K(self) -> int:
        return int(self.f1.size)

    @property
    def is_complete(self) -> bool:
        return self.K == max_pairs(self.L)

    def pair_set(self) -> set:
        return {(min(a, b), max(a, b)) for a, b in zip(self.f1.tolist(), self.f2.tolist())}


@dataclass(frozen=True)
class ConfounderOrder:
    """All K_max pairs (first < second) sorted by |z[first] - z[second]|."""
    first: np.ndarray
    second: np.ndarray
    gaps: np.ndarray
    L: int

    def __len__(self):
        return int(self.gaps.size)


def confounder_order(z) -> ConfounderOrder:
    z = as_samples(z, "z", min_length=2)
    L = z.size
    # triu_indices enumerates (min, max) lexicographically; a stable sort keeps
    # that order among equal gaps
    first, second = np.triu_indices(L, k=1)
    gaps = np.abs(z[first] - z[second])
    order = np.argsort(gaps, kind="stable")
    return ConfounderOrder(first[order], second[order], gaps[order], L)


def select_confounder(order: ConfounderOrder, K: int, alpha=None) -> PairSelection:
    K = _check_budget(order.L, K)
    mode = COMPLETE if K == max_pairs(order.L) else CONFOUNDER
    return PairSelection(order.first[:K], order.second[:K], order.L, alpha, mode)


def select_random(L: int, K: int, seed: int, alpha=None) -> PairSelection:
    """K distinct pairs drawn uniformly without replacement (PCG64 seeded by `seed`)."""
    L = _check_L(L)
    K = _check_budget(L, K)
    first, second = np.triu_indices(L, k=1)
    if K == first.size:
        return PairSelection(first, second, L, alpha, COMPLETE)
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = np.sort(rng.choice(first.size, size=K, replace=False))
    return PairSelection(first[chosen], second[chosen], L, alpha, RANDOM)


def select_complete(L: int) -> PairSelection:
    L = _check_L(L)
    first, second = np.triu_indices(L, k=1)
    return PairSelection(first, second, L, float(L - 1), COMPLETE)


def select_disjoint(L: int, seed: int) -> PairSelection:
    """floor(L/2) pairs sharing no index, from a seeded permutation."""
    L = _check_L(L)
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(L)
    K = L // 2
    a, b = perm[0:2 * K:2], perm[1:2 * K:2]
    mode = COMPLETE if K == max_pairs(L) else DISJOINT
    return PairSelection(np.minimum(a, b), np.maximum(a, b), L, 1.0, mode)


def prune(z, alpha: float, mode: str = CONFOUNDER, seed: Optional[int] = None) -> PairSelection:
    """Budget plus selection: the pairs C-HSIC averages over for confounder z."""
    z = as_samples(z, "z", min_length=2)
    L = z.size
    if mode == DISJOINT:
        return select_disjoint(L, 0 if seed is None else seed)
    K = pair_budget(L, alpha)
    if mode == COMPLETE:
        return select_complete(L)
    if mode == RANDOM:
        return select_random(L, K, 0 if seed is None else seed, alpha)
    if mode == CONFOUNDER:
        return select_confounder(confounder_order(z), K, alpha)
    raise InvalidInput(f"unknown selection mode {mode!r}")
