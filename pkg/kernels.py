"""
Translation-invariant kernels, the L^(-1/5) bandwidth rule and Gram matrices.

The Gaussian kernel used throughout is

    kappa(s) = exp(-(s / bandwidth)^2),   bandwidth = sigma_hat * L^(-1/5)

with sigma_hat the sample standard deviation (1/(n-1) normalization).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from errors import DegenerateData, InvalidInput

logger = logging.getLogger(__name__)

GAUSSIAN = "gaussian"
KERNEL_FAMILIES = (GAUSSIAN,)


def as_samples(values, name="samples", min_length=1) -> np.ndarray:
    """Return `values` as a finite 1-D float64 array or raise InvalidInput."""
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InvalidInput(f"{name}: not a real array ({e})") from e
    if arr.ndim != 1:
        raise InvalidInput(f"{name}: expected a 1-D array, got shape {arr.shape}")
    if arr.size < min_length:
        raise InvalidInput(f"{name}: need at least {min_length} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name}: contains non-finite values")
    return arr


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth (same units as the data)."""
    bandwidth: float
    family: str = GAUSSIAN

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise InvalidInput(f"unknown kernel family {self.family!r}")
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise DegenerateData(f"kernel bandwidth must be positive, got {self.bandwidth}")

    @classmethod
    def from_samples(cls, samples, rule_L=None) -> "KernelSpec":
        samples = as_samples(samples, min_length=2)
        return cls(bandwidth(samples, rule_L if rule_L is not None else samples.size))

    def __call__(self, s):
        return kappa(s, self)


def bandwidth(samples, rule_L) -> float:
    """sigma_hat * rule_L^(-1/5)."""
    samples = as_samples(samples, min_length=2)
    if int(rule_L) != rule_L or rule_L < 2:
        raise InvalidInput(f"rule_L must be an integer >= 2, got {rule_L}")
    sigma = float(np.std(samples, ddof=1))
    if sigma == 0.0:
        raise DegenerateData("samples have zero variance; bandwidth would be 0")
    return sigma * float(rule_L) ** (-0.2)


def kappa(s, spec: KernelSpec):
    """Evaluate the kernel at difference(s) `s`; scalar in, float out."""
    arr = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("kernel argument must be finite")
    values = np.exp(-np.square(arr / spec.bandwidth))
    if values.ndim == 0:
        return float(values)
    return values


@dataclass(frozen=True)
class GramMatrix:
    """Kernel evaluations between two sample lists plus their provenance."""
    entries: np.ndarray
    row_source: str = "rows"
    col_source: str = "cols"

    @property
    def shape(self):
        return self.entries.shape

    @property
    def same_index(self) -> bool:
        return self.row_source == self.col_source and self.entries.shape[0] == self.entries.shape[1]


def gram(rows, cols, spec: KernelSpec, row_source="rows", col_source="cols") -> GramMatrix:
    """entry (i, j) = kappa(rows[i] - cols[j])."""
    rows = as_samples(rows, "rows")
    cols = as_samples(cols, "cols")
    entries = kappa(rows[:, None] - cols[None, :], spec)
    return GramMatrix(entries, row_source, col_source)


def centered(matrix) -> np.ndarray:
    """P K P with P = I - 11^T/n, done with row/column means only."""
    K = np.asarray(matrix, dtype=np.float64)
    return K - K.mean(axis=0, keepdims=True) - K.mean(axis=1, keepdims=True) + K.mean()
