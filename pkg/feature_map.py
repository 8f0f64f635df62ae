"""
Finite-M steering-vector feature map and its Darboux-sum kernel.

Element m of the map, m in {-M/2, ..., M/2-1}, f_m = m / sqrt(M):

    d_m(x) = M^(-1/4) * G(f_m) * exp(i 2 pi f_m x)

with the Gaussian window G^2(f) = sqrt(pi) * b * exp(-(pi b f)^2). The inner
product d(x)^H d(x') is a Riemann sum of the Fourier transform of G^2, which
is exactly kappa(x - x') = exp(-((x - x') / b)^2) in the limit M -> inf.

This module is a validation oracle for the kernel estimators in measures.py;
it is not used to produce results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from errors import InsufficientData, InvalidInput, ShapeError
from kernels import KernelSpec, as_samples


@dataclass(frozen=True)
class SteeringConfig:
    """Feature dimension M and the target kernel bandwidth of the window."""
    M: int
    bandwidth: float

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2 or self.M % 2:
            raise InvalidInput(f"M must be an even integer >= 2, got {self.M}")
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise InvalidInput(f"window bandwidth must be positive, got {self.bandwidth}")

    @classmethod
    def for_kernel(cls, spec: KernelSpec, M: int) -> "SteeringConfig":
        return cls(M, spec.bandwidth)

    @property
    def frequencies(self) -> np.ndarray:
        m = np.arange(-self.M // 2, self.M // 2, dtype=np.float64)
        return m / math.sqrt(self.M)

    def window_sq(self, f) -> np.ndarray:
        b = self.bandwidth
        return math.sqrt(math.pi) * b * np.exp(-np.square(math.pi * b * np.asarray(f)))

    def window(self, f) -> np.ndarray:
        return np.sqrt(self.window_sq(f))

    @property
    def amplitudes(self) -> np.ndarray:
        """|d_m(x)|, independent of x."""
        return self.M ** -0.25 * self.window(self.frequencies)


@dataclass(frozen=True)
class FeatureMatrix:
    """M x n complex matrix; column l is the mapped sample l."""
    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class CovMatrix:
    """scale * left @ right^H, kept factored (left, right are M x n)."""
    left: np.ndarray
    right: np.ndarray
    scale: float

    @property
    def entries(self) -> np.ndarray:
        return self.scale * (self.left @ self.right.conj().T)

    def conj_transpose(self) -> "CovMatrix":
        return CovMatrix(self.right, self.left, self.scale)

    def frobenius_sq(self) -> float:
        # ||s A B^H||_F^2 = s^2 trace((A^H A)(B^H B))
        ga = self.left.conj().T @ self.left
        gb = self.right.conj().T @ self.right
        return float(self.scale ** 2 * np.real(np.sum(ga * gb.T)))


def window_norm(cfg: SteeringConfig) -> float:
    """Discrete unit-norm check: sum_m M^(-1/2) G^2(f_m)."""
    return float(np.sum(cfg.window_sq(cfg.frequencies)) / math.sqrt(cfg.M))


def steer(x, cfg: SteeringConfig) -> np.ndarray:
    x = float(x)
    if not math.isfinite(x):
        raise InvalidInput("steering argument must be finite")
    return cfg.amplitudes * np.exp(2j * math.pi * cfg.frequencies * x)


def feature_matrix(samples, cfg: SteeringConfig) -> FeatureMatrix:
    samples = as_samples(samples)
    phases = np.exp(2j * math.pi * np.outer(cfg.frequencies, samples))
    return FeatureMatrix(cfg.amplitudes[:, None] * phases)


def finite_m_kernel(x, x2, cfg: SteeringConfig) -> float:
    """Re d(x)^H d(x2); tends to kappa(x - x2) as M grows."""
    return float(np.real(np.vdot(steer(x, cfg), steer(x2, cfg))))


def sample_cov(U: FeatureMatrix, V: FeatureMatrix) -> CovMatrix:
    """(1/(n-1)) sum_l (u_l - u_bar)(v_l - v_bar)^H."""
    n = U.n
    if V.n != n:
        raise ShapeError(f"feature matrices have {n} and {V.n} columns")
    if n < 2:
        raise InsufficientData("sample covariance needs at least 2 columns")
    Uc = U.entries - U.entries.mean(axis=1, keepdims=True)
    Vc = V.entries - V.entries.mean(axis=1, keepdims=True)
    return CovMatrix(Uc, Vc, 1.0 / (n - 1))


def cov_frobenius_sq(C: CovMatrix) -> float:
    return C.frobenius_sq()


def incomplete_cov(U: FeatureMatrix, V: FeatureMatrix, sel) -> CovMatrix:
    """(1/K) sum_k u_k v_k^H over the virtual pair differences (u_f1 - u_f2)/sqrt(2)."""
    if V.n != U.n:
        raise ShapeError(f"feature matrices have {U.n} and {V.n} columns")
    if sel.K == 0:
        raise InsufficientData("empty pair selection")
    if max(sel.f1.max(), sel.f2.max()) >= U.n:
        raise ShapeError(f"pair index out of range for {U.n} samples")
    root2 = math.sqrt(2.0)
    Ud = (U.entries[:, sel.f1] - U.entries[:, sel.f2]) / root2
    Vd = (V.entries[:, sel.f1] - V.entries[:, sel.f2]) / root2
    return CovMatrix(Ud, Vd, 1.0 / sel.K)


def finite_m_hsic(x, y, kx: KernelSpec, ky: KernelSpec, M: int) -> float:
    U = feature_matrix(x, SteeringConfig.for_kernel(kx, M))
    V = feature_matrix(y, SteeringConfig.for_kernel(ky, M))
    return cov_frobenius_sq(sample_cov(U, V))


def finite_m_chsic(x, y, sel, kx: KernelSpec, ky: KernelSpec, M: int) -> float:
    U = feature_matrix(x, SteeringConfig.for_kernel(kx, M))
    V = feature_matrix(y, SteeringConfig.for_kernel(ky, M))
    return cov_frobenius_sq(incomplete_cov(U, V, sel))
