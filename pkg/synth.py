"""
Synthetic models with controlled marginal / conditional dependence.

    M+ (mplus):   x = sqrt(g) a p + v,  y = sqrt(g) a q + w,  z = a
    M- (mminus):  x = sqrt(g) b p + v,  y = sqrt(g) c q + w,  z = b - c

a, b, c ~ U(0, sqrt(3)); v, w ~ N(0, 1); p, q ~ {-1, +1} equiprobable;
g = 10^(gamma_db / 10). x, y, z are mutually uncorrelated in both models.

Random numbers come from numpy's PCG64 bit generator. Per-trial streams are
split with SeedSequence(seed, spawn_key=keys); uniforms are rng.random(),
normals use Box-Muller on those uniforms so draws do not depend on numpy's
normal sampler.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from errors import InvalidInput, OutputError, ShapeError
from kernels import as_samples

logger = logging.getLogger(__name__)

MPLUS = "mplus"
MMINUS = "mminus"
MODELS = (MPLUS, MMINUS)
DATASET_COLUMNS = ["x", "y", "z"]
SQRT3 = math.sqrt(3.0)


def db_to_linear(gamma_db: float) -> float:
    return 10.0 ** (gamma_db / 10.0)


def _check_seed(seed):
    if int(seed) != seed or seed < 0 or seed >= 2 ** 64:
        raise InvalidInput(f"seed must be an unsigned 64-bit integer, got {seed}")
    return int(seed)


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for stream `keys` of `seed`; prefix-stable in the keys."""
    seq = np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_check_seed(seed)))


@dataclass(frozen=True)
class ModelConfig:
    model: str
    gamma_db: float
    L: int

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidInput(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if not math.isfinite(self.gamma_db):
            raise InvalidInput(f"gamma_db must be finite, got {self.gamma_db}")
        if int(self.L) != self.L or self.L < 2:
            raise InvalidInput(f"L must be an integer >= 2, got {self.L}")

    @property
    def gamma(self) -> float:
        return db_to_linear(self.gamma_db)


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in DATASET_COLUMNS:
            object.__setattr__(self, name, as_samples(getattr(self, name), name))
        if not (self.x.size == self.y.size == self.z.size):
            raise ShapeError(f"x, y, z lengths differ ({self.x.size}, {self.y.size}, {self.z.size})")

    @property
    def L(self) -> int:
        return int(self.x.size)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.x, "y": self.y, "z": self.z}, columns=DATASET_COLUMNS)


@dataclass(frozen=True)
class Latents:
    """Internal draws; `b` doubles as `a` for M+ and `c` is unused there."""
    b: np.ndarray
    c: np.ndarray
    p: np.ndarray
    q: np.ndarray
    v: np.ndarray
    w: np.ndarray


def _normal(rng, n):
    u1 = rng.random(n)
    u2 = rng.random(n)
    # 1 - u1 lies in (0, 1], keeping the log finite
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * math.pi * u2)


def _sign(rng, n):
    return np.where(rng.random(n) < 0.5, -1.0, 1.0)


def draw_latents(rng: np.random.Generator, L: int) -> Latents:
    b = SQRT3 * rng.random(L)
    c = SQRT3 * rng.random(L)
    p = _sign(rng, L)
    q = _sign(rng, L)
    v = _normal(rng, L)
    w = _normal(rng, L)
    return Latents(b, c, p, q, v, w)


def generate(cfg: ModelConfig, seed: int) -> Dataset:
    lat = draw_latents(make_rng(seed), cfg.L)
    root_gamma = math.sqrt(cfg.gamma)
    if cfg.model == MPLUS:
        a = lat.b
        return Dataset(root_gamma * a * lat.p + lat.v, root_gamma * a * lat.q + lat.w, a)
    return Dataset(root_gamma * lat.b * lat.p + lat.v,
                   root_gamma * lat.c * lat.q + lat.w,
                   lat.b - lat.c)


def write_dataset_csv(ds: Dataset, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        ds.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    except OSError as e:
        raise OutputError(f"cannot write dataset to {path}: {e}") from e
    logger.debug(f"Wrote {ds.L} samples to {path}")
    return path


def read_dataset_csv(path) -> Dataset:
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError as e:
        raise OutputError(f"dataset file not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise InvalidInput(f"dataset file is empty: {path}") from e
    except pd.errors.ParserError as e:
        raise InvalidInput(f"cannot parse {path}: {e}") from e
    except OSError as e:
        raise OutputError(f"cannot read {path}: {e}") from e
    missing = [c for c in DATASET_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidInput(f"{path} lacks column(s) {', '.join(missing)}")
    try:
        return Dataset(*(frame[c].to_numpy(dtype=np.float64) for c in DATASET_COLUMNS))
    except (TypeError, ValueError) as e:
        raise InvalidInput(f"{path}: non-numeric values ({e})") from e
