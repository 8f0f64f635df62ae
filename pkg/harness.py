"""
Monte-Carlo experiment runner: trials, sweeps over gamma or L, CSV results,
SVG charts and the numerical self-test.

Every trial draws one Dataset from a sub-seed derived from
(master_seed, trial_index) and evaluates all requested measures on it, so
comparisons between measures are paired and results do not depend on the
order in which trials execute.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tabulate import tabulate
from tqdm import tqdm

import feature_map
from errors import ConfigError, DataError, InvalidAlpha, OutputError, TrialError, UdepError
from kernels import KernelSpec
from measures import chsic, chsic_naive, default_kernels, hsic
from pairs import (CONFOUNDER, COMPLETE, DISJOINT, RANDOM, confounder_order, pair_budget,
                   select_complete, select_confounder, select_disjoint, select_random)
from synth import MODELS, ModelConfig, derive_seed, generate

logger = logging.getLogger(__name__)

HSIC_MEASURE = "hsic"
CHSIC_MEASURE = "chsic"
RANDOM_MEASURE = "chsic-random"
DISJOINT_MEASURE = "chsic-disjoint"
MEASURES = (HSIC_MEASURE, CHSIC_MEASURE, RANDOM_MEASURE, DISJOINT_MEASURE)
MEASURE_MODES = {
    HSIC_MEASURE: COMPLETE,
    CHSIC_MEASURE: CONFOUNDER,
    RANDOM_MEASURE: RANDOM,
    DISJOINT_MEASURE: DISJOINT,
}
# measures whose selection does not depend on alpha
ALPHA_FREE = (HSIC_MEASURE, DISJOINT_MEASURE)

GAMMA_SWEEP = "gamma"
L_SWEEP = "L"

DEFAULT_TRIALS = 500
DEFAULT_ALPHAS = (4.0, 64.0)
DEFAULT_GAMMA_GRID = tuple(float(g) for g in range(-10, 21, 2))
DEFAULT_L_GRID = (100, 200, 300, 400, 500, 600)
DEFAULT_L_FIXED = 100
DEFAULT_GAMMA_FIXED = 10.0

# sub-stream of a trial seed used for pair selection (stream 0 is the data)
PRUNING_STREAM = 1

CSV_COLUMNS = ["model", "measure", "mode", "alpha", "L", "gamma_db", "trials", "mean", "std"]


def parse_grid(text: str, cast=float) -> tuple:
    """'a:b:step' (inclusive) or 'v1,v2,...'."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0:
                raise ConfigError(f"grid step must be positive in {text!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return tuple(cast(start + i * step) for i in range(max(count, 0)))
        return tuple(cast(t) for t in text.split(",") if t.strip())
    except ValueError as e:
        raise ConfigError(f"cannot parse grid {text!r}: {e}") from e


@dataclass(frozen=True)
class SweepPoint:
    L: int
    gamma_db: float


@dataclass
class ExperimentConfig:
    model: str = "mplus"
    measures: tuple = (HSIC_MEASURE, CHSIC_MEASURE, RANDOM_MEASURE)
    alphas: tuple = DEFAULT_ALPHAS
    gamma_grid: Optional[tuple] = None
    L_grid: Optional[tuple] = None
    L_fixed: int = DEFAULT_L_FIXED
    gamma_db_fixed: float = DEFAULT_GAMMA_FIXED
    trials: int = DEFAULT_TRIALS
    master_seed: int = 0
    out_dir: Path = Path("results")
    jobs: int = 1

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        cfg = cls()
        return cfg.with_overrides(**values)

    def with_overrides(self, **values) -> "ExperimentConfig":
        """Copy with the non-None values applied, coercing grids and paths."""
        clean = {}
        for key, val in values.items():
            if val is None:
                continue
            if key in ("gamma_grid", "alphas") and isinstance(val, str):
                val = parse_grid(val)
            elif key == "L_grid" and isinstance(val, str):
                val = parse_grid(val, int)
            elif key == "measures" and isinstance(val, str):
                val = tuple(m.strip() for m in val.split(",") if m.strip())
            if key in ("gamma_grid", "alphas", "L_grid", "measures"):
                val = tuple(val)
            if key == "out_dir":
                val = Path(val)
            clean[key] = val
        if "gamma_grid" in clean and "L_grid" not in clean:
            clean["L_grid"] = None
        if "L_grid" in clean and "gamma_grid" not in clean:
            clean["gamma_grid"] = None
        return replace(self, **clean)

    @property
    def sweep_name(self) -> str:
        return L_SWEEP if self.L_grid else GAMMA_SWEEP

    def points(self) -> list:
        if self.L_grid:
            return [SweepPoint(int(L), float(self.gamma_db_fixed)) for L in self.L_grid]
        grid = self.gamma_grid if self.gamma_grid else DEFAULT_GAMMA_GRID
        return [SweepPoint(int(self.L_fixed), float(g)) for g in grid]

    def validate(self) -> "ExperimentConfig":
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.gamma_grid and self.L_grid:
            raise ConfigError("sweep either gamma or L, not both")
        if not self.measures:
            raise ConfigError("no measures requested")
        bad = [m for m in self.measures if m not in MEASURES]
        if bad:
            raise ConfigError(f"unknown measure(s) {', '.join(bad)}; choose from {', '.join(MEASURES)}")
        if len(set(self.measures)) != len(self.measures):
            raise ConfigError("measure list repeats an entry")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials}")
        if int(self.jobs) != self.jobs or self.jobs == 0:
            raise ConfigError(f"jobs must be a non-zero integer, got {self.jobs}")
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.master_seed}")
        points = self.points()
        for p in points:
            if p.L < 2:
                raise ConfigError(f"L must be >= 2, got {p.L}")
            if not math.isfinite(p.gamma_db):
                raise ConfigError(f"gamma_db must be finite, got {p.gamma_db}")
        if any(m not in ALPHA_FREE for m in self.measures):
            if not self.alphas:
                raise ConfigError("pruned measures need at least one alpha")
            min_L = min(p.L for p in points)
            for a in self.alphas:
                if not math.isfinite(a) or a < 1 or a > min_L - 1:
                    raise InvalidAlpha(f"alpha {a} outside [1, {min_L - 1}] for the smallest L={min_L}")
        return self

    def series_keys(self) -> list:
        """(measure, alpha) combinations in report order."""
        keys = []
        for m in self.measures:
            if m in ALPHA_FREE:
                keys.append((m, None))
            else:
                keys.extend((m, float(a)) for a in sorted(set(self.alphas)))
        return keys


def load_config(path) -> dict:
    path = Path(path)
    try:
        with open(path, "r") as f:
            values = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return values


def run_trial(cfg: ExperimentConfig, point: SweepPoint, trial_index: int) -> dict:
    """Values of every (measure, alpha) series for one trial at one point."""
    trial_seed = derive_seed(cfg.master_seed, trial_index)
    try:
        ds = generate(ModelConfig(cfg.model, point.gamma_db, point.L), trial_seed)
        kx, ky = default_kernels(ds.x, ds.y)
        pruning_seed = derive_seed(trial_seed, PRUNING_STREAM)
        order = None
        values = {}
        for measure, alpha in cfg.series_keys():
            if measure == HSIC_MEASURE:
                result = hsic(ds.x, ds.y, kx, ky)
            elif measure == DISJOINT_MEASURE:
                result = chsic(ds.x, ds.y, select_disjoint(ds.L, pruning_seed), kx, ky)
            else:
                K = pair_budget(ds.L, alpha)
                if measure == CHSIC_MEASURE:
                    if order is None:
                        order = confounder_order(ds.z)
                    sel = select_confounder(order, K, alpha)
                else:
                    sel = select_random(ds.L, K, pruning_seed, alpha)
                result = chsic(ds.x, ds.y, sel, kx, ky)
            values[(measure, alpha)] = result.value
        return values
    except UdepError as e:
        context = (f"model={cfg.model} L={point.L} gamma_db={point.gamma_db} "
                   f"trial={trial_index}")
        logger.error(f"Trial failed ({context}): {e}")
        raise TrialError(f"trial failed ({context}): {e}") from e


def collect_trials(cfg: ExperimentConfig, point: SweepPoint) -> np.ndarray:
    """trials x series matrix for one point, rows ordered by trial index."""
    keys = cfg.series_keys()
    if cfg.jobs == 1:
        per_trial = [run_trial(cfg, point, t) for t in range(cfg.trials)]
    else:
        per_trial = Parallel(n_jobs=cfg.jobs)(
            delayed(run_trial)(cfg, point, t) for t in range(cfg.trials))
    return np.array([[vals[k] for k in keys] for vals in per_trial], dtype=np.float64)


@dataclass(frozen=True)
class SweepRow:
    model: str
    measure: str
    mode: str
    alpha: Optional[float]
    L: int
    gamma_db: float
    trials: int
    mean: float
    std: float


@dataclass
class SweepResult:
    model: str
    sweep: str
    rows: list = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([r.__dict__ for r in self.rows], columns=CSV_COLUMNS)
        frame["alpha"] = frame["alpha"].astype(np.float64)
        return frame


def _row_order(row: SweepRow, sweep: str):
    alpha = -1.0 if row.alpha is None else row.alpha
    x = row.L if sweep == L_SWEEP else row.gamma_db
    return (MEASURES.index(row.measure), alpha, x)


def sweep(cfg: ExperimentConfig, progress: bool = False) -> SweepResult:
    """Mean and sample standard deviation per (measure, alpha, point)."""
    cfg.validate()
    keys = cfg.series_keys()
    points = cfg.points()
    logger.info(f"Sweep {cfg.model}/{cfg.sweep_name}: {len(points)} points x {cfg.trials} trials, "
                f"series {', '.join(m if a is None else f'{m}@{a:g}' for m, a in keys)}")
    result = SweepResult(cfg.model, cfg.sweep_name)
    for point in tqdm(points, desc=f"{cfg.model} {cfg.sweep_name}", disable=not progress):
        started = time.time()
        values = collect_trials(cfg, point)
        means = values.mean(axis=0)
        stds = values.std(axis=0, ddof=1) if cfg.trials > 1 else np.zeros(len(keys))
        for j, (measure, alpha) in enumerate(keys):
            result.rows.append(SweepRow(cfg.model, measure, MEASURE_MODES[measure], alpha,
                                        point.L, point.gamma_db, cfg.trials,
                                        float(means[j]), float(stds[j])))
        logger.info(f"  L={point.L} gamma={point.gamma_db:g} dB done in {time.time() - started:.1f}s")
    result.rows.sort(key=lambda r: _row_order(r, result.sweep))
    return result


def write_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        result.to_frame().to_csv(path, index=False, float_format="%.17g", na_rep="",
                                 lineterminator="\n")
    except OSError as e:
        raise OutputError(f"cannot write results to {path}: {e}") from e
    logger.info(f"Wrote {len(result.rows)} rows to {path}")
    return path


def read_csv(path) -> SweepResult:
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip",
                            dtype={"model": str, "measure": str, "mode": str})
    except FileNotFoundError as e:
        raise OutputError(f"result file not found: {path}") from e
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise OutputError(f"cannot read {path}: {e}") from e
    if list(frame.columns) != CSV_COLUMNS:
        raise DataError(f"{path} does not have the result header {','.join(CSV_COLUMNS)}")
    rows = [SweepRow(r.model, r.measure, r.mode,
                     None if pd.isna(r.alpha) else float(r.alpha),
                     int(r.L), float(r.gamma_db), int(r.trials), float(r.mean), float(r.std))
            for r in frame.itertuples(index=False)]
    model = rows[0].model if rows else ""
    return SweepResult(model, _infer_sweep(path, rows), rows)


def _infer_sweep(path: Path, rows) -> str:
    """The axis that varies, else the `<model>_<sweep>.csv` name, else gamma."""
    L_varies = len({r.L for r in rows}) > 1
    gamma_varies = len({r.gamma_db for r in rows}) > 1
    if L_varies and gamma_varies:
        raise DataError(f"{path} varies both L and gamma_db")
    if L_varies:
        return L_SWEEP
    if gamma_varies:
        return GAMMA_SWEEP
    suffix = path.stem.rsplit("_", 1)[-1]
    return suffix if suffix in (GAMMA_SWEEP, L_SWEEP) else GAMMA_SWEEP


def chart_series(result: SweepResult) -> dict:
    """label -> (x values, means, stds), one entry per (measure, alpha)."""
    series = {}
    for row in result.rows:
        label = row.measure if row.alpha is None else f"{row.measure} (alpha={row.alpha:g})"
        x = row.L if result.sweep == L_SWEEP else row.gamma_db
        series.setdefault(label, []).append((x, row.mean, row.std))
    out = {}
    for label, pts in series.items():
        pts.sort()
        xs, means, stds = (np.array(v, dtype=np.float64) for v in zip(*pts))
        out[label] = (xs, means, stds)
    return out


def chart_path(out_dir, result: SweepResult) -> Path:
    return Path(out_dir) / f"{result.model}_{result.sweep}.svg"


def render_chart(result: SweepResult, path) -> Path:
    """Mean line plus +-1 std band per series, saved as SVG."""
    if not result.rows:
        raise DataError("cannot chart an empty sweep result")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "udep", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for label, (xs, means, stds) in chart_series(result).items():
            if xs.size == 1:
                line, = ax.plot(xs, means, marker="o", linestyle="none", label=label)
            else:
                line, = ax.plot(xs, means, marker="o", markersize=3, label=label)
            ax.fill_between(xs, means - stds, means + stds, color=line.get_color(), alpha=0.2,
                            linewidth=0)
        ax.set_xlabel("L" if result.sweep == L_SWEEP else "gamma (dB)")
        ax.set_ylabel("dependence")
        ax.set_title(f"{result.model}: {result.sweep} sweep")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise OutputError(f"cannot write chart to {path}: {e}") from e
        finally:
            plt.close(fig)
    logger.info(f"Wrote chart {path}")
    return path


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float


@dataclass
class SelfTestReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, measured, threshold, passed=None):
        ok = measured <= threshold if passed is None else passed
        self.checks.append(CheckResult(name, bool(ok), float(measured), float(threshold)))

    def table(self) -> str:
        return tabulate([("✅" if c.passed else "❌", c.name, f"{c.measured:.3e}", f"{c.threshold:.1e}")
                         for c in self.checks],
                        headers=["", "check", "measured", "limit"])


def _relative(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def kernel_limit_errors(spec: KernelSpec, M_grid=(256, 1024, 4096), n_grid=121) -> list:
    """max |finite-M kernel - kappa| over s in [-3b, 3b], per M."""
    b = spec.bandwidth
    s_grid = np.linspace(-3 * b, 3 * b, n_grid)
    errors = []
    for M in M_grid:
        cfg = feature_map.SteeringConfig.for_kernel(spec, M)
        approx = np.array([feature_map.finite_m_kernel(s, 0.0, cfg) for s in s_grid])
        errors.append(float(np.max(np.abs(approx - spec(s_grid)))))
    return errors


def self_test(seed: int = 2024) -> SelfTestReport:
    """Finite-M convergence and complete-selection identity checks."""
    report = SelfTestReport()
    rng = np.random.Generator(np.random.PCG64(seed))

    report.add("window unit norm, M=256",
               abs(feature_map.window_norm(feature_map.SteeringConfig(256, 1.0)) - 1.0), 1e-3)

    M_grid = (256, 1024, 4096)
    errors = kernel_limit_errors(KernelSpec(4.0), M_grid)
    for M, err in zip(M_grid, errors):
        report.add(f"kernel limit error, M={M}", err, 1e-2 if M == 4096 else math.inf)
    report.add("kernel limit error non-increasing in M",
               max(b - a for a, b in zip(errors, errors[1:])), 0.0)

    x = rng.standard_normal(20)
    y = 0.5 * x + rng.standard_normal(20)
    kx, ky = default_kernels(x, y)
    U = feature_map.feature_matrix(x, feature_map.SteeringConfig.for_kernel(kx, 256))
    V = feature_map.feature_matrix(y, feature_map.SteeringConfig.for_kernel(ky, 256))
    full = feature_map.sample_cov(U, V).entries
    pruned = feature_map.incomplete_cov(U, V, select_complete(20)).entries
    report.add("complete-pair covariance identity, L=20 M=256",
               np.linalg.norm(pruned - full) / np.linalg.norm(full), 1e-10)

    x = rng.standard_normal(30)
    y = np.abs(x) + 0.5 * rng.standard_normal(30)
    z = rng.standard_normal(30)
    kx, ky = default_kernels(x, y)
    h = hsic(x, y, kx, ky).raw
    report.add("finite-M HSIC oracle, L=30 M=4096",
               _relative(feature_map.finite_m_hsic(x, y, kx, ky, 4096), h), 1e-2)
    sel = select_confounder(confounder_order(z), 60, 4.0)
    c = chsic(x, y, sel, kx, ky).raw
    report.add("finite-M C-HSIC oracle, L=30 K=60 M=4096",
               _relative(feature_map.finite_m_chsic(x, y, sel, kx, ky, 4096), c), 1e-2)
    report.add("C-HSIC fast path vs literal loop, K=60",
               _relative(chsic_naive(x, y, sel, kx, ky).raw, c), 1e-12)

    for L in (10, 30, 50):
        x = rng.standard_normal(L)
        y = x ** 2 + rng.standard_normal(L)
        z = rng.standard_normal(L)
        full = select_confounder(confounder_order(z), pair_budget(L, L - 1), float(L - 1))
        report.add(f"alpha=L-1 identity residual, L={L}",
                   _relative(chsic(x, y, full).raw, hsic(x, y).raw), 1e-10)

    for check in report.checks:
        logger.debug(f"self-test {check.name}: {check.measured:.3e} (limit {check.threshold:.1e})")
    return report
