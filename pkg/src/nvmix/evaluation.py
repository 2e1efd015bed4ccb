"""
Experiment harness: grid error metric, seeded Monte Carlo studies, rate
regression and the refitted observable density.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mellin_estimator import (
    DensityEstimate,
    EstimatorConfig,
    estimate_density_known_mu,
    estimate_density_plugin,
)
from .models import MixtureModel, Sample, mixture_sample
from .mu_estimator import DEFAULT_BIG_M, WeightFunction, estimate_mu, sine_weight

__all__ = [
    "r_metric",
    "fit_slope",
    "refit_density",
    "MonteCarloStudy",
    "StudyResult",
    "run_study",
    "replicate_rng",
    "five_number",
]

TARGETS = ("mu", "density_known_mu", "density_plugin")


def r_metric(estimate: DensityEstimate, truth) -> float:
    """Root mean squared error of ``estimate`` on its own grid.

    ``truth`` is a mixing law (anything with ``density``), a callable, or an
    array of values on the grid.
    """
    grid = np.asarray(estimate.grid)
    if grid.size == 0:
        raise ValueError("empty grid")
    if hasattr(truth, "density"):
        ref = truth.density(grid)
    elif callable(truth):
        ref = truth(grid)
    else:
        ref = truth
    diff = np.asarray(estimate.values) - np.asarray(ref, dtype=float)
    return float(np.sqrt(np.mean(diff * diff)))


def fit_slope(sizes: Sequence[float], rmse: Sequence[float]) -> float:
    """Least-squares slope of ``log rmse`` against ``log n``."""
    sizes = np.asarray(sizes, dtype=float)
    rmse = np.asarray(rmse, dtype=float)
    if sizes.size < 3 or sizes.size != rmse.size:
        raise ValueError("need at least three (size, rmse) pairs")
    if np.any(rmse <= 0) or np.any(sizes <= 0):
        raise ValueError("sizes and rmse must be positive")
    if np.ptp(sizes) == 0:
        raise ValueError("sizes are all equal; slope undefined")
    return float(np.polyfit(np.log(sizes), np.log(rmse), 1)[0])


def refit_density(x, mu_hat: float, g_hat: DensityEstimate, normalized: bool = False):
    """
    Observable density implied by a mixing-density estimate.

    ``p(x) = step * sum_k N(x; mu_hat s_k, s_k) g_hat(s_k)`` over the (uniform)
    estimate grid. Negative ``g_hat`` values enter as they are. With
    ``normalized=True`` the result is divided by ``step * sum_k g_hat(s_k)``
    so it integrates to one.
    """
    s = np.asarray(g_hat.grid, dtype=float)
    g = np.asarray(g_hat.values, dtype=float)
    if s.size > 1:
        steps = np.diff(s)
        step = float(steps.mean())
        if np.max(np.abs(steps - step)) > 1e-9 * max(1.0, step):
            raise ValueError("refit_density needs a uniform grid")
    else:
        raise ValueError("refit_density needs at least two grid points")
    x = np.asarray(x, dtype=float)
    xf = np.atleast_1d(x)
    kern = np.exp(-0.5 * (xf[:, None] - mu_hat * s) ** 2 / s) / np.sqrt(2.0 * math.pi * s)
    out = step * (kern @ g)
    if normalized:
        out = out / (step * g.sum())
    return float(out[0]) if x.ndim == 0 else out


def five_number(values) -> dict:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {k: math.nan for k in ("min", "q1", "median", "q3", "max")}
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return dict(zip(("min", "q1", "median", "q3", "max"), map(float, q)))


def replicate_rng(base_seed: int, size_index: int, replicate: int) -> np.random.Generator:
    """Independent substream for one (sample size, replicate) cell."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(size_index, replicate))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class MonteCarloStudy:
    model: MixtureModel
    sample_sizes: tuple
    replicates: int
    base_seed: int = 0
    cfg: EstimatorConfig = field(default_factory=EstimatorConfig.paper)
    targets: tuple = ("mu",)
    grid: tuple = tuple(np.round(np.linspace(0.1, 5.0, 50), 12))
    weight: WeightFunction = field(default_factory=sine_weight)
    big_m: float = DEFAULT_BIG_M

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        sizes = list(self.sample_sizes)
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("sample_sizes must be nonempty and strictly increasing")
        bad = set(self.targets) - set(TARGETS)
        if bad:
            raise ValueError(f"unknown targets {sorted(bad)}")


@dataclass
class StudyResult:
    """Per-replicate rows plus five-number summaries per sample size."""

    rows: list
    summary: dict
    true_mu: float

    COLUMNS = ("n", "replicate", "status", "mu_hat", "bracket_found", "r_known", "r_plugin")

    def column(self, name, n=None, ok_only=True):
        return np.array([r[name] for r in self.rows
                         if (n is None or r["n"] == n) and (not ok_only or r["status"] == "ok")
                         and r[name] is not None], dtype=float)

    def mu_rmse(self) -> dict:
        out = {}
        for n in self.summary:
            est = self.column("mu_hat", n)
            out[n] = float(np.sqrt(np.mean((est - self.true_mu) ** 2))) if est.size else math.nan
        return out


def _one_replicate(study: MonteCarloStudy, i_n: int, n: int, rep: int) -> dict:
    row = {"n": n, "replicate": rep, "status": "ok", "mu_hat": None,
           "bracket_found": None, "r_known": None, "r_plugin": None}
    try:
        rng = replicate_rng(study.base_seed, i_n, rep)
        sample = Sample(mixture_sample(rng, n, study.model),
                        {"base_seed": study.base_seed, "spawn_key": [i_n, rep]})
        need_mu = "mu" in study.targets or "density_plugin" in study.targets
        if need_mu:
            est = estimate_mu(sample, study.weight, study.big_m)
            row["mu_hat"] = est.value
            row["bracket_found"] = est.bracket_found
            if not est.bracket_found:
                row["status"] = "no_bracket"
        grid = np.asarray(study.grid)
        truth = study.model.mixing
        if "density_known_mu" in study.targets:
            d = estimate_density_known_mu(sample, study.model.mu, grid, study.cfg)
            row["r_known"] = r_metric(d, truth)
        if "density_plugin" in study.targets:
            d = estimate_density_plugin(sample, row["mu_hat"], grid, study.cfg)
            row["r_plugin"] = r_metric(d, truth)
        for key in ("mu_hat", "r_known", "r_plugin"):
            if row[key] is not None and not math.isfinite(row[key]):
                row["status"] = "nonfinite"
    except Exception as exc:  # recorded per replicate, the study goes on
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    return row


def run_study(study: MonteCarloStudy, workers: int = 1) -> StudyResult:
    """
    Run every (size, replicate) cell of ``study``.

    Each cell draws from its own ``SeedSequence`` substream, so results do not
    depend on ``workers`` or on execution order.
    """
    cells = [(i, n, r) for i, n in enumerate(study.sample_sizes) for r in range(study.replicates)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda c: _one_replicate(study, *c), cells))
    else:
        rows = [_one_replicate(study, *c) for c in cells]

    result = StudyResult(rows, {}, study.model.mu)
    for n in study.sample_sizes:
        cell = [r for r in rows if r["n"] == n]
        failed = sum(r["status"] != "ok" for r in cell)
        entry = {"failure_rate": failed / len(cell)}
        for key in ("mu_hat", "r_known", "r_plugin"):
            vals = result.column(key, n)
            if vals.size:
                entry[key] = five_number(vals)
        result.summary[n] = entry
    return result
