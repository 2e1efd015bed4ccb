"""Command-line front end.

Every subcommand writes a JSON result envelope (to ``--output`` or stdout);
grids and study tables go to CSV files next to it. Exit codes: 0 success,
1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .evaluation import MonteCarloStudy, fit_slope, r_metric, refit_density, run_study
from .mellin_estimator import EstimatorConfig, estimate_density_known_mu, estimate_density_plugin
from .models import (Beta, Gamma, GIG, GigParams, MixtureModel, PointMass, Sample,
                     UnsupportedModelError, mixture_sample)
from .mu_estimator import WEIGHTS, estimate_mu

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
COMMANDS = ("simulate", "estimate-mu", "estimate-density", "fit", "study", "oracle-check")


class UsageError(ValueError):
    pass


class ParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Input
# ---------------------------------------------------------------------------


def ingest_observations(path, log: bool = False) -> Sample:
    """Read one number per line (or a one-column CSV with optional header).

    Blank lines are skipped. A non-numeric first row is taken as a header;
    any later non-numeric row raises :class:`ParseError` naming the line.
    """
    path = Path(path)
    values = []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip() != ""]
            if not cells:
                continue
            if len(cells) != 1:
                raise ParseError(f"{path}:{lineno}: expected one column, got {len(cells)}")
            try:
                values.append(float(cells[0]))
            except ValueError:
                if lineno == 1 and not values:
                    continue
                raise ParseError(f"{path}:{lineno}: not a number: {cells[0]!r}") from None
    if not values:
        raise ParseError(f"{path}: no observations")
    arr = np.asarray(values)
    if log:
        if np.any(arr <= 0):
            raise ParseError(f"{path}: --log needs positive observations")
        arr = np.log(arr)
    return Sample(arr, {"path": str(path), "log": bool(log)})


# ---------------------------------------------------------------------------
# Config and envelope
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    command: str = "simulate"
    model: str = "gig"
    lam: float = 1.0
    delta: float = 1.0
    psi_gig: float = 1.0
    shape: float = 2.0
    rate: float = 1.0
    beta_p: float = 2.0
    beta_q: float = 2.0
    atom: float = 1.0
    mu: Optional[float] = None
    n: int = 1000
    seed: int = 0
    gamma: Optional[float] = None
    u_max: Optional[float] = None
    v_max: Optional[float] = None
    tuning: str = "paper"
    kappa: Optional[float] = None
    grid_min: Optional[float] = None
    grid_max: Optional[float] = None
    grid_step: Optional[float] = None
    weight: str = "sine"
    big_m: float = 10.0
    log: bool = False
    input: Optional[str] = None
    output: Optional[str] = None
    sizes: Optional[list] = None
    replicates: int = 100
    targets: list = field(default_factory=lambda: ["mu"])
    workers: int = 1
    timing: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.model not in ("gig", "gamma", "beta", "point"):
            raise UsageError(f"unknown model {self.model!r}")
        if self.tuning not in ("paper", "theory"):
            raise UsageError("--tuning must be paper or theory")
        if self.weight not in WEIGHTS:
            raise UsageError(f"unknown weight {self.weight!r}")
        if int(self.n) != self.n or self.n < 1:
            raise UsageError("--n must be a positive integer")
        if self.replicates < 1 or self.workers < 1:
            raise UsageError("--replicates and --workers must be positive")
        if not self.big_m > 0:
            raise UsageError("--big-m must be positive")
        if self.tuning == "theory" and self.command in ("estimate-density", "fit", "study") \
                and (self.kappa is None or not self.kappa > 0):
            raise UsageError("--tuning theory requires --kappa > 0")
        lo, hi, st = self.grid()
        if not (0 < lo < hi and st > 0):
            raise UsageError("grid needs 0 < grid-min < grid-max and grid-step > 0")
        if self.command == "estimate-density" and self.mu is None:
            raise UsageError("estimate-density needs the known drift --mu")
        if self.sizes is not None and any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise UsageError("--sizes must be strictly increasing")
        for t in self.targets:
            if t not in ("mu", "density_known_mu", "density_plugin"):
                raise UsageError(f"unknown study target {t!r}")

    def grid(self):
        if self.command == "fit":
            defaults = (0.1, 8.0, 0.1)
        elif self.command == "oracle-check":
            defaults = (0.5, 4.0, 0.05)
        else:
            defaults = (0.1, 5.0, 0.1)
        return tuple(d if v is None else v for v, d in
                     zip((self.grid_min, self.grid_max, self.grid_step), defaults))

    def grid_points(self):
        lo, hi, st = self.grid()
        k = int(math.floor((hi - lo) / st + 1e-9))
        return np.round(lo + st * np.arange(k + 1), 12)

    def true_mu(self) -> float:
        return 0.5 if self.mu is None else float(self.mu)

    def mixing(self):
        if self.model == "gig":
            return GIG(GigParams(self.lam, self.delta, self.psi_gig))
        if self.model == "gamma":
            return Gamma(self.shape, self.rate)
        if self.model == "beta":
            return Beta(self.beta_p, self.beta_q)
        return PointMass(self.atom)

    def estimator_config(self, n: int) -> EstimatorConfig:
        if self.tuning == "theory":
            cfg = EstimatorConfig.theory(n, self.kappa, 0.1 if self.gamma is None else self.gamma)
        else:
            cfg = EstimatorConfig.paper(**({} if self.gamma is None else {"gamma": self.gamma}))
        over = {k: v for k, v in (("u_max", self.u_max), ("v_max", self.v_max)) if v is not None}
        return dataclasses.replace(cfg, **over) if over else cfg


@dataclass
class ResultEnvelope:
    command: str
    config: dict
    outputs: dict
    diagnostics: dict = field(default_factory=dict)
    timing: Optional[dict] = None
    artifact: str = "nvmix"
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ResultEnvelope":
        return cls(**json.loads(text))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                             for v in row])


def _table_path(cfg: RunConfig, name: str) -> Optional[Path]:
    if cfg.output is None:
        return None
    out = Path(cfg.output)
    return out.with_name(f"{out.stem}_{name}.csv")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _mixture(cfg: RunConfig) -> MixtureModel:
    return MixtureModel(cfg.true_mu(), cfg.mixing())


def _load_sample(cfg: RunConfig) -> Sample:
    if cfg.input is not None:
        return ingest_observations(cfg.input, cfg.log)
    m = _mixture(cfg)
    rng = np.random.default_rng(cfg.seed)
    return Sample(mixture_sample(rng, cfg.n, m), {"seed": cfg.seed, "model": m.to_dict()})


def _truth_or_none(cfg: RunConfig):
    if cfg.input is not None:
        return None
    mixing = cfg.mixing()
    return None if isinstance(mixing, PointMass) else mixing


def cmd_simulate(cfg: RunConfig) -> ResultEnvelope:
    sample = _load_sample(cfg)
    outputs = {"n": sample.n, "mean": float(sample.values.mean()),
               "variance": float(sample.values.var()), "provenance": sample.provenance}
    path = _table_path(cfg, "sample")
    if path is not None:
        _write_csv(path, ["x"], ((v,) for v in sample.values))
        outputs["sample_csv"] = path.name
    else:
        outputs["values"] = sample.values.tolist()
    return ResultEnvelope(cfg.command, cfg.to_dict(), outputs)


def cmd_estimate_mu(cfg: RunConfig) -> ResultEnvelope:
    sample = _load_sample(cfg)
    est = estimate_mu(sample, WEIGHTS[cfg.weight](), cfg.big_m)
    outputs = {"mu_hat": est.value, "bracket_found": est.bracket_found,
               "iterations": est.iterations, "w_n_at_zero": est.w_n_at_zero, "n": sample.n}
    return ResultEnvelope(cfg.command, cfg.to_dict(), outputs,
                          {"bracket_found": est.bracket_found})


def _density_table(cfg, name, est, truth):
    path = _table_path(cfg, name)
    if path is None:
        return None
    header = ["s", "g_hat", "g_hat_clipped"]
    cols = [est.grid, est.values, est.clipped]
    if truth is not None:
        header.append("g_true")
        cols.append(truth.density(est.grid))
    _write_csv(path, header, zip(*cols))
    return path.name


def cmd_estimate_density(cfg: RunConfig) -> ResultEnvelope:
    sample = _load_sample(cfg)
    ecfg = cfg.estimator_config(sample.n)
    est = estimate_density_known_mu(sample, cfg.mu, cfg.grid_points(), ecfg)
    truth = _truth_or_none(cfg)
    outputs = {"estimator": est.estimator_tag, "estimator_config": ecfg.to_dict(),
               "grid": est.grid.tolist(), "g_hat": est.values.tolist()}
    if truth is not None:
        outputs["r_metric"] = r_metric(est, truth)
    table = _density_table(cfg, "density", est, truth)
    if table:
        outputs["density_csv"] = table
    return ResultEnvelope(cfg.command, cfg.to_dict(), outputs,
                          {"max_imag_residual": est.max_imag_residual})


def cmd_fit(cfg: RunConfig) -> ResultEnvelope:
    """Two steps: drift by the weighted transform, then the plug-in mixing
    density on the grid, then the refitted observable density."""
    sample = _load_sample(cfg)
    mu = estimate_mu(sample, WEIGHTS[cfg.weight](), cfg.big_m)
    ecfg = cfg.estimator_config(sample.n)
    g_hat = estimate_density_plugin(sample, mu.value, cfg.grid_points(), ecfg)
    lo, hi = np.quantile(sample.values, [0.001, 0.999])
    pad = 0.1 * (hi - lo)
    x = np.linspace(lo - pad, hi + pad, 201)
    p_hat = refit_density(x, mu.value, g_hat)
    p_norm = refit_density(x, mu.value, g_hat, normalized=True)
    outputs = {
        "mu_hat": mu.value,
        "bracket_found": mu.bracket_found,
        "n": sample.n,
        "estimator_config": ecfg.to_dict(),
        "g_hat": {"s": g_hat.grid.tolist(), "values": g_hat.values.tolist()},
        "p_hat": {"x": x.tolist(), "values": p_hat.tolist(), "normalized": p_norm.tolist()},
    }
    table = _density_table(cfg, "g_hat", g_hat, _truth_or_none(cfg))
    if table:
        outputs["g_hat_csv"] = table
        path = _table_path(cfg, "p_hat")
        _write_csv(path, ["x", "p_hat", "p_hat_normalized"], zip(x, p_hat, p_norm))
        outputs["p_hat_csv"] = path.name
    return ResultEnvelope(cfg.command, cfg.to_dict(), outputs,
                          {"max_imag_residual": g_hat.max_imag_residual,
                           "bracket_found": mu.bracket_found})


def cmd_study(cfg: RunConfig) -> ResultEnvelope:
    sizes = tuple(cfg.sizes) if cfg.sizes else (100, 300, 500, 1000)
    ecfg = cfg.estimator_config(sizes[-1])
    study = MonteCarloStudy(_mixture(cfg), sizes, cfg.replicates, cfg.seed, ecfg,
                            tuple(cfg.targets), tuple(cfg.grid_points()),
                            WEIGHTS[cfg.weight](), cfg.big_m)
    res = run_study(study, workers=cfg.workers)
    outputs = {"summary": res.summary, "rows": len(res.rows)}
    if "mu" in cfg.targets:
        rmse = res.mu_rmse()
        outputs["mu_rmse"] = rmse
        finite = {n: v for n, v in rmse.items() if v > 0 and math.isfinite(v)}
        if len(finite) >= 3:
            outputs["mu_rmse_slope"] = fit_slope(list(finite), list(finite.values()))
    path = _table_path(cfg, "study")
    if path is not None:
        _write_csv(path, res.COLUMNS, ([r[c] for c in res.COLUMNS] for r in res.rows))
        outputs["study_csv"] = path.name
    failures = {n: s["failure_rate"] for n, s in res.summary.items()}
    return ResultEnvelope(cfg.command, cfg.to_dict(), outputs, {"failure_rate": failures})


def cmd_oracle_check(cfg: RunConfig) -> ResultEnvelope:
    """Noiseless pipeline: Gamma(shape, rate) mixing, exact characteristic function."""
    gamma = 0.3 if cfg.gamma is None else cfg.gamma
    ecfg = EstimatorConfig(gamma=gamma, u_max=50.0 if cfg.u_max is None else cfg.u_max,
                           v_max=30.0 if cfg.v_max is None else cfg.v_max)
    truth = Gamma(cfg.shape, cfg.rate)
    model = MixtureModel(cfg.true_mu(), truth)
    est = estimate_density_known_mu(model, model.mu, cfg.grid_points(), ecfg)
    err = float(np.max(np.abs(est.values - truth.density(est.grid))))
    print(f"max grid error: {err:.6g}")
    outputs = {"max_grid_error": err, "tolerance": 1e-2, "passed": err <= 1e-2,
               "estimator_config": ecfg.to_dict()}
    return ResultEnvelope(cfg.command, cfg.to_dict(), outputs,
                          {"max_imag_residual": est.max_imag_residual})


HANDLERS = {
    "simulate": cmd_simulate,
    "estimate-mu": cmd_estimate_mu,
    "estimate-density": cmd_estimate_density,
    "fit": cmd_fit,
    "study": cmd_study,
    "oracle-check": cmd_oracle_check,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    a = common.add_argument
    a("--config", help="JSON file with RunConfig keys; explicit flags override it")
    a("--model", choices=["gig", "gamma", "beta", "point"])
    a("--lambda", dest="lam", type=float)
    a("--delta", type=float)
    a("--psi-gig", dest="psi_gig", type=float)
    a("--shape", type=float, help="gamma mixing shape")
    a("--rate", type=float, help="gamma mixing rate")
    a("--beta-p", dest="beta_p", type=float)
    a("--beta-q", dest="beta_q", type=float)
    a("--atom", type=float, help="point-mass location")
    a("--mu", type=float)
    a("--n", type=int)
    a("--seed", type=int)
    a("--gamma", type=float)
    a("--u-max", dest="u_max", type=float)
    a("--v-max", dest="v_max", type=float)
    a("--tuning", choices=["paper", "theory"])
    a("--kappa", type=float)
    a("--grid-min", dest="grid_min", type=float)
    a("--grid-max", dest="grid_max", type=float)
    a("--grid-step", dest="grid_step", type=float)
    a("--weight", choices=sorted(WEIGHTS))
    a("--big-m", dest="big_m", type=float)
    a("--log", action="store_true")
    a("--input")
    a("--output")
    a("--sizes", type=int, nargs="+")
    a("--replicates", type=int)
    a("--targets", nargs="+", choices=["mu", "density_known_mu", "density_plugin"])
    a("--workers", type=int)
    a("--timing", action="store_true", help="record wall time in the envelope")

    parser = _Parser(prog="nvmix", description="Semiparametric estimation for normal "
                     "variance-mean mixtures.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def parse_config(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    base = {}
    path = ns.pop("config", None)
    if path is not None:
        try:
            base = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(base, dict):
            raise UsageError("config file must hold a JSON object")
    base.update(ns)
    return RunConfig.from_dict(base)


def run(cfg: RunConfig) -> ResultEnvelope:
    start = time.perf_counter() if cfg.timing else None
    env = HANDLERS[cfg.command](cfg)
    env.outputs = _jsonable(env.outputs)
    env.diagnostics = _jsonable(env.diagnostics)
    if start is not None:
        env.timing = {"seconds": time.perf_counter() - start}
    return env


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(json.dumps({"error": {"type": "usage", "message": str(exc)}}), file=sys.stderr)
        return EXIT_USAGE
    try:
        env = run(cfg)
    except (UsageError, UnsupportedModelError) as exc:
        print(json.dumps({"error": {"type": "usage", "message": str(exc)}}), file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
              file=sys.stderr)
        return EXIT_RUNTIME
    text = env.to_json()
    if cfg.output is None:
        print(text)
    else:
        Path(cfg.output).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
