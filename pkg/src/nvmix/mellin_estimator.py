"""
Nonparametric estimation of the mixing density by Mellin inversion.

The characteristic function of ``X`` is ``phi(u) = L(psi(u))`` with ``L`` the
Laplace transform of the mixing variable and ``psi(u) = -i mu u + u^2/2``.
Deforming the Mellin integral of ``L`` onto the curve ``psi(R+)`` gives

    M[L](w) = int_0^inf phi(u) psi(u)^(w-1) psi'(u) du,

and ``M[g](z) = M[L](1-z) / Gamma(1-z)``. Replacing ``phi`` by the empirical
characteristic function, truncating at ``u_max`` and inverting along
``Re z = gamma`` up to ``|Im z| <= v_max`` gives the density estimate.

Of the two equivalent contour integrals (``psi`` or its conjugate), the one
with the bounded kernel is used: the direct form when ``mu Im(w) <= 0`` and
the conjugated form otherwise. The conjugated value is computed as
``conj(direct(conj w))``, which makes the estimate exactly conjugate
symmetric.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .models import MixtureModel, Sample, char_exponent
from .special_functions import PoleError, log_gamma

__all__ = [
    "EstimatorConfig",
    "CharExponent",
    "CharFunction",
    "EmpiricalCF",
    "ExactCF",
    "MellinEstimate",
    "DensityEstimate",
    "ecf",
    "mellin_L_hat",
    "mellin_g_hat",
    "estimate_density_known_mu",
    "estimate_density_plugin",
]

_ECF_CHUNK = 1 << 22  # complex entries per block in the ecf outer product


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning of the Mellin estimator.

    ``u_max`` and ``v_max`` are the cut-offs of the u- and v-integrals.
    Quadrature is composite Gauss-Legendre of order ``gl_order`` per panel;
    panel widths never exceed ``gl_order / *_nodes_per_unit`` nor 0.25.
    ``singularity_grading_exponent`` overrides the automatic grading of the
    first u-panel (``1 / Re w``).
    """

    gamma: float = 0.1
    u_max: float = 7.6
    v_max: float = 0.9
    u_nodes_per_unit: int = 32
    v_nodes_per_unit: int = 32
    singularity_grading_exponent: Optional[float] = None
    gl_order: int = 8

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.gamma > 0.5:
            warnings.warn("gamma > 1/2 is outside the range covered by the rate theory",
                          stacklevel=3)
        for name in ("u_max", "v_max"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0.0):
                raise ValueError(f"{name} must be finite and nonnegative, got {val}")
        if self.u_nodes_per_unit < 1 or self.v_nodes_per_unit < 1 or self.gl_order < 1:
            raise ValueError("node counts must be positive")
        if self.singularity_grading_exponent is not None and self.singularity_grading_exponent < 1:
            raise ValueError("singularity_grading_exponent must be >= 1")

    @classmethod
    def paper(cls, **kw) -> "EstimatorConfig":
        """Fixed tuning gamma = 0.1, u_max = 7.6, v_max = 0.9."""
        return cls(**{"gamma": 0.1, "u_max": 7.6, "v_max": 0.9, **kw})

    @classmethod
    def theory(cls, n: int, kappa: float, gamma: float = 0.1, **kw) -> "EstimatorConfig":
        """``u_max = n^(1/4)``, ``v_max = kappa * log(n)``."""
        if not kappa > 0:
            raise ValueError("theory tuning needs an explicit kappa > 0")
        return cls(gamma=gamma, u_max=n ** 0.25, v_max=kappa * math.log(n), **kw)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Characteristic functions and exponent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CharExponent:
    """``psi(u) = -i mu u + u^2/2`` and its derivative."""

    mu: float

    def __call__(self, u):
        return char_exponent(u, self.mu)

    def derivative(self, u):
        return -1j * self.mu + np.asarray(u, dtype=float)


def ecf(sample, u):
    """Empirical characteristic function ``mean(exp(i u X))``."""
    x = sample.values if isinstance(sample, Sample) else np.asarray(sample, dtype=float)
    u = np.asarray(u, dtype=float)
    flat = u.ravel()
    out = np.empty(flat.size, dtype=complex)
    step = max(1, _ECF_CHUNK // max(x.size, 1))
    for i in range(0, flat.size, step):
        phase = np.multiply.outer(flat[i:i + step], x)
        out[i:i + step] = (np.cos(phase).sum(axis=1) + 1j * np.sin(phase).sum(axis=1)) / x.size
    out = out.reshape(u.shape)
    return complex(out) if out.ndim == 0 else out


class CharFunction:
    """Callable ``u -> phi(u)`` with a tag and a frequency scale for panel sizing."""

    tag = "abstract"
    frequency_scale = 0.0

    def __call__(self, u):
        raise NotImplementedError


class EmpiricalCF(CharFunction):
    tag = "empirical"

    def __init__(self, sample: Sample):
        self.sample = sample if isinstance(sample, Sample) else Sample(sample)
        self.frequency_scale = float(np.quantile(np.abs(self.sample.values), 0.99))

    def __call__(self, u):
        return ecf(self.sample, u)


class ExactCF(CharFunction):
    """Exact ``phi(u) = L(psi(u))`` of a :class:`MixtureModel` (noiseless oracle)."""

    tag = "exact"

    def __init__(self, model: MixtureModel):
        self.model = model

    def __call__(self, u):
        return self.model.char_function(u)


# ---------------------------------------------------------------------------
# Quadrature rules
# ---------------------------------------------------------------------------


def _gl(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _composite(a, b, h, order):
    if b <= a:
        return np.empty(0), np.empty(0)
    k = max(1, int(math.ceil((b - a) / h - 1e-12)))
    edges = np.linspace(a, b, k + 1)
    s, w = _gl(order)
    width = np.diff(edges)[:, None]
    return (edges[:-1, None] + width * s).ravel(), (width * w).ravel()


def u_rule(u_max, h, order, grading, v_scale=0.0):
    """
    Nodes and weights on ``[0, u_max]`` for kernels like ``u^(w-1)``.

    Near ``u = 0`` the kernel is ``u^(Re w - 1)`` times the log-oscillation
    ``u^(i Im w)``, whose local frequency is ``|Im w| / u``. Panels therefore
    grow geometrically, with ratio tied to ``v_scale`` (the largest ``|Im w|``
    to be resolved), from ``1e-16`` of the graded region up to the point where
    regular panels of width ``h`` take over. The innermost panel uses
    ``u = eps * s^grading``, which removes the algebraic endpoint singularity.
    """
    if u_max <= 0.0:
        return np.empty(0), np.empty(0)
    s, w = _gl(order)
    g_end = min(u_max, max(h, v_scale * h))
    log_ratio = min(0.5, 2.0 / (1.0 + v_scale))
    k = int(math.ceil(math.log(1e16) / log_ratio))
    edges = g_end * np.exp(-log_ratio * np.arange(k, -1, -1))
    eps = edges[0]
    width = np.diff(edges)[:, None]
    nodes = [eps * s ** grading, (edges[:-1, None] + width * s).ravel()]
    weights = [eps * grading * s ** (grading - 1.0) * w, (width * w).ravel()]
    un, uw = _composite(g_end, u_max, h, order)
    nodes.append(un)
    weights.append(uw)
    return np.concatenate(nodes), np.concatenate(weights)


# ---------------------------------------------------------------------------
# Mellin transforms
# ---------------------------------------------------------------------------


class MellinEstimate:
    """
    ``z -> M_hat[g](z)`` for a characteristic function along ``psi``.

    The characteristic function is evaluated once per u-node and cached, so
    evaluating many ``z`` (all v-nodes of an inversion) costs one
    ``(len(z), n_u)`` kernel product.
    """

    def __init__(self, cf: CharFunction, psi: CharExponent, cfg: EstimatorConfig,
                 h_u: Optional[float] = None):
        self.cf = cf
        self.psi = psi
        self.cfg = cfg
        if h_u is None:
            h_u = min(0.25, cfg.gl_order / cfg.u_nodes_per_unit,
                      math.pi / (2.0 * (cf.frequency_scale + cfg.v_max)) if
                      cf.frequency_scale + cfg.v_max > 0 else math.inf)
        self.h_u = h_u
        self._rules = {}

    def _rule(self, grading, v_scale):
        key = (round(float(grading), 12), v_scale)
        if key not in self._rules:
            u, w = u_rule(self.cfg.u_max, self.h_u, self.cfg.gl_order, key[0], v_scale)
            phi = self.cf(u) if u.size else np.empty(0, dtype=complex)
            ps = self.psi(u)
            self._rules[key] = (w * phi * self.psi.derivative(u), np.log(ps))
        return self._rules[key]

    def _grading(self, w_real):
        if self.cfg.singularity_grading_exponent is not None:
            return self.cfg.singularity_grading_exponent
        return 1.0 / min(max(w_real, 1e-3), 1.0)

    def _direct(self, w):
        """``sum W_j phi(u_j) psi(u_j)^(w-1) psi'(u_j)`` for each ``w`` (1-d array)."""
        out = np.empty(w.shape, dtype=complex)
        for re in np.unique(w.real):
            sel = w.real == re
            # resolve log-oscillations up to max(v_max, |Im w|), in steps of 4
            top = max(self.cfg.v_max, float(np.max(np.abs(w[sel].imag))))
            v_scale = 4.0 * math.ceil(top / 4.0)
            a, logpsi = self._rule(self._grading(re), v_scale)
            if a.size == 0:
                out[sel] = 0.0
                continue
            ws = w[sel]
            res = np.empty(ws.size, dtype=complex)
            step = max(1, _ECF_CHUNK // a.size)
            for i in range(0, ws.size, step):
                kern = np.exp(np.multiply.outer(ws[i:i + step] - 1.0, logpsi))
                res[i:i + step] = (kern * a).sum(axis=1)
            out[sel] = res
        return out

    def laplace_mellin(self, w):
        """``M_hat[L](w)`` with the bounded-kernel branch rule."""
        w = np.asarray(w, dtype=complex)
        flat = w.ravel()
        flip = self.psi.mu * flat.imag > 0
        eff = np.where(flip, np.conj(flat), flat)
        val = self._direct(eff)
        out = np.where(flip, np.conj(val), val).reshape(w.shape)
        return complex(out) if out.ndim == 0 else out

    def __call__(self, z):
        """``M_hat[g](z) = M_hat[L](1-z) / Gamma(1-z)``."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        one_minus = 1.0 - flat
        near = np.abs(one_minus - np.round(one_minus.real))
        if np.any((near <= 1e-8) & (np.round(one_minus.real) <= 0)):
            raise PoleError("1 - z lies on a pole of Gamma")
        flip = self.psi.mu * one_minus.imag > 0
        eff = np.where(flip, np.conj(flat), flat)
        w = 1.0 - eff
        val = self._direct(w) * np.exp(-log_gamma(w))
        out = np.where(flip, np.conj(val), val).reshape(z.shape)
        return complex(out) if out.ndim == 0 else out


def _as_cf(obj) -> CharFunction:
    if isinstance(obj, CharFunction):
        return obj
    if isinstance(obj, MixtureModel):
        return ExactCF(obj)
    return EmpiricalCF(obj)


def mellin_L_hat(z, cf, psi: Union[CharExponent, float], cfg: EstimatorConfig):
    """Estimated Mellin transform of the Laplace transform of the mixing law."""
    psi = psi if isinstance(psi, CharExponent) else CharExponent(float(psi))
    return MellinEstimate(_as_cf(cf), psi, cfg).laplace_mellin(z)


def mellin_g_hat(z, cf, psi: Union[CharExponent, float], cfg: EstimatorConfig):
    """Estimated Mellin transform of the mixing density."""
    psi = psi if isinstance(psi, CharExponent) else CharExponent(float(psi))
    return MellinEstimate(_as_cf(cf), psi, cfg)(z)


# ---------------------------------------------------------------------------
# Density estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityEstimate:
    """Mixing-density estimate on a positive grid.

    ``values`` are raw (possibly negative); ``clipped`` is ``max(values, 0)``.
    """

    grid: np.ndarray
    values: np.ndarray
    max_imag_residual: float
    estimator_tag: str
    config: dict = field(default_factory=dict)

    @property
    def clipped(self) -> np.ndarray:
        return np.maximum(self.values, 0.0)


def _v_rule(cfg: EstimatorConfig):
    h = min(0.25, cfg.gl_order / cfg.v_nodes_per_unit)
    pos, wpos = _composite(0.0, cfg.v_max, h, cfg.gl_order)
    # mirrored nodes for the v < 0 half
    return np.concatenate([-pos[::-1], pos]), np.concatenate([wpos[::-1], wpos])


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("empty grid")
    if np.any(grid <= 0):
        raise ValueError("grid points must be positive")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def invert(m_hat: MellinEstimate, grid, tag: str) -> DensityEstimate:
    """Truncated inverse Mellin transform of ``m_hat`` on ``grid``."""
    cfg = m_hat.cfg
    grid = _check_grid(grid)
    v, wv = _v_rule(cfg)
    if v.size == 0:
        vals = np.zeros(grid.size, dtype=complex)
    else:
        z = cfg.gamma + 1j * v
        mg = m_hat(z)
        kern = np.exp(-np.multiply.outer(np.log(grid), z))
        vals = (kern * (wv * mg)).sum(axis=1) / (2.0 * math.pi)
    cfg_d = cfg.to_dict()
    cfg_d["mu"] = m_hat.psi.mu
    return DensityEstimate(grid, vals.real.copy(), float(np.max(np.abs(vals.imag))), tag, cfg_d)


def estimate_density_known_mu(sample_or_cf, mu: float, grid, cfg: EstimatorConfig) -> DensityEstimate:
    """
    Mixing-density estimate with known drift ``mu``.

    ``sample_or_cf`` may be a :class:`Sample` (or array), a
    :class:`CharFunction`, or a :class:`MixtureModel` for the noiseless
    oracle run (tag ``oracle_cf``).
    """
    cf = _as_cf(sample_or_cf)
    tag = "oracle_cf" if isinstance(cf, ExactCF) else "known_mu"
    return invert(MellinEstimate(cf, CharExponent(float(mu)), cfg), grid, tag)


def estimate_density_plugin(sample, mu_hat: float, grid, cfg: EstimatorConfig) -> DensityEstimate:
    """Same estimator with the exponent built from an estimated drift."""
    cf = _as_cf(sample)
    return invert(MellinEstimate(cf, CharExponent(float(mu_hat)), cfg), grid, "plugin_mu")
