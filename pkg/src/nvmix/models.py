"""
Parametric test-bed distributions for normal variance-mean mixtures.

A mixture ``X = mu * xi + sqrt(xi) * eta`` is described by a :class:`MixtureModel`
holding the drift ``mu`` and a mixing law for ``xi >= 0``. Mixing laws expose an
exact density, a sampler, the Laplace transform and, where a closed form
exists, the Mellin transform of the density. These exact quantities are the
oracles against which the empirical estimators are checked.

The GIG parameter usually written psi is called ``psi_gig`` here, to keep it
apart from the characteristic exponent ``psi(u) = -i mu u + u^2 / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
from scipy import integrate

from .special_functions import DomainError, bessel_k, log_gamma

__all__ = [
    "GigParams",
    "GIG",
    "Gamma",
    "Beta",
    "PointMass",
    "MixingModel",
    "MixtureModel",
    "Sample",
    "UnsupportedModelError",
    "gig_density",
    "gig_sample",
    "gig_laplace",
    "gh_density",
    "mixture_sample",
    "exact_mellin_of_mixing",
    "numerical_mellin_of_mixing",
    "mixture_density",
    "char_exponent",
]


class UnsupportedModelError(TypeError):
    """The requested closed form does not exist for this mixing law."""


# ---------------------------------------------------------------------------
# Sample
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    """Immutable vector of observations with provenance.

    ``provenance`` is a plain dict, e.g. ``{"seed": 7, "model": {...}}`` or
    ``{"path": "stones.txt", "log": True}``.
    """

    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size < 1:
            raise ValueError("a sample needs at least one observation")
        if not np.all(np.isfinite(values)):
            raise ValueError("sample contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"sample size must be a positive integer, got {n}")
    return int(n)


# ---------------------------------------------------------------------------
# GIG
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GigParams:
    """GIG(lambda, delta, psi_gig) with density proportional to
    ``s^(lambda-1) exp(-(psi_gig^2 s + delta^2 / s) / 2)``."""

    lam: float
    delta: float
    psi_gig: float

    def __post_init__(self):
        if not (self.delta > 0 and self.psi_gig > 0):
            raise ValueError("GIG requires delta > 0 and psi_gig > 0")

    @cached_property
    def log_norm(self) -> float:
        lam, d, p = self.lam, self.delta, self.psi_gig
        return lam * math.log(p / d) - math.log(2.0 * bessel_k(lam, d * p))


def gig_density(s, p: GigParams):
    """GIG density; zero for ``s <= 0``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    out[pos] = np.exp(p.log_norm + (p.lam - 1.0) * np.log(sp)
                      - 0.5 * (p.psi_gig ** 2 * sp + p.delta ** 2 / sp))
    return float(out) if out.ndim == 0 else out


def _devroye_log_psi(x, alpha, lam):
    return -alpha * (np.cosh(x) - 1.0) - lam * (np.expm1(x) - x)


def _devroye_dlog_psi(x, alpha, lam):
    return -alpha * np.sinh(x) - lam * np.expm1(x)


def _gig_standard(rng: np.random.Generator, n: int, lam: float, omega: float):
    """Draws from the two-parameter GIG(lam, omega), density proportional to
    ``x^(lam-1) exp(-omega (x + 1/x) / 2)``, by Devroye's rejection method.

    The sampler works on ``log`` scale with a log-concave target and an
    envelope that is flat on a core interval and exponential on both tails.
    """
    swap = lam < 0
    lam = abs(lam)
    alpha = math.sqrt(omega * omega + lam * lam) - lam

    def lp(x):
        return float(_devroye_log_psi(x, alpha, lam))

    def dlp(x):
        return float(_devroye_dlog_psi(x, alpha, lam))

    x = -lp(1.0)
    if 0.5 <= x <= 2.0:
        t = 1.0
    elif x > 2.0:
        t = math.sqrt(2.0 / (alpha + lam))
    else:
        t = math.log(4.0 / (alpha + 2.0 * lam))

    x = -lp(-1.0)
    if 0.5 <= x <= 2.0:
        s = 1.0
    elif x > 2.0:
        s = math.sqrt(4.0 / (alpha * math.cosh(1.0) + lam))
    elif alpha == 0.0:
        s = 1.0 / lam
    else:
        s_alpha = math.log1p(1.0 / alpha + math.sqrt(1.0 / alpha ** 2 + 2.0 / alpha))
        s = s_alpha if lam == 0.0 else min(1.0 / lam, s_alpha)

    eta, zeta = -lp(t), -dlp(t)
    theta, xi = -lp(-s), dlp(-s)
    p_w, r_w = 1.0 / xi, 1.0 / zeta
    td = t - r_w * eta
    sd = s - p_w * theta
    q = td + sd
    total = p_w + q + r_w

    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(16, int(1.3 * (n - filled)))
        u, v, w = rng.random(m), rng.random(m), rng.random(m)
        v = np.where(v > 0.0, v, np.finfo(float).tiny)
        cand = np.where(
            u < q / total, -sd + q * v,
            np.where(u < (q + r_w) / total, td - r_w * np.log(v), -sd + p_w * np.log(v)),
        )
        env = np.where(
            cand > td, -eta - zeta * (cand - t),
            np.where(cand < -sd, -theta + xi * (cand + s), 0.0),
        )
        ok = np.log(w) + env <= _devroye_log_psi(cand, alpha, lam)
        acc = cand[ok][: n - filled]
        out[filled:filled + acc.size] = acc
        filled += acc.size

    out = np.exp(out) * (lam / omega + math.sqrt(1.0 + (lam / omega) ** 2))
    return 1.0 / out if swap else out


def gig_sample(rng: np.random.Generator, n: int, p: GigParams) -> np.ndarray:
    """``n`` i.i.d. GIG draws (raw array; wrap in :class:`Sample` as needed)."""
    n = _check_n(n)
    omega = p.delta * p.psi_gig
    # GIG(lam, delta, psi_gig) = (delta / psi_gig) * GIG(lam, omega)
    return _gig_standard(rng, n, p.lam, omega) * (p.delta / p.psi_gig)


def gig_laplace(t, p: GigParams):
    """Laplace transform E[exp(-t xi)] of GIG, for complex ``t`` with
    ``Re t > -psi_gig^2 / 2``.

    Closed form ``(psi^2 / (psi^2 + 2t))^(lam/2) K_lam(delta sqrt(psi^2 + 2t)) / K_lam(delta psi)``;
    the Bessel function at complex argument comes from ``scipy.special.kve``.
    """
    from scipy.special import kve

    t = np.asarray(t, dtype=complex)
    if np.any(t.real <= -0.5 * p.psi_gig ** 2):
        raise DomainError("gig_laplace: Re t must exceed -psi_gig^2 / 2")
    a = p.psi_gig ** 2 + 2.0 * t
    root = np.sqrt(a)
    arg = p.delta * root
    k0 = p.delta * p.psi_gig
    out = (np.exp(0.5 * p.lam * (math.log(p.psi_gig ** 2) - np.log(a)))
           * kve(p.lam, arg) / kve(p.lam, k0) * np.exp(-(arg - k0)))
    out = np.where(t == 0, 1.0 + 0j, out)
    return complex(out) if out.ndim == 0 else out


def gh_density(x, mu: float, p: GigParams):
    """
    Density of ``X = mu xi + sqrt(xi) eta`` with GIG mixing.

    Closed form for ``lam == 1``:
    ``psi / (2 alpha delta K_1(delta psi)) * exp(-alpha sqrt(delta^2 + x^2) + mu x)``
    with ``alpha = sqrt(psi^2 + mu^2)``. Other indices fall back to the mixing
    integral.
    """
    if p.lam != 1.0:
        return mixture_density(x, MixtureModel(mu, GIG(p)))
    x = np.asarray(x, dtype=float)
    alpha = math.hypot(p.psi_gig, mu)
    logc = math.log(p.psi_gig) - math.log(2.0 * alpha * p.delta * bessel_k(1.0, p.delta * p.psi_gig))
    out = np.exp(logc - alpha * np.sqrt(p.delta ** 2 + x * x) + mu * x)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Mixing laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GIG:
    params: GigParams
    class_label = "exponential"

    def density(self, s):
        return gig_density(s, self.params)

    def sample(self, rng, n):
        return gig_sample(rng, n, self.params)

    def laplace(self, t):
        return gig_laplace(t, self.params)

    def mean(self) -> float:
        p = self.params
        w = p.delta * p.psi_gig
        return p.delta / p.psi_gig * bessel_k(p.lam + 1.0, w) / bessel_k(p.lam, w)

    def second_moment(self) -> float:
        p = self.params
        w = p.delta * p.psi_gig
        return (p.delta / p.psi_gig) ** 2 * bessel_k(p.lam + 2.0, w) / bessel_k(p.lam, w)

    def to_dict(self):
        p = self.params
        return {"kind": "gig", "lambda": p.lam, "delta": p.delta, "psi_gig": p.psi_gig}


@dataclass(frozen=True)
class Gamma:
    """Gamma law with shape ``a`` and rate ``b``."""

    a: float
    b: float
    class_label = "exponential"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Gamma requires a > 0 and b > 0")

    def density(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        sp = s[pos]
        out[pos] = np.exp(self.a * math.log(self.b) - log_gamma(self.a).real
                          + (self.a - 1.0) * np.log(sp) - self.b * sp)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng, n):
        return rng.gamma(self.a, 1.0 / self.b, size=_check_n(n))

    def laplace(self, t):
        t = np.asarray(t, dtype=complex)
        out = np.exp(-self.a * np.log1p(t / self.b))
        return complex(out) if out.ndim == 0 else out

    def mellin(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.exp((1.0 - z) * math.log(self.b) + log_gamma(self.a + z - 1.0)
                     - log_gamma(self.a))
        return complex(out) if out.ndim == 0 else out

    def mean(self) -> float:
        return self.a / self.b

    def second_moment(self) -> float:
        return self.a * (self.a + 1.0) / self.b ** 2

    def to_dict(self):
        return {"kind": "gamma", "shape": self.a, "rate": self.b}


@dataclass(frozen=True)
class Beta:
    """Beta(p, q) law on (0, 1)."""

    p: float
    q: float
    class_label = "polynomial"

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValueError("Beta requires p > 0 and q > 0")

    def _log_beta(self, x, y):
        return log_gamma(x) + log_gamma(y) - log_gamma(x + y)

    def density(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        inside = (s > 0) & (s < 1)
        si = s[inside]
        out[inside] = np.exp((self.p - 1.0) * np.log(si) + (self.q - 1.0) * np.log1p(-si)
                             - self._log_beta(self.p, self.q).real)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng, n):
        return rng.beta(self.p, self.q, size=_check_n(n))

    def laplace(self, t):
        # 1F1(p; p+q; -t) has no cheap closed form for complex t; integrate
        t = np.atleast_1d(np.asarray(t, dtype=complex))
        out = np.array([_quad_complex(lambda s, tt=tt: np.exp(-tt * s) * self.density(s), 0.0, 1.0)
                        for tt in t.ravel()]).reshape(t.shape)
        return complex(out[0]) if out.size == 1 else out

    def mellin(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.exp(self._log_beta(self.p + z - 1.0, self.q) - self._log_beta(self.p, self.q))
        return complex(out) if out.ndim == 0 else out

    def mean(self) -> float:
        return self.p / (self.p + self.q)

    def second_moment(self) -> float:
        s = self.p + self.q
        return self.p * (self.p + 1.0) / (s * (s + 1.0))

    def to_dict(self):
        return {"kind": "beta", "p": self.p, "q": self.q}


@dataclass(frozen=True)
class PointMass:
    """Degenerate mixing at ``s``; it has no Lebesgue density, so ``density``
    raises."""

    s: float
    class_label = "none"

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("PointMass requires s > 0")

    def density(self, s):
        raise UnsupportedModelError("a point mass has no Lebesgue density")

    def sample(self, rng, n):
        return np.full(_check_n(n), float(self.s))

    def laplace(self, t):
        t = np.asarray(t, dtype=complex)
        out = np.exp(-self.s * t)
        return complex(out) if out.ndim == 0 else out

    def mellin(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.exp((z - 1.0) * math.log(self.s))
        return complex(out) if out.ndim == 0 else out

    def mean(self) -> float:
        return float(self.s)

    def second_moment(self) -> float:
        return float(self.s) ** 2

    def to_dict(self):
        return {"kind": "point", "s": self.s}


MixingModel = Union[GIG, Gamma, Beta, PointMass]


def mixing_from_dict(d: dict) -> MixingModel:
    d = dict(d)
    kind = d.pop("kind")
    if kind == "gig":
        return GIG(GigParams(d["lambda"], d["delta"], d["psi_gig"]))
    if kind == "gamma":
        return Gamma(d["shape"], d["rate"])
    if kind == "beta":
        return Beta(d["p"], d["q"])
    if kind == "point":
        return PointMass(d["s"])
    raise ValueError(f"unknown mixing law {kind!r}")


@dataclass(frozen=True)
class MixtureModel:
    """Law of ``X = mu xi + sqrt(xi) eta``, ``xi`` from ``mixing``."""

    mu: float
    mixing: MixingModel

    def char_function(self, u):
        """Exact characteristic function ``L_xi(psi(u))``."""
        return self.mixing.laplace(char_exponent(u, self.mu))

    def mean(self) -> float:
        return self.mu * self.mixing.mean()

    def variance(self) -> float:
        m1 = self.mixing.mean()
        return m1 + self.mu ** 2 * (self.mixing.second_moment() - m1 ** 2)

    def to_dict(self):
        return {"mu": self.mu, "mixing": self.mixing.to_dict()}


def char_exponent(u, mu: float):
    """``psi(u) = -i mu u + u^2 / 2``."""
    u = np.asarray(u, dtype=float)
    return -1j * mu * u + 0.5 * u * u


def mixture_sample(rng: np.random.Generator, n: int, m: MixtureModel) -> np.ndarray:
    """Draws of ``mu xi + sqrt(xi) eta`` by composition."""
    n = _check_n(n)
    xi = np.asarray(m.mixing.sample(rng, n), dtype=float)
    eta = rng.standard_normal(n)
    return m.mu * xi + np.sqrt(xi) * eta


def mixture_density(x, m: MixtureModel):
    """Observable density by numerical integration over the mixing law."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(m.mixing, PointMass):
        s = m.mixing.s
        out = np.exp(-0.5 * (x - m.mu * s) ** 2 / s) / math.sqrt(2.0 * math.pi * s)
    else:
        upper = 1.0 if isinstance(m.mixing, Beta) else np.inf

        def one(xx):
            f = lambda s: (np.exp(-0.5 * (xx - m.mu * s) ** 2 / s) / math.sqrt(2.0 * math.pi * s)
                           * m.mixing.density(s)) if s > 0 else 0.0
            return integrate.quad(f, 0.0, upper, epsabs=1e-14, epsrel=1e-11, limit=400)[0]

        out = np.array([one(xx) for xx in x])
    return float(out[0]) if out.size == 1 else out


# ---------------------------------------------------------------------------
# Mellin transforms of the mixing density
# ---------------------------------------------------------------------------


def _quad_complex(f, a, b, **kw):
    kw.setdefault("limit", 400)
    kw.setdefault("epsabs", 1e-13)
    kw.setdefault("epsrel", 1e-11)
    re = integrate.quad(lambda s: np.real(f(s)), a, b, **kw)[0]
    im = integrate.quad(lambda s: np.imag(f(s)), a, b, **kw)[0]
    return re + 1j * im


def exact_mellin_of_mixing(z, m: MixingModel):
    """
    Closed-form ``M[g](z) = int g(s) s^(z-1) ds``.

    Gamma(a, b): ``b^(1-z) Gamma(a+z-1) / Gamma(a)``; Beta(p, q):
    ``B(p+z-1, q) / B(p, q)``; PointMass(s0): ``s0^(z-1)``.

    Raises
    ------
    UnsupportedModelError
        For GIG; use :func:`numerical_mellin_of_mixing` instead.
    """
    if isinstance(m, (Gamma, Beta, PointMass)):
        return m.mellin(z)
    raise UnsupportedModelError(f"no closed-form Mellin transform for {type(m).__name__}")


def numerical_mellin_of_mixing(z, m: MixingModel):
    """Quadrature fallback for ``M[g](z)`` (any law with a density)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    upper = 1.0 if isinstance(m, Beta) else np.inf
    out = np.array([
        _quad_complex(lambda s, zz=zz: m.density(s) * np.exp((zz - 1.0) * np.log(s)) if s > 0 else 0.0,
                      0.0, upper)
        for zz in z.ravel()
    ])
    return complex(out[0]) if out.size == 1 else out.reshape(z.shape)
