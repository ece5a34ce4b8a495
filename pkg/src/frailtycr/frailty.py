"""Frailty laws for a pair of individuals with competing risks.

Every law except the Dirichlet one is a *linear Gamma* law: there are
independent latents ``Y_i ~ Gamma(shape_i, rate_i)`` and fixed non-negative
loading matrices with ``eps1 = W1 @ Y`` and ``eps2 = W2 @ Y``.  That common
representation drives sampling, the latent densities and the oracle.

Gamma variables are parametrized by shape and *rate* throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, ParameterError


def gamma_laplace(H, sigma2):
    """``E[exp(-H eps)]`` for ``eps ~ Gamma(1/sigma2, rate 1/sigma2)``,
    i.e. ``(1 + sigma2 H)^(-1/sigma2)``."""
    H = np.asarray(H, dtype=float)
    if np.any(H < 0):
        raise DomainError("H must be >= 0")
    out = np.exp(-np.log1p(sigma2 * H) / sigma2)
    return float(out) if out.ndim == 0 else out


def gamma_tilted_moment(s, sigma2, order: int):
    """``E[eps^order exp(-s eps)]`` for the unit-mean Gamma law, order 0..2."""
    s = np.asarray(s, dtype=float)
    lg = np.log1p(sigma2 * s)
    if order == 0:
        return np.exp(-lg / sigma2)
    if order == 1:
        return np.exp(-(1.0 / sigma2 + 1.0) * lg)
    if order == 2:
        return (1.0 + sigma2) * np.exp(-(1.0 / sigma2 + 2.0) * lg)
    raise ValueError("order must be 0, 1 or 2")


def gamma_logpdf(x, shape, rate):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x
    return np.where(x > 0, out, -np.inf)


def _tuple(values) -> tuple:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


# ---------------------------------------------------------------- laws


@dataclass(frozen=True)
class SharedGamma:
    """One unit-mean Gamma frailty shared by every cause of both individuals."""

    sigma: float
    law = "shared_gamma"

    def __post_init__(self):
        object.__setattr__(self, "sigma", float(self.sigma))

    def to_dict(self):
        return {"law": self.law, "sigma": self.sigma}


@dataclass(frozen=True)
class CorrelatedGamma:
    """``eps_k = (mu0/mu_k) Y0 + Y_k`` with ``Y0 ~ Gamma(k0, mu0)``,
    ``Y_k ~ Gamma(k_k, mu_k)``, ``mu_k = 1/sigma_k^2``, ``mu0 = 1``,
    ``k0 = rho/(sigma1 sigma2)`` and ``k_k = 1/sigma_k^2 - k0``."""

    sigma1: float
    sigma2: float
    rho: float
    law = "correlated_gamma"

    def __post_init__(self):
        for name in ("sigma1", "sigma2", "rho"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def kappa0(self):
        return self.rho / (self.sigma1 * self.sigma2)

    @property
    def kappas(self):
        k0 = self.kappa0
        return 1.0 / self.sigma1 ** 2 - k0, 1.0 / self.sigma2 ** 2 - k0

    def to_dict(self):
        return {"law": self.law, "sigma1": self.sigma1, "sigma2": self.sigma2, "rho": self.rho}


@dataclass(frozen=True)
class SharedCauseSpecific:
    """Independent unit-mean Gamma frailties per cause, shared by the pair."""

    sigmas: tuple
    law = "shared_cause_specific"

    def __post_init__(self):
        object.__setattr__(self, "sigmas", _tuple(self.sigmas))

    def to_dict(self):
        return {"law": self.law, "sigmas": list(self.sigmas)}


@dataclass(frozen=True)
class CorrelatedCauseSpecific:
    """The correlated Gamma construction applied independently to each cause."""

    sigma1: tuple
    sigma2: tuple
    rho: tuple
    law = "correlated_cause_specific"

    def __post_init__(self):
        for name in ("sigma1", "sigma2", "rho"):
            object.__setattr__(self, name, _tuple(getattr(self, name)))

    def cause(self, j: int) -> CorrelatedGamma:
        """The per-cause correlated Gamma law, ``j`` 1-based."""
        return CorrelatedGamma(self.sigma1[j - 1], self.sigma2[j - 1], self.rho[j - 1])

    def to_dict(self):
        return {"law": self.law, "sigma1": list(self.sigma1),
                "sigma2": list(self.sigma2), "rho": list(self.rho)}


@dataclass(frozen=True)
class DirichletGamma:
    """``eps_kj = a * eta_kj`` with ``a ~ Gamma(1/sigma^2, 1/sigma^2)`` and
    ``eta_k ~ Dirichlet(alpha_k)`` independent."""

    alpha1: tuple
    alpha2: tuple
    sigma: float
    law = "dirichlet_gamma"

    def __post_init__(self):
        object.__setattr__(self, "alpha1", _tuple(self.alpha1))
        object.__setattr__(self, "alpha2", _tuple(self.alpha2))
        object.__setattr__(self, "sigma", float(self.sigma))

    def mean_eta(self, k: int) -> np.ndarray:
        alpha = np.asarray(self.alpha1 if k == 1 else self.alpha2)
        return alpha / alpha.sum()

    def to_dict(self):
        return {"law": self.law, "alpha1": list(self.alpha1),
                "alpha2": list(self.alpha2), "sigma": self.sigma}


@dataclass(frozen=True)
class IndependentGamma:
    """Independent unit-mean Gamma frailties for every (individual, cause)."""

    sigma1: tuple
    sigma2: tuple
    law = "independent_gamma"

    def __post_init__(self):
        object.__setattr__(self, "sigma1", _tuple(self.sigma1))
        object.__setattr__(self, "sigma2", _tuple(self.sigma2))

    def to_dict(self):
        return {"law": self.law, "sigma1": list(self.sigma1), "sigma2": list(self.sigma2)}


@dataclass(frozen=True)
class Rescaled:
    """Frailty ``(delta1 / c1, c2 * delta2)`` where ``(delta1, delta2)``
    follows ``base``.  Paired with hazards ``c1 h1`` and ``h2 / c2`` it
    reproduces the base model exactly."""

    base: "FrailtySpec"
    c1: float
    c2: float
    law = "rescaled"

    def __post_init__(self):
        object.__setattr__(self, "c1", float(self.c1))
        object.__setattr__(self, "c2", float(self.c2))

    def to_dict(self):
        return {"law": self.law, "base": self.base.to_dict(), "c1": self.c1, "c2": self.c2}


FrailtySpec = Union[SharedGamma, CorrelatedGamma, SharedCauseSpecific,
                    CorrelatedCauseSpecific, DirichletGamma, IndependentGamma, Rescaled]

LAWS = {cls.law: cls for cls in (SharedGamma, CorrelatedGamma, SharedCauseSpecific,
                                 CorrelatedCauseSpecific, DirichletGamma,
                                 IndependentGamma, Rescaled)}


# ---------------------------------------------------------------- validation


def _positive_violations(name, values):
    out = []
    for i, v in enumerate(np.atleast_1d(values)):
        label = name if np.ndim(values) == 0 else f"{name}[{i}]"
        if not (v > 0 and math.isfinite(v)):
            out.append(f"{label} must be > 0 (got {v!r})")
    return out


def _rho_violations(s1, s2, rho, label="rho"):
    out = []
    if not (s1 > 0 and s2 > 0):
        return out
    bound = min(s1 / s2, s2 / s1)
    if not math.isfinite(rho) or rho <= 0:
        out.append(f"{label} must be > 0 (got {rho!r})")
    elif rho == bound:
        out.append(f"{label} = min ratio {bound:g} is the boundary (degenerate Gamma component)")
    elif rho > bound:
        out.append(f"{label} >= min ratio: {rho:g} exceeds bound {bound:g}")
    return out


def validate(spec, L1: int, L2: int) -> list[str]:
    """Every violated constraint of ``spec`` against cause counts ``(L1, L2)``."""
    out: list[str] = []
    if isinstance(spec, SharedGamma):
        out += _positive_violations("sigma", spec.sigma)
    elif isinstance(spec, CorrelatedGamma):
        out += _positive_violations("sigma1", spec.sigma1)
        out += _positive_violations("sigma2", spec.sigma2)
        out += _rho_violations(spec.sigma1, spec.sigma2, spec.rho)
    elif isinstance(spec, SharedCauseSpecific):
        out += _positive_violations("sigmas", np.array(spec.sigmas))
        if L1 != L2:
            out.append(f"cause-specific frailty requires L1=L2 (got {L1}, {L2})")
        if len(spec.sigmas) != L1:
            out.append(f"expected {L1} sigmas, got {len(spec.sigmas)}")
    elif isinstance(spec, CorrelatedCauseSpecific):
        n = len(spec.sigma1)
        if not (len(spec.sigma2) == len(spec.rho) == n):
            out.append("sigma1, sigma2 and rho must have equal length")
        out += _positive_violations("sigma1", np.array(spec.sigma1))
        out += _positive_violations("sigma2", np.array(spec.sigma2))
        for j, (a, b, r) in enumerate(zip(spec.sigma1, spec.sigma2, spec.rho)):
            out += _rho_violations(a, b, r, label=f"rho[{j}]")
        if L1 != L2:
            out.append(f"cause-specific frailty requires L1=L2 (got {L1}, {L2})")
        if n != L1:
            out.append(f"expected {L1} causes, got {n}")
    elif isinstance(spec, DirichletGamma):
        out += _positive_violations("sigma", spec.sigma)
        out += _positive_violations("alpha1", np.array(spec.alpha1))
        out += _positive_violations("alpha2", np.array(spec.alpha2))
        if len(spec.alpha1) != L1:
            out.append(f"alpha1 has length {len(spec.alpha1)}, expected {L1}")
        if len(spec.alpha2) != L2:
            out.append(f"alpha2 has length {len(spec.alpha2)}, expected {L2}")
    elif isinstance(spec, IndependentGamma):
        out += _positive_violations("sigma1", np.array(spec.sigma1))
        out += _positive_violations("sigma2", np.array(spec.sigma2))
        if len(spec.sigma1) != L1:
            out.append(f"sigma1 has length {len(spec.sigma1)}, expected {L1}")
        if len(spec.sigma2) != L2:
            out.append(f"sigma2 has length {len(spec.sigma2)}, expected {L2}")
    elif isinstance(spec, Rescaled):
        out += _positive_violations("c1", spec.c1)
        out += _positive_violations("c2", spec.c2)
        out += [f"base: {v}" for v in validate(spec.base, L1, L2)]
    else:
        out.append(f"unknown frailty law {type(spec).__name__}")
    return out


def check(spec, L1: int, L2: int) -> None:
    """Raise :class:`ParameterError` listing all violations, if any."""
    problems = validate(spec, L1, L2)
    if problems:
        raise ParameterError("; ".join(problems))


# ---------------------------------------------------------------- latent form


@dataclass(frozen=True)
class LinearGamma:
    """``eps1 = W1 @ Y``, ``eps2 = W2 @ Y`` with independent
    ``Y_i ~ Gamma(shape_i, rate_i)``.

    For the Dirichlet law ``exact`` is False: the loadings hold ``E[eta]``
    and the representation is only valid for quantities linear in each
    ``eta_k`` (which is the case when every cause shares one hazard).
    """

    shape: np.ndarray
    rate: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    exact: bool = True

    @property
    def dim(self) -> int:
        return self.shape.size


def latent_form(spec, L1: int, L2: int) -> LinearGamma:
    check(spec, L1, L2)
    if isinstance(spec, SharedGamma):
        mu = 1.0 / spec.sigma ** 2
        return LinearGamma(np.array([mu]), np.array([mu]), np.ones((L1, 1)), np.ones((L2, 1)))
    if isinstance(spec, CorrelatedGamma):
        k1, k2 = spec.kappas
        mu1, mu2 = 1.0 / spec.sigma1 ** 2, 1.0 / spec.sigma2 ** 2
        W1 = np.tile([1.0 / mu1, 1.0, 0.0], (L1, 1))
        W2 = np.tile([1.0 / mu2, 0.0, 1.0], (L2, 1))
        return LinearGamma(np.array([spec.kappa0, k1, k2]), np.array([1.0, mu1, mu2]), W1, W2)
    if isinstance(spec, SharedCauseSpecific):
        mu = 1.0 / np.asarray(spec.sigmas) ** 2
        return LinearGamma(mu, mu.copy(), np.eye(L1), np.eye(L2))
    if isinstance(spec, CorrelatedCauseSpecific):
        L = L1
        shape, rate = np.empty(3 * L), np.empty(3 * L)
        W1, W2 = np.zeros((L, 3 * L)), np.zeros((L, 3 * L))
        for j in range(L):
            cg = spec.cause(j + 1)
            k1, k2 = cg.kappas
            mu1, mu2 = 1.0 / cg.sigma1 ** 2, 1.0 / cg.sigma2 ** 2
            shape[3 * j:3 * j + 3] = cg.kappa0, k1, k2
            rate[3 * j:3 * j + 3] = 1.0, mu1, mu2
            W1[j, 3 * j], W1[j, 3 * j + 1] = 1.0 / mu1, 1.0
            W2[j, 3 * j], W2[j, 3 * j + 2] = 1.0 / mu2, 1.0
        return LinearGamma(shape, rate, W1, W2)
    if isinstance(spec, DirichletGamma):
        mu = 1.0 / spec.sigma ** 2
        return LinearGamma(np.array([mu]), np.array([mu]),
                           spec.mean_eta(1)[:, None], spec.mean_eta(2)[:, None], exact=False)
    if isinstance(spec, IndependentGamma):
        mu = 1.0 / np.concatenate([spec.sigma1, spec.sigma2]) ** 2
        W1 = np.hstack([np.eye(L1), np.zeros((L1, L2))])
        W2 = np.hstack([np.zeros((L2, L1)), np.eye(L2)])
        return LinearGamma(mu, mu.copy(), W1, W2)
    if isinstance(spec, Rescaled):
        lg = latent_form(spec.base, L1, L2)
        return LinearGamma(lg.shape, lg.rate, lg.W1 / spec.c1, lg.W2 * spec.c2, lg.exact)
    raise ParameterError(f"unknown frailty law {type(spec).__name__}")


# ---------------------------------------------------------------- sampling


@dataclass(frozen=True)
class FrailtyDraw:
    """Frailty vectors for both individuals.  With ``size=n`` the arrays
    carry a leading draw axis.  ``latent`` holds the Gamma latents (or, for
    the Dirichlet law, ``a`` followed by ``eta1`` and ``eta2``)."""

    eps1: np.ndarray
    eps2: np.ndarray
    latent: np.ndarray | None = None


def sample(spec, L1: int, L2: int, rng: np.random.Generator, size: int | None = None):
    check(spec, L1, L2)
    n = 1 if size is None else int(size)
    if isinstance(spec, Rescaled):
        d = sample(spec.base, L1, L2, rng, n)
        out = FrailtyDraw(d.eps1 / spec.c1, d.eps2 * spec.c2, d.latent)
    elif isinstance(spec, DirichletGamma):
        mu = 1.0 / spec.sigma ** 2
        a = rng.gamma(mu, 1.0 / mu, size=n)
        g1 = rng.gamma(np.asarray(spec.alpha1), 1.0, size=(n, L1))
        g2 = rng.gamma(np.asarray(spec.alpha2), 1.0, size=(n, L2))
        eta1 = g1 / g1.sum(axis=1, keepdims=True)
        eta2 = g2 / g2.sum(axis=1, keepdims=True)
        out = FrailtyDraw(a[:, None] * eta1, a[:, None] * eta2,
                          np.column_stack([a, eta1, eta2]))
    else:
        lg = latent_form(spec, L1, L2)
        Y = rng.gamma(lg.shape, 1.0 / lg.rate, size=(n, lg.dim))
        out = FrailtyDraw(Y @ lg.W1.T, Y @ lg.W2.T, Y)
    if size is None:
        return FrailtyDraw(out.eps1[0], out.eps2[0], out.latent[0])
    return out


# ---------------------------------------------------------------- densities


def _natural_counts(spec, L1, L2):
    """How many density coordinates are read from eps1 and from eps2."""
    if isinstance(spec, IndependentGamma):
        return L1, L2
    if isinstance(spec, SharedGamma) or isinstance(spec, DirichletGamma):
        return 1, 0
    if isinstance(spec, SharedCauseSpecific):
        return L1, 0
    if isinstance(spec, Rescaled):
        return _natural_counts(spec.base, L1, L2)
    return 0, 0


def _equal(a, b):
    return np.all(np.isclose(a, b, rtol=1e-12, atol=0.0), axis=-1)


def log_density(spec, draw: FrailtyDraw):
    """Log density of a frailty draw in the law's natural coordinates.

    * shared Gamma: the scalar frailty (all slots must agree);
    * shared cause-specific: the per-cause frailties (``eps2 == eps1``);
    * independent Gamma: all ``L1 + L2`` frailties;
    * Dirichlet: ``a = sum(eps_k)`` and the free coordinates of each ``eta_k``;
    * correlated laws: the Gamma latents in ``draw.latent``;
    * rescaled: the base density at ``(c1 eps1, eps2 / c2)`` times the
      Jacobian of that map.

    Returns ``-inf`` outside the support; vectorized over a leading axis.
    """
    eps1 = np.asarray(draw.eps1, dtype=float)
    eps2 = np.asarray(draw.eps2, dtype=float)
    L1, L2 = eps1.shape[-1], eps2.shape[-1]
    check(spec, L1, L2)
    if isinstance(spec, Rescaled):
        n1, n2 = _natural_counts(spec.base, L1, L2)
        inner = FrailtyDraw(eps1 * spec.c1, eps2 / spec.c2, draw.latent)
        return n1 * math.log(spec.c1) - n2 * math.log(spec.c2) + log_density(spec.base, inner)
    if isinstance(spec, SharedGamma):
        mu = 1.0 / spec.sigma ** 2
        x = eps1[..., 0]
        same = _equal(eps1, x[..., None]) & _equal(eps2, x[..., None])
        return np.where(same, gamma_logpdf(x, mu, mu), -np.inf)
    if isinstance(spec, SharedCauseSpecific):
        mu = 1.0 / np.asarray(spec.sigmas) ** 2
        if L1 != L2:
            raise DomainError("dimension mismatch between eps1 and eps2")
        lp = gamma_logpdf(eps1, mu, mu).sum(axis=-1)
        return np.where(_equal(eps1, eps2), lp, -np.inf)
    if isinstance(spec, IndependentGamma):
        mu1 = 1.0 / np.asarray(spec.sigma1) ** 2
        mu2 = 1.0 / np.asarray(spec.sigma2) ** 2
        return gamma_logpdf(eps1, mu1, mu1).sum(axis=-1) + gamma_logpdf(eps2, mu2, mu2).sum(axis=-1)
    if isinstance(spec, DirichletGamma):
        mu = 1.0 / spec.sigma ** 2
        a = eps1.sum(axis=-1)
        out = gamma_logpdf(a, mu, mu)
        for eps, alpha in ((eps1, spec.alpha1), (eps2, spec.alpha2)):
            alpha = np.asarray(alpha)
            with np.errstate(divide="ignore", invalid="ignore"):
                eta = eps / a[..., None]
                logeta = np.where(eta > 0, np.log(np.where(eta > 0, eta, 1.0)), -np.inf)
            out = out + gammaln(alpha.sum()) - gammaln(alpha).sum() + ((alpha - 1) * logeta).sum(axis=-1)
        return np.where(np.isclose(a, eps2.sum(axis=-1), rtol=1e-12, atol=0.0), out, -np.inf)
    if isinstance(spec, (CorrelatedGamma, CorrelatedCauseSpecific)):
        if draw.latent is None:
            raise DomainError("correlated laws need the latent coordinates of the draw")
        lg = latent_form(spec, L1, L2)
        Y = np.asarray(draw.latent, dtype=float)
        if Y.shape[-1] != lg.dim:
            raise DomainError(f"expected {lg.dim} latent coordinates, got {Y.shape[-1]}")
        return gamma_logpdf(Y, lg.shape, lg.rate).sum(axis=-1)
    raise ParameterError(f"unknown frailty law {type(spec).__name__}")
