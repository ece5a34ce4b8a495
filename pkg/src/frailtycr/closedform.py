"""Closed-form evaluators for the bivariate frailty models.

Every frailty expectation is done analytically.  What remains are the time
integrals of the sub-density, done by panel quadrature after the change of
variables ``u -> v = A_k(u) -> w = log1p(v)`` where ``A_k`` is the total
baseline cumulative hazard of individual ``k``.  In ``w`` the integrands are
smooth, bounded and decay exponentially, whatever the hazard family.

Indices ``k`` (individual) and ``j`` (cause) are 1-based in the public API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import frailty as fr
from .errors import DomainError, NumericalError, StructureError
from .hazards import HazardSet, total_inverse
from .quadrature import graded_breaks, integrate_1d, integrate_2d

TOL_1D = 1e-10
TOL_2D = 1e-8


@dataclass(frozen=True)
class ModelSpec:
    """Baseline hazards plus frailty law: the joint law of ``(T1, T2, J1, J2)``."""

    hazards: HazardSet
    frailty: object

    def __post_init__(self):
        fr.check(self.frailty, *self.hazards.dims)

    @property
    def dims(self):
        return self.hazards.dims

    def to_dict(self):
        return {"hazards": self.hazards.to_list(), "frailty": self.frailty.to_dict()}


@dataclass(frozen=True)
class EvalPoint:
    t1: float
    t2: float
    j1: int
    j2: int


def reduce_model(m: ModelSpec) -> ModelSpec:
    """Strip rescaling wrappers: a rescaled frailty ``(d1/c1, c2 d2)`` with
    hazards ``h`` is the base frailty with hazards ``(h1/c1, c2 h2)``."""
    while isinstance(m.frailty, fr.Rescaled):
        spec = m.frailty
        m = ModelSpec(m.hazards.scaled(1.0 / spec.c1, spec.c2), spec.base)
    return m


def _require_common_hazard(m: ModelSpec):
    for k in (1, 2):
        if not m.hazards.common_hazard(k):
            raise StructureError(
                f"the Dirichlet law needs one baseline hazard shared by all causes of individual {k}")


# ---------------------------------------------------------------- kernels
#
# H1, H2: baseline cumulative hazards with a trailing cause axis.
# j1, j2: 0-based cause indices broadcastable against the leading axes.
#
#   laplace(H1, H2)          = E exp(-eps1.H1 - eps2.H2)
#   marginal(k, j, Hk)       = E eps_kj exp(-eps_k.Hk)
#   joint(j1, j2, H1, H2)    = E eps1_j1 eps2_j2 exp(-eps1.H1 - eps2.H2)


def _pick(X, j):
    j = np.asarray(j)
    X = np.asarray(X)
    shape = np.broadcast_shapes(X.shape[:-1], j.shape)
    X = np.broadcast_to(X, shape + X.shape[-1:])
    j = np.broadcast_to(j, shape)
    return np.take_along_axis(X, j[..., None], axis=-1)[..., 0]


def _log_lap(x, s2):
    """log of the unit-mean Gamma Laplace transform at ``x``."""
    return -np.log1p(s2 * x) / s2


class _SharedGamma:
    def __init__(self, spec):
        self.s2 = spec.sigma ** 2

    def laplace(self, H1, H2):
        return np.exp(_log_lap(H1.sum(-1) + H2.sum(-1), self.s2))

    def marginal(self, k, j, H):
        s2 = self.s2
        return np.exp(-(1.0 + 1.0 / s2) * np.log1p(s2 * H.sum(-1)))

    def joint(self, j1, j2, H1, H2):
        s2 = self.s2
        out = (1.0 + s2) * np.exp(-(2.0 + 1.0 / s2) * np.log1p(s2 * (H1.sum(-1) + H2.sum(-1))))
        return np.broadcast_to(out, np.broadcast_shapes(out.shape, np.shape(j1), np.shape(j2)))


class _Correlated:
    """Per-cause bivariate pieces of the correlated Gamma law."""

    def __init__(self, s1, s2, rho):
        self.s1sq, self.s2sq = np.asarray(s1) ** 2, np.asarray(s2) ** 2
        self.k0 = np.asarray(rho) / (np.asarray(s1) * np.asarray(s2))
        self.k1 = 1.0 / self.s1sq - self.k0
        self.k2 = 1.0 / self.s2sq - self.k0

    def pieces(self, X1, X2):
        """``D``, ``B1``, ``B2`` and the bivariate Laplace transform ``S``."""
        D = 1.0 + self.s1sq * X1 + self.s2sq * X2
        B1 = 1.0 + self.s1sq * X1
        B2 = 1.0 + self.s2sq * X2
        logS = -self.k0 * np.log(D) - self.k1 * np.log(B1) - self.k2 * np.log(B2)
        return D, B1, B2, np.exp(logS)

    def first_moment(self, k, D, Bk):
        """``E[eps_k e^{...}] / S``."""
        if k == 1:
            return self.s1sq * (self.k0 / D + self.k1 / Bk)
        return self.s2sq * (self.k0 / D + self.k2 / Bk)

    def cross_moment(self, D, B1, B2):
        """``E[eps_1 eps_2 e^{...}] / S``."""
        k0, k1, k2 = self.k0, self.k1, self.k2
        return self.s1sq * self.s2sq * (
            k0 * (1.0 + k0) / D ** 2 + k0 / D * (k1 / B1 + k2 / B2) + k1 * k2 / (B1 * B2))


class _CorrelatedGamma:
    def __init__(self, spec):
        self.c = _Correlated(spec.sigma1, spec.sigma2, spec.rho)
        self.sq = (spec.sigma1 ** 2, spec.sigma2 ** 2)

    def laplace(self, H1, H2):
        return self.c.pieces(H1.sum(-1), H2.sum(-1))[3]

    def marginal(self, k, j, H):
        s2 = self.sq[k - 1]
        return np.exp(-(1.0 + 1.0 / s2) * np.log1p(s2 * H.sum(-1)))

    def joint(self, j1, j2, H1, H2):
        D, B1, B2, S = self.c.pieces(H1.sum(-1), H2.sum(-1))
        out = S * self.c.cross_moment(D, B1, B2)
        return np.broadcast_to(out, np.broadcast_shapes(out.shape, np.shape(j1), np.shape(j2)))


class _SharedCauseSpecific:
    def __init__(self, spec):
        self.s2 = np.asarray(spec.sigmas) ** 2

    def laplace(self, H1, H2):
        return np.exp(_log_lap(H1 + H2, self.s2).sum(-1))

    def marginal(self, k, j, H):
        lap = np.exp(_log_lap(H, self.s2).sum(-1))
        return lap / (1.0 + _pick(self.s2 * H, j))

    def joint(self, j1, j2, H1, H2):
        s = H1 + H2
        lap = np.exp(_log_lap(s, self.s2).sum(-1))
        b = 1.0 + self.s2 * s
        b1, b2 = _pick(b, j1), _pick(b, j2)
        same = np.asarray(j1) == np.asarray(j2)
        return np.where(same, lap * (1.0 + _pick(np.broadcast_to(self.s2, b.shape), j1)) / b1 ** 2,
                        lap / (b1 * b2))


class _CorrelatedCauseSpecific:
    def __init__(self, spec):
        self.c = _Correlated(spec.sigma1, spec.sigma2, spec.rho)
        self.sq = (np.asarray(spec.sigma1) ** 2, np.asarray(spec.sigma2) ** 2)

    def laplace(self, H1, H2):
        return np.prod(self.c.pieces(H1, H2)[3], axis=-1)

    def marginal(self, k, j, H):
        s2 = self.sq[k - 1]
        lap = np.exp(_log_lap(H, s2).sum(-1))
        return lap / (1.0 + _pick(s2 * H, j))

    def joint(self, j1, j2, H1, H2):
        D, B1, B2, S = self.c.pieces(H1, H2)
        lap = np.prod(S, axis=-1)
        same = lap * _pick(self.c.cross_moment(D, B1, B2), j1)
        m1 = _pick(self.c.first_moment(1, D, B1), j1)
        m2 = _pick(self.c.first_moment(2, D, B2), j2)
        return np.where(np.asarray(j1) == np.asarray(j2), same, lap * m1 * m2)


class _IndependentGamma:
    def __init__(self, spec):
        self.sq = (np.asarray(spec.sigma1) ** 2, np.asarray(spec.sigma2) ** 2)

    def laplace(self, H1, H2):
        return np.exp(_log_lap(H1, self.sq[0]).sum(-1) + _log_lap(H2, self.sq[1]).sum(-1))

    def marginal(self, k, j, H):
        s2 = self.sq[k - 1]
        return np.exp(_log_lap(H, s2).sum(-1)) / (1.0 + _pick(s2 * H, j))

    def joint(self, j1, j2, H1, H2):
        return (self.laplace(H1, H2) / (1.0 + _pick(self.sq[0] * H1, j1))
                / (1.0 + _pick(self.sq[1] * H2, j2)))


class _Dirichlet:
    """Valid only when every cause of an individual shares one hazard, so
    that ``eps_k . H_k = a H0k``; ``H0k`` is read from the first cause."""

    def __init__(self, spec):
        self.s2 = spec.sigma ** 2
        self.p = (spec.mean_eta(1), spec.mean_eta(2))

    def laplace(self, H1, H2):
        return np.exp(_log_lap(H1[..., 0] + H2[..., 0], self.s2))

    def marginal(self, k, j, H):
        s2 = self.s2
        return self.p[k - 1][j] * np.exp(-(1.0 + 1.0 / s2) * np.log1p(s2 * H[..., 0]))

    def joint(self, j1, j2, H1, H2):
        s2 = self.s2
        base = (1.0 + s2) * np.exp(-(2.0 + 1.0 / s2) * np.log1p(s2 * (H1[..., 0] + H2[..., 0])))
        return self.p[0][j1] * self.p[1][j2] * base


_KERNELS = {
    fr.SharedGamma: _SharedGamma,
    fr.CorrelatedGamma: _CorrelatedGamma,
    fr.SharedCauseSpecific: _SharedCauseSpecific,
    fr.CorrelatedCauseSpecific: _CorrelatedCauseSpecific,
    fr.IndependentGamma: _IndependentGamma,
    fr.DirichletGamma: _Dirichlet,
}


def kernel(m: ModelSpec):
    """The frailty-expectation kernels of a (non-rescaled) model."""
    if isinstance(m.frailty, fr.DirichletGamma):
        _require_common_hazard(m)
    return _KERNELS[type(m.frailty)](m.frailty)


# ---------------------------------------------------------------- checks


def _check_index(m, k, j):
    if k not in (1, 2):
        raise DomainError(f"individual index must be 1 or 2, got {k!r}")
    L = m.hazards.n_causes(k)
    j = np.asarray(j)
    if np.any(j < 1) or np.any(j > L) or not np.issubdtype(j.dtype, np.integer):
        raise DomainError(f"cause index for individual {k} must be an integer in 1..{L}")
    return j - 1


def _check_times(*ts):
    out = []
    for t in ts:
        t = np.asarray(t, dtype=float)
        if np.any(np.isnan(t)) or np.any(t < 0):
            raise DomainError("times must be >= 0")
        out.append(t)
    return out


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


# ---------------------------------------------------------------- densities


def joint_subdensity(m: ModelSpec, t1, t2, j1, j2):
    """``f_{j1 j2}(t1, t2)``; vectorized over all four arguments."""
    t1, t2 = _check_times(t1, t2)
    i1, i2 = _check_index(m, 1, j1), _check_index(m, 2, j2)
    m = reduce_model(m)
    K = kernel(m)
    hs = m.hazards
    with np.errstate(invalid="ignore"):
        h1 = _pick(hs.hazards(1, t1), i1)
        h2 = _pick(hs.hazards(2, t2), i2)
        out = h1 * h2 * K.joint(i1, i2, hs.cumulatives(1, t1), hs.cumulatives(2, t2))
    out = np.where((h1 == 0) | (h2 == 0), 0.0, out)
    return _scalar(out)


def marginal_subdensity(m: ModelSpec, k: int, j, t):
    (t,) = _check_times(t)
    i = _check_index(m, k, j)
    m = reduce_model(m)
    hs = m.hazards
    with np.errstate(invalid="ignore"):
        h = _pick(hs.hazards(k, t), i)
        out = h * kernel(m).marginal(k, i, hs.cumulatives(k, t))
    return _scalar(np.where(h == 0, 0.0, out))


def joint_survival(m: ModelSpec, t1, t2):
    """``P(T1 > t1, T2 > t2)``."""
    t1, t2 = _check_times(t1, t2)
    m = reduce_model(m)
    hs = m.hazards
    return _scalar(kernel(m).laplace(hs.cumulatives(1, t1), hs.cumulatives(2, t2)))


def marginal_survival(m: ModelSpec, k: int, t):
    (t,) = _check_times(t)
    if k == 1:
        return joint_survival(m, t, np.zeros_like(t))
    return joint_survival(m, np.zeros_like(t), t)


# ---------------------------------------------------------------- quadrature


class _Axis:
    """Quadrature variable ``w = log1p(A_k(u))`` for one individual."""

    def __init__(self, hs: HazardSet, k: int, t: float):
        self.hs, self.k = hs, k
        self.L = hs.n_causes(k)
        self.upper = float(np.log1p(hs.total(k, t)))
        if not math.isfinite(self.upper):
            raise DomainError("times must be finite")

    def at(self, w, i):
        """Cumulative hazards at the nodes, the cause-``i`` share of the
        total hazard, and the Jacobian ``du/dw`` times the total hazard."""
        v = np.expm1(w)
        if self.L == 1:
            H = v[..., None]
            share = np.ones_like(v)
        else:
            u = total_inverse(self.hs, self.k, np.ones(self.L), v)
            H = self.hs.cumulatives(self.k, u)
            h = self.hs.hazards(self.k, u)
            with np.errstate(invalid="ignore"):
                share = _pick(h, i) / h.sum(-1)
            share = np.where(np.isfinite(share), share, _limit_share(self.hs, self.k, i))
        return H, share, np.exp(w)


def _limit_share(hs, k, i):
    # share of cause i at u -> 0+, used only where h is 0/0 or inf/inf
    u = 1e-300
    h = hs.hazards(k, np.array(u))
    with np.errstate(invalid="ignore"):
        s = h[i] / h.sum()
    return float(s) if np.isfinite(s) else 1.0 / hs.n_causes(k)


def marginal_subdist(m: ModelSpec, k: int, j: int, t: float, tol: float = TOL_1D) -> float:
    """``F_kj(t) = P(T_k <= t, J_k = j)``."""
    (t,) = _check_times(t)
    i = int(_check_index(m, k, j))
    t = float(t)
    if t == 0.0:
        return 0.0
    m = reduce_model(m)
    K = kernel(m)
    if isinstance(m.frailty, fr.DirichletGamma):
        H0 = float(m.hazards.causes(k)[0].cumulative(t))
        return float(K.p[k - 1][i] * (1.0 - fr.gamma_laplace(H0, K.s2)))
    ax = _Axis(m.hazards, k, t)

    def values(w):
        H, share, jac = ax.at(w, i)
        return share * jac * K.marginal(k, i, H)

    value, _ = integrate_1d(values, graded_breaks(ax.upper), tol=tol)
    return float(min(max(value, 0.0), 1.0))


def joint_subdist(m: ModelSpec, t1: float, t2: float, j1: int, j2: int,
                  tol: float = TOL_2D) -> float:
    """``F_{j1 j2}(t1, t2) = P(T1 <= t1, T2 <= t2, J1 = j1, J2 = j2)``."""
    t1, t2 = (float(x) for x in _check_times(t1, t2))
    i1, i2 = int(_check_index(m, 1, j1)), int(_check_index(m, 2, j2))
    if t1 == 0.0 or t2 == 0.0:
        return 0.0
    m = reduce_model(m)
    K = kernel(m)
    if isinstance(m.frailty, fr.DirichletGamma):
        H01 = float(m.hazards.causes(1)[0].cumulative(t1))
        H02 = float(m.hazards.causes(2)[0].cumulative(t2))
        L = lambda x: fr.gamma_laplace(x, K.s2)
        return float(K.p[0][i1] * K.p[1][i2] * (1.0 - L(H01) - L(H02) + L(H01 + H02)))
    ax1, ax2 = _Axis(m.hazards, 1, t1), _Axis(m.hazards, 2, t2)

    def values(w1, w2):
        H1, s1, d1 = ax1.at(w1, i1)
        H2, s2, d2 = ax2.at(w2, i2)
        return (s1 * d1) * (s2 * d2) * K.joint(i1, i2, H1, H2)

    value, _ = integrate_2d(values, graded_breaks(ax1.upper), graded_breaks(ax2.upper), tol=tol)
    return float(min(max(value, 0.0), 1.0))


def horizon(m: ModelSpec, k: int, log_tail: float = 40.0) -> float:
    """Time ``t`` at which the marginal survival of individual ``k`` is
    ``exp(-log_tail)``."""
    def excess(log_t):
        with np.errstate(over="ignore"):
            S = marginal_survival(m, k, math.exp(log_t))
        return (-math.log(S) if S > 0 else math.inf) - log_tail

    lo, hi = -5.0, 5.0
    while excess(lo) > 0:
        lo -= 5.0
    while excess(hi) < 0:
        hi += 5.0
        if hi > 700:
            raise NumericalError("no finite time reaches the requested survival tail")
    return math.exp(brentq(excess, lo, hi, xtol=1e-12))
