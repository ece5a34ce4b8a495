"""Brute-force reference values computed directly in frailty space.

Nothing here uses the analytic frailty expectations of ``closedform``.  The
joint sub-distribution is the frailty average of the product of the two
conditional sub-distributions

    F_kj(t | eps_k) = int_0^t h_kj(u) eps_kj exp(-sum_j' eps_kj' H_kj'(u)) du,

either by Gauss-Laguerre quadrature over the Gamma latents (``quad_*``) or
by Monte Carlo over draws of the real samplers (``mc_*``).
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from . import frailty as fr
from .closedform import ModelSpec
from .errors import CapabilityError, DomainError, NumericalError
from .hazards import HazardSet, total_inverse
from .quadrature import gamma_nodes

MAX_LATENT_DIM = 3
MC_CHUNK = 1 << 14


# ---------------------------------------------------------------- conditional


def conditional_subdist(hs: HazardSet, k: int, j: int, t: float, eps, tol: float = 1e-12):
    """``F_kj(t | eps)`` for each row of ``eps`` (shape ``(N, L_k)``), by
    adaptive time quadrature."""
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    if eps.shape[1] != hs.n_causes(k):
        raise DomainError(f"expected {hs.n_causes(k)} frailty components")
    if t <= 0:
        return np.zeros(eps.shape[0])
    i = j - 1
    causes = hs.causes(k)

    def integrand(u):
        H = np.array([hz.cumulative(u) for hz in causes])
        with np.errstate(over="ignore"):
            return causes[i].hazard(u) * eps[:, i] * np.exp(-(eps @ H))

    # the integrand may be sharply peaked near 0 for large frailties; seed
    # the adaptive rule with geometric breakpoints
    points = t * 2.0 ** -np.arange(1, 40)
    value, err = quad_vec(integrand, 0.0, t, epsabs=tol, epsrel=0.0, norm="max",
                          points=points, limit=20000)
    return np.clip(value, 0.0, 1.0)


# ---------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class _Split:
    """Latents shared by both individuals and private to each."""

    shared: np.ndarray
    own1: np.ndarray
    own2: np.ndarray

    @property
    def effective_dim(self):
        return self.shared.size + max(self.own1.size, self.own2.size)


def _split(lg: fr.LinearGamma) -> _Split:
    used1 = np.any(lg.W1 != 0, axis=0)
    used2 = np.any(lg.W2 != 0, axis=0)
    idx = np.arange(lg.dim)
    return _Split(idx[used1 & used2], idx[used1 & ~used2], idx[used2 & ~used1])


def _tensor(lg, latents, n):
    """Tensor-product Gamma nodes for the listed latents."""
    if latents.size == 0:
        return np.zeros((1, 0)), np.ones(1)
    per = [gamma_nodes(lg.shape[i], lg.rate[i], n) for i in latents]
    Y = np.array(list(itertools.product(*[y for y, _ in per])))
    P = np.prod(np.array(list(itertools.product(*[p for _, p in per]))), axis=1)
    return Y, P


def _latent_average(lg, split, n, g1, g2):
    """``E[g1(eps1) g2(eps2)]`` on ``n`` nodes per latent; ``g2`` may be None."""
    Ys, Ps = _tensor(lg, split.shared, n)
    total = np.ones(Ps.size)
    for W, own, g in ((lg.W1, split.own1, g1), (lg.W2, split.own2, g2)):
        if g is None:
            continue
        Yp, Pp = _tensor(lg, own, n)
        eps = (Ys @ W[:, split.shared].T)[:, None, :] + (Yp @ W[:, own].T)[None, :, :]
        vals = g(eps.reshape(-1, W.shape[0])).reshape(Ps.size, Pp.size)
        total = total * (vals @ Pp)
    return float(total @ Ps)


def _latent_setup(m: ModelSpec):
    lg = fr.latent_form(m.frailty, *m.dims)
    if not lg.exact and not all(m.hazards.common_hazard(k) for k in (1, 2)):
        raise CapabilityError(
            "Dirichlet frailty with cause-dependent hazards: use the Monte Carlo oracle")
    split = _split(lg)
    if split.effective_dim > MAX_LATENT_DIM:
        raise CapabilityError(
            f"latent dimension {split.effective_dim} exceeds {MAX_LATENT_DIM}: "
            "use the Monte Carlo oracle")
    return lg, split


def _converge(fn, tol, n0=8, n_max=256):
    n = n0
    prev = fn(n)
    while n < n_max:
        n *= 2
        cur = fn(n)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise NumericalError("Gauss-Laguerre oracle did not converge", achieved=abs(cur - prev))


def quad_joint_subdist(m: ModelSpec, t1: float, t2: float, j1: int, j2: int,
                       tol: float = 1e-9) -> float:
    """Oracle for ``F_{j1 j2}(t1, t2)`` by Gauss-Laguerre quadrature over the
    Gamma latents (effective dimension at most 3)."""
    lg, split = _latent_setup(m)
    if t1 <= 0 or t2 <= 0:
        return 0.0
    g1 = lambda e: conditional_subdist(m.hazards, 1, j1, t1, e, tol=tol * 1e-2)
    g2 = lambda e: conditional_subdist(m.hazards, 2, j2, t2, e, tol=tol * 1e-2)
    return _converge(lambda n: _latent_average(lg, split, n, g1, g2), tol)


def quad_marginal_subdist(m: ModelSpec, k: int, j: int, t: float, tol: float = 1e-10) -> float:
    lg, split = _latent_setup(m)
    if t <= 0:
        return 0.0
    if k == 2:
        lg = fr.LinearGamma(lg.shape, lg.rate, lg.W2, lg.W1, lg.exact)
        split = _Split(split.shared, split.own2, split.own1)
    g = lambda e: conditional_subdist(m.hazards, k, j, t, e, tol=tol * 1e-2)
    return _converge(lambda n: _latent_average(lg, split, n, g, None), tol)


def _density_factor(hs, k, j, t, eps):
    H = hs.cumulatives(k, t)
    h = hs.causes(k)[j - 1].hazard(t)
    with np.errstate(invalid="ignore"):
        out = h * eps[:, j - 1] * np.exp(-(eps @ H))
    return np.where(h == 0, 0.0, out)


def quad_subdensity(m: ModelSpec, t1: float, t2: float, j1: int, j2: int,
                    tol: float = 1e-12) -> float:
    """Oracle for ``f_{j1 j2}(t1, t2)`` by Gauss-Laguerre quadrature."""
    lg, split = _latent_setup(m)
    g1 = lambda e: _density_factor(m.hazards, 1, j1, t1, e)
    g2 = lambda e: _density_factor(m.hazards, 2, j2, t2, e)
    return _converge(lambda n: _latent_average(lg, split, n, g1, g2), tol)


# ---------------------------------------------------------------- Monte Carlo


class _TimeRule:
    """Fixed composite Gauss-Legendre rule on ``[0, t]`` for the conditional
    sub-distribution.  Breakpoints sit where the unit-frailty total
    cumulative hazard halves, so every frailty level is resolved."""

    def __init__(self, hs: HazardSet, k: int, t: float, levels: int = 45, order: int = 10):
        L = hs.n_causes(k)
        A = float(hs.total(k, t))
        v = A * 2.0 ** -np.arange(levels + 1)
        u = np.atleast_1d(total_inverse(hs, k, np.ones(L), v))
        edges = np.concatenate([[0.0], u[::-1]])
        x, w = np.polynomial.legendre.leggauss(order)
        a, b = edges[:-1, None], edges[1:, None]
        self.u = (0.5 * (a + b) + 0.5 * (b - a) * x).ravel()
        self.w = (0.5 * (b - a) * w).ravel()
        self.H = hs.cumulatives(k, self.u)          # (M, L)
        self.h = hs.hazards(k, self.u)              # (M, L)

    def subdist(self, j, eps):
        with np.errstate(over="ignore"):
            return eps[:, j - 1] * (np.exp(-(eps @ self.H.T)) @ (self.h[:, j - 1] * self.w))


def _threads(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("FRAILTY_CR_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _mc(m: ModelSpec, n: int, seed: int, values, workers=None):
    if n < 1000:
        raise DomainError("Monte Carlo oracle needs n >= 1000")
    L1, L2 = m.dims
    sizes = [MC_CHUNK] * (n // MC_CHUNK) + ([n % MC_CHUNK] if n % MC_CHUNK else [])

    def run(c):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), c]))
        draw = fr.sample(m.frailty, L1, L2, rng, size=sizes[c])
        x = values(draw)
        return x.sum(), np.square(x).sum()

    nthreads = _threads(workers)
    if nthreads == 1:
        parts = [run(c) for c in range(len(sizes))]
    else:
        with ThreadPoolExecutor(nthreads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    s = math.fsum(p[0] for p in parts)
    ss = math.fsum(p[1] for p in parts)
    mean = s / n
    var = max(ss / n - mean * mean, 0.0) * n / (n - 1)
    return mean, math.sqrt(var / n)


def mc_joint_subdist(m: ModelSpec, t1: float, t2: float, j1: int, j2: int,
                     n: int = 10**6, seed: int = 0, workers=None):
    """Monte Carlo estimate and standard error of ``F_{j1 j2}(t1, t2)``.
    The result depends on ``(n, seed)`` only, not on ``workers``."""
    if t1 <= 0 or t2 <= 0:
        return 0.0, 0.0
    r1 = _TimeRule(m.hazards, 1, t1)
    r2 = _TimeRule(m.hazards, 2, t2)
    return _mc(m, n, seed, lambda d: r1.subdist(j1, d.eps1) * r2.subdist(j2, d.eps2), workers)


def mc_subdensity(m: ModelSpec, t1: float, t2: float, j1: int, j2: int,
                  n: int = 10**6, seed: int = 0, workers=None):
    """Monte Carlo estimate and standard error of ``f_{j1 j2}(t1, t2)``."""
    hs = m.hazards
    return _mc(m, n, seed, lambda d: _density_factor(hs, 1, j1, t1, d.eps1)
               * _density_factor(hs, 2, j2, t2, d.eps2), workers)
