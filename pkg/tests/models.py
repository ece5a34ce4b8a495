"""Random model and point generators shared by the test modules."""

import numpy as np

from frailtycr import frailty as fr
from frailtycr.closedform import ModelSpec
from frailtycr.hazards import Constant, Gompertz, HazardSet, Weibull, total_inverse

FAMILIES = ("shared_gamma", "correlated_gamma", "shared_cause_specific",
            "correlated_cause_specific", "dirichlet_gamma", "rescaled")


def random_hazard(rng):
    kind = rng.integers(3)
    if kind == 0:
        return Constant(rng.uniform(0.3, 2.0))
    if kind == 1:
        return Weibull(rng.uniform(0.8, 2.5), rng.uniform(0.5, 2.0))
    return Gompertz(rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0))


def _sigma(rng, size=None):
    return rng.uniform(0.3, 1.2, size)


def _correlated(rng):
    s1, s2 = _sigma(rng), _sigma(rng)
    return s1, s2, rng.uniform(0.05, 0.95) * min(s1 / s2, s2 / s1)


def random_frailty(rng, family, L1, L2):
    if family == "shared_gamma":
        return fr.SharedGamma(_sigma(rng))
    if family == "correlated_gamma":
        return fr.CorrelatedGamma(*_correlated(rng))
    if family == "shared_cause_specific":
        return fr.SharedCauseSpecific(_sigma(rng, L1))
    if family == "correlated_cause_specific":
        s1, s2, rho = zip(*[_correlated(rng) for _ in range(L1)])
        return fr.CorrelatedCauseSpecific(s1, s2, rho)
    if family == "dirichlet_gamma":
        return fr.DirichletGamma(rng.uniform(0.3, 3.0, L1), rng.uniform(0.3, 3.0, L2), _sigma(rng))
    if family == "independent_gamma":
        return fr.IndependentGamma(_sigma(rng, L1), _sigma(rng, L2))
    raise ValueError(family)


def random_model(rng, family, L1=None, L2=None):
    """A valid random model of ``family``; ``rescaled`` wraps a random base
    with ``c1, c2`` in ``[0.5, 3]``."""
    if family == "rescaled":
        base = ("shared_gamma", "correlated_gamma", "shared_cause_specific",
                "independent_gamma")[rng.integers(4)]
        m = random_model(rng, base, L1, L2)
        return ModelSpec(m.hazards, fr.Rescaled(m.frailty, rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0)))
    if L1 is None:
        L1 = int(rng.integers(1, 3))
    if L2 is None:
        L2 = L1 if "cause_specific" in family else int(rng.integers(1, 3))
    if family == "dirichlet_gamma":
        h1, h2 = random_hazard(rng), random_hazard(rng)
        hs = HazardSet((h1,) * L1, (h2,) * L2)
    else:
        hs = HazardSet(tuple(random_hazard(rng) for _ in range(L1)),
                       tuple(random_hazard(rng) for _ in range(L2)))
    return ModelSpec(hs, random_frailty(rng, family, L1, L2))


def random_point(rng, m, lo=0.1, hi=3.0):
    """Times whose total baseline cumulative hazard lies in ``[lo, hi]``,
    plus random causes."""
    hs = m.hazards
    t = [float(total_inverse(hs, k, np.ones(hs.n_causes(k)), rng.uniform(lo, hi))) for k in (1, 2)]
    j = [int(rng.integers(1, hs.n_causes(k) + 1)) for k in (1, 2)]
    return t[0], t[1], j[0], j[1]


def latent_moments(lg, H1, H2, j1=None, j2=None):
    """``E eps1_j1 eps2_j2 exp(-eps1.H1 - eps2.H2)`` straight from the latent
    form ``eps_k = W_k Y`` with independent Gamma ``Y``; ``None`` drops the
    corresponding factor.  Independent of the per-family kernels."""
    s = lg.W1.T @ np.asarray(H1, float) + lg.W2.T @ np.asarray(H2, float)
    b = lg.rate + s
    lap = np.prod((lg.rate / b) ** lg.shape)
    m1 = lg.shape / b                        # E[Y e^{-sY}] / E[e^{-sY}]
    m2 = lg.shape * (lg.shape + 1) / b ** 2  # E[Y^2 e^{-sY}] / E[e^{-sY}]
    w1 = lg.W1[j1 - 1] if j1 is not None else None
    w2 = lg.W2[j2 - 1] if j2 is not None else None
    if w1 is None and w2 is None:
        return lap
    if w1 is None or w2 is None:
        w = w1 if w2 is None else w2
        return lap * (w @ m1)
    cross = np.outer(m1, m1)
    np.fill_diagonal(cross, m2)
    return lap * (w1 @ cross @ w2)
