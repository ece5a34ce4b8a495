"""Maximum-likelihood fitting of frailty and hazard parameters.

The log-likelihood of a paired dataset is the sum of the log joint
sub-densities.  Parameters are optimized by Nelder-Mead in unconstrained
coordinates: positive parameters through ``log`` (or ``softplus``), and
``rho = min(s1/s2, s2/s1) * logistic(u)`` for the correlated laws.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from . import frailty as fr
from .closedform import ModelSpec, joint_subdensity
from .errors import DomainError, ParameterError
from .hazards import FAMILIES, Constant, HazardSet
from .simulate import Dataset

log = logging.getLogger(__name__)

HAZARD_PARAMS = {"constant": ("rate",), "weibull": ("shape", "scale"), "gompertz": ("a", "c")}


# ---------------------------------------------------------------- likelihood


def _check_dims(ds: Dataset, m: ModelSpec):
    L1, L2 = m.dims
    if len(ds) and (ds.j1.min() < 1 or ds.j1.max() > L1 or ds.j2.min() < 1 or ds.j2.max() > L2):
        raise DomainError(f"dataset causes exceed model dimensions ({L1}, {L2})")


def log_likelihood_terms(ds: Dataset, m: ModelSpec) -> np.ndarray:
    _check_dims(ds, m)
    f = np.asarray(joint_subdensity(m, ds.t1, ds.t2, ds.j1, ds.j2), dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(f)


def log_likelihood(ds: Dataset, m: ModelSpec) -> float:
    """Sum of ``log f_{j1 j2}(t1, t2)`` over records, correctly rounded so
    it does not depend on record order."""
    terms = log_likelihood_terms(ds, m)
    bad = np.flatnonzero(~np.isfinite(terms) | np.isnan(terms))
    if bad.size:
        log.warning("zero or invalid density at record %d", int(bad[0]))
        return -math.inf
    return math.fsum(terms)


# ---------------------------------------------------------------- parametrization


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_inv(y):
    return y + np.log(-np.expm1(-y))


TRANSFORMS = {"log": (np.exp, np.log), "softplus": (_softplus, _softplus_inv)}

FAMILY_PARAMS = {
    "shared_gamma": lambda L1, L2: [("sigma", None)],
    "correlated_gamma": lambda L1, L2: [("sigma1", None), ("sigma2", None), ("rho", None)],
    "shared_cause_specific": lambda L1, L2: [("sigmas", L1)],
    "correlated_cause_specific": lambda L1, L2: [("sigma1", L1), ("sigma2", L1), ("rho", L1)],
    "dirichlet_gamma": lambda L1, L2: [("alpha1", L1), ("alpha2", L2), ("sigma", None)],
    "independent_gamma": lambda L1, L2: [("sigma1", L1), ("sigma2", L2)],
}


class Parametrization:
    """Maps a flat unconstrained vector to a :class:`ModelSpec`.

    Under the Dirichlet law every cause of an individual shares one
    baseline hazard, so only one hazard per individual is parametrized.
    """

    def __init__(self, family: str, hazard_families, transform: str = "log"):
        if family not in FAMILY_PARAMS:
            raise ParameterError(f"cannot fit frailty family {family!r}")
        if transform not in TRANSFORMS:
            raise ParameterError(f"unknown transform {transform!r}")
        self.family = family
        self.hazard_families = [list(g) for g in hazard_families]
        for g in self.hazard_families:
            for name in g:
                if name not in HAZARD_PARAMS:
                    raise ParameterError(f"unknown hazard family {name!r}")
        self.tied = family == "dirichlet_gamma"
        if self.tied and any(len(set(g)) != 1 for g in self.hazard_families):
            raise ParameterError("Dirichlet fits need one hazard family per individual")
        self.L1, self.L2 = (len(g) for g in self.hazard_families)
        self.transform = transform
        self._pos, self._pos_inv = TRANSFORMS[transform]
        self.frailty_layout = FAMILY_PARAMS[family](self.L1, self.L2)
        self.names = []
        for name, size in self.frailty_layout:
            self.names += [name] if size is None else [f"{name}[{i}]" for i in range(size)]
        self.n_frailty = len(self.names)
        for k, group in enumerate(self.hazard_families, start=1):
            for j, fam in enumerate(group[:1] if self.tied else group, start=1):
                self.names += [f"h{k}{j}.{p}" for p in HAZARD_PARAMS[fam]]

    @property
    def size(self):
        return len(self.names)

    # natural parameter vector <-> model
    def natural(self, m: ModelSpec) -> np.ndarray:
        spec = m.frailty.to_dict()
        out = []
        for name, size in self.frailty_layout:
            v = spec[name]
            out += [v] if size is None else list(v)
        for k, group in enumerate((m.hazards.first, m.hazards.second)):
            for hz in group[:1] if self.tied else group:
                out += list(hz.params.values())
        return np.asarray(out, dtype=float)

    def model(self, theta) -> ModelSpec:
        theta = list(np.asarray(theta, dtype=float))
        kw = {}
        for name, size in self.frailty_layout:
            n = 1 if size is None else size
            vals, theta = theta[:n], theta[n:]
            kw[name] = vals[0] if size is None else tuple(vals)
        groups = []
        for group in self.hazard_families:
            hz = []
            for fam in group[:1] if self.tied else group:
                n = len(HAZARD_PARAMS[fam])
                vals, theta = theta[:n], theta[n:]
                hz.append(FAMILIES[fam](*vals))
            groups.append(tuple(hz * len(group)) if self.tied else tuple(hz))
        return ModelSpec(HazardSet(*groups), fr.LAWS[self.family](**kw))

    def _rho_slots(self):
        """Indices of (sigma1, sigma2, rho) triples in the frailty block."""
        if self.family == "correlated_gamma":
            return [(0, 1, 2)]
        if self.family == "correlated_cause_specific":
            L = self.L1
            return [(j, L + j, 2 * L + j) for j in range(L)]
        return []

    def decode(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        theta = self._pos(x)
        for a, b, r in self._rho_slots():
            bound = min(theta[a] / theta[b], theta[b] / theta[a])
            theta[r] = bound * expit(x[r])
        return theta

    def encode(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        x = self._pos_inv(theta)
        for a, b, r in self._rho_slots():
            bound = min(theta[a] / theta[b], theta[b] / theta[a])
            x[r] = logit(theta[r] / bound)
        return x


# ---------------------------------------------------------------- initial values


def _fit_independent_hazard(fam, t, event):
    """Hazard parameters maximizing ``sum(event log h(t) - H(t))``."""
    rate = max(event.sum(), 0.5) / t.sum()
    if fam == "constant":
        return Constant(rate)
    start = {"weibull": [0.0, math.log(1.0 / max(rate, 1e-12))],
             "gompertz": [math.log(rate), math.log(0.1)]}[fam]
    cls = FAMILIES[fam]

    def nll(z):
        hz = cls(*np.exp(z))
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = -(np.log(hz.hazard(t[event])).sum() - hz.cumulative(t).sum())
        return val if np.isfinite(val) else 1e300

    res = minimize(nll, start, method="Nelder-Mead", options={"xatol": 1e-4, "fatol": 1e-6})
    return cls(*np.exp(res.x))


def auto_init(ds: Dataset, par: Parametrization, sigma_grid=None) -> np.ndarray:
    """Hazards from per-individual fits that ignore frailty, then a grid scan
    over a common frailty scale."""
    groups = []
    for k, (t, J) in enumerate(((ds.t1, ds.j1), (ds.t2, ds.j2))):
        fams = par.hazard_families[k]
        if par.tied:
            hz = _fit_independent_hazard(fams[0], t, np.ones(t.size, dtype=bool))
            groups.append(tuple(hz for _ in fams))
        else:
            groups.append(tuple(_fit_independent_hazard(f, t, J == j + 1) for j, f in enumerate(fams)))
    hs = HazardSet(*groups)
    freq = [np.bincount(J - 1, minlength=L) + 0.5 for J, L in ((ds.j1, par.L1), (ds.j2, par.L2))]

    def spec_for(s):
        if par.family == "shared_gamma":
            return fr.SharedGamma(s)
        if par.family == "correlated_gamma":
            return fr.CorrelatedGamma(s, s, 0.5)
        if par.family == "shared_cause_specific":
            return fr.SharedCauseSpecific([s] * par.L1)
        if par.family == "correlated_cause_specific":
            return fr.CorrelatedCauseSpecific([s] * par.L1, [s] * par.L1, [0.5] * par.L1)
        if par.family == "independent_gamma":
            return fr.IndependentGamma([s] * par.L1, [s] * par.L2)
        return fr.DirichletGamma(freq[0] / freq[0].sum() * par.L1,
                                 freq[1] / freq[1].sum() * par.L2, s)

    grid = sigma_grid if sigma_grid is not None else np.linspace(0.2, 2.0, 10)
    scores = [log_likelihood(ds, ModelSpec(hs, spec_for(s))) for s in grid]
    best = grid[int(np.nanargmax(scores))]
    return par.natural(ModelSpec(hs, spec_for(best)))


# ---------------------------------------------------------------- fitting


@dataclass(frozen=True)
class FitOptions:
    transform: str = "log"
    freeze_hazards: bool = False
    maxiter: int = 2000
    xatol: float = 1e-6
    fatol: float = 1e-8
    initial_step: float = 0.1
    standard_errors: bool = True
    hessian_step: float = 1e-4


@dataclass(frozen=True)
class FitResult:
    model: ModelSpec
    theta: np.ndarray
    names: tuple
    loglik: float
    init_loglik: float
    iterations: int
    evaluations: int
    converged: bool
    stderr: np.ndarray | None = None
    message: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "model": self.model.to_dict(),
            "params": dict(zip(self.names, map(float, self.theta))),
            "stderr": None if self.stderr is None else dict(zip(self.names, map(float, self.stderr))),
            "loglik": self.loglik, "init_loglik": self.init_loglik,
            "iterations": self.iterations, "evaluations": self.evaluations,
            "converged": self.converged, "message": self.message,
        }


def _hessian(fun, x, step):
    n = x.size
    H = np.empty((n, n))
    f0 = fun(x)
    E = np.eye(n) * step
    for i in range(n):
        H[i, i] = (fun(x + E[i]) - 2 * f0 + fun(x - E[i])) / step ** 2
        for j in range(i):
            H[i, j] = H[j, i] = (fun(x + E[i] + E[j]) - fun(x + E[i] - E[j])
                                 - fun(x - E[i] + E[j]) + fun(x - E[i] - E[j])) / (4 * step ** 2)
    return H


def fit_mle(ds: Dataset, family: str, hazard_families, init="auto",
            options: FitOptions = FitOptions()) -> FitResult:
    """Fit ``family`` with the given per-individual hazard families.

    ``init`` is ``"auto"``, a :class:`ModelSpec` or a natural parameter
    vector.  With ``options.freeze_hazards`` only frailty parameters move.
    """
    if isinstance(hazard_families, HazardSet):
        hazard_families = [[h.family for h in g] for g in (hazard_families.first, hazard_families.second)]
    par = Parametrization(family, hazard_families, options.transform)
    if isinstance(init, str):
        if init != "auto":
            raise ParameterError(f"unknown init {init!r}")
        theta0 = auto_init(ds, par)
    elif isinstance(init, ModelSpec):
        theta0 = par.natural(init)
    else:
        theta0 = np.asarray(init, dtype=float)
    par.model(theta0)  # validates
    x0 = par.encode(theta0)
    free = np.arange(par.size) if not options.freeze_hazards else np.arange(par.n_frailty)

    def full(z):
        x = x0.copy()
        x[free] = z
        return x

    def nll(z):
        try:
            m = par.model(par.decode(full(z)))
        except (ParameterError, ValueError):
            return math.inf
        ll = log_likelihood(ds, m)
        return -ll if math.isfinite(ll) else math.inf

    z0 = x0[free]
    simplex = np.vstack([z0, z0 + options.initial_step * np.eye(z0.size)])
    init_ll = -nll(z0)
    res = minimize(nll, z0, method="Nelder-Mead",
                   options={"xatol": options.xatol, "fatol": options.fatol,
                            "maxiter": options.maxiter, "initial_simplex": simplex})
    x = full(res.x)
    theta = par.decode(x)
    stderr = None
    if options.standard_errors and np.isfinite(res.fun):
        try:
            H = _hessian(nll, res.x, options.hessian_step)
            cov_z = np.linalg.inv(H)
            h = options.hessian_step
            J = np.column_stack([(par.decode(full(res.x + h * e)) - par.decode(full(res.x - h * e))) / (2 * h)
                                 for e in np.eye(res.x.size)])
            var = np.diag(J @ cov_z @ J.T)
            stderr = np.where(var >= 0, np.sqrt(np.abs(var)), np.nan)
        except np.linalg.LinAlgError:
            log.warning("Hessian is singular; no standard errors")
    return FitResult(par.model(theta), theta, tuple(par.names), float(-res.fun), float(init_ll),
                     int(res.nit), int(res.nfev), bool(res.success), stderr, str(res.message),
                     {"transform": options.transform, "freeze_hazards": options.freeze_hazards})
