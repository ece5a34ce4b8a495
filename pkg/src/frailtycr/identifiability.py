"""Computational evidence about which models can be told apart.

* :func:`verify_general_nonidentifiability`: hazards ``(c1 h1, h2/c2)``
  paired with the rescaled frailty give the same joint sub-density as the
  original model.
* :func:`verify_dirichlet_invariance`: in the Dirichlet-Gamma model with a
  common hazard per individual, ``alpha_k -> c_k alpha_k`` leaves every
  joint sub-distribution unchanged.
* :func:`distinguishability_scan`: maximal difference of joint
  sub-distributions between two parameter settings on a time grid.

These are finite-grid checks, i.e. necessary-condition evidence only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import frailty as fr
from .closedform import ModelSpec, joint_subdist, marginal_subdist
from .errors import CapabilityError, DomainError, ParameterError, StructureError
from .hazards import HazardSet, total_inverse
from .oracle import mc_subdensity, quad_subdensity

DEFAULT_THRESHOLD = 1e-4
EVIDENCE_NOTE = "finite-grid numerical evidence, not a proof"


@dataclass
class Report:
    mode: str
    max_diff: float
    threshold: float
    passed: bool
    points: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"mode": self.mode, "max_diff": self.max_diff, "threshold": self.threshold,
                "pass": self.passed, "note": EVIDENCE_NOTE, **self.extra, "points": self.points}


def default_grid(hs: HazardSet, n: int = 8, lo: float = 0.1, hi: float = 5.0):
    """Times at which each individual's total baseline cumulative hazard runs
    over ``geomspace(lo, hi, n)``."""
    levels = np.geomspace(lo, hi, n)
    return tuple(np.atleast_1d(total_inverse(hs, k, np.ones(hs.n_causes(k)), levels))
                 for k in (1, 2))


def _pairs(dims):
    L1, L2 = dims
    return [(a, b) for a in range(1, L1 + 1) for b in range(1, L2 + 1)]


def _density(m, t1, t2, j1, j2, method, n, seed):
    if method == "quad":
        return quad_subdensity(m, t1, t2, j1, j2), 0.0
    return mc_subdensity(m, t1, t2, j1, j2, n=n, seed=seed)


def verify_general_nonidentifiability(base: ModelSpec, c1: float, c2: float, grid=None,
                                      method: str = "auto", n: int = 10**5, seed: int = 0,
                                      broken: bool = False, tol: float = 1e-6) -> Report:
    """Compare ``f`` of ``base`` with ``f`` of the tilde model.

    With ``broken=True`` the hazards are rescaled but the frailty is not:
    the control that must fail.
    """
    if not (c1 > 0 and c2 > 0):
        raise ParameterError("c1 and c2 must be positive")
    if isinstance(base.frailty, fr.DirichletGamma) or not fr.latent_form(base.frailty, *base.dims).exact:
        raise StructureError("the base frailty needs a latent Gamma density")
    hs = base.hazards
    tilde_h = HazardSet(tuple(h.scaled(c1) for h in hs.first),
                        tuple(h.scaled(1.0 / c2) for h in hs.second))
    tilde_f = base.frailty if broken else fr.Rescaled(base.frailty, c1, c2)
    tilde = ModelSpec(tilde_h, tilde_f)
    if method == "auto":
        try:
            quad_subdensity(base, 1.0, 1.0, 1, 1)
            quad_subdensity(tilde, 1.0, 1.0, 1, 1)
            method = "quad"
        except CapabilityError:
            method = "mc"
    g1, g2 = grid if grid is not None else default_grid(hs, n=5)
    points, worst, passed = [], 0.0, True
    for t1 in g1:
        for t2 in g2:
            for j1, j2 in _pairs(base.dims):
                f, se = _density(base, t1, t2, j1, j2, method, n, seed)
                g, se2 = _density(tilde, t1, t2, j1, j2, method, n, seed)
                diff = abs(f - g)
                allowed = max(tol, 4.0 * float(np.hypot(se, se2)))
                passed &= diff <= allowed
                worst = max(worst, diff)
                points.append({"t1": float(t1), "t2": float(t2), "j1": j1, "j2": j2,
                               "f": f, "f_tilde": g, "diff": diff, "allowed": allowed})
    return Report("general", worst, tol, bool(passed), points,
                  {"c1": c1, "c2": c2, "method": method, "broken_pairing": broken})


def verify_dirichlet_invariance(alpha1, alpha2, sigma: float, c1: float, c2: float,
                                hazards: HazardSet, grid=None, sigma_tilde: float | None = None,
                                tol: float = 1e-12) -> Report:
    """Joint sub-distributions under ``alpha`` and ``(c1 alpha1, c2 alpha2)``.
    Passing ``sigma_tilde`` changes sigma in the second model as well, which
    is the control that must fail."""
    if not (c1 > 0 and c2 > 0):
        raise ParameterError("c1 and c2 must be positive")
    for k in (1, 2):
        if not hazards.common_hazard(k):
            raise StructureError(f"individual {k} must have one hazard shared by all causes")
    a1, a2 = np.asarray(alpha1, dtype=float), np.asarray(alpha2, dtype=float)
    m = ModelSpec(hazards, fr.DirichletGamma(a1, a2, sigma))
    s2 = sigma if sigma_tilde is None else sigma_tilde
    mt = ModelSpec(hazards, fr.DirichletGamma(c1 * a1, c2 * a2, s2))
    g1, g2 = grid if grid is not None else default_grid(hazards, n=10)
    points, worst = [], 0.0
    for t1 in g1:
        for t2 in g2:
            for j1, j2 in _pairs(m.dims):
                F = joint_subdist(m, t1, t2, j1, j2)
                G = joint_subdist(mt, t1, t2, j1, j2)
                worst = max(worst, abs(F - G))
                points.append({"t1": float(t1), "t2": float(t2), "j1": j1, "j2": j2,
                               "F": F, "F_tilde": G, "diff": abs(F - G)})
    return Report("dirichlet", worst, tol, worst <= tol, points,
                  {"c1": c1, "c2": c2, "sigma": sigma, "sigma_tilde": s2})


def distinguishability_scan(m: ModelSpec, m2: ModelSpec, grid=None,
                            threshold: float = DEFAULT_THRESHOLD) -> Report:
    """Max over the grid and cause pairs of ``|F - F'|``; ``passed`` means the
    two settings are separated by more than ``threshold``.  Marginal
    differences are reported separately."""
    if m.dims != m2.dims:
        raise DomainError(f"cause counts differ: {m.dims} vs {m2.dims}")
    if type(m.frailty) is not type(m2.frailty):
        raise DomainError("both models must use the same frailty family")
    g1, g2 = grid if grid is not None else default_grid(m.hazards)
    points, worst = [], 0.0
    for t1 in g1:
        for t2 in g2:
            for j1, j2 in _pairs(m.dims):
                F = joint_subdist(m, t1, t2, j1, j2)
                G = joint_subdist(m2, t1, t2, j1, j2)
                worst = max(worst, abs(F - G))
                points.append({"t1": float(t1), "t2": float(t2), "j1": j1, "j2": j2,
                               "F": F, "F_prime": G, "diff": abs(F - G)})
    marg = 0.0
    for k, ts in ((1, g1), (2, g2)):
        for j in range(1, m.hazards.n_causes(k) + 1):
            for t in ts:
                marg = max(marg, abs(marginal_subdist(m, k, j, t) - marginal_subdist(m2, k, j, t)))
    return Report("scan", worst, threshold, worst > threshold, points,
                  {"marginal_max_diff": marg, "joint_max_diff": worst})
