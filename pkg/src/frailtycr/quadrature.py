"""Panel quadrature used by the closed-form evaluators and the oracle.

Two rules live here:

* a 15-point Gauss-Kronrod rule with its embedded 7-point Gauss rule, laid
  out on a list of panels so that whole 1-D and 2-D tensor grids can be
  evaluated in one vectorized call;
* generalized Gauss-Laguerre nodes rescaled to a Gamma(shape, rate) law.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, roots_genlaguerre

from .errors import NumericalError

# QUADPACK qk15 abscissae and weights on [-1, 1] (non-negative half).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])


def _reference_rule():
    x = np.concatenate([-_XGK[:-1], _XGK[::-1]])
    wk = np.concatenate([_WGK[:-1], _WGK[::-1]])
    wg_half = np.zeros(8)
    wg_half[1::2] = _WG
    wg = np.concatenate([wg_half[:-1], wg_half[::-1]])
    return x, wk, wg


GK_X, GK_WK, GK_WG = _reference_rule()


@dataclass(frozen=True)
class PanelRule:
    """Nodes and weights of a composite Gauss-Kronrod rule.

    ``wk`` integrates with the 15-point Kronrod rule on every panel, ``wg``
    with the embedded 7-point Gauss rule (zero weight on Kronrod-only nodes).
    """

    x: np.ndarray
    wk: np.ndarray
    wg: np.ndarray

    @property
    def size(self) -> int:
        return self.x.size


def panel_rule(breaks) -> PanelRule:
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = (mid + half * GK_X).ravel()
    wk = (half * GK_WK).ravel()
    wg = (half * GK_WG).ravel()
    return PanelRule(x, wk, wg)


def bisect_breaks(breaks) -> np.ndarray:
    breaks = np.asarray(breaks, dtype=float)
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    out = np.empty(2 * breaks.size - 1)
    out[0::2] = breaks
    out[1::2] = mids
    return out


def graded_breaks(upper: float, levels: int = 14, width: float = 1.25) -> np.ndarray:
    """Breakpoints on [0, upper]: geometric grading (ratio 4) toward zero
    below ``min(upper, 1)``, then uniform panels no wider than ``width``."""
    if not upper > 0.0:
        raise ValueError("upper limit must be positive")
    head = min(upper, 1.0)
    pts = [0.0]
    pts.extend(head * 4.0 ** -np.arange(levels, 0, -1))
    pts.append(head)
    if upper > head:
        count = int(np.ceil((upper - head) / width))
        pts.extend(np.linspace(head, upper, count + 1)[1:])
    return np.asarray(pts)


def integrate_1d(values_for, breaks, tol: float = 1e-10, max_evals: int = 10**6):
    """Integrate ``values_for(x)`` (vectorized over the node array) over the
    panels in ``breaks``; panels are bisected globally until the Kronrod-Gauss
    difference drops below ``tol``.  Returns ``(value, error_estimate)``."""
    breaks = np.asarray(breaks, dtype=float)
    err = np.inf
    while True:
        rule = panel_rule(breaks)
        fx = values_for(rule.x)
        value = float(fx @ rule.wk)
        err = abs(value - float(fx @ rule.wg))
        if err <= tol:
            return value, err
        if 2 * rule.size > max_evals:
            raise NumericalError(
                f"1-D quadrature did not reach tol={tol:g}", achieved=err)
        breaks = bisect_breaks(breaks)


def integrate_2d(values_for, breaks1, breaks2, tol: float = 1e-8,
                 max_evals: int = 10**6):
    """Tensor-product version of :func:`integrate_1d`; ``values_for(x1, x2)``
    receives column/row node vectors and must return the broadcast grid."""
    breaks1 = np.asarray(breaks1, dtype=float)
    breaks2 = np.asarray(breaks2, dtype=float)
    while True:
        r1, r2 = panel_rule(breaks1), panel_rule(breaks2)
        grid = values_for(r1.x[:, None], r2.x[None, :])
        value = float(r1.wk @ grid @ r2.wk)
        err = abs(value - float(r1.wg @ grid @ r2.wg))
        if err <= tol:
            return value, err
        if 4 * r1.size * r2.size > max_evals:
            raise NumericalError(
                f"2-D quadrature did not reach tol={tol:g}", achieved=err)
        breaks1, breaks2 = bisect_breaks(breaks1), bisect_breaks(breaks2)


@lru_cache(maxsize=256)
def _genlaguerre(n: int, alpha: float):
    x, w = roots_genlaguerre(n, alpha)
    return x, w


def gamma_nodes(shape: float, rate: float, n: int):
    """Nodes ``y`` and probability weights ``p`` with
    ``sum(p * f(y)) ~ E f(Y)`` for ``Y ~ Gamma(shape, rate)``."""
    x, w = _genlaguerre(int(n), float(shape) - 1.0)
    # weights of the generalized rule integrate x^(shape-1) e^-x; normalize
    # by Gamma(shape) in log space to survive small shapes
    p = np.exp(np.log(np.where(w > 0, w, np.finfo(float).tiny)) - gammaln(shape))
    p = np.where(w > 0, p, 0.0)
    return x / rate, p
