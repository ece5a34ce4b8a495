import numpy as np
import pytest

from frailtycr import frailty as fr
from frailtycr.closedform import ModelSpec, marginal_subdist
from frailtycr.errors import DomainError, ParameterError, StructureError
from frailtycr.hazards import Constant, Gompertz, HazardSet, Weibull
from frailtycr.identifiability import (default_grid, distinguishability_scan,
                                       verify_dirichlet_invariance,
                                       verify_general_nonidentifiability)

WEIBULL_2x2 = HazardSet((Weibull(1.5, 1.0), Weibull(0.9, 2.0)), (Weibull(2.0, 1.2), Weibull(1.2, 0.8)))
INDEP = ModelSpec(WEIBULL_2x2, fr.IndependentGamma([0.7, 1.1], [0.5, 0.9]))
COMMON = HazardSet((Weibull(1.5, 1.0),) * 2, (Gompertz(0.5, 0.4),) * 2)
WEIBULL_1x1 = HazardSet((Weibull(1.5, 1.0),), (Weibull(1.5, 1.0),))


def test_identity_rescaling():
    r = verify_general_nonidentifiability(INDEP, 1.0, 1.0)
    assert r.passed and r.max_diff <= 1e-12


def test_rescaled_pair_has_the_same_density():
    r = verify_general_nonidentifiability(INDEP, 2.0, 3.0)
    assert r.passed and r.extra["method"] == "quad"
    assert len(r.points) == 25 * 4
    assert r.max_diff <= 1e-6


def test_rescaled_pair_monte_carlo_route():
    grid = (np.array([0.5, 1.0]), np.array([0.7]))
    r = verify_general_nonidentifiability(INDEP, 2.0, 3.0, grid=grid, method="mc", n=20000)
    assert r.passed


def test_broken_pairing_fails():
    r = verify_general_nonidentifiability(INDEP, 2.0, 3.0, broken=True)
    assert not r.passed and r.max_diff > 1e-3


@pytest.mark.parametrize("c1, c2", [(0.0, 1.0), (1.0, -2.0)])
def test_rescaling_constants_must_be_positive(c1, c2):
    with pytest.raises(ParameterError):
        verify_general_nonidentifiability(INDEP, c1, c2)
    with pytest.raises(ParameterError):
        verify_dirichlet_invariance([1, 2], [3, 1], 0.8, c1, c2, COMMON)


def test_general_construction_needs_latent_density():
    m = ModelSpec(COMMON, fr.DirichletGamma([1, 2], [3, 1], 0.8))
    with pytest.raises(StructureError):
        verify_general_nonidentifiability(m, 2.0, 3.0)


def test_dirichlet_alpha_scaling():
    r = verify_dirichlet_invariance([1, 2], [3, 1], 0.8, 2.0, 0.5, COMMON)
    assert r.passed and r.max_diff < 1e-12
    assert len(r.points) == 100 * 4


def test_dirichlet_identity_is_bitwise():
    r = verify_dirichlet_invariance([1, 2], [3, 1], 0.8, 1.0, 1.0, COMMON)
    assert r.max_diff == 0.0


@pytest.mark.parametrize("c1, c2", [(3.0, 3.0), (0.1, 7.0), (1.5, 1.0)])
def test_dirichlet_invariance_for_other_constants(c1, c2):
    assert verify_dirichlet_invariance([0.5, 1.0], [2.0, 1.0], 1.2, c1, c2, COMMON).passed


def test_dirichlet_sigma_control_fails():
    r = verify_dirichlet_invariance([1, 2], [3, 1], 0.8, 2.0, 0.5, COMMON, sigma_tilde=0.9)
    assert not r.passed and r.max_diff > 1e-3


def test_dirichlet_needs_common_hazard():
    with pytest.raises(StructureError):
        verify_dirichlet_invariance([1, 2], [3, 1], 0.8, 2.0, 0.5, WEIBULL_2x2)


def test_shared_gamma_sigma_is_distinguishable():
    r = distinguishability_scan(ModelSpec(WEIBULL_1x1, fr.SharedGamma(0.5)),
                                ModelSpec(WEIBULL_1x1, fr.SharedGamma(0.8)))
    assert r.passed and r.max_diff > 1e-3
    assert len(r.points) == 64


def test_correlation_shows_only_in_joint_values():
    a = ModelSpec(WEIBULL_1x1, fr.CorrelatedGamma(0.8, 0.9, 0.3))
    b = ModelSpec(WEIBULL_1x1, fr.CorrelatedGamma(0.8, 0.9, 0.6))
    r = distinguishability_scan(a, b)
    assert r.passed and r.extra["joint_max_diff"] > 1e-4
    assert r.extra["marginal_max_diff"] <= 1e-10


def test_identical_settings_are_not_separated():
    m = ModelSpec(WEIBULL_2x2, fr.SharedCauseSpecific([0.5, 0.9]))
    r = distinguishability_scan(m, m)
    assert not r.passed and r.max_diff <= 1e-12


def test_marginals_do_not_depend_on_rho():
    hs = HazardSet((Weibull(1.5, 1.0), Constant(0.5)), (Gompertz(0.3, 0.6),))
    rhos = np.linspace(0.01, 0.99, 10) * 0.8 / 1.1
    for k, j, t in ((1, 1, 0.7), (1, 2, 2.0), (2, 1, 1.3)):
        vals = [marginal_subdist(ModelSpec(hs, fr.CorrelatedGamma(0.8, 1.1, r)), k, j, t) for r in rhos]
        assert max(vals) - min(vals) <= 1e-12


def test_scan_rejects_mismatched_models():
    a = ModelSpec(WEIBULL_1x1, fr.SharedGamma(0.5))
    with pytest.raises(DomainError):
        distinguishability_scan(a, ModelSpec(WEIBULL_2x2, fr.SharedGamma(0.5)))
    with pytest.raises(DomainError):
        distinguishability_scan(a, ModelSpec(WEIBULL_1x1, fr.CorrelatedGamma(0.5, 0.5, 0.5)))


def test_default_grid_spans_cumulative_hazard_range():
    g1, g2 = default_grid(WEIBULL_2x2)
    A1 = WEIBULL_2x2.total(1, g1)
    np.testing.assert_allclose(A1, np.geomspace(0.1, 5, 8), rtol=1e-12)
    assert g2.size == 8


def test_report_json_shape():
    d = verify_dirichlet_invariance([1, 2], [3, 1], 0.8, 2.0, 0.5, COMMON).to_dict()
    assert {"mode", "max_diff", "threshold", "pass", "points", "note"} <= set(d)
    assert d["mode"] == "dirichlet" and d["pass"] is True
