import math

import numpy as np
import pytest
from scipy import stats

from frailtycr import frailty as fr
from frailtycr.closedform import ModelSpec, horizon, joint_subdist, marginal_subdist
from frailtycr.errors import ParseError
from frailtycr.hazards import Constant, Gompertz, HazardSet, Weibull
from frailtycr.simulate import (Dataset, PairRecord, format_dataset, parse_dataset, read_dataset,
                                simulate_pairs, write_dataset)

from models import FAMILIES, random_model, random_point

TWO_CAUSE = ModelSpec(HazardSet((Weibull(1.5, 1.0), Constant(0.6)), (Gompertz(0.4, 0.5),)),
                      fr.SharedGamma(0.8))


@pytest.fixture(scope="module")
def big():
    return simulate_pairs(TWO_CAUSE, 100000, seed=3)


def binomial_se(p, n):
    return math.sqrt(max(p * (1 - p), 1.0 / n) / n)


def test_marginal_frequencies(big):
    n = len(big)
    for t in np.quantile(big.t1, np.linspace(0.05, 0.95, 5)):
        for j in (1, 2):
            p = np.mean((big.t1 <= t) & (big.j1 == j))
            assert abs(p - marginal_subdist(TWO_CAUSE, 1, j, t)) <= 4 * binomial_se(p, n)


def test_joint_frequencies(big):
    n = len(big)
    rng = np.random.default_rng(0)
    for _ in range(5):
        t1, t2, j1, j2 = random_point(rng, TWO_CAUSE, lo=0.3, hi=2.0)
        p = np.mean((big.t1 <= t1) & (big.t2 <= t2) & (big.j1 == j1) & (big.j2 == j2))
        assert abs(p - joint_subdist(TWO_CAUSE, t1, t2, j1, j2)) <= 4 * binomial_se(p, n)


def test_vanishing_frailty_gives_unit_exponential():
    m = ModelSpec(HazardSet((Constant(1.0),), (Constant(1.0),)), fr.SharedGamma(1e-4))
    ds = simulate_pairs(m, 20000, seed=1)
    assert abs(ds.t1.mean() - 1) < 3 * ds.t1.std() / math.sqrt(len(ds))


@pytest.mark.parametrize("family", FAMILIES + ("independent_gamma",))
def test_cause_frequencies(family):
    m = random_model(np.random.default_rng(31), family)
    n = 5000
    ds = simulate_pairs(m, n, seed=2)
    for k, J in ((1, ds.j1), (2, ds.j2)):
        T = horizon(m, k)
        for j in range(1, m.dims[k - 1] + 1):
            p = np.mean(J == j)
            assert abs(p - marginal_subdist(m, k, j, T)) <= 4 * binomial_se(p, n)


def test_shared_frailty_gives_positive_association():
    m = ModelSpec(HazardSet((Constant(1.0),), (Weibull(1.2, 1.0),)), fr.SharedGamma(1.0))
    ds = simulate_pairs(m, 10000, seed=4)
    res = stats.kendalltau(ds.t1, ds.t2, alternative="greater")
    assert res.statistic > 0 and res.pvalue < 0.01


def test_records_are_valid():
    m = random_model(np.random.default_rng(5), "correlated_cause_specific", 3, 3)
    ds = simulate_pairs(m, 2000, seed=0)
    assert len(ds) == 2000 and ds.meta["n"] == 2000 and ds.meta["seed"] == 0
    for t, j, L in ((ds.t1, ds.j1, 3), (ds.t2, ds.j2, 3)):
        assert np.all(np.isfinite(t)) and np.all(t > 0)
        assert set(np.unique(j)) <= set(range(1, L + 1))


def test_determinism():
    a = format_dataset(simulate_pairs(TWO_CAUSE, 300, seed=7))
    b = format_dataset(simulate_pairs(TWO_CAUSE, 300, seed=7))
    c = format_dataset(simulate_pairs(TWO_CAUSE, 300, seed=8))
    assert a == b and a != c


def test_prefix_stability():
    # record i only depends on (seed, i)
    a = simulate_pairs(TWO_CAUSE, 50, seed=9)
    b = simulate_pairs(TWO_CAUSE, 80, seed=9)
    np.testing.assert_array_equal(a.t1, b.t1[:50])
    np.testing.assert_array_equal(a.j2, b.j2[:50])


def test_needs_positive_n():
    with pytest.raises(ValueError):
        simulate_pairs(TWO_CAUSE, 0, seed=1)


# ---------------------------------------------------------------- CSV


def test_round_trip(tmp_path):
    ds = simulate_pairs(TWO_CAUSE, 200, seed=11)
    path = tmp_path / "d.csv"
    write_dataset(ds, path)
    back = read_dataset(path)
    for name in ("t1", "j1", "t2", "j2"):
        np.testing.assert_array_equal(getattr(back, name), getattr(ds, name))
    assert back.meta == ds.meta


def test_header_comments():
    text = format_dataset(simulate_pairs(TWO_CAUSE, 3, seed=1))
    lines = text.splitlines()
    assert lines[0].startswith("# version: ")
    assert lines[1].startswith("# model: {")
    assert "t1,j1,t2,j2" in lines
    assert len(lines) == 4 + 1 + 3


def test_empty_dataset_is_header_only(tmp_path):
    ds = Dataset.from_records([])
    assert format_dataset(ds) == "t1,j1,t2,j2\n"
    path = tmp_path / "e.csv"
    write_dataset(ds, path)
    assert len(read_dataset(path, dims=(1, 1))) == 0


def test_records_round_trip():
    recs = [PairRecord(0.5, 1, 2.0, 2), PairRecord(1e-300, 2, 3.25, 1)]
    ds = Dataset.from_records(recs)
    assert parse_dataset(format_dataset(ds)).records == recs


@pytest.mark.parametrize("text, line", [
    ("t1,j1,t2,j2\n1.0,1,1.0,1\n1.0,3,2.0,1\n", 3),
    ("t1,j1,t2,j2\n1.0,1,1.0,0\n", 2),
    ("# n: 1\nt1,j1,t2,j2\n1.0,1,-2.0,1\n", 3),
    ("t1,j1,t2,j2\n1.0,1,1.0\n", 2),
    ("t1,j1,t2,j2\n1.0,x,1.0,1\n", 2),
    ("t1,j2,t2,j1\n", 1),
    ("", 1),
])
def test_malformed_rows_name_the_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_dataset(text, dims=(2, 2))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_reserved_censoring_column_is_accepted():
    ds = parse_dataset("t1,j1,t2,j2,censored\n1.0,1,2.0,1,0\n")
    assert len(ds) == 1


def test_cause_range_from_file_header(tmp_path):
    ds = simulate_pairs(TWO_CAUSE, 5, seed=1)
    # the model in the header has a single cause for individual 2
    bad = format_dataset(ds) + "1.0,1,1.0,2\n"
    path = tmp_path / "bad.csv"
    path.write_text(bad)
    with pytest.raises(ParseError):
        read_dataset(path)
