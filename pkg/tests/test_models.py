import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from secoclust.data import rank_matrix
from secoclust.models import (
    ModelError,
    NestedModelSpec,
    load_specs,
    norm_cdf,
    sample_ai_blocks,
    sample_logistic,
    sample_nested_logistic,
    seco_nested_hr,
    seco_nested_logistic,
    stdf_hr,
    stdf_logistic,
    theta_hr,
    theta_model,
)
from secoclust.tail import ext_coeff_eks, ext_corr, seco_pair

mpmath = pytest.importorskip("mpmath")

# reference values computed with mpmath at 50 significant digits
FROZEN_SECO_LOGISTIC = 0.09623274586888459695572384  # (0.95, 0.4, 0.6)
FROZEN_THETA_HR_1 = 1.382924922548026207275409  # 2 Phi(1/2)
FROZEN_SECO_HR = 0.003733615261679563009210738  # (6, 1, 1)
FROZEN_SECO_HR_ASYM = 0.004026654981706902387504644  # (6, 0.5, 3)


def test_norm_cdf_against_mpmath():
    mpmath.mp.dps = 40
    for x in np.linspace(-8, 8, 1000):
        ref = float(mpmath.ncdf(mpmath.mpf(float(x))))
        assert abs(norm_cdf(float(x)) - ref) <= 1e-15
    assert norm_cdf(math.inf) == 1.0 and norm_cdf(-math.inf) == 0.0


def test_frozen_closed_forms():
    assert abs(seco_nested_logistic(0.95, 0.4, 0.6) - FROZEN_SECO_LOGISTIC) <= 1e-12
    assert abs(theta_hr(1.0) - FROZEN_THETA_HR_1) <= 1e-12
    assert abs(seco_nested_hr(6.0, 1.0, 1.0) - FROZEN_SECO_HR) <= 1e-12
    assert abs(seco_nested_hr(6.0, 0.5, 3.0) - FROZEN_SECO_HR_ASYM) <= 1e-12
    assert abs(stdf_logistic([1, 1], 0.5) - math.sqrt(2)) <= 1e-15


def test_closed_forms_match_mpmath_independently():
    mpmath.mp.dps = 50
    a0, aa, ab = (mpmath.mpf(v) for v in ("0.97", "0.3", "0.8"))
    ref = 2 ** aa + 2 ** ab - (2 ** (aa / a0) + 2 ** (ab / a0)) ** a0
    assert abs(seco_nested_logistic(0.97, 0.3, 0.8) - float(ref)) <= 1e-12
    l0, la, lb = mpmath.mpf("6.5"), mpmath.mpf("0.7"), mpmath.mpf("2.2")
    ta, tb = 2 * mpmath.ncdf(la / 2), 2 * mpmath.ncdf(lb / 2)
    r = mpmath.log(ta / tb) / l0
    ref = ta + tb - (ta * mpmath.ncdf(l0 / 2 + r) + tb * mpmath.ncdf(l0 / 2 - r))
    assert abs(seco_nested_hr(6.5, 0.7, 2.2) - float(ref)) <= 1e-12


@pytest.mark.parametrize("alpha", [0.05, 0.3, 0.7, 1.0])
def test_logistic_stdf_axioms(alpha):
    assert stdf_logistic([1, 0, 0], alpha) == 1.0
    assert stdf_logistic([0, 0], alpha) == 0.0
    assert stdf_logistic([1, 1, 1], 1.0) == 3.0


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(0, 50), min_size=1, max_size=6),
    st.floats(0.01, 1.0),
    st.floats(0.1, 10),
)
def test_logistic_stdf_properties(x, alpha, c):
    val = stdf_logistic(x, alpha)
    assert max(x) - 1e-9 <= val <= sum(x) + 1e-9
    assert stdf_logistic([c * v for v in x], alpha) == pytest.approx(c * val, rel=1e-9, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 50), st.floats(0.01, 50), st.floats(0.01, 20), st.floats(0.1, 10))
def test_hr_stdf_properties(x1, x2, lam, c):
    val = stdf_hr((x1, x2), lam)
    assert max(x1, x2) - 1e-9 <= val <= x1 + x2 + 1e-9
    assert stdf_hr((c * x1, c * x2), lam) == pytest.approx(c * val, rel=1e-9)
    assert stdf_hr((x2, x1), lam) == pytest.approx(val, rel=1e-12)


def test_hr_edges():
    assert stdf_hr((2.0, 0.0), 1.0) == 2.0
    assert stdf_hr((1.0, 1.0), math.inf) == 2.0
    assert stdf_hr((1.0, 1.0), 1e-8) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ModelError):
        stdf_hr((0.0, 0.0), 1.0)
    with pytest.raises(ModelError):
        theta_hr(0.0)


def test_nested_logistic_edges():
    # child equal to mother: no extra dependence gained by merging
    assert seco_nested_logistic(1.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ModelError):
        seco_nested_logistic(0.5, 0.6, 0.4)


class TestSpec:
    def test_validation(self):
        with pytest.raises(ModelError):
            NestedModelSpec("logistic", 0.5, (0.6,), (2,))
        with pytest.raises(ModelError):
            NestedModelSpec("hr", 6.0, (1.0,), (3,))
        with pytest.raises(ModelError):
            NestedModelSpec("frank", 0.5, (0.4,), (2,))
        with pytest.raises(ModelError):
            NestedModelSpec("logistic", 0.5, (0.4,), (2, 2))

    def test_alias_and_roundtrip(self):
        spec = NestedModelSpec("Gumbel", 0.9, (0.3, 0.5), (2, 3))
        assert spec.family == "logistic"
        assert NestedModelSpec.from_dict(spec.to_dict()) == spec
        assert (spec.d, spec.q) == (2, 5)

    def test_load_specs(self, tmp_path):
        spec = NestedModelSpec("logistic", 0.9, (0.3,), (2,))
        (tmp_path / "one.json").write_text(json.dumps(spec.to_dict()))
        (tmp_path / "many.json").write_text(json.dumps([spec.to_dict()] * 3))
        (tmp_path / "bad.json").write_text("{oops")
        assert load_specs(tmp_path / "one.json") == [spec]
        assert len(load_specs(tmp_path / "many.json")) == 3
        with pytest.raises(ModelError):
            load_specs(tmp_path / "bad.json")
        (tmp_path / "missing.json").write_text(json.dumps({"family": "logistic"}))
        with pytest.raises(ModelError):
            load_specs(tmp_path / "missing.json")


def test_theta_model():
    spec = NestedModelSpec("logistic", 0.95, (0.4, 0.6), (2, 2))
    assert theta_model(spec, [0]) == pytest.approx(2 ** 0.4, abs=1e-15)
    pair = theta_model(spec, [0]) + theta_model(spec, [1]) - theta_model(spec, [0, 1])
    assert pair == pytest.approx(seco_nested_logistic(0.95, 0.4, 0.6), abs=1e-12)
    hr = NestedModelSpec("hr", 6.0, (1.0, 1.0), (2, 2))
    pair = theta_model(hr, [0]) + theta_model(hr, [1]) - theta_model(hr, [0, 1])
    assert pair == pytest.approx(seco_nested_hr(6.0, 1.0, 1.0), abs=1e-12)
    with pytest.raises(ModelError):
        theta_model(spec, [2])


class TestSamplers:
    def test_uniform_margins(self):
        ds = sample_logistic(20000, 3, 0.4, seed=1)
        assert np.all((ds.values > 0) & (ds.values < 1))
        for c in range(3):
            col = np.sort(ds.values[:, c])
            ks = np.max(np.abs(col - (np.arange(1, col.size + 1) / col.size)))
            assert ks < 0.02

    def test_deterministic(self):
        a = sample_logistic(5000, 2, 0.5, seed=9).values
        b = sample_logistic(5000, 2, 0.5, seed=9).values
        c = sample_logistic(5000, 2, 0.5, seed=10).values
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_prefix_stable_across_n(self):
        a = sample_logistic(5000, 2, 0.5, seed=9).values
        b = sample_logistic(9000, 2, 0.5, seed=9).values
        assert np.array_equal(a[:4096], b[:4096])

    def test_strong_dependence(self):
        ds = sample_logistic(20000, 2, 0.01, seed=2)
        assert ext_corr(rank_matrix(ds), 0, 1, 200) >= 0.95

    def test_independence(self):
        ds = sample_logistic(20000, 2, 1.0, seed=2)
        assert ext_coeff_eks(rank_matrix(ds), [0, 1], 200) == pytest.approx(2.0, abs=0.15)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
    def test_theta_matches_closed_form(self, alpha):
        ds = sample_logistic(20000, 2, alpha, seed=4)
        assert abs(ext_coeff_eks(rank_matrix(ds), [0, 1], 200) - 2 ** alpha) <= 0.1

    def test_nested_seco(self):
        spec = NestedModelSpec("logistic", 0.95, (0.4, 0.6), (2, 2))
        ds = sample_nested_logistic(20000, spec, seed=7)
        est = seco_pair(rank_matrix(ds), ds.layout, 0, 1, 200)
        assert abs(est - seco_nested_logistic(0.95, 0.4, 0.6)) <= 0.1

    def test_single_block_equals_nested(self):
        spec = NestedModelSpec("logistic", 0.8, (0.3, 0.5), (2, 2))
        ds, truth = sample_ai_blocks(3000, [spec], seed=3)
        assert np.array_equal(ds.values, sample_nested_logistic(3000, spec, seed=3).values)
        assert truth.clusters == ((0, 1),)

    def test_blocks_independent(self):
        spec = NestedModelSpec("logistic", 0.5, (0.2,), (2,))
        ds, truth = sample_ai_blocks(20000, [spec, spec], seed=8)
        assert truth.n_clusters == 2
        assert abs(seco_pair(rank_matrix(ds), ds.layout, 0, 1, 200)) <= 0.1

    def test_hr_sampling_unsupported(self):
        with pytest.raises(ModelError):
            sample_nested_logistic(10, NestedModelSpec("hr", 6.0, (1.0,), (2,)), seed=0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_closed_form_seco_bounds_logistic(a0, fa, fb):
    aa, ab = a0 * fa, a0 * fb
    s = seco_nested_logistic(a0, aa, ab)
    assert -1e-12 <= s <= min(2 ** aa, 2 ** ab) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 20), st.floats(0.05, 20), st.floats(0.05, 20))
def test_closed_form_seco_bounds_hr(l0, la, lb):
    s = seco_nested_hr(l0, la, lb)
    assert -1e-12 <= s <= min(theta_hr(la), theta_hr(lb)) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 1.0), st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3))
def test_adding_a_group_never_decreases_closed_form_seco(a0, fracs):
    spec = NestedModelSpec("logistic", a0, tuple(a0 * f for f in fracs), (2, 2, 2))

    def seco(groups):
        return sum(theta_model(spec, [g]) for g in groups) - theta_model(spec, groups)

    assert seco([0, 1, 2]) >= seco([0, 1]) - 1e-12


def _copula_sup_distance(n, alpha, seed):
    ds = sample_logistic(n, 2, alpha, seed=seed)
    u = rank_matrix(ds).ranks / n
    worst = 0.0
    for x in np.linspace(0.1, 0.9, 9):
        for y in np.linspace(0.1, 0.9, 9):
            emp = np.mean((u[:, 0] <= x) & (u[:, 1] <= y))
            true = math.exp(-stdf_logistic([-math.log(x), -math.log(y)], alpha))
            worst = max(worst, abs(emp - true))
    return worst


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_sampler_copula_converges(alpha):
    small = _copula_sup_distance(500, alpha, seed=1)
    large = _copula_sup_distance(50000, alpha, seed=1)
    assert large < small
    assert large < 0.01
