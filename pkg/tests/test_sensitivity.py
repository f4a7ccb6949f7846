import math

import numpy as np
import pytest

from qmc_shake.integrands import Integrand, constant, f2_smooth, linear, polynomial, product_x1x2
from qmc_shake.sensitivity import (
    SobolSensitivity,
    SubsetSpec,
    center_model,
    estimate_f0,
    estimate_partial_variance,
    estimate_total_variance,
    first_order_index,
    full_report,
    sample_points,
    total_index,
)
from qmc_shake.shaking import ShakeConfig

from oracles import tensor_sensitivity

N = 10**5


def x1_only():
    return linear(2, weights=[1.0, 0.0])


def sum_squares():
    return polynomial([1.0, 1.0], [[2, 0], [0, 2]], "x1^2+x2^2")


def test_subset_spec():
    s = SubsetSpec((2, 0), 4)
    assert s.y == (0, 2) and s.z == (1, 3)
    assert set(s.y) | set(s.z) == set(range(4))
    assert s.complement().y == s.z
    assert s.label() == "x1+x3"
    for bad in [(), (0, 1, 2, 3), (0, 0), (4,)]:
        with pytest.raises(ValueError):
            SubsetSpec(bad, 4)


def test_f0_examples():
    assert estimate_f0(constant(3, 4.0), 10, "plain-mc", 1) == 4.0
    assert estimate_f0(linear(2), N, "plain-mc", 1) == pytest.approx(1.0, abs=0.01)
    assert estimate_f0(f2_smooth(), 2**14, "qmc-sobol") == pytest.approx(0.10897, rel=1e-3)


def test_total_variance_examples():
    assert estimate_total_variance(constant(2, 1.0), 100, "plain-mc", 1) == 0.0
    assert estimate_total_variance(x1_only(), N, "plain-mc", 1) == pytest.approx(1 / 12, abs=0.003)
    assert estimate_total_variance(linear(2), N, "plain-mc", 1) == pytest.approx(1 / 6, abs=0.005)


def test_partial_variance_examples():
    f = x1_only()
    assert estimate_partial_variance(f, SubsetSpec((0,), 2), N, "plain-mc", 1) == pytest.approx(1 / 12, abs=0.003)
    assert estimate_partial_variance(f, SubsetSpec((1,), 2), N, "plain-mc", 1) == pytest.approx(0, abs=0.003)
    c = constant(3, 2.0)
    assert estimate_partial_variance(c, SubsetSpec((0, 1), 3), 1000, "plain-mc", 1) == 0.0


def test_partial_variance_additivity():
    f = sum_squares()
    D = estimate_total_variance(f, N, "qmc-sobol")
    D1 = estimate_partial_variance(f, SubsetSpec((0,), 2), N, "qmc-sobol")
    D2 = estimate_partial_variance(f, SubsetSpec((1,), 2), N, "qmc-sobol")
    assert D1 + D2 == pytest.approx(D, abs=2e-3)
    # exact value: 2 * Var(U^2) = 2 * 4/45
    assert D == pytest.approx(8 / 45, rel=1e-3)


def test_partial_variance_dimension_check():
    with pytest.raises(ValueError):
        estimate_partial_variance(linear(3), SubsetSpec((0,), 2), 100, "plain-mc", 1)


@pytest.mark.parametrize("sampler", ["plain-mc", "qmc-sobol", "owen-qmc"])
def test_single_variable_model(sampler):
    f = x1_only()
    assert first_order_index(f, 0, N, sampler, 3) == pytest.approx(1.0, abs=0.02)
    assert first_order_index(f, 1, N, sampler, 3) == pytest.approx(0.0, abs=0.02)
    assert total_index(f, 0, N, sampler, 3) == pytest.approx(1.0, abs=0.02)
    assert total_index(f, 1, N, sampler, 3) == pytest.approx(0.0, abs=0.02)


def test_symmetric_additive_model():
    rep = full_report(linear(2), N, "plain-mc", stream=5)
    np.testing.assert_allclose(rep.S, [0.5, 0.5], atol=0.02)
    np.testing.assert_allclose(rep.S_tot, rep.S, atol=0.02)


@pytest.mark.parametrize("sampler", ["plain-mc", "qmc-sobol", "owen-qmc", "mss1"])
def test_product_model(sampler):
    cfg = ShakeConfig(kappa=0.25) if sampler == "mss1" else None
    rep = full_report(product_x1x2(), N, sampler, stream=8, cfg=cfg)
    np.testing.assert_allclose(rep.S, [3 / 7, 3 / 7], atol=0.02)
    np.testing.assert_allclose(rep.S_tot, [4 / 7, 4 / 7], atol=0.02)
    for fo, tot in zip(rep.first_order, rep.totals):
        assert fo.S_y <= tot.S_tot + 3 * math.hypot(fo.stderr, tot.stderr)


def test_constant_model_undefined():
    rep = full_report(constant(3, 5.0), 1000, "plain-mc", stream=1)
    assert rep.undefined and rep.D == 0.0
    assert np.all(np.isnan(rep.S)) and np.all(np.isnan(rep.S_tot))
    assert math.isnan(first_order_index(constant(2, 1.0), 0, 100, "plain-mc", 1))


def test_center_model():
    g, c = center_model(constant(2, 5.0), 100, "plain-mc", 1)
    assert c == 5.0
    assert np.all(g(np.random.default_rng(0).random((10, 2))) == 0.0)
    _, c2 = center_model(f2_smooth(), 10**4, "plain-mc", 1)
    assert c2 == pytest.approx(0.10897, rel=1e-2)


def test_centering_shift_invariance():
    f = product_x1x2()
    raw = full_report(f, 2**14, "qmc-sobol", centered=False)
    cen = full_report(f, 2**14, "qmc-sobol", centered=True)
    assert cen.D == pytest.approx(raw.D, abs=1e-4)
    np.testing.assert_allclose(cen.S, raw.S, atol=5e-3)
    np.testing.assert_allclose(cen.S_tot, raw.S_tot, atol=5e-3)
    shifted = full_report(f.shifted(-10.0), 2**14, "qmc-sobol", centered=False)
    assert shifted.f0 == pytest.approx(raw.f0 + 10.0, abs=1e-9)
    assert shifted.D == pytest.approx(raw.D, abs=1e-6)


def test_shared_sample_and_reproducible():
    f = product_x1x2()
    a = full_report(f, 4096, "plain-mc", stream=11)
    b = full_report(f, 4096, "plain-mc", stream=11)
    assert a.rows() == b.rows()
    assert a.seed == 11 and a.n == 4096 and a.sampler == "plain-mc"
    quantities = [r["quantity"] for r in a.rows()]
    assert quantities[:3] == ["f0", "g0", "D"]
    assert quantities.count("S") == 2 and quantities.count("S_tot") == 2


def test_extra_subsets():
    f = polynomial([1.0, 2.0, 1.0], [[1, 1, 0], [0, 0, 1], [1, 0, 0]])
    rep = full_report(f, 2**15, "qmc-sobol", subsets=[(0, 1)])
    oracle = tensor_sensitivity(f, 3)
    pair = rep.first_order[-1]
    assert pair.subset.y == (0, 1)
    # D_{x1,x2} = D_1 + D_2 + D_12 = D - D_3 for this model (no x3 interactions)
    assert pair.S_y == pytest.approx(1 - oracle["S"][2], abs=1e-2)


def test_sampler_points():
    X = sample_points("qmc-sobol", 8, 3)
    assert X.shape == (8, 3)
    with pytest.raises(KeyError):
        sample_points("mss2", 8, 3)
    with pytest.raises(ValueError):
        sample_points("mss1", 8, 3)


def _random_polynomial(d, seed):
    rng = np.random.default_rng(seed)
    exps = [e for e in np.ndindex(*(5,) * d) if sum(e) <= 4]
    coef = rng.uniform(-1, 1, len(exps))
    return polynomial(coef, np.array(exps))


@pytest.mark.parametrize("d,seed", [(2, 0), (3, 1), (4, 2)])
def test_polynomial_matches_tensor_oracle(d, seed):
    f = _random_polynomial(d, seed)
    oracle = tensor_sensitivity(f, d)
    rep = full_report(f, 2**16, "qmc-sobol")
    assert rep.D == pytest.approx(oracle["D"], rel=1e-2)
    np.testing.assert_allclose(rep.S, oracle["S"], atol=1e-2)
    np.testing.assert_allclose(rep.S_tot, oracle["S_tot"], atol=1e-2)


def test_oracle_product_model_symbolic():
    oracle = tensor_sensitivity(product_x1x2(), 2)
    assert oracle["D"] == pytest.approx(7 / 144, rel=1e-12)
    np.testing.assert_allclose(oracle["S"], [3 / 7, 3 / 7], rtol=1e-12)
    np.testing.assert_allclose(oracle["S_tot"], [4 / 7, 4 / 7], rtol=1e-12)


def test_estimator_api():
    est = SobolSensitivity(n=2**12, sampler="qmc-sobol").fit(product_x1x2())
    np.testing.assert_allclose(est.first_order_, [3 / 7, 3 / 7], atol=0.03)
    assert est.total_.shape == (2,) and est.variance_ > 0
    assert est.get_params()["sampler"] == "qmc-sobol"
    with pytest.raises(ValueError):
        SobolSensitivity(n=64).fit(Integrand(1, lambda X: X[:, 0]))
