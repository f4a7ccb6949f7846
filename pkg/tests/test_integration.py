import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from qmc_shake.integrands import (
    F1_EXACT,
    F2_EXACT,
    Integrand,
    constant,
    f1_nonsmooth,
    f2_smooth,
    get_integrand,
    linear,
    polynomial,
    product_x1x2,
    read_polynomial_model,
    write_polynomial_model,
)
from qmc_shake.integration import (
    CSV_FIELDS,
    PlainMC,
    ShakenSobol,
    SobolQMC,
    StratifiedSymmetrized,
    SymmetrizedShakenSobol,
    cell_base_points,
    convergence_study,
    fit_slope,
    integrate,
    mca_mss_1,
    mca_mss_2,
    mca_mss_2s,
    plain_mc,
    qmc_sobol,
)
from qmc_shake.prng import RandomStream
from qmc_shake.shaking import (
    CellGrid,
    ShakeConfig,
    ShakeError,
    elementary_bits,
    elementary_cells,
    reflect,
    shake,
)
from qmc_shake.sobol import generate


class Recorder:
    """Wraps an integrand and keeps every evaluated batch."""

    def __init__(self, f):
        self.batches = []
        self.f = f
        self.wrapped = Integrand(f.dimension, self._eval, f.smoothness, f.referent, f.name)

    def _eval(self, X):
        self.batches.append(np.array(X))
        return self.f.evaluator(X)

    @property
    def points(self):
        return np.concatenate(self.batches)


# integrands

def test_referents_closed_form():
    assert F2_EXACT == pytest.approx((3 - np.e) * (1 - np.cos(1)) * np.sin(1), rel=1e-15)
    assert F1_EXACT == pytest.approx(6 * (0.8 ** (2 / 3) + 0.2 ** (2 / 3)), rel=1e-15)
    # 5-digit rounded values
    assert round(F2_EXACT, 5) == 0.10897
    assert round(F1_EXACT, 5) == 7.22261


def test_f1_total_on_closed_cube():
    f = f1_nonsmooth()
    X = np.array([[0.8, 0.8, 0.8, 0.8], [0, 0, 0, 0], [1, 1, 1, 1]], dtype=float)
    assert np.all(np.isfinite(f(X)))
    assert f(X[0]) == pytest.approx(4 * 1e-15 ** (-1 / 3))


def test_registry():
    assert get_integrand("f2-smooth").referent == F2_EXACT
    assert get_integrand("linear-d", 6).dimension == 6
    with pytest.raises(KeyError):
        get_integrand("nope")


def test_polynomial_file_roundtrip(tmp_path):
    p = polynomial([1.0, -2.0, 0.5], [[0, 0], [1, 2], [4, 0]])
    assert p.referent == pytest.approx(1 - 2 / 6 + 0.5 / 5)
    path = tmp_path / "m.txt"
    write_polynomial_model(path, p)
    q = read_polynomial_model(path)
    X = np.random.default_rng(0).random((20, 2))
    np.testing.assert_allclose(q(X), p(X))
    assert get_integrand(f"poly-file:{path}").referent == pytest.approx(p.referent)


def test_polynomial_file_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 4\n1.0 0 0 0\n")
    with pytest.raises(ValueError):
        read_polynomial_model(path)


# baselines

def test_plain_mc_constant_exact():
    assert plain_mc(constant(3, 3.0), 10, 1).estimate == 3.0


def test_plain_mc_f2():
    rep = plain_mc(f2_smooth(), 10**4, 2012, replications=10)
    assert rep.relative_error <= 0.05
    assert rep.replications == 10 and rep.n_evals == 10**4


def test_plain_mc_clt_bound():
    f = linear(2, weights=[1.0, 0.0])
    rep = plain_mc(f, 10**6, 7)
    assert abs(rep.estimate - 0.5) <= 3 * (1 / np.sqrt(12)) / 1e3


def test_qmc_examples():
    assert qmc_sobol(constant(4, 1.5), 100).estimate == 1.5
    assert qmc_sobol(f2_smooth(), 10**4).relative_error <= 5e-3
    assert qmc_sobol(f1_nonsmooth(), 5 * 10**4).relative_error <= 1e-3


def test_qmc_skip_zero():
    rec = Recorder(f2_smooth())
    qmc_sobol(rec.wrapped, 8, skip_zero=True)
    assert not np.any(np.all(rec.points == 0, axis=1))


# shaking primitives

def test_shake_config_validation():
    with pytest.raises(ValueError):
        ShakeConfig()
    with pytest.raises(ValueError):
        ShakeConfig(rho=0.1, kappa=0.2)
    with pytest.raises(ValueError):
        ShakeConfig(rho=-1.0)
    with pytest.raises(ValueError):
        ShakeConfig(rho=0.1, max_resamples=0)


def test_cell_grid_partition():
    g = CellGrid(2, 3)
    assert g.n_cells == 9
    X = np.random.default_rng(1).random((500, 2))
    ids = g.index_of(X)
    assert np.all((X >= g.lower(ids)) & (X < g.upper(ids)))
    np.testing.assert_allclose(g.centers([0, 8]), [[1 / 6, 1 / 6], [5 / 6, 5 / 6]])


@settings(max_examples=50)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=6), st.floats(-10, 10))
def test_reflection_involution(p, s):
    p = np.array(p)
    center = np.full_like(p, s)
    assert np.allclose(reflect(reflect(p, center), center), p, rtol=0, atol=1e-15 * (1 + np.abs(p).max() + abs(s)) * 8)


def test_elementary_bits():
    assert elementary_bits(1000, 4).tolist() == [3, 2, 2, 2]
    assert elementary_bits(1, 3).tolist() == [0, 0, 0]


def test_shake_radius_too_large():
    X = np.array([[0.1, 0.1]])
    with pytest.raises(ShakeError):
        shake(X, np.zeros((1, 2)), np.full((1, 2), 0.5), 0.25, RandomStream(0))


def test_shake_reject_run_reports_cell():
    X = np.array([[0.49, 0.2]])
    with pytest.raises(ShakeError) as info:
        for seed in range(50):
            shake(X, np.zeros((1, 2)), np.full((1, 2), 0.5), 0.05, RandomStream(seed),
                  boundary_policy="reject-run", cell_ids=[7])
    assert info.value.cell == 7


def test_shake_on_lower_face_stays_inside():
    X = np.zeros((200, 3))
    lower, upper = np.zeros((200, 3)), np.full((200, 3), 0.5)
    out, redraws = shake(X, lower, upper, 0.1, RandomStream(4))
    assert redraws == 0
    assert np.all((out >= 0) & (out < 0.5))
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 0.1)


# MCA-MSS-1

def test_mss1_containment_and_accounting():
    f = f2_smooth()
    rec = Recorder(f)
    n = 1000
    rep = mca_mss_1(rec.wrapped, n, ShakeConfig(kappa=0.5), 3, replications=3)
    assert rep.n_evals == n
    base = generate(4, n).points
    lower, upper = elementary_cells(base, elementary_bits(n, 4))
    for batch in rec.batches:
        assert batch.shape == (n, 4)
        assert np.all((batch >= lower) & (batch < upper) & (batch < 1.0))
        assert np.allclose(np.linalg.norm(batch - base, axis=1), rep.rho)


def test_mss1_examples():
    cfg = ShakeConfig(rho=6.4e-3)
    assert mca_mss_1(f2_smooth(), 1000, cfg, 2012, replications=10).relative_error <= 1e-2
    assert mca_mss_1(f1_nonsmooth(), 1000, cfg, 2012, replications=10).relative_error <= 5e-3


def test_mss1_rho_to_zero_matches_qmc():
    f = f2_smooth()
    a = mca_mss_1(f, 1000, ShakeConfig(rho=1e-300), 1).estimate
    assert abs(a - qmc_sobol(f, 1000).estimate) <= 1e-9


def test_mss1_kappa_resolution():
    rep = mca_mss_1(f2_smooth(), 256, ShakeConfig(kappa=0.25), 1)
    assert rep.rho == pytest.approx(0.25 * rep.extras["delta"])


def test_thread_count_independent():
    cfg = ShakeConfig(rho=6.4e-3)
    a = mca_mss_1(f2_smooth(), 512, cfg, 9, replications=6, threads=1)
    b = mca_mss_1(f2_smooth(), 512, cfg, 9, replications=6, threads=4)
    assert np.array_equal(a.estimates, b.estimates)
    c = mca_mss_2s(f2_smooth(), 4, 9, replications=6, threads=3)
    assert np.array_equal(c.estimates, mca_mss_2s(f2_smooth(), 4, 9, replications=6).estimates)


def test_seed_reproducible():
    cfg = ShakeConfig(rho=6.4e-3)
    a = mca_mss_1(f1_nonsmooth(), 300, cfg, 5, replications=2)
    b = mca_mss_1(f1_nonsmooth(), 300, cfg, 5, replications=2)
    assert np.array_equal(a.estimates, b.estimates)


# MCA-MSS-2 and -2-S

def test_cell_base_points_first_in_sequence():
    grid, base, occupied = cell_base_points(2, 4)
    sobol = generate(2, 16).points
    for j in np.flatnonzero(occupied):
        first = sobol[np.flatnonzero(grid.index_of(sobol) == j)[0]]
        assert np.array_equal(base[j], first)
    # a (0,4,2)-net puts one point in each of the 4x4 cells
    assert occupied.all()


def test_mss2_containment_and_accounting():
    f = f2_smooth()
    rec = Recorder(f)
    m = 5
    rep = mca_mss_2(rec.wrapped, m, ShakeConfig(kappa=0.5), 2, replications=2)
    assert rep.n_evals == 2 * m**4
    grid = CellGrid(4, m)
    cells = np.arange(grid.n_cells)
    for batch in rec.batches:
        xi, mirror = batch[: grid.n_cells], batch[grid.n_cells:]
        for P in (xi, mirror):
            assert np.all((P >= grid.lower(cells) - 1e-15) & (P <= grid.upper(cells) + 1e-15))
        np.testing.assert_allclose(xi + mirror, 2 * grid.centers(), atol=1e-15)
    assert rep.extras["fallback_cells"] >= 0


def test_mss2_examples():
    f = f2_smooth()
    cfg = ShakeConfig(kappa=0.5)
    assert mca_mss_2(f, 10, cfg, 2012, replications=10).relative_error <= 2e-3
    rep = mca_mss_2(f, 16, cfg, 2012, replications=3)
    assert rep.n_evals == 2 * 2**16
    assert rep.relative_error <= 1e-4


def test_mss2s_examples():
    f = f2_smooth()
    assert mca_mss_2s(f, 10, 2012, replications=10).relative_error <= 5e-4
    rep = mca_mss_2s(f, 15, 2012, replications=2)
    assert rep.n_evals == 101250
    assert rep.relative_error <= 5e-5


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_symmetrized_affine_exact(d):
    f = linear(d, weights=np.arange(1, d + 1) / d, offset=0.3)
    for m in (2, 3, 5):
        for rep in (mca_mss_2(f, m, ShakeConfig(kappa=0.25), 1, replications=5),
                    mca_mss_2s(f, m, 1, replications=5)):
            assert abs(rep.estimate - f.referent) <= 1e-12
            assert rep.estimates.std() <= 1e-12


# convergence

def test_fit_slope():
    n = np.array([10, 100, 1000])
    assert fit_slope(n, 3 * n**-0.75) == pytest.approx(-0.75)


def test_convergence_needs_three_budgets():
    with pytest.raises(ValueError):
        convergence_study("plain-mc", f2_smooth(), [10, 100, 100], 5, 1)


def test_convergence_constant_exact():
    study = convergence_study("mss2s", constant(4, 2.0), [2, 3, 4], 5, 1)
    assert study.exact and study.slope is None


def test_convergence_plain_mc_slope():
    study = convergence_study("plain-mc", f2_smooth(), [100, 1000, 10**4, 10**5], 10, 2012)
    assert -0.65 <= study.slope <= -0.35
    assert [r["n"] for r in study.table_rows()] == [100, 1000, 10**4, 10**5]


def test_integrate_dispatch():
    f = product_x1x2()
    assert integrate("qmc-sobol", f, 64).method == "qmc-sobol"
    assert integrate("owen-qmc", f, 64, stream=3).method == "owen-qmc"
    with pytest.raises(ValueError):
        integrate("mss1", f, 64)
    with pytest.raises(KeyError):
        integrate("nope", f, 64)


def test_report_row_schema():
    rep = plain_mc(f2_smooth(), 100, 1, replications=2)
    row = rep.to_row()
    assert tuple(row) == CSV_FIELDS
    assert rep.to_row(timing=False)["time_s"] == ""
    assert row["rel_err"] == repr(rep.relative_error)
    no_ref = plain_mc(Integrand(1, lambda X: X[:, 0]), 10, 1).to_row()
    assert no_ref["rel_err"] == ""


# estimator classes

def test_estimator_api():
    f = f2_smooth()
    est = ShakenSobol(n=512, rho=6.4e-3, replications=2, random_state=4)
    assert est.get_params()["rho"] == 6.4e-3
    est.fit(f)
    assert est.n_evals_ == 512 and est.estimate_ == est.report_.estimate
    assert est.score(f) == -est.report_.relative_error
    other = clone(est).set_params(n=256).fit(f)
    assert other.n_evals_ == 256
    for cls, kw in [(PlainMC, {"n": 64}), (SobolQMC, {"n": 64}),
                    (SymmetrizedShakenSobol, {"m": 3, "kappa": 0.5}),
                    (StratifiedSymmetrized, {"m": 3})]:
        assert np.isfinite(cls(**kw).fit(f).estimate_)
