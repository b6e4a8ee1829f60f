import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knowex.errors import EstimationError
from knowex.estimator import (
    _MOP_TABLE,
    _generate_mop_table,
    cluster_meat,
    decompose_fit,
    effective_f,
    first_difference,
    mop_critical_value,
    ols_fit,
    small_sample_factor,
    tsls_fit,
    within_transform,
)


def linear_iv_data(rng, n=400, n_clusters=40, beta=0.7, rho=0.6):
    """Endogenous regressor with two valid excluded instruments."""
    clusters = np.arange(n) % n_clusters
    z = rng.normal(size=(n, 2))
    w = rng.normal(size=n)
    u = rng.normal(size=n)
    x = z @ np.array([1.0, 0.8]) + 0.5 * w + rho * u + rng.normal(scale=0.5, size=n)
    y = beta * x + 0.3 * w + u
    exog = np.column_stack([np.ones(n), w])
    return y, exog, x, z, clusters


# ---------------------------------------------------------------------------
# panel transforms


def test_within_transform_removes_group_means():
    x = np.array([1.0, 3.0, 10.0, 14.0])
    groups = np.array(["a", "a", "b", "b"])
    out = within_transform(x, groups)
    assert np.allclose(out, [-1.0, 1.0, -2.0, 2.0])


def test_within_transform_matrix_columns_independently():
    x = np.array([[1.0, 100.0], [3.0, 104.0], [5.0, 7.0], [5.0, 9.0]])
    out = within_transform(x, np.array([0, 0, 1, 1]))
    assert np.allclose(out[:, 0], [-1.0, 1.0, 0.0, 0.0])
    assert np.allclose(out[:, 1], [-2.0, 2.0, -1.0, 1.0])


def test_first_difference_late_minus_early():
    x = np.array([5.0, 2.0, 1.0, 7.0])
    groups = np.array(["i2", "i1", "i1", "i2"])
    periods = np.array([2, 2, 1, 1])
    dx, g = first_difference(x, groups, periods)
    assert g.tolist() == ["i1", "i2"]
    assert np.allclose(dx, [1.0, -2.0])


def test_first_difference_unbalanced_raises():
    with pytest.raises(EstimationError, match="balanced two-period"):
        first_difference(np.ones(3), np.array(["a", "a", "b"]), np.array([1, 2, 1]))


def test_within_equals_first_difference_slope_for_two_periods(rng):
    n = 60
    groups = np.repeat(np.arange(n), 2)
    periods = np.tile([1, 2], n)
    x = rng.normal(size=2 * n)
    y = 0.8 * x + rng.normal(size=2 * n) + np.repeat(rng.normal(size=n), 2)
    wy, wx = within_transform(y, groups), within_transform(x, groups)
    slope_within = float(wx @ wy / (wx @ wx))
    dy, _ = first_difference(y, groups, periods)
    dx, _ = first_difference(x, groups, periods)
    slope_fd = float(dx @ dy / (dx @ dx))
    assert slope_within == pytest.approx(slope_fd, rel=1e-10)


# ---------------------------------------------------------------------------
# covariance pieces


def test_small_sample_factor_value():
    assert small_sample_factor(100, 3, 10) == pytest.approx((10 / 9) * (99 / 97))


def test_small_sample_factor_errors():
    with pytest.raises(EstimationError, match="two clusters"):
        small_sample_factor(10, 2, 1)
    with pytest.raises(EstimationError, match="more parameters"):
        small_sample_factor(3, 3, 2)


def test_cluster_meat_hand_case():
    scores = np.array([[1.0, 0.0], [2.0, 1.0], [0.0, 3.0]])
    meat = cluster_meat(scores, np.array([0, 0, 1]), 2)
    s0 = np.array([3.0, 1.0])
    s1 = np.array([0.0, 3.0])
    assert np.allclose(meat, np.outer(s0, s0) + np.outer(s1, s1))


def test_ols_cluster_vcov_hand_case():
    y = np.array([1.0, 2.0, 2.0, 4.0, 3.0, 5.0])
    x = np.column_stack([np.ones(6), np.array([0.0, 1.0, 1.0, 3.0, 2.0, 4.0])])
    clusters = np.array([0, 0, 1, 1, 2, 2])
    fit = ols_fit(y, x, ["const", "x"], clusters)
    coef = np.linalg.solve(x.T @ x, x.T @ y)
    resid = y - x @ coef
    meat = np.zeros((2, 2))
    for g in range(3):
        s = (x[clusters == g] * resid[clusters == g, None]).sum(axis=0)
        meat += np.outer(s, s)
    bread = np.linalg.inv(x.T @ x)
    vcov = (3 / 2) * (5 / 4) * bread @ meat @ bread
    assert np.allclose(fit.coef, coef, rtol=1e-12)
    assert np.allclose(fit.vcov, vcov, rtol=1e-12)
    assert fit.n_clusters == 3


def test_ols_rank_deficient_names_offender():
    x = np.column_stack([np.ones(5), np.arange(5.0), 2 * np.arange(5.0)])
    with pytest.raises(EstimationError, match="twice_x"):
        ols_fit(np.ones(5), x, ["const", "x", "twice_x"], np.arange(5))


def test_ols_nonfinite_raises():
    x = np.column_stack([np.ones(4), np.array([1.0, 2.0, np.nan, 4.0])])
    with pytest.raises(EstimationError, match="non-finite"):
        ols_fit(np.ones(4), x, ["c", "x"], np.arange(4))


# ---------------------------------------------------------------------------
# 2SLS


def test_tsls_just_identified_equals_direct_iv_formula(rng):
    y, exog, x, z, clusters = linear_iv_data(rng)
    names = ["const", "w", "x"]
    fit = tsls_fit(y, exog, x, z[:, :1], names, ["x"], clusters)
    zz = np.column_stack([exog, z[:, 0]])
    xx = np.column_stack([exog, x])
    direct = np.linalg.solve(zz.T @ xx, zz.T @ y)
    assert np.allclose(fit.coef, direct, rtol=1e-9)


def test_tsls_perfectly_collinear_instrument_is_degenerate(rng):
    # x instrumenting itself leaves a zero first-stage residual
    y, exog, x, _, clusters = linear_iv_data(rng)
    with pytest.raises(EstimationError, match="degenerate first-stage"):
        tsls_fit(y, exog, x, x, ["const", "w", "x"], ["x"], clusters)


def test_tsls_removes_endogeneity_bias(rng):
    betas_iv, betas_ols = [], []
    for _ in range(30):
        y, exog, x, z, clusters = linear_iv_data(rng, n=600)
        names = ["const", "w", "x"]
        betas_iv.append(tsls_fit(y, exog, x, z, names, ["x"], clusters)["x"])
        betas_ols.append(ols_fit(y, np.column_stack([exog, x]), names, clusters)["x"])
    assert abs(np.mean(betas_iv) - 0.7) < 0.02
    assert np.mean(betas_ols) - 0.7 > 0.1  # rho > 0 biases OLS upward


def test_tsls_underidentified_raises(rng):
    y, exog, x, z, clusters = linear_iv_data(rng)
    endog2 = np.column_stack([x, x + z[:, 0]])
    with pytest.raises(EstimationError, match="underidentified"):
        tsls_fit(y, exog, endog2, z[:, :1], ["c", "w", "x1", "x2"], ["x1", "x2"], clusters)


def test_tsls_attaches_first_stage_and_hansen(rng):
    y, exog, x, z, clusters = linear_iv_data(rng)
    fit = tsls_fit(y, exog, x, z, ["const", "w", "x"], ["x"], clusters)
    assert len(fit.first_stages) == 1
    fs = fit.first_stages[0]
    assert fs.endog_name == "x"
    assert fs.n_instruments == 2
    assert fs.effective_f > 0
    assert fs.critical_value == mop_critical_value(2)
    assert len(fs.coef) == exog.shape[1] + 2
    assert fit.hansen_df == 1  # 2 instruments, 1 endogenous column
    assert 0.0 <= fit.hansen_p <= 1.0
    just = tsls_fit(y, exog, x, z[:, :1], ["const", "w", "x"], ["x"], clusters)
    assert just.hansen_j is None


def test_fit_result_accessors(rng):
    y, exog, x, z, clusters = linear_iv_data(rng)
    fit = tsls_fit(y, exog, x, z, ["const", "w", "x"], ["x"], clusters)
    assert fit["x"] == fit.coef[2]
    with pytest.raises(KeyError):
        fit["nope"]
    lo, hi = fit.conf_int()[2]
    assert lo < fit["x"] < hi
    assert np.all((fit.pvalues() >= 0) & (fit.pvalues() <= 1))
    text = fit.summary()
    for name in ("const", "w", "x", "effective F"):
        assert name in text


# ---------------------------------------------------------------------------
# first-stage strength


def test_effective_f_classical_equals_classical_f(rng):
    y, exog, x, z, clusters = linear_iv_data(rng, n=300)
    got = effective_f(x, z, exog, clusters, vce="classical")
    full = np.column_stack([exog, z])
    rss_u = np.sum((x - full @ np.linalg.lstsq(full, x, rcond=None)[0]) ** 2)
    rss_r = np.sum((x - exog @ np.linalg.lstsq(exog, x, rcond=None)[0]) ** 2)
    m, dof = z.shape[1], len(x) - full.shape[1]
    f_classic = ((rss_r - rss_u) / m) / (rss_u / dof)
    assert got == pytest.approx(f_classic, rel=1e-10)


def test_effective_f_classical_single_instrument(rng):
    y, exog, x, z, clusters = linear_iv_data(rng, n=300)
    z1 = z[:, :1]
    got = effective_f(x, z1, exog, clusters, vce="classical")
    full = np.column_stack([exog, z1])
    rss_u = np.sum((x - full @ np.linalg.lstsq(full, x, rcond=None)[0]) ** 2)
    rss_r = np.sum((x - exog @ np.linalg.lstsq(exog, x, rcond=None)[0]) ** 2)
    f_classic = (rss_r - rss_u) / (rss_u / (len(x) - 3))
    assert got == pytest.approx(f_classic, rel=1e-10)


def test_effective_f_weak_instrument_is_small(rng):
    n = 400
    exog = np.ones((n, 1))
    x = rng.normal(size=n)
    z = 0.01 * x[:, None] + rng.normal(size=(n, 1))
    f = effective_f(x, z, exog, np.arange(n) % 40)
    assert f < mop_critical_value(1)


def test_effective_f_unknown_vce(rng):
    with pytest.raises(EstimationError, match="unknown vce"):
        effective_f(rng.normal(size=10), rng.normal(size=(10, 1)), np.ones((10, 1)),
                    np.arange(10), vce="bootstrap")


def test_mop_table_regenerates_from_distribution():
    assert _generate_mop_table() == _MOP_TABLE


def test_mop_single_instrument_value():
    assert mop_critical_value(1) == pytest.approx(23.109)
    assert round(mop_critical_value(1), 2) == 23.11


def test_mop_out_of_range():
    with pytest.raises(EstimationError, match="1..30"):
        mop_critical_value(0)
    with pytest.raises(EstimationError, match="1..30"):
        mop_critical_value(31)


# ---------------------------------------------------------------------------
# margin decomposition


def margin_data(rng, n=300, share=0.4):
    clusters = np.arange(n) % 30
    z = rng.normal(size=(n, 2))
    x = z @ np.array([1.0, 0.7]) + rng.normal(size=n)
    yq = share * 0.5 * x + rng.normal(scale=0.2, size=n)
    yp = (1 - share) * 0.5 * x + rng.normal(scale=0.2, size=n)
    y = yp + yq
    exog = np.ones((n, 1))
    return y, yp, yq, exog, x, z, clusters


def test_decomposition_additivity_is_exact(rng):
    for _ in range(10):
        y, yp, yq, exog, x, z, clusters = margin_data(rng)
        res = decompose_fit(y, yp, yq, exog, x, z, ["const", "x"], clusters)
        assert res.additivity_gap() < 1e-12
        assert res.ratio == pytest.approx(res.beta_quality / res.beta, rel=1e-12)


def test_decomposition_recovers_quality_share(rng):
    hits = 0
    for _ in range(40):
        y, yp, yq, exog, x, z, clusters = margin_data(rng, share=0.4)
        res = decompose_fit(y, yp, yq, exog, x, z, ["const", "x"], clusters)
        lo, hi = res.ratio_ci
        hits += lo <= 0.4 <= hi
    assert hits >= 32


def test_decomposition_zero_total_raises(rng):
    n = 100
    w = rng.normal(size=n)
    exog = np.column_stack([np.ones(n), w])
    x = rng.normal(size=n)
    z = x + rng.normal(scale=0.1, size=n)
    y = 2.0 * w  # in the span of the controls: zero elasticity
    with pytest.raises(EstimationError, match="numerically zero"):
        decompose_fit(y, y / 2, y / 2, exog, x, z, ["c", "w", "x"], np.arange(n) % 10)


def test_decomposition_rejects_multiple_endogenous(rng):
    y, yp, yq, exog, x, z, clusters = margin_data(rng)
    with pytest.raises(EstimationError, match="one endogenous"):
        decompose_fit(y, yp, yq, exog, np.column_stack([x, x + z[:, 0]]), z,
                      ["c", "x1", "x2"], clusters)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_just_identified_iv_formula_property(seed):
    rng = np.random.default_rng(seed)
    y, exog, x, z, clusters = linear_iv_data(rng, n=120, n_clusters=12)
    names = ["const", "w", "x"]
    fit = tsls_fit(y, exog, x, z[:, :1], names, ["x"], clusters)
    zz = np.column_stack([exog, z[:, 0]])
    xx = np.column_stack([exog, x])
    direct = np.linalg.solve(zz.T @ xx, zz.T @ y)
    assert np.allclose(fit.coef, direct, rtol=1e-7, atol=1e-9)
