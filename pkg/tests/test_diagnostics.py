import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from conftest import clustered_logit
from stratos import diagnostics as dg
from stratos.glm import fit_glmm, fit_logistic


def pair_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    return sum((a > b) + 0.5 * (a == b) for a in pos for b in neg) / (len(pos) * len(neg))


def vif_oracle(X, j):
    """Ordinary VIF by regressing column j on the others (intercept included)."""
    others = np.column_stack([np.ones(len(X)), np.delete(X, j, axis=1)])
    coef, *_ = np.linalg.lstsq(others, X[:, j], rcond=None)
    r = X[:, j] - others @ coef
    tss = np.sum((X[:, j] - X[:, j].mean()) ** 2)
    return tss / np.sum(r * r)


def test_gvif_single_columns_equal_vif():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(500, 3))
    X = np.column_stack([np.ones(500), z[:, 0], z[:, 0] + 0.5 * z[:, 1], z[:, 2]])
    rows = dg.gvif(X, {"a": [1], "b": [2], "c": [3]}, ["(Intercept)", "a", "b", "c"])
    for row, j in zip(rows, range(3)):
        assert row.gvif == pytest.approx(vif_oracle(X[:, 1:], j), rel=1e-10)
        assert row.gvif_adjusted == pytest.approx(math.sqrt(row.gvif))


def test_gvif_multi_column_term_is_invariant_to_reparametrisation():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(400, 4))
    X = np.column_stack([np.ones(400), z])
    A = np.array([[1.0, 2.0], [0.5, -1.0]])
    X2 = X.copy()
    X2[:, 1:3] = X[:, 1:3] @ A
    m = {"pair": [1, 2], "x3": [3], "x4": [4]}
    a, b = dg.gvif(X, m), dg.gvif(X2, m)
    assert a[0].gvif == pytest.approx(b[0].gvif, rel=1e-9)
    assert a[0].df == 2 and a[0].gvif_adjusted == pytest.approx(a[0].gvif ** 0.25)


def test_gvif_singular_names_columns():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, 100))
    X = np.column_stack([np.ones(100), a, b, a - b, rng.normal(size=100)])
    with pytest.raises(dg.CollinearityError) as info:
        dg.gvif(X, {"a": [1], "b": [2], "c": [3], "d": [4]}, ["(Intercept)", "a", "b", "c", "d"])
    assert set(info.value.columns) == {"a", "b", "c"}
    with pytest.raises(dg.CollinearityError):
        dg.gvif(np.column_stack([np.ones(10), np.ones(10)]), {"k": [1]})


def test_pearson_residuals_stable_form():
    y = np.array([0.0, 1.0, 1.0, 0.0])
    eta = np.array([-1.0, 0.3, 40.0, -800.0])
    p = expit(eta[:2])
    direct = (y[:2] - p) / np.sqrt(p * (1 - p))
    stable = dg.pearson_residuals(y=y, eta=eta)
    np.testing.assert_allclose(stable[:2], direct, rtol=1e-12)
    # a saturated correct prediction has residual exp(-|eta| / 2)
    assert stable[2] == pytest.approx(math.exp(-20.0), rel=1e-12)
    assert stable[3] == pytest.approx(-math.exp(-400.0), rel=1e-12)


def test_overdispersion_and_df():
    X, y, cl = clustered_logit(100, 5, seed=3)
    f = fit_glmm(X, y, cl)
    od = dg.overdispersion(f)
    assert od["df_resid"] == 500 - 3
    assert od["ratio"] * od["df_resid"] == pytest.approx(od["chi2"], rel=1e-15)
    r = dg.pearson_residuals(f)
    assert od["chi2"] == pytest.approx(np.sum(r * r))
    with pytest.raises(ValueError):
        dg.overdispersion(chi2=1.0, df_resid=0)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(0, 20), st.booleans()), min_size=2, max_size=60))
def test_auc_pair_count_and_transform(data):
    s = np.array([d[0] for d in data], dtype=float)
    lab = np.array([d[1] for d in data])
    if lab.all() or not lab.any():
        with pytest.raises(ValueError):
            dg.auc(s, lab)
        return
    a = dg.auc(s, lab)
    assert abs(a - pair_auc(s, lab)) < 1e-12
    assert dg.auc(np.exp(s / 5) - 3, lab) == a


def test_icc_and_r2():
    assert dg.icc(0.0) == 0.0
    with pytest.raises(ValueError):
        dg.icc(-0.1)
    eta = np.linspace(-2, 2, 50)
    r0 = dg.r2_nakagawa(fixed_predictor=eta, sigma2=0.0)
    r1 = dg.r2_nakagawa(fixed_predictor=eta, sigma2=0.5)
    assert r0["marginal"] == r0["conditional"]
    assert r1["conditional"] > r1["marginal"]
    vf = np.var(eta, ddof=1)
    assert r1["marginal"] == pytest.approx(vf / (vf + 0.5 + math.pi**2 / 3))


def test_diagnose_and_serialisation():
    X, y, cl = clustered_logit(150, 4, seed=5)
    X = np.column_stack([X, np.random.default_rng(0).normal(size=len(y))])
    cols = ["(Intercept)", "x", "z"]
    f = fit_glmm(X, y, cl, columns=cols)
    rep = dg.diagnose(f, X, {"x": [1], "z": [2]})
    assert rep.df_resid == len(y) - 4
    assert 0.5 < rep.auc <= 1
    assert rep.r2_conditional >= rep.r2_marginal
    q = rep.model_quality
    assert q["n obs"] == len(y) and q["n authors"] == 150
    assert q["BIC"] == pytest.approx(-2 * f.loglik + math.log(len(y)) * 4)
    assert q["is_singular"] == (f.sigma2 == 0)
    text = dg.to_csv(rep)
    assert text.splitlines()[0] == "# schema: stratos.diagnostics/1"
    assert "collinearity,x," in text
    doc = json.loads(dg.to_json(rep))
    assert doc["schema"] == "stratos.diagnostics/1" and len(doc["gvif_table"]) == 2


def test_glm_fit_has_no_variance_component():
    X, y, _ = clustered_logit(50, 4, seed=6)
    f = fit_logistic(X, y)
    q = dg.model_quality(f)
    assert q["RE var AuthID"] == 0.0 and q["is_singular"]
    assert dg.residual_df(f) == len(y) - 2
