import json
import math

import numpy as np
import pytest
from scipy import ndimage
from scipy.special import gammaln

import brisque_oracle as oracle
from xgcvqa import brisque
from xgcvqa.brisque import (
    FEATURE_NAMES, N_FEATURES, BrisquePredictor, SvrModel, aggd_fit, box_downsample, features, gaussian_kernel_1d,
    ggd_fit, load_model, local_stats, mscn, pairwise_products, predict, raw_prediction, save_model, score_clip,
)
from xgcvqa.media_io import Clip, LumaFrame


def ggd_draws(shape, n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    mag = rng.gamma(1.0 / shape, 1.0, size=n) ** (1.0 / shape)
    return scale * mag * rng.choice([-1.0, 1.0], size=n)


def aggd_draws(shape, sl, sr, n, seed):
    """Asymmetric GGD with left/right second moments sl**2, sr**2."""
    rng = np.random.default_rng(seed)
    k = math.sqrt(math.exp(gammaln(1 / shape) - gammaln(3 / shape)))
    bl, br = sl * k, sr * k
    mag = rng.gamma(1.0 / shape, 1.0, size=n) ** (1.0 / shape)
    left = rng.random(n) < bl / (bl + br)
    return np.where(left, -bl * mag, br * mag)


# --- filtering ----------------------------------------------------------------------------

def test_kernel_normalized():
    k = gaussian_kernel_1d()
    assert k.size == 7 and math.isclose(k.sum(), 1.0) and np.allclose(k, k[::-1])


def test_local_stats_constant():
    mu, sigma = local_stats(LumaFrame(np.full((20, 20), 0.3)))
    assert np.allclose(mu, 0.3, atol=1e-15) and np.all(sigma < 1e-7)


def test_local_stats_impulse():
    img = np.zeros((21, 21))
    img[10, 10] = 1.0
    mu, _ = local_stats(img)
    k2 = oracle.kernel2d()
    assert math.isclose(mu[10, 10], k2[3][3], rel_tol=1e-12)


def test_separable_matches_full_2d():
    img = np.random.default_rng(1).random((19, 23))
    mu, _ = local_stats(img)
    full = np.array(oracle.conv(img.tolist(), oracle.kernel2d()))
    assert np.max(np.abs(mu - full)) < 1e-12
    direct = ndimage.correlate(img, np.outer(gaussian_kernel_1d(), gaussian_kernel_1d()), mode="reflect")
    assert np.max(np.abs(mu - direct)) < 1e-12


def test_local_stats_too_small():
    with pytest.raises(ValueError):
        local_stats(np.zeros((6, 30)))


# --- mscn ---------------------------------------------------------------------------------

@pytest.mark.parametrize("value", [0.0, 0.25, 1.0])
def test_mscn_constant_is_zero(value):
    assert np.max(np.abs(mscn(LumaFrame(np.full((40, 50), value))))) <= 1e-12


def test_mscn_white_noise_mean():
    img = np.random.default_rng(7).random((256, 256))
    assert abs(mscn(img).mean()) < 0.05


def test_mscn_checkerboard_antisymmetric():
    i, j = np.indices((32, 32))
    m = mscn(((i + j) % 2).astype(float))
    inner = m[4:-4, 4:-4]
    assert np.allclose(inner[:, :-1], -inner[:, 1:], atol=1e-12)
    assert np.all(np.sign(inner) == np.where(((i + j) % 2)[4:-4, 4:-4] == 1, 1, -1))


def test_mscn_shift_and_scale():
    img = 0.25 + 0.5 * (np.random.default_rng(3).random((64, 64)) > 0.5)
    m = mscn(img)
    assert np.max(np.abs(mscn(img + 0.2) - m)) < 1e-9
    # a near-1 gain changes MSCN only through the constant C in the denominator
    assert np.max(np.abs(mscn(0.98 * img) - m)) < 1e-3


def test_mscn_matches_oracle():
    img = np.random.default_rng(11).random((16, 18))
    assert np.max(np.abs(mscn(img) - np.array(oracle.mscn(img.tolist())))) < 1e-12


# --- pairwise products --------------------------------------------------------------------

def test_products_ones_and_single_negative():
    for p in pairwise_products(np.ones((5, 6))):
        assert np.all(p == 1.0)
    m = np.ones((5, 6))
    m[2, 3] = -1.0
    h, v, d1, d2 = pairwise_products(m)
    assert {tuple(t) for t in np.argwhere(h == -1)} == {(2, 2), (2, 3)}
    assert {tuple(t) for t in np.argwhere(v == -1)} == {(1, 3), (2, 3)}
    assert {tuple(t) for t in np.argwhere(d1 == -1)} == {(1, 2), (2, 3)}
    # d2 pairs (i, j) with (i+1, j-1); stored at (i, j-1)
    assert {tuple(t) for t in np.argwhere(d2 == -1)} == {(1, 3), (2, 2)}


def test_products_match_loop():
    m = np.random.default_rng(2).standard_normal((9, 11))
    got = [p.ravel().tolist() for p in pairwise_products(m)]
    want = oracle.products(m.tolist())
    for g, w in zip(got, want):
        assert np.allclose(g, w, rtol=0, atol=0)


# --- estimators ---------------------------------------------------------------------------

def test_ggd_gaussian_and_laplacian():
    n = 10**5
    assert abs(ggd_fit(np.random.default_rng(0).standard_normal(n))[0] - 2.0) <= 0.05
    assert abs(ggd_fit(np.random.default_rng(0).laplace(size=n))[0] - 1.0) <= 0.05


@pytest.mark.parametrize("shape", [0.6, 1.5, 3.0])
def test_ggd_round_trip(shape):
    est, var = ggd_fit(ggd_draws(shape, 10**6, 4, scale=0.7))
    assert abs(est - shape) / shape < 0.03
    expected_var = 0.49 * math.exp(gammaln(3 / shape) - gammaln(1 / shape))
    assert abs(var - expected_var) / expected_var < 0.02


def test_ggd_fallback_and_errors():
    assert ggd_fit(np.zeros(10)) == (10.0, 0.0)
    with pytest.raises(ValueError):
        ggd_fit([1.0])


def test_ggd_consistency_improves_with_n():
    def err(n):
        return np.mean([abs(ggd_fit(ggd_draws(1.5, n, s))[0] - 1.5) for s in range(20)])
    assert err(10**5) < err(10**3)


def test_aggd_symmetric_normal():
    shape, mean, lv, rv = aggd_fit(np.random.default_rng(5).standard_normal(10**5))
    assert abs(lv - rv) / rv < 0.03 and abs(mean) < 0.02 and abs(shape - 2.0) < 0.1


def test_aggd_one_sided_and_zero():
    shape, mean, lv, rv = aggd_fit(np.abs(np.random.default_rng(6).standard_normal(1000)) + 0.1)
    assert lv == 0.0 and rv > 0 and shape > 0 and mean > 0
    shape, mean, lv, rv = aggd_fit(-np.abs(np.random.default_rng(6).standard_normal(1000)) - 0.1)
    assert rv == 0.0 and lv > 0 and mean < 0
    assert aggd_fit(np.zeros(5)) == (10.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("shape,sl,sr", [(0.8, 0.5, 1.0), (1.5, 1.0, 0.6), (2.5, 0.3, 0.4)])
def test_aggd_round_trip(shape, sl, sr):
    est, mean, lv, rv = aggd_fit(aggd_draws(shape, sl, sr, 10**6, 9))
    assert abs(est - shape) / shape < 0.05
    assert abs(lv - sl * sl) / (sl * sl) < 0.05
    assert abs(rv - sr * sr) / (sr * sr) < 0.05
    k = math.sqrt(math.exp(gammaln(1 / shape) - gammaln(3 / shape)))
    want = (sr - sl) * k * math.exp(gammaln(2 / shape) - gammaln(1 / shape))
    assert abs(mean - want) < 0.05 * (sl + sr)


def test_estimators_match_scalar_oracle():
    x = np.random.default_rng(8).standard_normal(3000) * 0.7 + 0.1
    assert ggd_fit(x) == pytest.approx(oracle.ggd(x.tolist()), rel=1e-12)
    assert aggd_fit(x) == pytest.approx(oracle.aggd(x.tolist()), rel=1e-12, abs=1e-15)


# --- features -----------------------------------------------------------------------------

def test_feature_layout():
    f = features(np.random.default_rng(0).random((32, 40)))
    assert f.shape == (N_FEATURES,) == (36,) and len(FEATURE_NAMES) == 36
    shapes = [i for i, n in enumerate(FEATURE_NAMES) if n.endswith("shape")]
    assert len(shapes) == 10 and np.all(f[shapes] > 0)
    variances = [i for i, n in enumerate(FEATURE_NAMES) if n.endswith("variance")]
    assert np.all(f[variances] >= 0)


def test_constant_frame_fallback_vector():
    per_scale = [10.0, 0.0] + [10.0, 0.0, 0.0, 0.0] * 4
    assert features(np.full((32, 32), 0.4)).tolist() == per_scale * 2


def test_features_match_golden_vector():
    golden = json.loads(oracle.GOLDEN.read_text())["features"]
    f = features(LumaFrame(np.array(oracle.fixture_frame())))
    assert np.allclose(f, golden, rtol=1e-9, atol=1e-12)


def test_golden_vector_reproduced_by_oracle():
    golden = json.loads(oracle.GOLDEN.read_text())["features"]
    assert np.allclose(oracle.features(oracle.fixture_frame()), golden, rtol=1e-12, atol=1e-15)


def test_box_downsample_drops_odd_edge():
    img = np.arange(20, dtype=float).reshape(4, 5)
    assert box_downsample(img).tolist() == [[3.0, 5.0], [13.0, 15.0]]


def test_features_too_small():
    with pytest.raises(ValueError):
        features(np.zeros((13, 40)))


# --- prediction ---------------------------------------------------------------------------

def unit_bounds():
    return dict(feature_min=np.full(36, -1.0), feature_max=np.full(36, 1.0))


def test_predict_kernel_identity():
    q = np.random.default_rng(0).uniform(-1, 1, 36)
    m = SvrModel("rbf", support_vectors=[q], dual_coefs=[1.0], rho=0.0, gamma=3.7, **unit_bounds())
    assert predict(q, m) == 1.0


def test_predict_rho_only_and_clamp():
    q = np.zeros(36)
    m = SvrModel("rbf", support_vectors=[q], dual_coefs=[0.0], rho=-50.0, gamma=1.0, **unit_bounds())
    assert predict(q, m) == 50.0
    hi = SvrModel("rbf", support_vectors=[q], dual_coefs=[0.0], rho=-500.0, gamma=1.0, **unit_bounds())
    lo = SvrModel("rbf", support_vectors=[q], dual_coefs=[0.0], rho=500.0, gamma=1.0, **unit_bounds())
    assert predict(q, hi) == 100.0 and predict(q, lo) == 0.0 and raw_prediction(q, hi) == 500.0


def random_rbf_model(seed, n_sv=25):
    rng = np.random.default_rng(seed)
    fmin = rng.uniform(-2, 0, 36)
    return SvrModel("rbf", feature_min=fmin, feature_max=fmin + rng.uniform(0.5, 3, 36), gamma=0.05,
                    support_vectors=rng.uniform(-1, 1, (n_sv, 36)), dual_coefs=rng.normal(0, 30, n_sv),
                    rho=-40.0)


def test_predict_matches_direct_sum():
    m = random_rbf_model(1)
    for seed in range(5):
        f = np.random.default_rng(100 + seed).uniform(-2, 3, 36)
        z = [2 * (f[i] - m.feature_min[i]) / (m.feature_max[i] - m.feature_min[i]) - 1 for i in range(36)]
        total = 0.0
        for sv, a in zip(m.support_vectors, m.dual_coefs):
            total += a * math.exp(-m.gamma * sum((z[i] - sv[i]) ** 2 for i in range(36)))
        assert abs(raw_prediction(f, m) - (total - m.rho)) < 1e-9


def test_linear_model_and_dimension_check():
    m = SvrModel("linear", weights=np.full(36, 2.0), bias=30.0, **unit_bounds())
    assert predict(np.full(36, 0.1), m) == pytest.approx(30.0 + 72 * 0.1)
    with pytest.raises(ValueError, match="dimension"):
        predict(np.zeros(35), m)


def test_model_validation():
    with pytest.raises(ValueError):
        SvrModel("rbf", feature_min=np.zeros(36), feature_max=np.zeros(36), support_vectors=[np.zeros(36)],
                 dual_coefs=[1.0])
    with pytest.raises(ValueError):
        SvrModel("poly", **unit_bounds())
    with pytest.raises(ValueError):
        SvrModel("rbf", support_vectors=np.zeros((2, 36)), dual_coefs=[1.0], **unit_bounds())
    with pytest.raises(ValueError, match="lacks"):
        SvrModel.from_dict({"kernel": "rbf", "feature_min": [0.0], "feature_max": [1.0]})


def test_model_file_round_trip(tmp_path):
    m = random_rbf_model(2)
    save_model(m, tmp_path / "m.json")
    data = json.loads((tmp_path / "m.json").read_text())
    assert set(data) == {"kernel", "gamma", "rho", "feature_min", "feature_max", "support_vectors", "dual_coefs"}
    back = load_model(tmp_path / "m.json")
    f = np.random.default_rng(3).uniform(-1, 1, 36)
    assert raw_prediction(f, back) == raw_prediction(f, m)
    lin = SvrModel("linear", weights=np.arange(36.0), bias=1.5, **unit_bounds())
    save_model(lin, tmp_path / "l.json")
    assert load_model(tmp_path / "l.json").to_dict() == lin.to_dict()


# --- clip scoring -------------------------------------------------------------------------

def test_score_clip_means():
    frames = [LumaFrame(np.full((32, 32), v)) for v in (0.1, 0.2, 0.3, 0.4)]
    clip = Clip(frames)

    def pred(fr):
        return 100 * float(fr.samples[0, 0])

    assert score_clip(clip, [2], predictor=pred) == pytest.approx(30.0)
    assert score_clip(clip, [0, 1, 3], predictor=pred) == pytest.approx((10 + 20 + 40) / 3)
    same = Clip([frames[1]] * 3)
    assert score_clip(same, [0, 1, 2], predictor=pred) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        score_clip(clip, [], predictor=pred)


def test_brisque_predictor_is_pure():
    m = random_rbf_model(4)
    fr = LumaFrame(np.random.default_rng(1).random((40, 40)))
    p = BrisquePredictor(m)
    assert p(fr) == p(fr) == brisque.predict(features(fr), m)
