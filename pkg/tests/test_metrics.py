import numpy as np
import pytest

from noisygp.metrics import DegenerateTargetError, FitnessScorer, eie, nrmse, rie, robustness_curve


def test_nrmse_hand_example():
    # residuals (1, -1, 0), spread 2 -> sqrt(2/2)
    assert nrmse([1.0, 2.0, 3.0], [0.0, 3.0, 3.0]) == pytest.approx(1.0)
    assert nrmse([0.0, 2.0], [0.0, 1.0]) == pytest.approx(np.sqrt(0.5))


def test_nrmse_matches_rmse_over_population_std():
    rng = np.random.default_rng(1)
    y, f = rng.normal(size=50), rng.normal(size=50)
    want = np.sqrt(np.mean((y - f) ** 2)) / np.std(y)
    assert nrmse(y, f) == pytest.approx(want, rel=1e-12)


def test_nrmse_errors():
    with pytest.raises(DegenerateTargetError):
        nrmse([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        nrmse([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        nrmse([1.0], [1.0])


def test_scorer_agrees_with_nrmse_and_flags_non_finite():
    rng = np.random.default_rng(2)
    y, f = rng.normal(size=30), rng.normal(size=30)
    s = FitnessScorer(y)
    assert s(f) == pytest.approx(nrmse(y, f), rel=1e-13)
    f[3] = np.nan
    assert s(f) == np.inf
    with pytest.raises(DegenerateTargetError):
        FitnessScorer(np.zeros(4))


def test_rie_eie_hand_values():
    assert rie(0.5, 0.25) == pytest.approx(0.2)
    assert eie(0.5, 0.25) == pytest.approx(0.4)
    assert rie(0.3, 0.3) == 0.0
    assert rie(0.2, 0.4) < 0


def test_eie_is_rie_plus_baseline_eie():
    rng = np.random.default_rng(3)
    ex, e0 = rng.uniform(0, 3, 1000), rng.uniform(0, 3, 1000)
    np.testing.assert_allclose(eie(ex, e0), rie(ex, e0) + eie(e0, e0), atol=1e-12)


def test_robustness_measures_reject_bad_errors():
    with pytest.raises(ValueError):
        rie(np.nan, 0.1)
    with pytest.raises(ValueError):
        eie(0.1, -0.2)


def test_robustness_curve():
    curve = robustness_curve({0.0: 0.5, 0.1: 0.8, 0.2: 1.1})
    assert set(curve) == {0.1, 0.2}
    r, e = curve[0.2]
    assert r == pytest.approx(0.4) and e == pytest.approx(1.1 / 1.5)
    with pytest.raises(KeyError):
        robustness_curve({0.1: 0.5})
