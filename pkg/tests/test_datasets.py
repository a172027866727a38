import logging
import math

import numpy as np
import pytest

from noisygp.datasets import (
    BENCHMARKS,
    NOISE_GRID,
    DomainError,
    E,
    U,
    build_dataset,
    count_discrepancy,
    generate_grid,
    generate_uniform,
    inject_noise,
    load_dataset,
    objective,
    save_dataset,
)

# published counts that the sampling formulas reproduce
CONSISTENT = {
    "Keijzer-1": (21, 2001),
    "Keijzer-2": (41, 4001),
    "Keijzer-3": (61, 6001),
    "Keijzer-4": (101, 101),
    "Keijzer-6": (50, 120),
    "Keijzer-7": (100, 991),
    "Keijzer-8": (101, 1001),
    "Vladislavleva-1": (100, 2025),
    "Vladislavleva-2": (100, 221),
    "Vladislavleva-3": (600, 5083),
    "Vladislavleva-4": (1024, 5000),
    "Vladislavleva-5": (300, 2700),
    "Vladislavleva-7": (300, 1000),
}


def _sample_id(name):
    return 1 if BENCHMARKS[name].uniform else 0


def test_registry_has_fifteen_problems():
    assert len(BENCHMARKS) == 15


def test_noise_grid():
    assert len(NOISE_GRID) == 11
    assert NOISE_GRID[0] == 0.0 and NOISE_GRID[-1] == 0.2


def test_grid_rule_sizes():
    assert E(-1, 1, 0.1).size == 21
    assert E(0.05, 10.05, 0.1).size == 101
    assert U(0, 1, 7).size == 7


def test_grid_points_are_index_based():
    g = generate_grid(E(-1, 1, 0.1))
    assert g[0] == -1.0
    assert g[-1] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(np.diff(g), 0.1, atol=1e-12)


@pytest.mark.parametrize("args", [("E", 1, 0, 0.1), ("E", 0, 1, 0), ("X", 0, 1, 1), ("U", 0, 1, 2.5)])
def test_bad_rules_rejected(args):
    from noisygp.datasets import SamplingRule

    with pytest.raises(ValueError):
        SamplingRule(*args)


def test_uniform_draws_stay_in_range():
    x = generate_uniform(U(0.3, 4, 1000), np.random.default_rng(0))
    assert x.shape == (1000,)
    assert x.min() >= 0.3 and x.max() <= 4


@pytest.mark.parametrize("name", sorted(CONSISTENT))
def test_counts_match_published_table(name):
    rng = np.random.default_rng(0)
    sid = _sample_id(name)
    tr = build_dataset(name, "train", sid, rng)
    te = build_dataset(name, "test", sid, rng)
    assert (tr.n, te.n) == CONSISTENT[name]
    assert tr.d == te.d == BENCHMARKS[name].d
    assert count_discrepancy(name, "train") is None
    assert count_discrepancy(name, "test") is None


def test_formula_counts_win_over_inconsistent_table(caplog):
    with caplog.at_level(logging.WARNING):
        k9_train = build_dataset("Keijzer-9", "train")
        k9_test = build_dataset("Keijzer-9", "test")
        v8_test = build_dataset("Vladislavleva-8", "test", 1)
    assert (k9_train.n, k9_test.n, v8_test.n) == (101, 1001, 1156)
    assert sum("published count" in r.message for r in caplog.records) == 3
    assert "101" in count_discrepancy("Keijzer-9", "train")


def test_discrepancy_note_lands_in_manifest(tmp_path):
    path = save_dataset(build_dataset("Keijzer-9", "test"), tmp_path / "k9.csv")
    text = path.with_suffix(".manifest").read_text()
    assert "note:" in text and "1001" in text


def test_mesh_covers_cartesian_product():
    ds = build_dataset("Vladislavleva-3", "train")
    assert len(np.unique(ds.inputs[:, 0])) == 100
    assert len(np.unique(ds.inputs[:, 1])) == 6
    assert len({tuple(r) for r in ds.inputs}) == 600


def test_uniform_sampling_reproducible_and_sample_dependent():
    a = build_dataset("Vladislavleva-4", "train", 1, np.random.default_rng(5))
    b = build_dataset("Vladislavleva-4", "train", 1, np.random.default_rng(5))
    c = build_dataset("Vladislavleva-4", "train", 1, np.random.default_rng(6))
    np.testing.assert_array_equal(a.inputs, b.inputs)
    assert not np.array_equal(a.inputs, c.inputs)


def test_multivariate_uniform_ranges_are_per_variable():
    ds = build_dataset("Vladislavleva-5", "train", 2, np.random.default_rng(1))
    assert ds.inputs[:, 1].min() >= 1 and ds.inputs[:, 1].max() <= 2
    assert ds.inputs[:, 0].min() >= 0.05 and ds.inputs[:, 0].max() <= 2


def test_sample_id_rules():
    with pytest.raises(ValueError):
        build_dataset("Keijzer-1", "train", 1)
    with pytest.raises(ValueError):
        build_dataset("Vladislavleva-4", "train", 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        build_dataset("Vladislavleva-4", "train", 1)
    with pytest.raises(KeyError):
        build_dataset("Keijzer-5", "train")


# hand-computed objective values
@pytest.mark.parametrize(
    "name,x,want",
    [
        ("Keijzer-1", [0.25], 0.075),
        ("Keijzer-6", [3.0], 1 + 1 / 2 + 1 / 3),
        ("Keijzer-6", [3.7], 1 + 1 / 2 + 1 / 3),
        ("Keijzer-7", [math.e], 1.0),
        ("Keijzer-8", [16.0], 4.0),
        ("Keijzer-9", [0.0], 0.0),
        ("Vladislavleva-1", [1.0, 2.5], 1 / 1.2),
        ("Vladislavleva-4", [3.0] * 5, 2.0),
        ("Vladislavleva-7", [3.0, 3.0], 2 * math.sin(1.0)),
        ("Vladislavleva-8", [4.0, 4.0], 1 / 26),
    ],
)
def test_objective_values(name, x, want):
    assert objective(name, x) == pytest.approx(want, abs=1e-12)


def test_keijzer_9_is_asinh():
    x = np.linspace(0, 100, 57)[:, None]
    np.testing.assert_allclose(objective("Keijzer-9", x), np.arcsinh(x[:, 0]), rtol=1e-12)


def test_vladislavleva_3_scales_vladislavleva_2():
    pts = np.array([[1.3, 7.0], [4.2, 2.0]])
    np.testing.assert_allclose(
        objective("Vladislavleva-3", pts), objective("Vladislavleva-2", pts[:, :1]) * (pts[:, 1] - 5)
    )


def test_domain_errors():
    with pytest.raises(DomainError):
        objective("Keijzer-7", [0.0])
    with pytest.raises(DomainError):
        objective("Vladislavleva-5", [1.0, 0.0, 1.0])


def test_all_generated_targets_finite():
    rng = np.random.default_rng(0)
    for name in BENCHMARKS:
        for part in ("train", "test"):
            ds = build_dataset(name, part, _sample_id(name), rng)
            assert np.all(np.isfinite(ds.targets)), (name, part)


def test_noise_zero_is_identity():
    ds = build_dataset("Keijzer-1", "train")
    out = inject_noise(ds, 0.0, np.random.default_rng(0))
    np.testing.assert_array_equal(out.targets, ds.targets)
    np.testing.assert_array_equal(out.inputs, ds.inputs)


def test_noise_full_perturbs_everything_and_leaves_source_alone():
    ds = build_dataset("Keijzer-7", "train")
    before = ds.targets.copy()
    out = inject_noise(ds, 1.0, np.random.default_rng(0))
    assert np.all(out.targets != ds.targets)
    np.testing.assert_array_equal(ds.targets, before)
    assert out.noise_level == 1.0


def test_noise_validation():
    ds = build_dataset("Keijzer-1", "train")
    with pytest.raises(ValueError):
        inject_noise(ds, 1.5, np.random.default_rng(0))
    with pytest.raises(ValueError):
        inject_noise(build_dataset("Keijzer-1", "test"), 0.1, np.random.default_rng(0))


def test_noise_is_seed_deterministic():
    ds = build_dataset("Keijzer-1", "train")
    a = inject_noise(ds, 0.2, np.random.default_rng(4))
    b = inject_noise(ds, 0.2, np.random.default_rng(4))
    np.testing.assert_array_equal(a.targets, b.targets)


def test_save_load_roundtrip(tmp_path):
    ds = inject_noise(build_dataset("Vladislavleva-1", "train", 3, np.random.default_rng(2)), 0.1,
                      np.random.default_rng(3))
    path = save_dataset(ds, tmp_path / "v1" / "train.csv", seed=3)
    back = load_dataset(path)
    np.testing.assert_array_equal(back.inputs, ds.inputs)
    np.testing.assert_array_equal(back.targets, ds.targets)
    assert (back.name, back.partition, back.sample_id, back.noise_level) == ("Vladislavleva-1", "train", 3, 0.1)
    assert path.read_text().splitlines()[0] == "x0,x1,y"
