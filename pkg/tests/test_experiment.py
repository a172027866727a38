import math

import numpy as np
import pytest

from noisygp.experiment import (
    MissingBaselineError,
    PlanError,
    RobustnessReport,
    analyze,
    cell_datasets,
    derive_seed,
    emit_plot_data,
    execute,
    plan_experiment,
    run_cell,
)
from noisygp.records import RunRecord, config_hash, read_records, write_records

TINY = """
[plan]
preset = desk
datasets = Keijzer-1, Vladislavleva-8
noise_levels = 0, 0.2
repetitions = 5
base_seed = 17

[gp]
pop_size = 8
generations = 2
tournament_size = 3

[gsgp]
pop_size = 8
generations = 2
tournament_size = 3
"""


@pytest.fixture(autouse=True)
def _no_seed_env(monkeypatch):
    monkeypatch.delenv("NOISYGP_SEED", raising=False)


def test_full_plan_size():
    plan = plan_experiment()
    assert len(plan.cells()) == 15 * 11 * 2 * 50


def test_desk_preset():
    plan = plan_experiment("[plan]\npreset = desk\n")
    assert plan.gp.pop_size == 200 and plan.gsgp.generations == 200
    assert plan.noise_levels == (0.0, 0.1, 0.2)
    assert plan.repetitions == 10


def test_uniform_datasets_spread_reps_over_samples():
    plan = plan_experiment(TINY)
    v8 = [c for c in plan.cells() if c.dataset == "Vladislavleva-8" and c.method == "GP" and c.noise_level == 0]
    assert sorted(c.sample_id for c in v8) == [1, 2, 3, 4, 5]
    k1 = [c for c in plan.cells() if c.dataset == "Keijzer-1" and c.method == "GP" and c.noise_level == 0]
    assert {c.sample_id for c in k1} == {0} and len(k1) == 5


@pytest.mark.parametrize(
    "text",
    [
        "[plan]\ndatasets = Keijzer-5\n",
        "[plan]\nnoise_levels = 0, abc\n",
        "[plan]\nnoise_levels = 0, 1.5\n",
        "[plan]\nnoise_levels = 0, 0.1, 0.1\n",
        "[plan]\ndatasets = Keijzer-1, Keijzer-1\n",
        "[plan]\nrepetitions = 7\n",
        "[plan]\npreset = huge\n",
        "[gp]\npop_size = many\n",
        "[gsgp]\ncolour = blue\n",
        "not an ini file",
    ],
)
def test_plan_errors(text):
    with pytest.raises(PlanError):
        plan_experiment(text)


def test_missing_plan_file(tmp_path):
    with pytest.raises(PlanError):
        plan_experiment(tmp_path / "nope.ini")


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv("NOISYGP_SEED", "99")
    assert plan_experiment(TINY).base_seed == 99


def test_seeds_are_distinct_and_stable():
    plan = plan_experiment(TINY)
    seeds = [c.seed for c in plan.cells()]
    assert len(set(seeds)) == len(seeds)
    assert seeds == [c.seed for c in plan_experiment(TINY).cells()]
    assert derive_seed(1, 0, "a", 2) != derive_seed(1, 0, "a", 3)
    assert 0 <= derive_seed(1, 0, "a") < 2**63


def test_noise_shared_across_reps_and_methods_by_default():
    plan = plan_experiment(TINY)
    a, _ = cell_datasets(plan, "Keijzer-1", 0.2, 0, rep_index=0)
    b, _ = cell_datasets(plan, "Keijzer-1", 0.2, 0, rep_index=3)
    np.testing.assert_array_equal(a.targets, b.targets)
    assert a.noise_level == 0.2


def test_noise_per_rep_switch():
    plan = plan_experiment(TINY.replace("base_seed = 17", "base_seed = 17\nnoise_per_rep = yes"))
    assert plan.noise_per_rep
    a, _ = cell_datasets(plan, "Keijzer-1", 0.2, 0, rep_index=0)
    b, _ = cell_datasets(plan, "Keijzer-1", 0.2, 0, rep_index=3)
    assert not np.array_equal(a.targets, b.targets)


def test_clean_level_leaves_targets_untouched():
    plan = plan_experiment(TINY)
    from noisygp.datasets import objective

    noisy, test = cell_datasets(plan, "Vladislavleva-8", 0.0, 2)
    np.testing.assert_array_equal(noisy.targets, objective("Vladislavleva-8", noisy.inputs))
    assert noisy.noise_level == 0.0 and test.partition == "test"


def test_execute_resume_and_parallel_equivalence(tmp_path):
    plan = plan_experiment(TINY)
    cells = plan.cells()
    serial = execute(plan, tmp_path / "a", parallelism=1)
    assert len(serial) == len(cells)
    # interrupted run: keep half the records, then resume
    write_records(tmp_path / "b" / "records.csv", serial[: len(serial) // 2])
    resumed = execute(plan, tmp_path / "b", parallelism=2)
    assert [r.key for r in resumed] == [r.key for r in serial]
    assert [r.without_timing() for r in resumed] == [r.without_timing() for r in serial]
    assert len(read_records(tmp_path / "b")) == len(cells)
    # rerunning a single cell alone reproduces its record
    cell = cells[7]
    again = run_cell(plan, cell).without_timing()
    assert again == {r.key: r for r in serial}[cell.key].without_timing()


def test_failed_cells_are_logged_and_stay_pending(tmp_path, monkeypatch):
    import noisygp.experiment as ex

    plan = plan_experiment(TINY)
    real = ex.run_cell

    def flaky(plan, cell):
        if cell.rep_index == 0:
            raise RuntimeError("boom")
        return real(plan, cell)

    monkeypatch.setattr(ex, "run_cell", flaky)
    records = execute(plan, tmp_path)
    assert len(records) < len(plan.cells())
    assert "boom" in (tmp_path / "failures.log").read_text()
    monkeypatch.setattr(ex, "run_cell", real)
    assert len(execute(plan, tmp_path)) == len(plan.cells())


def _rec(method, dataset, level, test, train=None, rep=0, sample=0):
    return RunRecord(method, dataset, level, sample, rep, 0, train if train is not None else test / 2, test, 0.0, "x")


def _synthetic(n_datasets=6, gsgp_better=True):
    rng = np.random.default_rng(0)
    recs = []
    for i in range(n_datasets):
        ds = f"Keijzer-{i}"
        for level, bump in ((0.0, 0.0), (0.1, 0.2), (0.2, 0.5)):
            for rep in range(3):
                base = 0.5 + 0.05 * i + 0.01 * rng.random()
                gsgp = base - 0.1 if gsgp_better else base + 0.1
                recs.append(_rec("GP", ds, level, base + bump, rep=rep))
                recs.append(_rec("GSGP", ds, level, gsgp + 2 * bump, rep=rep))
    return recs


def test_analyze_summary_values():
    recs = [
        _rec("GP", "K", 0.0, 0.4), _rec("GP", "K", 0.0, 0.6, rep=1), _rec("GP", "K", 0.0, 0.5, rep=2),
        _rec("GP", "K", 0.2, 1.0), _rec("GP", "K", 0.2, 0.8, rep=1), _rec("GP", "K", 0.2, 0.9, rep=2),
    ]
    report = analyze(recs)
    row = report.row("K", "GP", 0.2)
    assert row.median_test_nrmse == 0.9
    assert row.test_rie == pytest.approx((0.9 - 0.5) / 1.5)
    assert row.test_eie == pytest.approx(0.9 / 1.5)
    assert report.row("K", "GP", 0.0).test_rie is None


def test_median_of_metrics_pairs_runs():
    recs = [
        _rec("GP", "K", 0.0, 0.0), _rec("GP", "K", 0.0, 1.0, rep=1), _rec("GP", "K", 0.0, 2.0, rep=2),
        _rec("GP", "K", 0.2, 1.0), _rec("GP", "K", 0.2, 1.0, rep=1), _rec("GP", "K", 0.2, 3.0, rep=2),
    ]
    row = analyze(recs, aggregate="median_of_metrics").row("K", "GP", 0.2)
    # per-run rie: 1/1, 0/2, 1/3 -> median 1/3
    assert row.test_rie == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        analyze(recs, aggregate="mean")


def test_missing_baseline():
    with pytest.raises(MissingBaselineError):
        analyze([_rec("GP", "K", 0.2, 1.0)])


def test_wilcoxon_rows_and_symbols():
    report = analyze(_synthetic())
    rows = {(t.measure, t.noise_level): t for t in report.tests}
    assert rows[("NRMSE", 0.0)].symbol == "▲"
    assert rows[("NRMSE", 0.0)].p_value == pytest.approx(1 / 64)
    # GSGP degrades twice as fast, so RIE is significantly larger for it
    assert rows[("RIE", 0.2)].symbol == "▼"
    assert ("RIE", 0.0) not in rows
    assert rows[("NRMSE", 0.0)].n_datasets == 6


def test_too_few_datasets_is_not_applicable():
    report = analyze(_synthetic(n_datasets=3))
    assert all(math.isnan(t.p_value) for t in report.tests)
    assert "n/a" in report.render()


def test_report_roundtrip_and_render(tmp_path):
    report = analyze(_synthetic())
    report.save(tmp_path)
    back = RobustnessReport.load(tmp_path)
    assert back.summary == report.summary
    assert back.render() == report.render()
    text = report.render()
    assert "▲" in text and "▼" in text and "RIE" in text


def test_plot_data_files(tmp_path):
    report = analyze(_synthetic())
    paths = emit_plot_data(report, tmp_path / "p1")
    assert len(paths) == 12
    fig3 = (tmp_path / "p1" / "fig3_Keijzer-0.csv").read_text().splitlines()
    assert fig3[0] == "noise_level,gp_rie,gsgp_rie,gp_eie,gsgp_eie"
    first = fig3[1].split(",")
    assert float(first[1]) == 0.0
    e0 = report.row("Keijzer-0", "GP", 0.0).median_test_nrmse
    assert float(first[3]) == pytest.approx(e0 / (1 + e0))
    fig2 = (tmp_path / "p1" / "fig2_Keijzer-0.csv").read_text().splitlines()
    assert fig2[0] == "noise_level,gp_train,gp_test,gsgp_train,gsgp_test"
    assert len(fig2) == 4
    emit_plot_data(report, tmp_path / "p2")
    for p in paths:
        assert p.read_bytes() == (tmp_path / "p2" / p.name).read_bytes()


def test_records_roundtrip_exact(tmp_path):
    r = RunRecord("GSGP", "Keijzer-1", 0.02, 0, 3, 2**62 + 5, 0.1 + 0.2, 1 / 3, 1.5, "abc")
    write_records(tmp_path / "r.csv", [r])
    (back,) = read_records(tmp_path / "r.csv")
    assert back == r
    assert read_records(tmp_path / "missing.csv") == []


def test_config_hash_depends_on_config():
    from noisygp.gp import GpConfig

    assert config_hash("GP", GpConfig()) == config_hash("GP", GpConfig())
    assert config_hash("GP", GpConfig()) != config_hash("GP", GpConfig(pop_size=10))
