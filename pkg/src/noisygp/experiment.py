"""Factorial experiment: plan, execute, analyse, emit plot data.

A plan crosses datasets, noise levels, methods and repetitions. Randomly
sampled benchmarks spread their repetitions over five independent samples;
deterministic ones use sample 0 for every repetition. Every random stream
(data sampling, noise injection, engine run) gets a seed that is a pure
function of the base seed and the cell coordinates, so any cell can be
rerun alone and parallel execution yields the same record set.
"""

from __future__ import annotations

import configparser
import json
import logging
import math
import os
import zlib
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .datasets import BENCHMARKS, N_UNIFORM_SAMPLES, NOISE_GRID, build_dataset, get_spec, inject_noise
from .gp import GpConfig, run_gp
from .gsgp import GsgpConfig, run_gsgp
from .metrics import eie, rie
from .records import RunRecord, append_record, read_records
from .stats import ALPHA, direction_symbol, median, wilcoxon_one_tailed

logger = logging.getLogger(__name__)

__all__ = [
    "PlanError",
    "MissingBaselineError",
    "Cell",
    "ExperimentPlan",
    "PRESETS",
    "derive_seed",
    "plan_experiment",
    "cell_datasets",
    "run_cell",
    "execute",
    "SummaryRow",
    "TestRow",
    "RobustnessReport",
    "analyze",
    "emit_plot_data",
]

METHODS = ("GP", "GSGP")
SEED_ENV = "NOISYGP_SEED"

_METHOD_CODE = {"GP": 0, "GSGP": 1}
_RUN, _DATA, _NOISE = 0, 1, 2

# measure -> (one-tailed alternative, alternative under which GSGP is better)
TEST_LAYOUT = {
    "NRMSE": ("gsgp_less", "gsgp_less"),
    "RIE": ("gsgp_greater", "gsgp_less"),
    "EIE": ("gsgp_less", "gsgp_less"),
}


class PlanError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class MissingBaselineError(ValueError):
    """A dataset/method pair has no 0% noise records."""


def _noise_key(level: float) -> int:
    # basis points; exact for the 0.02-step grid
    return int(round(level * 10000))


def derive_seed(base_seed: int, purpose: int, *coords) -> int:
    """63-bit seed from the base seed, a purpose tag and integer/str coordinates."""
    key = [purpose]
    for c in coords:
        key.append(zlib.crc32(c.encode()) if isinstance(c, str) else int(c))
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class Cell:
    method: str
    dataset: str
    noise_level: float
    sample_id: int
    rep_index: int
    seed: int

    @property
    def key(self) -> tuple:
        return (self.method, self.dataset, self.noise_level, self.sample_id, self.rep_index)


@dataclass(frozen=True)
class ExperimentPlan:
    datasets: tuple = tuple(BENCHMARKS)
    noise_levels: tuple = NOISE_GRID
    methods: tuple = METHODS
    repetitions: int = 50
    base_seed: int = 2019
    gp: GpConfig = field(default_factory=GpConfig)
    gsgp: GsgpConfig = field(default_factory=GsgpConfig)
    noise_per_rep: bool = False

    def __post_init__(self):
        for name in self.datasets:
            if name not in BENCHMARKS:
                raise PlanError(f"unknown dataset {name!r}")
        for seq, what in ((self.datasets, "dataset"), (self.noise_levels, "noise level"), (self.methods, "method")):
            if len(set(seq)) != len(seq):
                raise PlanError(f"duplicate {what} in plan")
        for level in self.noise_levels:
            if not 0.0 <= level <= 1.0:
                raise PlanError(f"noise level {level} outside [0, 1]")
        for m in self.methods:
            if m not in METHODS:
                raise PlanError(f"unknown method {m!r}")
        if self.repetitions < 1:
            raise PlanError("repetitions must be positive")
        if any(get_spec(n).uniform for n in self.datasets) and self.repetitions % N_UNIFORM_SAMPLES:
            raise PlanError(f"repetitions must be a multiple of {N_UNIFORM_SAMPLES} for randomly sampled datasets")

    def samples(self, dataset: str) -> list:
        """``(sample_id, reps_on_that_sample)`` pairs for a dataset."""
        if get_spec(dataset).uniform:
            return [(s, self.repetitions // N_UNIFORM_SAMPLES) for s in range(1, N_UNIFORM_SAMPLES + 1)]
        return [(0, self.repetitions)]

    def cells(self) -> list:
        out = []
        for dataset in self.datasets:
            for level in self.noise_levels:
                for method in self.methods:
                    for sample_id, reps in self.samples(dataset):
                        for rep in range(reps):
                            seed = derive_seed(
                                self.base_seed, _RUN, _METHOD_CODE[method], dataset,
                                _noise_key(level), sample_id, rep,
                            )
                            out.append(Cell(method, dataset, float(level), sample_id, rep, seed))
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["datasets"] = list(self.datasets)
        d["noise_levels"] = list(self.noise_levels)
        d["methods"] = list(self.methods)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        d["datasets"] = tuple(d["datasets"])
        d["noise_levels"] = tuple(float(x) for x in d["noise_levels"])
        d["methods"] = tuple(d["methods"])
        d["gp"] = GpConfig(**d["gp"])
        d["gsgp"] = GsgpConfig(**d["gsgp"])
        return cls(**d)


PRESETS = {
    "full": ExperimentPlan(),
    "desk": ExperimentPlan(
        noise_levels=(0.0, 0.1, 0.2),
        repetitions=10,
        gp=GpConfig(pop_size=200, generations=200),
        gsgp=GsgpConfig(pop_size=200, generations=200),
    ),
}


def _parse_list(text, convert=str):
    items = [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]
    try:
        return tuple(convert(t) for t in items)
    except ValueError as exc:
        raise PlanError(f"malformed list {text!r}: {exc}") from None


def _parse_bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise PlanError(f"not a boolean: {text!r}")


def _engine_config(cls, base, section):
    if section is None:
        return base
    values = asdict(base)
    for key, raw in section.items():
        if key not in values:
            raise PlanError(f"unknown {cls.__name__} option {key!r}")
        kind = type(values[key])
        try:
            values[key] = _parse_bool(raw) if kind is bool else kind(raw)
        except ValueError:
            raise PlanError(f"bad value for {key}: {raw!r}") from None
    try:
        return cls(**values)
    except ValueError as exc:
        raise PlanError(str(exc)) from None


def plan_experiment(config=None) -> ExperimentPlan:
    """Build a plan from an INI file, INI text, or nothing (full preset).

    Sections: ``[plan]`` with ``preset``, ``datasets``, ``noise_levels``,
    ``methods``, ``repetitions``, ``base_seed``, ``noise_per_rep``; and
    optional ``[gp]`` / ``[gsgp]`` overriding engine fields. A
    ``NOISYGP_SEED`` environment variable overrides ``base_seed``.
    """
    parser = configparser.ConfigParser()
    if config is not None:
        text = config
        if isinstance(config, Path) or (isinstance(config, str) and "\n" not in config and "=" not in config):
            path = Path(config)
            if not path.exists():
                raise PlanError(f"plan file not found: {path}")
            text = path.read_text()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise PlanError(f"cannot parse plan: {exc}") from None

    sec = parser["plan"] if parser.has_section("plan") else {}
    preset = sec.get("preset", "full")
    if preset not in PRESETS:
        raise PlanError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    base = PRESETS[preset]
    kw = {}
    if "datasets" in sec:
        names = _parse_list(sec["datasets"])
        kw["datasets"] = tuple(BENCHMARKS) if names == ("all",) else names
    if "noise_levels" in sec:
        kw["noise_levels"] = _parse_list(sec["noise_levels"], float)
    if "methods" in sec:
        kw["methods"] = _parse_list(sec["methods"])
    try:
        if "repetitions" in sec:
            kw["repetitions"] = int(sec["repetitions"])
        if "base_seed" in sec:
            kw["base_seed"] = int(sec["base_seed"])
    except ValueError as exc:
        raise PlanError(str(exc)) from None
    if "noise_per_rep" in sec:
        kw["noise_per_rep"] = _parse_bool(sec["noise_per_rep"])
    if os.environ.get(SEED_ENV):
        try:
            kw["base_seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise PlanError(f"{SEED_ENV} must be an integer") from None
    kw["gp"] = _engine_config(GpConfig, base.gp, parser["gp"] if parser.has_section("gp") else None)
    kw["gsgp"] = _engine_config(GsgpConfig, base.gsgp, parser["gsgp"] if parser.has_section("gsgp") else None)
    plan = replace(base, **kw)
    keys = [c.key for c in plan.cells()]
    if len(keys) != len(set(keys)):
        raise PlanError("plan expands to duplicate cells")
    return plan


@lru_cache(maxsize=64)
def _clean_data(base_seed: int, dataset: str, sample_id: int):
    rng = np.random.default_rng(derive_seed(base_seed, _DATA, dataset, sample_id))
    train = build_dataset(dataset, "train", sample_id, rng)
    test = build_dataset(dataset, "test", sample_id, rng)
    return train, test


def noise_seed(base_seed, dataset, level, sample_id, rep_index=None) -> int:
    coords = [dataset, _noise_key(level), sample_id]
    if rep_index is not None:
        coords.append(rep_index)
    return derive_seed(base_seed, _NOISE, *coords)


def cell_datasets(plan: ExperimentPlan, dataset: str, noise_level: float, sample_id: int, rep_index: int = 0):
    """``(noisy_train, clean_test)`` as seen by one cell.

    Unless the plan sets ``noise_per_rep``, the noisy targets depend only on
    dataset, level and sample, so every repetition and both methods share them.
    """
    train, test = _clean_data(plan.base_seed, dataset, sample_id)
    rep = rep_index if plan.noise_per_rep else None
    rng = np.random.default_rng(noise_seed(plan.base_seed, dataset, noise_level, sample_id, rep))
    return inject_noise(train, noise_level, rng), test


def run_cell(plan: ExperimentPlan, cell: Cell) -> RunRecord:
    train, test = cell_datasets(plan, cell.dataset, cell.noise_level, cell.sample_id, cell.rep_index)
    if cell.method == "GP":
        rec = run_gp(plan.gp, train, test, cell.seed, cell.rep_index)
    else:
        rec = run_gsgp(plan.gsgp, train, test, cell.seed, cell.rep_index)
    return replace(rec, noise_level=cell.noise_level)


def _run_cell_safe(plan, cell):
    try:
        return cell, run_cell(plan, cell), None
    except Exception as exc:  # surfaced per cell, never aborts the plan
        return cell, None, f"{type(exc).__name__}: {exc}"


def execute(plan: ExperimentPlan, out_dir, parallelism: int = 1, resume: bool = True) -> list:
    """Run every cell not already persisted in ``out_dir/records.csv``.

    Records are appended by this process only, in completion order. Failed
    cells are logged to ``failures.log`` and stay pending for the next
    resume. Returns all records for the plan, sorted by key.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.csv"
    (out_dir / "plan.json").write_text(json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n")
    if not resume and records_path.exists():
        records_path.unlink()
    done = {r.key: r for r in read_records(records_path)}
    cells = plan.cells()
    todo = [c for c in cells if c.key not in done]
    logger.info("%d cells planned, %d already done, %d to run", len(cells), len(cells) - len(todo), len(todo))

    def collect(cell, rec, err):
        if err is not None:
            logger.error("cell %s failed: %s", cell.key, err)
            with (out_dir / "failures.log").open("a") as fh:
                fh.write(f"{cell.key}\t{err}\n")
            return
        append_record(records_path, rec)
        done[rec.key] = rec

    if parallelism <= 1 or len(todo) <= 1:
        for cell in todo:
            collect(*_run_cell_safe(plan, cell))
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(_run_cell_safe, plan, cell) for cell in todo]
            for fut in as_completed(futures):
                collect(*fut.result())

    wanted = {c.key for c in cells}
    return sorted((r for k, r in done.items() if k in wanted), key=lambda r: r.key)


@dataclass(frozen=True)
class SummaryRow:
    dataset: str
    method: str
    noise_level: float
    median_train_nrmse: float
    median_test_nrmse: float
    test_rie: float = None
    test_eie: float = None
    n_runs: int = 0


@dataclass(frozen=True)
class TestRow:
    measure: str
    noise_level: float
    alternative: str
    statistic: float
    p_value: float
    symbol: str
    n_datasets: int


@dataclass
class RobustnessReport:
    summary: list
    tests: list
    aggregate: str = "metric_of_medians"

    def row(self, dataset, method, level) -> SummaryRow:
        for r in self.summary:
            if r.dataset == dataset and r.method == method and r.noise_level == level:
                return r
        raise KeyError((dataset, method, level))

    @property
    def datasets(self) -> list:
        return sorted({r.dataset for r in self.summary})

    @property
    def noise_levels(self) -> list:
        return sorted({r.noise_level for r in self.summary})

    def save(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(out_dir / "summary.csv", [asdict(r) for r in self.summary], list(SummaryRow.__dataclass_fields__))
        _write_csv(out_dir / "wilcoxon.csv", [asdict(r) for r in self.tests], list(TestRow.__dataclass_fields__))
        (out_dir / "analysis.json").write_text(json.dumps({"aggregate": self.aggregate}) + "\n")

    @classmethod
    def load(cls, out_dir) -> "RobustnessReport":
        import csv

        out_dir = Path(out_dir)
        meta = json.loads((out_dir / "analysis.json").read_text())

        def num(v):
            return None if v == "" else float(v)

        with (out_dir / "summary.csv").open(newline="") as fh:
            summary = [
                SummaryRow(
                    r["dataset"], r["method"], float(r["noise_level"]), float(r["median_train_nrmse"]),
                    float(r["median_test_nrmse"]), num(r["test_rie"]), num(r["test_eie"]), int(r["n_runs"]),
                )
                for r in csv.DictReader(fh)
            ]
        with (out_dir / "wilcoxon.csv").open(newline="") as fh:
            tests = [
                TestRow(
                    r["measure"], float(r["noise_level"]), r["alternative"], float(r["statistic"]),
                    float(r["p_value"]), r["symbol"], int(r["n_datasets"]),
                )
                for r in csv.DictReader(fh)
            ]
        return cls(summary, tests, meta["aggregate"])

    def render(self) -> str:
        """Text table: one row per measure, one column pair per noise level."""
        levels = self.noise_levels
        head = ["measure"] + [f"{round(lvl * 100):g}%" for lvl in levels]
        lines = []
        by_key = {(t.measure, t.noise_level): t for t in self.tests}
        for measure in TEST_LAYOUT:
            cells = [measure]
            for lvl in levels:
                t = by_key.get((measure, lvl))
                if t is None:
                    cells.append("---")
                elif math.isnan(t.p_value):
                    cells.append("n/a")
                else:
                    cells.append(f"{t.p_value:.3f} {t.symbol}")
            lines.append(cells)
        widths = [max(len(r[i]) for r in [head] + lines) for i in range(len(head))]
        fmt = lambda row: "  ".join(c.ljust(w) for c, w in zip(row, widths))  # noqa: E731
        legend = (
            f"▲ GSGP significantly better, ▼ significantly worse, ♦ no significant difference "
            f"(alpha={ALPHA}); aggregate: {self.aggregate}"
        )
        return "\n".join([fmt(head), fmt(["-" * w for w in widths])] + [fmt(r) for r in lines] + ["", legend])


def _write_csv(path, rows, columns):
    import csv

    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def analyze(records, aggregate: str = "metric_of_medians") -> RobustnessReport:
    """Medians per cell, test RIE/EIE, and per-level Wilcoxon tests.

    ``aggregate="metric_of_medians"`` applies RIE/EIE to the median test
    NRMSE at each level; ``"median_of_metrics"`` takes the median of per-run
    values, pairing each run with the 0% run of the same sample and
    repetition.
    """
    if aggregate not in ("metric_of_medians", "median_of_metrics"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    cells = defaultdict(list)
    for r in records:
        cells[(r.dataset, r.method, r.noise_level)].append(r)
    summary = []
    for dataset, method in sorted({(d, m) for d, m, _ in cells}):
        base = cells.get((dataset, method, 0.0))
        if not base:
            raise MissingBaselineError(f"{dataset}/{method} has no 0% noise records")
        e0 = median([r.final_test_nrmse for r in base])
        base_by_rep = {(r.sample_id, r.rep_index): r.final_test_nrmse for r in base}
        for level in sorted(lvl for d, m, lvl in cells if d == dataset and m == method):
            rs = sorted(cells[(dataset, method, level)], key=lambda r: r.key)
            ex = median([r.final_test_nrmse for r in rs])
            r_val = e_val = None
            if level > 0:
                if aggregate == "metric_of_medians":
                    r_val, e_val = float(rie(ex, e0)), float(eie(ex, e0))
                else:
                    pairs = [(r.final_test_nrmse, base_by_rep[(r.sample_id, r.rep_index)])
                             for r in rs if (r.sample_id, r.rep_index) in base_by_rep]
                    if not pairs:
                        raise MissingBaselineError(f"{dataset}/{method}: no runs pair with the 0% baseline")
                    r_val = median([rie(a, b) for a, b in pairs])
                    e_val = median([eie(a, b) for a, b in pairs])
            summary.append(SummaryRow(
                dataset, method, level, median([r.final_train_nrmse for r in rs]), ex, r_val, e_val, len(rs),
            ))

    report = RobustnessReport(summary, [], aggregate)
    report.tests = _wilcoxon_rows(report)
    return report


def _wilcoxon_rows(report):
    rows = []
    index = {(r.dataset, r.method, r.noise_level): r for r in report.summary}
    for measure, (alternative, better) in TEST_LAYOUT.items():
        for level in report.noise_levels:
            if measure != "NRMSE" and level == 0:
                continue
            attr = {"NRMSE": "median_test_nrmse", "RIE": "test_rie", "EIE": "test_eie"}[measure]
            gp_vals, gsgp_vals = [], []
            for ds in report.datasets:
                a, b = index.get((ds, "GP", level)), index.get((ds, "GSGP", level))
                if a is not None and b is not None:
                    gp_vals.append(getattr(a, attr))
                    gsgp_vals.append(getattr(b, attr))
            try:
                res = wilcoxon_one_tailed(gp_vals, gsgp_vals, alternative)
                stat, p, sym = res.statistic, res.p_value, direction_symbol(res.p_value, alternative, better)
            except ValueError:
                stat, p, sym = math.nan, math.nan, ""
            rows.append(TestRow(measure, level, alternative, stat, p, sym, len(gp_vals)))
    return rows


def emit_plot_data(report: RobustnessReport, out_dir) -> list:
    """Per-dataset CSVs: ``fig2_<dataset>.csv`` (median NRMSE) and ``fig3_<dataset>.csv`` (RIE/EIE).

    The 0% row of the robustness file carries RIE = 0 and EIE = E0 / (1 + E0).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for ds in report.datasets:
        fig2, fig3 = [], []
        for level in report.noise_levels:
            gp, gs = report.row(ds, "GP", level), report.row(ds, "GSGP", level)
            fig2.append({
                "noise_level": level,
                "gp_train": gp.median_train_nrmse, "gp_test": gp.median_test_nrmse,
                "gsgp_train": gs.median_train_nrmse, "gsgp_test": gs.median_test_nrmse,
            })

            def pair(row):
                if row.noise_level == 0:
                    e0 = row.median_test_nrmse
                    return 0.0, float(eie(e0, e0))
                return row.test_rie, row.test_eie

            (gp_rie, gp_eie), (gs_rie, gs_eie) = pair(gp), pair(gs)
            fig3.append({
                "noise_level": level, "gp_rie": gp_rie, "gsgp_rie": gs_rie, "gp_eie": gp_eie, "gsgp_eie": gs_eie,
            })
        for name, rows in (("fig2", fig2), ("fig3", fig3)):
            path = out_dir / f"{name}_{ds}.csv"
            _write_csv(path, rows, list(rows[0]))
            written.append(path)
    return written
