"""Experiment configuration and the fixed-dataset, distribution-sweep and ad-hoc runs."""
from __future__ import annotations

import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from . import paillier as he
from . import secret_sharing as ss
from ._rand import derive_seed
from .data_gen import FIXTURES, SWEEP_DISTRIBUTIONS, Dataset, DatasetError, fixture_path, load_csv, parse_dist
from .harness import CONCURRENT, SEQUENTIAL, FakeClock, MonotonicClock, RuntimeSample, SimHarness
from .mean_protocols import MeanProtocolConfig, Mode, Protocol
from .monte_carlo import McEstimate, RunnerSpec, cached_keypair, simulate, summarize
from .stats_report import RegressionFit, ReportRow, ReportTable, fit_ols, timestamp, write_report

EXPERIMENTS = ("type1", "type2", "adhoc")
FORMATS = ("markdown", "csv", "json")
SMOKE_FACTOR = 100
TICK_NS = 1000


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class CellFailures(RuntimeError):
    def __init__(self, failures: list[tuple[str, BaseException]], table=None):
        super().__init__(f"{len(failures)} cell(s) failed")
        self.failures = failures
        self.table = table


@dataclass
class DatasetRef:
    name: str
    path: str
    column: str
    delimiter: str = ","


def default_datasets() -> list[DatasetRef]:
    return [DatasetRef(label, str(fixture_path(key)), column)
            for key, (_, column, label) in FIXTURES.items()]


@dataclass
class ExperimentConfig:
    experiment: str = "adhoc"
    protocols: list[str] = field(default_factory=lambda: ["HE", "MPC"])
    m_values: list[int] = field(default_factory=lambda: [1000, 5000])
    datasets: list[DatasetRef] = field(default_factory=default_datasets)
    distributions: list[str] = field(default_factory=lambda: list(SWEEP_DISTRIBUTIONS))
    sizes: list[int] = field(default_factory=lambda: [50, 500, 1000])
    values: list[int] | None = None
    source: str | None = None
    parties: int = 3
    key_bits: int = he.DEFAULT_KEY_BITS
    modulus: int = ss.DEFAULT_MODULUS
    mode: str | None = None
    seed: int = 0
    out: str | None = None
    format: str = "markdown"
    smoke: bool = False
    parallel_cells: bool = False
    scheduling: str = SEQUENTIAL
    clock: str = "monotonic"
    fit_on: str = "samples"
    verbose: bool = False
    transcript: str | None = None

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError([f"unknown config key(s): {', '.join(sorted(unknown))}"])
        obj = dict(obj)
        if "datasets" in obj:
            obj["datasets"] = [DatasetRef(**d) for d in obj["datasets"]]
        return cls(**obj)

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentConfig:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ConfigError([f"cannot read config {path}: {exc}"]) from None

    @property
    def resolved_mode(self) -> Mode:
        if self.mode is not None:
            return Mode(self.mode)
        # benchmarks keep the shared-inverse multiplication round; ad-hoc runs report the true mean
        return Mode.EXACT if self.experiment == "adhoc" else Mode.PAPER_FAITHFUL

    @property
    def adhoc_source(self) -> str:
        if self.source is not None:
            return self.source
        return "values" if self.values is not None else "dist"

    @property
    def effective_m(self) -> list[int]:
        if self.smoke:
            return [max(1, m // SMOKE_FACTOR) for m in self.m_values]
        return list(self.m_values)

    @property
    def effective_sizes(self) -> list[int]:
        if self.smoke:
            return [max(1, s // SMOKE_FACTOR) for s in self.sizes]
        return list(self.sizes)

    def validate(self) -> None:
        problems = []
        if self.experiment not in EXPERIMENTS:
            problems.append(f"experiment must be one of {EXPERIMENTS}")
        for p in self.protocols:
            if p not in ("HE", "MPC"):
                problems.append(f"unknown protocol {p!r}")
        if not self.protocols:
            problems.append("no protocol selected")
        if not self.m_values or any(m < 1 for m in self.m_values):
            problems.append("every M must be at least 1")
        if self.parties < 2:
            problems.append("parties must be at least 2")
        if self.key_bits < he.MIN_KEY_BITS or self.key_bits % 2:
            problems.append(f"key bits must be even and at least {he.MIN_KEY_BITS}")
        if self.modulus < 2:
            problems.append("modulus must be at least 2")
        if self.mode is not None and self.mode not in {m.value for m in Mode}:
            problems.append(f"mode must be one of {[m.value for m in Mode]}")
        if self.format not in FORMATS:
            problems.append(f"format must be one of {FORMATS}")
        if self.scheduling not in (SEQUENTIAL, CONCURRENT):
            problems.append("scheduling must be sequential or concurrent")
        if self.clock not in ("monotonic", "tick"):
            problems.append("clock must be monotonic or tick")
        if self.fit_on not in ("samples", "aggregates"):
            problems.append("fit_on must be samples or aggregates")
        if any(s < 1 for s in self.sizes):
            problems.append("sizes must be positive")
        for name in self.distributions:
            try:
                parse_dist(name, 1)
            except DatasetError as exc:
                problems.append(str(exc))

        if self.experiment == "type1":
            if self.values is not None:
                problems.append("--values is only valid for adhoc runs")
            if not self.datasets:
                problems.append("type1 needs at least one dataset")
            for ref in self.datasets:
                if not Path(ref.path).is_file():
                    problems.append(f"dataset file not found: {ref.path}")
        elif self.experiment == "type2":
            if self.values is not None:
                problems.append("--values is only valid for adhoc runs")
            if not self.distributions or not self.sizes:
                problems.append("type2 needs distributions and sizes")
        elif self.experiment == "adhoc":
            if len(self.m_values) != 1:
                problems.append("adhoc takes a single M")
            source = self.adhoc_source
            if source not in ("values", "dataset", "dist"):
                problems.append("adhoc source must be values, dataset or dist")
            elif source == "values":
                if not self.values or any(v < 0 for v in self.values):
                    problems.append("values must be a nonempty list of nonnegative integers")
            elif source == "dataset":
                if len(self.datasets) != 1:
                    problems.append("adhoc takes exactly one dataset")
                for ref in self.datasets:
                    if not Path(ref.path).is_file():
                        problems.append(f"dataset file not found: {ref.path}")
            elif not self.distributions or not self.sizes:
                problems.append("adhoc with a distribution needs --dist and --sizes")
        if problems:
            raise ConfigError(problems)


# -- cells ----------------------------------------------------------------------

@dataclass
class Cell:
    dataset: str
    protocol: str
    M: int
    runner: RunnerSpec
    size: int | None = None

    @property
    def name(self) -> str:
        size = f" size={self.size}" if self.size is not None else ""
        return f"{self.dataset}{size} {self.protocol} M={self.M}"


@dataclass
class CellResult:
    cell: Cell
    client: McEstimate
    server: McEstimate
    samples: list[RuntimeSample]


def _protocol_config(cfg: ExperimentConfig, protocol: str) -> MeanProtocolConfig:
    return MeanProtocolConfig(Protocol(protocol), cfg.parties, cfg.key_bits, cfg.modulus, cfg.resolved_mode)


def _make_harness(cfg: ExperimentConfig, record: bool = False) -> SimHarness:
    clock = FakeClock(step=TICK_NS) if cfg.clock == "tick" else MonotonicClock()
    return SimHarness(clock, cfg.scheduling, record_transcript=record)


def _run_cell(cfg: ExperimentConfig, cell: Cell) -> CellResult:
    keys = None
    if cell.runner.config.protocol is Protocol.HE:
        keys = cached_keypair(cfg.key_bits, cfg.seed)
    with _make_harness(cfg) as harness:
        samples = simulate(cell.runner, cell.M, harness=harness, keys=keys)
    client, server = summarize(samples)
    if cfg.verbose:
        parties = sorted({i for s in samples for i in s.party_ms})
        per_party = {i: sum(s.party_ms.get(i, 0.0) for s in samples) / len(samples) for i in parties}
        print(f"{cell.name}: per-party server ms {per_party}", file=sys.stderr)
    return CellResult(cell, client, server, samples)


def _run_cells(cfg: ExperimentConfig, cells: list[Cell]) -> tuple[list[CellResult], list[tuple[str, BaseException]]]:
    results: list[CellResult | None] = [None] * len(cells)
    failures = []

    def attempt(i: int):
        try:
            results[i] = _run_cell(cfg, cells[i])
        except Exception as exc:  # reported per cell, the rest keep running
            failures.append((cells[i].name, exc))

    if cfg.parallel_cells:
        with ThreadPoolExecutor() as pool:
            list(pool.map(attempt, range(len(cells))))
    else:
        for i in range(len(cells)):
            attempt(i)
    return [r for r in results if r is not None], failures


def _table(experiment: str, results: list[CellResult]) -> ReportTable:
    rows = [ReportRow(r.cell.dataset, r.cell.protocol, r.cell.M,
                      r.client.theta_hat, r.client.var_hat, r.server.theta_hat, r.server.var_hat,
                      r.cell.size)
            for r in results]
    return ReportTable(experiment, rows)


SAMPLE_HEADER = ("dataset", "size", "protocol", "M", "iteration", "t_cli_ms", "t_srv_ms", "h_U")


def write_samples(results: list[CellResult], path: Path) -> None:
    """Raw per-iteration samples of every cell, in report row order."""
    table_order = _table("x", results).sorted_rows()
    by_row = {}
    for r in results:
        by_row.setdefault((r.cell.dataset, r.cell.protocol, r.cell.M, r.cell.size), r)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_HEADER)
        for row in table_order:
            r = by_row[(row.dataset, row.protocol, row.M, row.size)]
            size = r.cell.size if r.cell.size is not None else r.cell.runner.size
            for s in r.samples:
                w.writerow([r.cell.dataset, size, r.cell.protocol, r.cell.M, s.iteration,
                            repr(s.t_cli), repr(s.t_srv), repr(s.h_u)])


def _emit(cfg: ExperimentConfig, table: ReportTable, results: list[CellResult]) -> None:
    if cfg.out is None:
        return
    stamp = timestamp()
    write_report(table, cfg.out, cfg.format, stamp)
    write_samples(results, Path(cfg.out) / f"{table.experiment}-{stamp}-samples.csv")


def _check_failures(failures, table):
    if failures:
        raise CellFailures(failures, table)


def _load_ref(cfg: ExperimentConfig, ref: DatasetRef) -> Dataset:
    data = load_csv(ref.path, ref.column, ref.delimiter)
    if cfg.smoke:
        keep = max(1, math.ceil(len(data) / SMOKE_FACTOR))
        data = Dataset(data.values[:keep], data.provenance)
    return data


def cmd_type1(cfg: ExperimentConfig) -> ReportTable:
    """Fixed datasets x protocols x M values."""
    cfg.validate()
    cells = []
    for ref in cfg.datasets:
        data = _load_ref(cfg, ref)
        label = f"{ref.name} ({len(data)} instances)"
        seed = derive_seed(cfg.seed, "type1", ref.name)
        for protocol in cfg.protocols:
            runner = RunnerSpec(_protocol_config(cfg, protocol), dataset=data.values, seed=seed)
            for M in cfg.effective_m:
                cells.append(Cell(label, protocol, M, runner))
    results, failures = _run_cells(cfg, cells)
    table = _table("type1", results)
    _emit(cfg, table, results)
    _check_failures(failures, table)
    return table


def _fit(results: list[CellResult], protocol: str, on: str) -> RegressionFit | None:
    mine = [r for r in results if r.cell.protocol == protocol]
    if on == "aggregates":
        x = [r.cell.size for r in mine]
        y = [r.client.theta_hat for r in mine]
    else:
        x = [r.cell.size for r in mine for _ in r.samples]
        y = [s.t_cli for r in mine for s in r.samples]
    if len(x) < 3 or len(set(x)) < 2:
        return None
    return fit_ols(x, y)


def cmd_type2(cfg: ExperimentConfig) -> tuple[ReportTable, dict[str, RegressionFit]]:
    """Distribution x size x protocol x M sweep, plus t_cli ~ size fits per protocol."""
    cfg.validate()
    cells = []
    for name in cfg.distributions:
        for size in cfg.effective_sizes:
            spec = parse_dist(name, size)
            label = spec.with_size(1).label
            seed = derive_seed(cfg.seed, "type2", label, size)
            for protocol in cfg.protocols:
                runner = RunnerSpec(_protocol_config(cfg, protocol), dist=spec, seed=seed)
                for M in cfg.effective_m:
                    cells.append(Cell(label, protocol, M, runner, size))
    results, failures = _run_cells(cfg, cells)
    table = _table("type2", results)
    fits = {}
    for protocol in cfg.protocols:
        fit = _fit(results, protocol, cfg.fit_on)
        if fit is not None:
            fits[protocol] = fit
    table.regressions = fits
    _emit(cfg, table, results)
    _check_failures(failures, table)
    return table, fits


@dataclass
class AdhocResult:
    protocol: str
    client: McEstimate
    server: McEstimate
    value: int
    samples: list[RuntimeSample]


def cmd_adhoc(cfg: ExperimentConfig) -> list[AdhocResult]:
    """Single-cell estimate per selected protocol, same dataset and seed for each."""
    cfg.validate()
    (M,) = cfg.effective_m
    seed = derive_seed(cfg.seed, "adhoc")
    source = cfg.adhoc_source
    if source == "values":
        runner_kw = {"dataset": tuple(cfg.values)}
    elif source == "dataset":
        runner_kw = {"dataset": _load_ref(cfg, cfg.datasets[0]).values}
    else:
        runner_kw = {"dist": parse_dist(cfg.distributions[0], cfg.effective_sizes[0])}

    out = []
    for protocol in cfg.protocols:
        runner = RunnerSpec(_protocol_config(cfg, protocol), seed=seed, **runner_kw)
        keys = cached_keypair(cfg.key_bits, cfg.seed) if protocol == "HE" else None
        with _make_harness(cfg, record=cfg.transcript is not None) as harness:
            samples = simulate(runner, M, harness=harness, keys=keys)
            if cfg.transcript is not None:
                with open(f"{cfg.transcript}.{protocol}.jsonl", "w") as fh:
                    harness.dump_transcript(fh)
        client, server = summarize(samples)
        out.append(AdhocResult(protocol, client, server, samples[-1].value, samples))
    return out
