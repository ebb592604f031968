"""Paired-tree benchmark: identical workloads, access counters compared.

Each trial builds both trees on separate but identically shaped devices,
replays the same generated workload into each, and snapshots counters, wear,
and tree stats.  Workloads are a deterministic function of (seed, trial), so
a report is reproducible byte-for-byte.

Workload shape per trial: ``baseline_inserts`` uniform-key inserts to
populate, then ``mixed_ops`` operations that are inserts with probability
``insert_fraction`` and otherwise delete a key sampled uniformly from the
live set (degrading to an insert when nothing is live).  Searches are
excluded here; they touch no cells differently per run and are covered by
the differential suite.

The synthetic cost folds the counters into microseconds with weights shaped
like real parts: erases are three to four orders of magnitude more expensive
than reads, with programs in between.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
import sys
from dataclasses import asdict, dataclass, field

from .btree import BaselineTree
from .flash import FlashDevice, FlashGeometry
from .fm_tree import FMTree
from .layout import DeviceFull, TreeConfig, width_for_bits
from .oracle import DELETE, INSERT, WorkloadOp, derive_rng

DEFAULT_SEED = 123456789

CSV_HEADER = ["trial", "tree", "cell_reads", "cell_programs", "block_erases",
              "max_block_erases", "erase_ratio", "read_ratio", "program_ratio",
              "synthetic_cost_us"]


class BenchError(Exception):
    """Base class for benchmark harness errors."""


class TrialFailure(BenchError):
    """A trial could not complete; carries diagnostics."""


class IoFailure(BenchError):
    """Report destination could not be written."""


@dataclass(frozen=True)
class BenchConfig:
    seed: int = DEFAULT_SEED
    baseline_inserts: int = 1000
    mixed_ops: int = 10000
    trials: int = 4
    insert_fraction: float = 0.5
    q: int = 8
    blocks: int = 4096
    slots_per_node: int = 16
    key_bits: int = 32
    payload_bits: int = 32
    gc_barren_fraction: float = 0.25
    always_erase_on_rewrite: bool = False
    report_format: str = "json"
    t_read_us: float = 25.0
    t_program_us: float = 200.0
    t_erase_us: float = 1750.0

    def __post_init__(self) -> None:
        if self.baseline_inserts < 0 or self.mixed_ops < 0:
            raise ValueError("op counts must be >= 0")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 0.0 <= self.insert_fraction <= 1.0:
            raise ValueError(f"insert_fraction must be in [0, 1], got {self.insert_fraction}")
        if self.report_format not in ("json", "csv"):
            raise ValueError(f"report_format must be json or csv, got {self.report_format!r}")
        if min(self.t_read_us, self.t_program_us, self.t_erase_us) < 0:
            raise ValueError("cost weights must be >= 0")
        self.tree_config()  # validates B and derived widths

    def tree_config(self) -> TreeConfig:
        return TreeConfig(
            slots_per_node=self.slots_per_node,
            key_width=width_for_bits(self.q, self.key_bits),
            payload_width=width_for_bits(self.q, self.payload_bits),
            gc_barren_fraction=self.gc_barren_fraction,
        )

    def geometry(self) -> FlashGeometry:
        # blocks are sized to hold exactly one node
        return FlashGeometry(self.q, self.tree_config().node_cells, self.blocks)


@dataclass(frozen=True)
class TreeTrialResult:
    cell_reads: int
    cell_programs: int
    block_erases: int
    max_block_erases: int
    mean_block_erases: float
    synthetic_cost_us: float
    stats: dict


@dataclass(frozen=True)
class TrialReport:
    trial: int
    fm: TreeTrialResult
    baseline: TreeTrialResult
    erase_ratio: float
    read_ratio: float
    program_ratio: float


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    trials: list[TrialReport]
    means: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "trials": [asdict(t) for t in self.trials],
            "means": self.means,
        }


def generate_workload(config: BenchConfig, trial_index: int) -> list[WorkloadOp]:
    """Deterministic op sequence for one trial (inserts and deletes only)."""
    rng = derive_rng("bench", config.seed, trial_index)
    key_space = 2 ** config.key_bits
    payload_space = 2 ** config.payload_bits
    live: list[int] = []
    index: dict[int, int] = {}
    ops: list[WorkloadOp] = []

    def push_insert() -> None:
        key = rng.randrange(key_space)
        ops.append(WorkloadOp(INSERT, key, rng.randrange(payload_space)))
        if key not in index:
            index[key] = len(live)
            live.append(key)

    for _ in range(config.baseline_inserts):
        push_insert()
    for _ in range(config.mixed_ops):
        if rng.random() < config.insert_fraction or not live:
            push_insert()
        else:
            pos = rng.randrange(len(live))
            key = live[pos]
            ops.append(WorkloadOp(DELETE, key))
            last = live.pop()
            if pos < len(live):
                live[pos] = last
                index[last] = pos
            del index[key]
    return ops


def _measure(config: BenchConfig, device: FlashDevice, stats: dict) -> TreeTrialResult:
    counters = device.counters()
    wear = device.wear_stats()
    cost = (counters.cell_reads * config.t_read_us
            + counters.cell_programs * config.t_program_us
            + counters.block_erases * config.t_erase_us)
    return TreeTrialResult(
        cell_reads=counters.cell_reads,
        cell_programs=counters.cell_programs,
        block_erases=counters.block_erases,
        max_block_erases=wear.max_erases,
        mean_block_erases=wear.mean_erases,
        synthetic_cost_us=cost,
        stats=stats,
    )


def run_trial(config: BenchConfig, trial_index: int) -> TrialReport:
    ops = generate_workload(config, trial_index)
    tree_config = config.tree_config()
    geometry = config.geometry()

    fm_device = FlashDevice(geometry)
    fm_tree = FMTree.create(fm_device, tree_config)
    baseline_device = FlashDevice(geometry)
    baseline_tree = BaselineTree(baseline_device, tree_config,
                                 always_erase_on_rewrite=config.always_erase_on_rewrite)
    # counters cover the workload only, not setup
    fm_device.reset_counters()
    baseline_device.reset_counters()

    for name, tree in (("fm", fm_tree), ("baseline", baseline_tree)):
        try:
            for op in ops:
                if op.kind == INSERT:
                    tree.insert(op.key, op.payload)
                else:
                    tree.delete(op.key)
        except DeviceFull as exc:
            raise TrialFailure(
                f"trial {trial_index}: {name} tree exhausted the device "
                f"({config.blocks} blocks); device undersized for this workload"
            ) from exc

    fm_result = _measure(config, fm_device, asdict(fm_tree.tree_stats()))
    baseline_result = _measure(config, baseline_device, baseline_tree.tree_stats())
    return TrialReport(
        trial=trial_index,
        fm=fm_result,
        baseline=baseline_result,
        erase_ratio=baseline_result.block_erases / max(fm_result.block_erases, 1),
        read_ratio=baseline_result.cell_reads / max(fm_result.cell_reads, 1),
        program_ratio=baseline_result.cell_programs / max(fm_result.cell_programs, 1),
    )


def run_experiment(config: BenchConfig) -> ExperimentReport:
    trials = [run_trial(config, i) for i in range(config.trials)]

    def tree_means(pick) -> dict:
        return {
            "cell_reads": statistics.fmean(pick(t).cell_reads for t in trials),
            "cell_programs": statistics.fmean(pick(t).cell_programs for t in trials),
            "block_erases": statistics.fmean(pick(t).block_erases for t in trials),
            "max_block_erases": statistics.fmean(pick(t).max_block_erases for t in trials),
            "synthetic_cost_us": statistics.fmean(pick(t).synthetic_cost_us for t in trials),
        }

    means = {
        "fm": tree_means(lambda t: t.fm),
        "baseline": tree_means(lambda t: t.baseline),
        "erase_ratio": statistics.fmean(t.erase_ratio for t in trials),
        "read_ratio": statistics.fmean(t.read_ratio for t in trials),
        "program_ratio": statistics.fmean(t.program_ratio for t in trials),
    }
    return ExperimentReport(config=asdict(config), trials=trials, means=means)


def render_json(report: ExperimentReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def render_csv(report: ExperimentReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)

    def row(label, tree_name: str, result, erase_ratio, read_ratio, program_ratio):
        writer.writerow([label, tree_name, result["cell_reads"],
                         result["cell_programs"], result["block_erases"],
                         result["max_block_erases"], erase_ratio, read_ratio,
                         program_ratio, result["synthetic_cost_us"]])

    for t in report.trials:
        for name, result in (("fm", t.fm), ("baseline", t.baseline)):
            row(t.trial, name, asdict(result), t.erase_ratio, t.read_ratio,
                t.program_ratio)
    for name in ("fm", "baseline"):
        row("mean", name, report.means[name], report.means["erase_ratio"],
            report.means["read_ratio"], report.means["program_ratio"])
    return buffer.getvalue()


def emit_report(report: ExperimentReport, report_format: str,
                destination: str | None = None) -> str:
    """Render the report and write it to a path or stdout; returns the text."""
    if report_format == "json":
        text = render_json(report)
    elif report_format == "csv":
        text = render_csv(report)
    else:
        raise ValueError(f"unknown report format {report_format!r}")
    if destination is None:
        sys.stdout.write(text)
    else:
        try:
            with open(destination, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise IoFailure(f"cannot write report to {destination}: {exc}") from exc
    return text
