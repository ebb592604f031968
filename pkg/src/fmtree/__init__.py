"""Flash-mindful search trees on an emulated multi-level NAND device.

Two index structures over the same node-per-block layout: an update-in-place
tree that spends cell-level increments instead of block erases, and a classic
sorted B-tree that rewrites nodes wholesale.  A benchmark harness replays
identical workloads into both and compares access counters.
"""

from .bench import BenchConfig, ExperimentReport, TrialFailure, run_experiment
from .btree import BaselineTree
from .codec import (SlotState, can_overwrite, classify_slot, cycles_per_slot,
                    decode_word, encode_word)
from .flash import (FlashDevice, FlashGeometry, MonotonicityViolation,
                    OpCounters, OutOfRange)
from .fm_tree import FMTree, TreeStats
from .layout import ConfigTooLarge, DeviceFull, KeyOverflow, TreeConfig, TreeError
from .oracle import (Verdict, WorkloadOp, differential_check,
                     make_differential_ops, replay)

__all__ = [
    "BaselineTree",
    "BenchConfig",
    "ConfigTooLarge",
    "DeviceFull",
    "ExperimentReport",
    "FMTree",
    "FlashDevice",
    "FlashGeometry",
    "KeyOverflow",
    "MonotonicityViolation",
    "OpCounters",
    "OutOfRange",
    "SlotState",
    "TreeConfig",
    "TreeError",
    "TreeStats",
    "TrialFailure",
    "Verdict",
    "WorkloadOp",
    "can_overwrite",
    "classify_slot",
    "cycles_per_slot",
    "decode_word",
    "differential_check",
    "encode_word",
    "make_differential_ops",
    "replay",
    "run_experiment",
]
