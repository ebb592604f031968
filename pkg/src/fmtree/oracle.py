"""Reference model and differential checking.

The oracle is a plain in-memory map.  ``differential_check`` replays an op
sequence against the oracle and a device-backed tree in lockstep, comparing
every observable (delete hit/miss, search result) and the final entry list,
and reports the first divergence.  Workloads for differential runs include
searches; benchmark workloads do not.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .btree import BaselineTree
from .flash import FlashDevice, FlashGeometry
from .fm_tree import FMTree
from .layout import config_for_bits

INSERT = "insert"
DELETE = "delete"
SEARCH = "search"


@dataclass(frozen=True)
class WorkloadOp:
    kind: str
    key: int
    payload: int | None = None


@dataclass(frozen=True)
class ReplayResult:
    """Observables produced by the reference map: one slot per op."""

    results: list
    entries: list[tuple[int, int]]


@dataclass(frozen=True)
class Verdict:
    passed: bool
    # (op index, expected, actual); index == len(ops) marks a final-state mismatch
    first_divergence: tuple | None


def replay(ops) -> ReplayResult:
    """Apply ops to an in-memory map; inserts record None as their observable."""
    model: dict[int, int] = {}
    results: list = []
    for op in ops:
        if op.kind == INSERT:
            model[op.key] = op.payload
            results.append(None)
        elif op.kind == DELETE:
            results.append(model.pop(op.key, None) is not None)
        elif op.kind == SEARCH:
            results.append(model.get(op.key))
        else:
            raise ValueError(f"unknown op kind {op.kind!r}")
    return ReplayResult(results, sorted(model.items()))


def derive_rng(*parts) -> random.Random:
    """Deterministic RNG from a tuple of ints/strings, stable across runs."""
    text = "/".join(str(p) for p in parts)
    seed = int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")
    return random.Random(seed)


def make_tree(tree_kind: str, *, q: int = 8, blocks: int = 1024,
              slots_per_node: int = 8, key_bits: int = 10, payload_bits: int = 16,
              gc_barren_fraction: float = 0.25, recycle_tombstones: bool = True,
              always_erase_on_rewrite: bool = False):
    """Build a tree (and its device) sized for differential runs."""
    config = config_for_bits(q, slots_per_node, key_bits, payload_bits,
                             gc_barren_fraction=gc_barren_fraction,
                             recycle_tombstones=recycle_tombstones)
    device = FlashDevice(FlashGeometry(q, config.node_cells, blocks))
    if tree_kind == "fm":
        return FMTree.create(device, config)
    if tree_kind == "baseline":
        return BaselineTree(device, config,
                            always_erase_on_rewrite=always_erase_on_rewrite)
    raise ValueError(f"unknown tree kind {tree_kind!r}")


def make_differential_ops(seed: int, count: int, *, key_space: int = 1024,
                          payload_space: int = 65536, p_insert: float = 0.4,
                          p_delete: float = 0.3) -> list[WorkloadOp]:
    """Mixed insert/delete/search sequence with churn on a small key space.

    Deletes and searches target a live key half the time so both present and
    absent paths get exercised.
    """
    rng = derive_rng("diff", seed)
    live: list[int] = []
    index: dict[int, int] = {}
    ops: list[WorkloadOp] = []

    def add(key: int) -> None:
        if key not in index:
            index[key] = len(live)
            live.append(key)

    def remove(key: int) -> None:
        pos = index.pop(key, None)
        if pos is not None:
            last = live.pop()
            if pos < len(live):
                live[pos] = last
                index[last] = pos

    for _ in range(count):
        roll = rng.random()
        if roll < p_insert or not live:
            key = rng.randrange(key_space)
            ops.append(WorkloadOp(INSERT, key, rng.randrange(payload_space)))
            add(key)
        else:
            if rng.random() < 0.5:
                key = live[rng.randrange(len(live))]
            else:
                key = rng.randrange(key_space)
            if roll < p_insert + p_delete:
                ops.append(WorkloadOp(DELETE, key))
                remove(key)
            else:
                ops.append(WorkloadOp(SEARCH, key))
    return ops


def differential_check(ops, tree_kind: str = "fm", *, tree_factory=None,
                       gc_at=(), **setup) -> Verdict:
    """Replay ops against oracle and tree together; stop at the first mismatch.

    ``gc_at`` forces a ``gc_rebuild`` after the listed op indices and checks
    that the rebuild preserves the live entries exactly.
    """
    reference = replay(ops)
    tree = tree_factory() if tree_factory is not None else make_tree(tree_kind, **setup)
    gc_points = set(gc_at)
    for i, op in enumerate(ops):
        if op.kind == INSERT:
            tree.insert(op.key, op.payload)
            actual = None
        elif op.kind == DELETE:
            actual = tree.delete(op.key)
        else:
            actual = tree.search(op.key)
        expected = reference.results[i]
        if actual != expected:
            return Verdict(False, (i, expected, actual))
        if i in gc_points:
            before = tree.live_entries()
            tree.gc_rebuild()
            after = tree.live_entries()
            if before != after:
                return Verdict(False, (i, before, after))
    final = tree.live_entries()
    if final != reference.entries:
        return Verdict(False, (len(ops), reference.entries, final))
    return Verdict(True, None)
