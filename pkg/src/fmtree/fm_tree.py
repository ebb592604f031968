"""Erasure-avoiding search tree over the flash emulator.

A B-tree variant organised so that ordinary inserts and deletes never force a
block erase:

* Slots within a node are unsorted; lookups linearly scan the occupied slots
  (O(B) reads per node) instead of requiring the sorted layout a binary
  search would need to maintain.
* Deletes tombstone the slot state cell (+1) and leave key/payload residue in
  place.  Tombstoned slots become claimable again while the state cell has
  headroom and the residue can be overwritten upward digit-by-digit.
* Nodes that would need a rewrite (no usable slot, or a saturated state cell)
  are rewritten into freshly allocated blocks and the old block is flagged
  barren, joining a reclaim queue that is only erased when a block is
  actually reused.
* A garbage-collection rebuild bulk-loads the live entries into a compact
  new tree at half fill, retiring the old generation wholesale.

Internal nodes hold (separator, child) pairs; a lookup follows the occupied
slot with the greatest separator <= key, falling back to the smallest
separator when the key precedes all of them.  The first child written when a
node is created uses separator 0.

After a DeviceFull the tree state is unspecified; callers should treat the
run as failed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from . import codec
from .codec import SlotState
from .flash import FlashDevice
from .layout import (
    BARREN_CELL,
    KIND_CELL,
    KIND_INTERNAL,
    KIND_LEAF,
    ConfigTooLarge,
    DeviceFull,
    KeyOverflow,
    TreeConfig,
    TreeError,
)


class AlreadyBarren(TreeError):
    """A node was flagged barren twice; that is always a logic bug."""


@dataclass(frozen=True)
class TreeStats:
    height: int
    live_count: int
    barren_blocks: int
    dead_slots: int
    inserted_total: int


@dataclass(frozen=True)
class _PathStep:
    """One internal node on the root-to-leaf route taken by a mutation."""

    block_id: int
    own_sep: int    # separator this node inherited from its parent (0 for root)
    slot: int       # slot holding the chosen child entry
    sep: int        # separator stored in that slot


class FMTree:
    """Ordered key/payload map that trades extra reads for avoided erases."""

    def __init__(self, device: FlashDevice, config: TreeConfig) -> None:
        config.validate_device(device.geometry)
        if device.geometry.q < 3:
            # with q < 3 no level classifies as vacant: no slot could ever
            # be claimed
            raise ConfigTooLarge(f"slot lifecycle needs q >= 3, got q={device.geometry.q}")
        self.device = device
        self.config = config
        self.q = device.geometry.q
        self._key_limit = self.q ** config.key_width
        self._payload_limit = self.q ** config.payload_width
        # child pointers share the payload word, so every block id must fit
        if device.geometry.block_count > self._payload_limit:
            raise ConfigTooLarge(
                f"{device.geometry.block_count} blocks need ids beyond "
                f"payload_width={config.payload_width} (limit {self._payload_limit})")
        # every block is always in exactly one of: the tree, pristine, reclaimable
        self._pristine = deque(range(device.geometry.block_count))
        self._reclaimable: deque[int] = deque()
        self._barren: set[int] = set()
        # in-memory metadata driving the gc trigger; never read back from flash
        self._dead_per_block: dict[int, int] = {}
        self._dead_total = 0
        self._dead_majority: set[int] = set()
        self._gc_baseline = 0
        self._in_gc = False
        self.live_count = 0
        self.inserted_total = 0
        self.height = 1
        self.root = self.allocate_node(KIND_LEAF)

    @classmethod
    def create(cls, device: FlashDevice, config: TreeConfig) -> "FMTree":
        """Build a fresh tree on a fresh device: one empty root leaf."""
        return cls(device, config)

    # -- allocation and retirement ------------------------------------------

    def allocate_node(self, kind: int) -> int:
        """Take a block, preferring never-used ones; erase only on reuse."""
        if kind not in (KIND_LEAF, KIND_INTERNAL):
            raise ValueError(f"bad node kind {kind}")
        if self._pristine:
            block_id = self._pristine.popleft()
        elif self._reclaimable:
            block_id = self._reclaimable.popleft()
            self.device.erase_block(block_id)
            self._barren.discard(block_id)
        else:
            raise DeviceFull(
                f"all {self.device.geometry.block_count} blocks in use")
        self.device.program_cell(block_id, KIND_CELL, kind)
        return block_id

    def mark_barren(self, block_id: int) -> None:
        """Detach a node: flag it on flash and queue the block for reuse."""
        if block_id in self._barren:
            raise AlreadyBarren(f"block {block_id} is already barren")
        self.device.program_cell(block_id, BARREN_CELL, 1)
        self._barren.add(block_id)
        self._reclaimable.append(block_id)
        dead = self._dead_per_block.pop(block_id, 0)
        self._dead_total -= dead
        self._dead_majority.discard(block_id)

    # -- slot primitives -----------------------------------------------------

    def _slot_state(self, level: int) -> SlotState:
        state = codec.classify_slot(level, self.q)
        if (state is SlotState.VACANT and level > 0
                and not self.config.recycle_tombstones):
            return SlotState.DEAD
        return state

    def _scan_states(self, block_id: int) -> list[int]:
        cfg = self.config
        read = self.device.read_cell
        return [read(block_id, cfg.slot_base(i)) for i in range(cfg.slots_per_node)]

    def _read_key(self, block_id: int, slot: int) -> int:
        digits = self.device.read_run(block_id, self.config.key_offset(slot),
                                      self.config.key_width)
        return codec.decode_word(digits, self.q)

    def _read_payload(self, block_id: int, slot: int) -> int:
        digits = self.device.read_run(block_id, self.config.payload_offset(slot),
                                      self.config.payload_width)
        return codec.decode_word(digits, self.q)

    def _find_usable(self, block_id: int, states, key_digits, payload_digits):
        """First vacant slot whose residue both words can overwrite."""
        for i, level in enumerate(states):
            if self._slot_state(level) is not SlotState.VACANT:
                continue
            key_residue = self.device.read_run(
                block_id, self.config.key_offset(i), self.config.key_width)
            if not codec.can_overwrite(key_residue, key_digits):
                continue
            payload_residue = self.device.read_run(
                block_id, self.config.payload_offset(i), self.config.payload_width)
            if codec.can_overwrite(payload_residue, payload_digits):
                return i
        return None

    def _write_slot(self, block_id: int, slot: int, level: int,
                    key_digits, payload_digits) -> None:
        cfg = self.config
        self.device.program_run(block_id, cfg.key_offset(slot), key_digits)
        self.device.program_run(block_id, cfg.payload_offset(slot), payload_digits)
        self.device.program_cell(block_id, cfg.slot_base(slot),
                                 codec.occupy_level(level, self.q))

    def _tombstone(self, block_id: int, slot: int, level: int) -> None:
        new_level = codec.tombstone_level(level, self.q)
        self.device.program_cell(block_id, self.config.slot_base(slot), new_level)
        if self._slot_state(new_level) is SlotState.DEAD:
            count = self._dead_per_block.get(block_id, 0) + 1
            self._dead_per_block[block_id] = count
            self._dead_total += 1
            if count > self.config.slots_per_node // 2:
                self._dead_majority.add(block_id)

    def _node_entries(self, block_id: int, exclude_slot: int = -1):
        """All occupied (key/sep, payload/child) pairs of one node, sorted."""
        entries = []
        for i, level in enumerate(self._scan_states(block_id)):
            if level % 2 == 1 and i != exclude_slot:
                entries.append((self._read_key(block_id, i),
                                self._read_payload(block_id, i)))
        entries.sort()
        return entries

    def _fresh_node(self, kind: int, entries) -> int:
        """Allocate a node and lay entries into slots 0..n-1 in sorted order."""
        block_id = self.allocate_node(kind)
        cfg = self.config
        for i, (key, payload) in enumerate(entries):
            self.device.program_run(block_id, cfg.key_offset(i),
                                    codec.encode_word(key, cfg.key_width, self.q))
            self.device.program_run(block_id, cfg.payload_offset(i),
                                    codec.encode_word(payload, cfg.payload_width, self.q))
            self.device.program_cell(block_id, cfg.slot_base(i), 1)
        return block_id

    # -- descent ---------------------------------------------------------------

    def _check_key(self, key: int) -> None:
        if key < 0 or key >= self._key_limit:
            raise KeyOverflow(
                f"key {key} outside [0, {self._key_limit}) "
                f"for width {self.config.key_width} base {self.q}")

    def _check_payload(self, payload: int) -> None:
        if payload < 0 or payload >= self._payload_limit:
            raise KeyOverflow(
                f"payload {payload} outside [0, {self._payload_limit}) "
                f"for width {self.config.payload_width} base {self.q}")

    def _route(self, block_id: int, key: int):
        """Choose the child entry for ``key`` in an internal node."""
        best_slot = -1
        best_sep = -1
        min_slot = -1
        min_sep = -1
        for i, level in enumerate(self._scan_states(block_id)):
            if level % 2 != 1:
                continue
            sep = self._read_key(block_id, i)
            if sep <= key and (best_slot < 0 or sep > best_sep):
                best_slot, best_sep = i, sep
            if min_slot < 0 or sep < min_sep:
                min_slot, min_sep = i, sep
        if best_slot < 0:
            # key precedes every separator: fall back to the smallest
            best_slot, best_sep = min_slot, min_sep
        if best_slot < 0:
            raise TreeError(f"internal node {block_id} has no children")
        return best_slot, best_sep, self._read_payload(block_id, best_slot)

    def _descend(self, key: int):
        """Walk to the target leaf, recording the internal route taken."""
        path: list[_PathStep] = []
        block_id = self.root
        own_sep = 0
        while self.device.read_cell(block_id, KIND_CELL) == KIND_INTERNAL:
            slot, sep, child = self._route(block_id, key)
            path.append(_PathStep(block_id, own_sep, slot, sep))
            own_sep = sep
            block_id = child
        return block_id, own_sep, path

    # -- queries ---------------------------------------------------------------

    def search(self, key: int):
        """Return the payload stored for ``key``, or None.  Read-only."""
        self._check_key(key)
        block_id = self.root
        while self.device.read_cell(block_id, KIND_CELL) == KIND_INTERNAL:
            _, _, block_id = self._route(block_id, key)
        for i, level in enumerate(self._scan_states(block_id)):
            if level % 2 == 1 and self._read_key(block_id, i) == key:
                return self._read_payload(block_id, i)
        return None

    def live_entries(self):
        """All live (key, payload) pairs in key order (sorted in memory)."""
        return self._walk()[0]

    def tree_stats(self) -> TreeStats:
        return TreeStats(self.height, self.live_count, len(self._reclaimable),
                         self._dead_total, self.inserted_total)

    def _walk(self):
        entries: list[tuple[int, int]] = []
        blocks: list[int] = []

        def visit(block_id: int) -> None:
            blocks.append(block_id)
            kind = self.device.read_cell(block_id, KIND_CELL)
            node = []
            for i, level in enumerate(self._scan_states(block_id)):
                if level % 2 == 1:
                    node.append((self._read_key(block_id, i), i))
            node.sort()
            if kind == KIND_LEAF:
                for key, i in node:
                    entries.append((key, self._read_payload(block_id, i)))
            else:
                for _, i in node:
                    visit(self._read_payload(block_id, i))

        visit(self.root)
        return entries, blocks

    # -- mutation ----------------------------------------------------------------

    def insert(self, key: int, payload: int) -> None:
        """Upsert: tombstone-then-rewrite, overwriting in place when possible."""
        self._check_key(key)
        self._check_payload(payload)
        cfg = self.config
        key_digits = codec.encode_word(key, cfg.key_width, self.q)
        payload_digits = codec.encode_word(payload, cfg.payload_width, self.q)
        leaf, own_sep, path = self._descend(key)
        states = self._scan_states(leaf)
        match_slot = -1
        for i, level in enumerate(states):
            if level % 2 == 1 and self._read_key(leaf, i) == key:
                match_slot = i
                break
        if match_slot < 0:
            slot = self._find_usable(leaf, states, key_digits, payload_digits)
            if slot is None:
                entries = self._node_entries(leaf)
                entries.append((key, payload))
                entries.sort()
                self._replace_node(path, leaf, KIND_LEAF, entries, own_sep,
                                   prefer_single=False)
            else:
                self._write_slot(leaf, slot, states[slot], key_digits, payload_digits)
            self.live_count += 1
        else:
            level = states[match_slot]
            old_payload = self.device.read_run(leaf, cfg.payload_offset(match_slot),
                                               cfg.payload_width)
            if codec.can_overwrite(old_payload, payload_digits):
                self.device.program_run(leaf, cfg.payload_offset(match_slot),
                                        payload_digits)
            elif level == self.q - 1:
                # saturated state cell: the old slot cannot be tombstoned, so
                # rewrite the whole node with the entry replaced
                entries = self._node_entries(leaf, exclude_slot=match_slot)
                entries.append((key, payload))
                entries.sort()
                self._replace_node(path, leaf, KIND_LEAF, entries, own_sep,
                                   prefer_single=True)
            else:
                slot = self._find_usable(leaf, states, key_digits, payload_digits)
                if slot is None:
                    entries = self._node_entries(leaf, exclude_slot=match_slot)
                    entries.append((key, payload))
                    entries.sort()
                    self._replace_node(path, leaf, KIND_LEAF, entries, own_sep,
                                       prefer_single=False)
                else:
                    self._tombstone(leaf, match_slot, level)
                    self._write_slot(leaf, slot, states[slot],
                                     key_digits, payload_digits)
        self.inserted_total += 1
        self._maybe_gc()

    def delete(self, key: int) -> bool:
        """Tombstone the entry for ``key``; True iff it was present."""
        self._check_key(key)
        leaf, own_sep, path = self._descend(key)
        states = self._scan_states(leaf)
        match_slot = -1
        occupied = 0
        for i, level in enumerate(states):
            if level % 2 == 1:
                occupied += 1
                if match_slot < 0 and self._read_key(leaf, i) == key:
                    match_slot = i
        if match_slot < 0:
            return False
        level = states[match_slot]
        if level == self.q - 1:
            entries = self._node_entries(leaf, exclude_slot=match_slot)
            self._replace_node(path, leaf, KIND_LEAF, entries, own_sep,
                               prefer_single=True)
        else:
            self._tombstone(leaf, match_slot, level)
            if occupied == 1 and path:
                # leaf emptied: detach it and drop the parent's entry
                self._retire(path, leaf)
        self.live_count -= 1
        self._maybe_gc()
        return True

    # -- node replacement machinery ------------------------------------------

    def _replace_node(self, path, old_id: int, kind: int, entries, own_sep: int,
                      prefer_single: bool) -> None:
        """Rewrite a node into one or two fresh blocks and fix the parent.

        ``prefer_single`` is set on saturation-forced rewrites; overflow from
        an insert splits into sorted lower/upper halves instead.
        """
        if not entries:
            self._retire(path, old_id)
            return
        single = len(entries) == 1 or (prefer_single
                                       and len(entries) <= self.config.slots_per_node)
        if single:
            fresh = self._fresh_node(kind, entries)
            self._swap_child(path, old_id, [(own_sep, fresh)])
        else:
            half = (len(entries) + 1) // 2
            lower, upper = entries[:half], entries[half:]
            # a leftmost child may hold keys below its stored separator
            # (routing falls back to the smallest separator); the lower half
            # must keep a separator under all of them or the halves invert
            lower_sep = min(own_sep, entries[0][0])
            left = self._fresh_node(kind, lower)
            try:
                right = self._fresh_node(kind, upper)
            except DeviceFull:
                self.mark_barren(left)
                raise
            self._swap_child(path, old_id,
                             [(lower_sep, left), (upper[0][0], right)])

    def _swap_child(self, path, old_id: int, replacements) -> None:
        """Replace one node with its rewritten successor(s) in the parent."""
        if not path:
            if len(replacements) == 1:
                new_root = replacements[0][1]
            else:
                # root split: replacements[0] carries the root's separator 0
                new_root = self._fresh_node(KIND_INTERNAL, replacements)
                self.height += 1
            self.mark_barren(old_id)
            self.root = new_root
            return
        self.mark_barren(old_id)
        step = path[-1]
        self._mutate_internal(path[:-1], step.block_id, step.own_sep,
                              step.slot, replacements)

    def _retire(self, path, block_id: int) -> None:
        """Drop an emptied node; an emptied root collapses to a fresh leaf."""
        if not path:
            new_root = self.allocate_node(KIND_LEAF)
            self.mark_barren(block_id)
            self.root = new_root
            self.height = 1
            return
        self.mark_barren(block_id)
        step = path[-1]
        self._mutate_internal(path[:-1], step.block_id, step.own_sep,
                              step.slot, [])

    def _mutate_internal(self, path, block_id: int, own_sep: int,
                         remove_slot: int, additions) -> None:
        """Remove one child entry and add replacement entries, recursing up."""
        states = self._scan_states(block_id)
        level = states[remove_slot]
        if level == self.q - 1:
            entries = self._node_entries(block_id, exclude_slot=remove_slot)
            entries.extend(additions)
            entries.sort()
            self._replace_node(path, block_id, KIND_INTERNAL, entries, own_sep,
                               prefer_single=True)
            return
        self._tombstone(block_id, remove_slot, level)
        states[remove_slot] = level + 1
        pending = list(additions)
        while pending:
            sep, child = pending[0]
            cfg = self.config
            sep_digits = codec.encode_word(sep, cfg.key_width, self.q)
            child_digits = codec.encode_word(child, cfg.payload_width, self.q)
            slot = self._find_usable(block_id, states, sep_digits, child_digits)
            if slot is None:
                entries = self._node_entries(block_id)
                entries.extend(pending)
                entries.sort()
                self._replace_node(path, block_id, KIND_INTERNAL, entries, own_sep,
                                   prefer_single=False)
                return
            self._write_slot(block_id, slot, states[slot], sep_digits, child_digits)
            states[slot] += 1
            pending.pop(0)
        if not additions and not any(level % 2 for level in states):
            self._retire(path, block_id)

    # -- garbage collection ------------------------------------------------------

    def _gc_pressure(self) -> int:
        # barren growth since the last rebuild, not the absolute queue length;
        # reclaimable blocks left over from a finished rebuild are already
        # one erase away from reuse and rebuilding again would not help them
        barren_growth = max(0, len(self._reclaimable) - self._gc_baseline)
        return barren_growth + len(self._dead_majority)

    def _maybe_gc(self) -> None:
        if self._in_gc:
            return
        threshold = self.config.gc_barren_fraction * self.device.geometry.block_count
        if self._gc_pressure() >= threshold:
            self.gc_rebuild()

    def gc_rebuild(self) -> None:
        """Bulk-load all live entries into a compact new tree at half fill."""
        if self._in_gc:
            return
        self._in_gc = True
        try:
            entries, old_blocks = self._walk()
            built: list[int] = []
            fill = self.config.slots_per_node // 2
            try:
                if not entries:
                    new_root = self.allocate_node(KIND_LEAF)
                    built.append(new_root)
                    new_height = 1
                else:
                    level = []
                    for i in range(0, len(entries), fill):
                        chunk = entries[i:i + fill]
                        node = self._fresh_node(KIND_LEAF, chunk)
                        built.append(node)
                        level.append((chunk[0][0], node))
                    new_height = 1
                    while len(level) > 1:
                        level[0] = (0, level[0][1])  # leftmost child convention
                        parents = []
                        for i in range(0, len(level), fill):
                            chunk = level[i:i + fill]
                            node = self._fresh_node(KIND_INTERNAL, chunk)
                            built.append(node)
                            parents.append((chunk[0][0], node))
                        level = parents
                        new_height += 1
                    new_root = level[0][1]
            except DeviceFull:
                # the device cannot hold both generations at once; put the
                # partial new generation straight into the reclaim queue
                for block_id in built:
                    self.mark_barren(block_id)
                raise
            for block_id in old_blocks:
                self.mark_barren(block_id)
            self.root = new_root
            self.height = new_height
            self._gc_baseline = len(self._reclaimable)
        finally:
            self._in_gc = False

    # -- validation (uncounted; for tests) ----------------------------------------

    def check_invariants(self) -> None:
        """Traverse via snapshots and assert structural health."""
        geometry = self.device.geometry
        in_tree: set[int] = set()

        def visit(block_id: int, lo: int, hi: int, depth: int) -> int:
            assert block_id not in in_tree, "cycle in tree"
            in_tree.add(block_id)
            cells = self.device.snapshot_block(block_id)
            kind = cells[KIND_CELL]
            assert kind in (KIND_LEAF, KIND_INTERNAL), f"bad kind {kind}"
            assert cells[BARREN_CELL] == 0, "live node flagged barren"
            occupied = []
            for i in range(self.config.slots_per_node):
                level = cells[self.config.slot_base(i)]
                assert 0 <= level < self.q
                if level % 2 == 1:
                    key = codec.decode_word(
                        cells[self.config.key_offset(i):
                              self.config.key_offset(i) + self.config.key_width],
                        self.q)
                    payload = codec.decode_word(
                        cells[self.config.payload_offset(i):
                              self.config.payload_offset(i) + self.config.payload_width],
                        self.q)
                    occupied.append((key, payload))
            occupied.sort()
            keys = [k for k, _ in occupied]
            assert len(set(keys)) == len(keys), f"duplicate keys in node {block_id}"
            count = 0
            if kind == KIND_LEAF:
                assert depth == self.height, "leaf at wrong depth"
                for key, _ in occupied:
                    assert lo <= key < hi, f"leaf key {key} outside [{lo}, {hi})"
                count = len(occupied)
            else:
                assert occupied, f"internal node {block_id} has no children"
                for idx, (sep, child) in enumerate(occupied):
                    child_lo = lo if idx == 0 else sep
                    child_hi = occupied[idx + 1][0] if idx + 1 < len(occupied) else hi
                    count += visit(child, child_lo, child_hi, depth + 1)
            return count

        total = visit(self.root, 0, self._key_limit, 1)
        assert total == self.live_count, f"live_count {self.live_count} != {total}"
        queued = set(self._pristine) | set(self._reclaimable)
        assert len(queued) == len(self._pristine) + len(self._reclaimable)
        assert not (queued & in_tree), "queued block still referenced by the tree"
        assert in_tree | queued == set(range(geometry.block_count))
        for block_id in self._pristine:
            assert not any(self.device.snapshot_block(block_id)), "dirty pristine block"
        for block_id in self._reclaimable:
            assert self.device.snapshot_block(block_id)[BARREN_CELL] >= 1
