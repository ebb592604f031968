"""Conventional B-tree baseline under an erase-before-rewrite discipline.

Same node layout and device as the other tree, classical behaviour: slots
hold a sorted prefix of occupied entries, lookups binary-search them, and
nodes are kept between ceil(B/2) and B entries by borrow/merge rebalancing
(root exempt).  Every node mutation rewrites the block image; if any cell
would have to drop, the block is erased first and reprogrammed.  Appends
whose cells only rise (e.g. inserting at the sorted end) skip the erase.

Freed blocks go into a queue and are erased at the moment of reuse.
"""

from __future__ import annotations

import bisect
from collections import deque

from . import codec
from .flash import FlashDevice
from .layout import (
    KIND_CELL,
    KIND_INTERNAL,
    KIND_LEAF,
    SLOTS_START,
    ConfigTooLarge,
    DeviceFull,
    KeyOverflow,
    TreeConfig,
)


class BaselineTree:
    """Sorted-node B-tree used as the conventional point of comparison."""

    def __init__(self, device: FlashDevice, config: TreeConfig,
                 always_erase_on_rewrite: bool = False) -> None:
        config.validate_device(device.geometry)
        self.device = device
        self.config = config
        self.q = device.geometry.q
        self.always_erase_on_rewrite = always_erase_on_rewrite
        self._key_limit = self.q ** config.key_width
        self._payload_limit = self.q ** config.payload_width
        # child pointers share the payload word, so every block id must fit
        if device.geometry.block_count > self._payload_limit:
            raise ConfigTooLarge(
                f"{device.geometry.block_count} blocks need ids beyond "
                f"payload_width={config.payload_width} (limit {self._payload_limit})")
        self._pristine = deque(range(device.geometry.block_count))
        self._free: deque[int] = deque()
        self.live_count = 0
        self.height = 1
        self.root = self._allocate()
        self._program_fresh(self.root, self._image(KIND_LEAF, []))

    # -- blocks ---------------------------------------------------------------

    def _allocate(self) -> int:
        if self._pristine:
            return self._pristine.popleft()
        if self._free:
            block_id = self._free.popleft()
            self.device.erase_block(block_id)
            return block_id
        raise DeviceFull(f"all {self.device.geometry.block_count} blocks in use")

    def _free_block(self, block_id: int) -> None:
        self._free.append(block_id)

    # -- node images ------------------------------------------------------------

    def _image(self, kind: int, entries) -> list[int]:
        cfg = self.config
        image = [0] * cfg.node_cells
        image[KIND_CELL] = kind
        for i, (key, payload) in enumerate(entries):
            base = cfg.slot_base(i)
            image[base] = 1
            image[base + 1:base + 1 + cfg.key_width] = \
                codec.encode_word(key, cfg.key_width, self.q)
            image[base + 1 + cfg.key_width:base + cfg.slot_cells] = \
                codec.encode_word(payload, cfg.payload_width, self.q)
        return image

    def _program_fresh(self, block_id: int, image) -> None:
        # allocation hands out all-zero blocks, so this never needs an erase
        self.device.program_run(block_id, 0, image)

    def _write_image(self, block_id: int, old_image, new_image) -> None:
        """Rewrite a node; erase first iff any cell would drop (or forced)."""
        if new_image == old_image:
            return
        if self.always_erase_on_rewrite or \
                any(n < o for n, o in zip(new_image, old_image)):
            self.device.erase_block(block_id)
        self.device.program_run(block_id, 0, new_image)

    # -- node reads ---------------------------------------------------------------

    def _read_kind(self, block_id: int) -> int:
        return self.device.read_cell(block_id, KIND_CELL)

    def _entry_count(self, block_id: int) -> int:
        # occupied slots form a prefix, so the count is binary-searchable
        cfg = self.config
        lo, hi = 0, cfg.slots_per_node
        while lo < hi:
            mid = (lo + hi) // 2
            if self.device.read_cell(block_id, cfg.slot_base(mid)):
                lo = mid + 1
            else:
                hi = mid
        return lo

    def _key_at(self, block_id: int, slot: int) -> int:
        digits = self.device.read_run(block_id, self.config.key_offset(slot),
                                      self.config.key_width)
        return codec.decode_word(digits, self.q)

    def _payload_at(self, block_id: int, slot: int) -> int:
        digits = self.device.read_run(block_id, self.config.payload_offset(slot),
                                      self.config.payload_width)
        return codec.decode_word(digits, self.q)

    def _read_entries(self, block_id: int, count: int) -> list[tuple[int, int]]:
        cfg = self.config
        if count == 0:
            return []
        data = self.device.read_run(block_id, SLOTS_START, count * cfg.slot_cells)
        entries = []
        for i in range(count):
            base = i * cfg.slot_cells
            key = codec.decode_word(data[base + 1:base + 1 + cfg.key_width], self.q)
            payload = codec.decode_word(data[base + 1 + cfg.key_width:
                                             base + cfg.slot_cells], self.q)
            entries.append((key, payload))
        return entries

    def _probe_leq(self, block_id: int, slot: int, key_digits) -> bool:
        """stored_key <= key, reading MSD-first digits only until decided."""
        offset = self.config.key_offset(slot)
        for i, digit in enumerate(key_digits):
            stored = self.device.read_cell(block_id, offset + i)
            if stored != digit:
                return stored < digit
        return True

    def _bisect(self, block_id: int, count: int, key: int) -> int:
        """Number of stored keys <= key (binary search probes the device)."""
        key_digits = codec.encode_word(key, self.config.key_width, self.q)
        lo, hi = 0, count
        while lo < hi:
            mid = (lo + hi) // 2
            if self._probe_leq(block_id, mid, key_digits):
                lo = mid + 1
            else:
                hi = mid
        return lo

    # -- map operations --------------------------------------------------------------

    def _check_key(self, key: int) -> None:
        if key < 0 or key >= self._key_limit:
            raise KeyOverflow(f"key {key} outside [0, {self._key_limit})")

    def _check_payload(self, payload: int) -> None:
        if payload < 0 or payload >= self._payload_limit:
            raise KeyOverflow(f"payload {payload} outside [0, {self._payload_limit})")

    def search(self, key: int):
        self._check_key(key)
        block_id = self.root
        while True:
            kind = self._read_kind(block_id)
            count = self._entry_count(block_id)
            pos = self._bisect(block_id, count, key)
            if kind == KIND_LEAF:
                if pos > 0 and self._key_at(block_id, pos - 1) == key:
                    return self._payload_at(block_id, pos - 1)
                return None
            block_id = self._payload_at(block_id, max(pos - 1, 0))

    def insert(self, key: int, payload: int) -> None:
        self._check_key(key)
        self._check_payload(payload)
        promo, was_new = self._insert_rec(self.root, key, payload)
        if promo is not None:
            new_root = self._allocate()
            self._program_fresh(new_root,
                                self._image(KIND_INTERNAL, [(0, self.root), promo]))
            self.root = new_root
            self.height += 1
        if was_new:
            self.live_count += 1

    def _insert_rec(self, block_id: int, key: int, payload: int):
        kind = self._read_kind(block_id)
        count = self._entry_count(block_id)
        if kind == KIND_LEAF:
            # the leaf gets rewritten either way, so read it once and place
            # the key in memory instead of probing cell by cell
            entries = self._read_entries(block_id, count)
            old = self._image(KIND_LEAF, entries)
            pos = bisect.bisect(entries, (key, self._payload_limit))
            if pos > 0 and entries[pos - 1][0] == key:
                entries[pos - 1] = (key, payload)
                self._write_image(block_id, old, self._image(KIND_LEAF, entries))
                return None, False
            entries.insert(pos, (key, payload))
            return self._store_or_split(block_id, KIND_LEAF, old, entries), True
        pos = self._bisect(block_id, count, key)
        child = self._payload_at(block_id, max(pos - 1, 0))
        promo, was_new = self._insert_rec(child, key, payload)
        if promo is None:
            return None, was_new
        entries = self._read_entries(block_id, count)
        old = self._image(KIND_INTERNAL, entries)
        bisect.insort(entries, promo)
        return self._store_or_split(block_id, KIND_INTERNAL, old, entries), was_new

    def _store_or_split(self, block_id: int, kind: int, old_image, entries):
        """Rewrite in place, or split off a new right node when over capacity."""
        if len(entries) <= self.config.slots_per_node:
            self._write_image(block_id, old_image, self._image(kind, entries))
            return None
        half = (len(entries) + 1) // 2
        lower, upper = entries[:half], entries[half:]
        self._write_image(block_id, old_image, self._image(kind, lower))
        right = self._allocate()
        self._program_fresh(right, self._image(kind, upper))
        return (upper[0][0], right)

    def delete(self, key: int) -> bool:
        self._check_key(key)
        found, _, _ = self._delete_rec(self.root, key)
        if found:
            self.live_count -= 1
            if self._read_kind(self.root) == KIND_INTERNAL \
                    and self._entry_count(self.root) == 1:
                old_root = self.root
                self.root = self._payload_at(old_root, 0)
                self._free_block(old_root)
                self.height -= 1
        return found

    def _delete_rec(self, block_id: int, key: int):
        """Returns (found, entry count, entries if the node was rewritten)."""
        kind = self._read_kind(block_id)
        count = self._entry_count(block_id)
        if kind == KIND_LEAF:
            entries = self._read_entries(block_id, count)
            old = self._image(KIND_LEAF, entries)
            pos = bisect.bisect(entries, (key, self._payload_limit))
            if pos == 0 or entries[pos - 1][0] != key:
                return False, count, None
            del entries[pos - 1]
            self._write_image(block_id, old, self._image(KIND_LEAF, entries))
            return True, count - 1, entries
        pos = self._bisect(block_id, count, key)
        child_pos = max(pos - 1, 0)
        child = self._payload_at(block_id, child_pos)
        found, child_count, child_entries = self._delete_rec(child, key)
        if found and child_count < self.config.slots_per_node // 2:
            delta, entries = self._rebalance(block_id, count, child_pos,
                                             child_entries)
            return found, count + delta, entries
        return found, count, None

    def _rebalance(self, parent_id: int, parent_count: int, child_pos: int,
                   child_entries):
        """Refill an underflowing child (its entries are already in hand).

        Returns (parent entry delta, parent entries after the fix).
        """
        min_keys = self.config.slots_per_node // 2
        parent_entries = self._read_entries(parent_id, parent_count)
        parent_old = self._image(KIND_INTERNAL, parent_entries)
        child_id = parent_entries[child_pos][1]
        child_kind = self._read_kind(child_id)
        child_old = self._image(child_kind, child_entries)

        if child_pos > 0:
            left_id = parent_entries[child_pos - 1][1]
            left_count = self._entry_count(left_id)
            if left_count > min_keys:
                left_entries = self._read_entries(left_id, left_count)
                left_old = self._image(child_kind, left_entries)
                moved = left_entries.pop()
                self._write_image(child_id, child_old,
                                  self._image(child_kind, [moved] + child_entries))
                self._write_image(left_id, left_old,
                                  self._image(child_kind, left_entries))
                parent_entries[child_pos] = (moved[0], child_id)
                self._write_image(parent_id, parent_old,
                                  self._image(KIND_INTERNAL, parent_entries))
                return 0, parent_entries
        if child_pos + 1 < parent_count:
            right_id = parent_entries[child_pos + 1][1]
            right_count = self._entry_count(right_id)
            if right_count > min_keys:
                right_entries = self._read_entries(right_id, right_count)
                right_old = self._image(child_kind, right_entries)
                moved = right_entries.pop(0)
                self._write_image(child_id, child_old,
                                  self._image(child_kind, child_entries + [moved]))
                self._write_image(right_id, right_old,
                                  self._image(child_kind, right_entries))
                parent_entries[child_pos + 1] = (right_entries[0][0], right_id)
                self._write_image(parent_id, parent_old,
                                  self._image(KIND_INTERNAL, parent_entries))
                return 0, parent_entries
        if child_pos > 0:
            left_id = parent_entries[child_pos - 1][1]
            left_count = self._entry_count(left_id)
            left_entries = self._read_entries(left_id, left_count)
            left_old = self._image(child_kind, left_entries)
            self._write_image(left_id, left_old,
                              self._image(child_kind, left_entries + child_entries))
            self._free_block(child_id)
            del parent_entries[child_pos]
        else:
            right_id = parent_entries[1][1]
            right_count = self._entry_count(right_id)
            right_entries = self._read_entries(right_id, right_count)
            self._write_image(child_id, child_old,
                              self._image(child_kind, child_entries + right_entries))
            self._free_block(right_id)
            del parent_entries[1]
        self._write_image(parent_id, parent_old,
                          self._image(KIND_INTERNAL, parent_entries))
        return -1, parent_entries

    # -- inspection -----------------------------------------------------------------

    def live_entries(self) -> list[tuple[int, int]]:
        out: list[tuple[int, int]] = []

        def visit(block_id: int) -> None:
            kind = self._read_kind(block_id)
            entries = self._read_entries(block_id, self._entry_count(block_id))
            if kind == KIND_LEAF:
                out.extend(entries)
            else:
                for _, child in entries:
                    visit(child)

        visit(self.root)
        return out

    def tree_stats(self) -> dict:
        return {
            "height": self.height,
            "live_count": self.live_count,
            "pristine_blocks": len(self._pristine),
            "free_blocks": len(self._free),
        }

    # -- validation (uncounted; for tests) ---------------------------------------

    def check_invariants(self) -> None:
        cfg = self.config
        min_keys = cfg.slots_per_node // 2

        def node_view(block_id: int):
            cells = self.device.snapshot_block(block_id)
            kind = cells[KIND_CELL]
            count = 0
            while count < cfg.slots_per_node and cells[cfg.slot_base(count)] == 1:
                count += 1
            # residue discipline: everything past the prefix must be erased
            for idx in range(cfg.slot_base(count), cfg.node_cells):
                assert cells[idx] == 0, f"block {block_id} cell {idx} has residue"
            assert cells[1] == 0, "baseline never uses the barren cell"
            entries = []
            for i in range(count):
                base = cfg.slot_base(i)
                key = codec.decode_word(cells[base + 1:base + 1 + cfg.key_width], self.q)
                payload = codec.decode_word(
                    cells[base + 1 + cfg.key_width:base + cfg.slot_cells], self.q)
                entries.append((key, payload))
            return kind, entries

        total = 0

        def visit(block_id: int, lo: int, hi: int, depth: int, is_root: bool) -> None:
            nonlocal total
            kind, entries = node_view(block_id)
            keys = [k for k, _ in entries]
            assert keys == sorted(keys) and len(set(keys)) == len(keys)
            if kind == KIND_LEAF:
                assert depth == self.height
                if not is_root:
                    assert len(entries) >= min_keys, f"leaf {block_id} underflow"
                for key in keys:
                    assert lo <= key < hi
                total += len(entries)
            else:
                assert kind == KIND_INTERNAL
                assert len(entries) >= (2 if is_root else min_keys)
                for idx, (sep, child) in enumerate(entries):
                    assert lo <= sep < hi or (idx == 0 and sep <= lo)
                    child_hi = entries[idx + 1][0] if idx + 1 < len(entries) else hi
                    visit(child, sep, child_hi, depth + 1, False)

        visit(self.root, 0, self._key_limit, 1, True)
        assert total == self.live_count
