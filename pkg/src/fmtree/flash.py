"""Multi-level flash device emulation with exact access accounting.

The device is an array of blocks, each a fixed run of cells.  A cell holds an
integer level in ``[0, q-1]``.  Programming can only raise a cell's level; the
only way down is erasing a whole block back to all-zero.  Every cell read,
cell program, and block erase is tallied, so data structures layered on top
can be compared by their flash access footprint.  Per-block erase counts act
as the wear model and survive counter resets.

Deliberately out of scope: timing, bit errors, partial-page semantics.
Programming a cell to its current level is a no-op (nothing is counted).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple


class FlashError(Exception):
    """Base class for flash emulator errors."""


class InvalidGeometry(FlashError):
    """Device geometry violates a structural bound."""


class OutOfRange(FlashError):
    """Block index, cell index, or target level outside the device."""


class MonotonicityViolation(FlashError):
    """Attempt to lower a cell level without erasing its block."""


@dataclass(frozen=True)
class FlashGeometry:
    """Shape of the device: q levels per cell, cells grouped into erase blocks."""

    q: int
    cells_per_block: int
    block_count: int

    def __post_init__(self) -> None:
        if self.q < 2:
            raise InvalidGeometry(f"q must be >= 2, got {self.q}")
        if self.cells_per_block < 1:
            raise InvalidGeometry(f"cells_per_block must be >= 1, got {self.cells_per_block}")
        if self.block_count < 1:
            raise InvalidGeometry(f"block_count must be >= 1, got {self.block_count}")


class OpCounters(NamedTuple):
    """Access tally since the last counter reset."""

    cell_reads: int
    cell_programs: int
    block_erases: int


@dataclass
class WearStats:
    """Lifetime erase wear, independent of counter resets."""

    max_erases: int
    mean_erases: float
    per_block: list[int]


class FlashDevice:
    """An emulated device: fresh cells all at level 0, every access counted."""

    def __init__(self, geometry: FlashGeometry) -> None:
        self.geometry = geometry
        n = geometry.cells_per_block
        if geometry.q <= 256:
            self._blocks = [bytearray(n) for _ in range(geometry.block_count)]
        else:
            self._blocks = [[0] * n for _ in range(geometry.block_count)]
        self._erase_counts = [0] * geometry.block_count
        # erase counts at the last reset_counters(); block_erases is measured
        # against this epoch while _erase_counts keeps lifetime wear
        self._erase_epoch = [0] * geometry.block_count
        self._cell_reads = 0
        self._cell_programs = 0
        self._block_erases = 0

    # -- addressing guards -------------------------------------------------

    def _check_block(self, block_id: int) -> None:
        if not 0 <= block_id < self.geometry.block_count:
            raise OutOfRange(f"block {block_id} outside [0, {self.geometry.block_count})")

    def _check_cell(self, cell_idx: int) -> None:
        if not 0 <= cell_idx < self.geometry.cells_per_block:
            raise OutOfRange(f"cell {cell_idx} outside [0, {self.geometry.cells_per_block})")

    # -- cell operations ---------------------------------------------------

    def read_cell(self, block_id: int, cell_idx: int) -> int:
        self._check_block(block_id)
        self._check_cell(cell_idx)
        self._cell_reads += 1
        return self._blocks[block_id][cell_idx]

    def read_run(self, block_id: int, start: int, length: int):
        """Read ``length`` consecutive cells; counts one read per cell."""
        self._check_block(block_id)
        if length < 0:
            raise OutOfRange(f"negative run length {length}")
        self._check_cell(start)
        if length and start + length > self.geometry.cells_per_block:
            raise OutOfRange(f"run [{start}, {start + length}) overruns block")
        self._cell_reads += length
        return list(self._blocks[block_id][start:start + length])

    def program_cell(self, block_id: int, cell_idx: int, target: int) -> None:
        """Raise one cell to ``target``.  Equal level is a free no-op."""
        self._check_block(block_id)
        self._check_cell(cell_idx)
        if not 0 <= target < self.geometry.q:
            raise OutOfRange(f"target level {target} outside [0, {self.geometry.q})")
        current = self._blocks[block_id][cell_idx]
        if target < current:
            raise MonotonicityViolation(
                f"block {block_id} cell {cell_idx}: {current} -> {target} needs an erase")
        if target > current:
            self._blocks[block_id][cell_idx] = target
            self._cell_programs += 1

    def program_run(self, block_id: int, start: int, targets) -> None:
        """Program consecutive cells to ``targets``; equal levels cost nothing."""
        self._check_block(block_id)
        length = len(targets)
        if length == 0:
            return
        self._check_cell(start)
        if start + length > self.geometry.cells_per_block:
            raise OutOfRange(f"run [{start}, {start + length}) overruns block")
        q = self.geometry.q
        block = self._blocks[block_id]
        changed = 0
        for off, target in enumerate(targets):
            if not 0 <= target < q:
                raise OutOfRange(f"target level {target} outside [0, {q})")
            current = block[start + off]
            if target < current:
                raise MonotonicityViolation(
                    f"block {block_id} cell {start + off}: {current} -> {target} needs an erase")
            if target > current:
                block[start + off] = target
                changed += 1
        self._cell_programs += changed

    def erase_block(self, block_id: int) -> None:
        """Reset every cell of the block to 0 and bump its wear count."""
        self._check_block(block_id)
        n = self.geometry.cells_per_block
        if self.geometry.q <= 256:
            self._blocks[block_id] = bytearray(n)
        else:
            self._blocks[block_id] = [0] * n
        self._erase_counts[block_id] += 1
        self._block_erases += 1

    # -- accounting ----------------------------------------------------------

    def counters(self) -> OpCounters:
        return OpCounters(self._cell_reads, self._cell_programs, self._block_erases)

    def reset_counters(self) -> None:
        """Zero the op counters.  Wear (per-block erase counts) is preserved."""
        self._cell_reads = 0
        self._cell_programs = 0
        self._block_erases = 0
        self._erase_epoch = list(self._erase_counts)

    def wear_stats(self) -> WearStats:
        per_block = list(self._erase_counts)
        return WearStats(max(per_block), sum(per_block) / len(per_block), per_block)

    # -- introspection (uncounted; debugging and test assertions only) ------

    def snapshot_block(self, block_id: int) -> list[int]:
        self._check_block(block_id)
        return list(self._blocks[block_id])

    def dump(self) -> str:
        lines = []
        for bid in range(self.geometry.block_count):
            cells = " ".join(str(level) for level in self._blocks[bid])
            lines.append(f"block {bid} erases={self._erase_counts[bid]} cells={cells}")
        return "\n".join(lines)
