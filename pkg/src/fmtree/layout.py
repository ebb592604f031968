"""On-flash node layout shared by both trees.

One node occupies exactly one erase block:

    cell 0            node kind: 0 unwritten, 1 leaf, 2 internal
    cell 1            barren flag: 0 live, >=1 detached awaiting reclamation
    cells 2..         B slots, each [state cell | key word | payload word]

Leaf slots pair a key with its value; internal slots pair a routing separator
with a child block id.  Both trees use this exact layout so their access
counts are comparable; they differ only in discipline.
"""

from __future__ import annotations

from dataclasses import dataclass

from .flash import FlashGeometry

KIND_CELL = 0
BARREN_CELL = 1
SLOTS_START = 2

KIND_UNWRITTEN = 0
KIND_LEAF = 1
KIND_INTERNAL = 2


class TreeError(Exception):
    """Base class for tree-layer errors."""


class ConfigTooLarge(TreeError):
    """Node layout does not fit the device geometry."""


class KeyOverflow(TreeError):
    """Key or payload does not fit its configured digit width."""


class DeviceFull(TreeError):
    """No pristine or reclaimable block is left to allocate."""


@dataclass(frozen=True)
class TreeConfig:
    """Node shape shared by the trees; widths are in base-q digits."""

    slots_per_node: int
    key_width: int
    payload_width: int
    gc_barren_fraction: float = 0.25
    recycle_tombstones: bool = True

    def __post_init__(self) -> None:
        if self.slots_per_node < 4 or self.slots_per_node % 2 != 0:
            raise ValueError(f"slots_per_node must be even and >= 4, got {self.slots_per_node}")
        if self.key_width < 1:
            raise ValueError(f"key_width must be >= 1, got {self.key_width}")
        if self.payload_width < 1:
            raise ValueError(f"payload_width must be >= 1, got {self.payload_width}")
        if not 0.0 < self.gc_barren_fraction <= 1.0:
            raise ValueError(
                f"gc_barren_fraction must be in (0, 1], got {self.gc_barren_fraction}")

    @property
    def slot_cells(self) -> int:
        return 1 + self.key_width + self.payload_width

    @property
    def node_cells(self) -> int:
        return SLOTS_START + self.slots_per_node * self.slot_cells

    def slot_base(self, slot: int) -> int:
        return SLOTS_START + slot * self.slot_cells

    def key_offset(self, slot: int) -> int:
        return self.slot_base(slot) + 1

    def payload_offset(self, slot: int) -> int:
        return self.slot_base(slot) + 1 + self.key_width

    def validate_device(self, geometry: FlashGeometry) -> None:
        if self.node_cells > geometry.cells_per_block:
            raise ConfigTooLarge(
                f"node needs {self.node_cells} cells but blocks hold "
                f"{geometry.cells_per_block}")


def width_for_bits(q: int, bits: int) -> int:
    """Smallest digit width such that q**width covers ``bits`` binary bits."""
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    width, capacity = 0, 1
    target = 2 ** bits
    while capacity < target:
        capacity *= q
        width += 1
    return width


def config_for_bits(q: int, slots_per_node: int, key_bits: int, payload_bits: int,
                    **kwargs) -> TreeConfig:
    """Build a TreeConfig whose words cover the given binary key/payload sizes."""
    return TreeConfig(
        slots_per_node=slots_per_node,
        key_width=width_for_bits(q, key_bits),
        payload_width=width_for_bits(q, payload_bits),
        **kwargs,
    )
