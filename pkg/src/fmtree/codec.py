"""Base-q digit words and the monotone slot lifecycle.

Fixed-width, most-significant-digit-first words let integers live in flash
cells.  The slot lifecycle packs occupancy into a single state cell using
parity so that both claiming and releasing a slot are +1 increments, which a
flash cell can absorb without an erase:

    even level, level + 2 <= q - 1   -> Vacant   (can be occupied again)
    odd level                        -> Occupied
    even level, level + 2 >  q - 1   -> Dead     (no room for a full cycle)

A vacant slot needs headroom for occupy (+1) and a later tombstone (+1),
hence the ``level + 2`` test.  Each slot survives floor((q-1)/2) occupy/
tombstone cycles between erases.
"""

from __future__ import annotations

import enum


class CodecError(Exception):
    """Base class for word and slot-state errors."""


class Overflow(CodecError):
    """Value does not fit in the requested digit width."""


class InvalidDigit(CodecError):
    """A digit lies outside [0, q)."""


class WidthMismatch(CodecError):
    """Digit sequences of different widths were compared."""


class IllegalTransition(CodecError):
    """Slot state transition not permitted from the current level."""


class SlotState(enum.Enum):
    VACANT = "vacant"
    OCCUPIED = "occupied"
    DEAD = "dead"


def encode_word(value: int, width: int, q: int) -> list[int]:
    """Encode an unsigned integer as ``width`` base-q digits, MSD first."""
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    if value < 0 or value >= q ** width:
        raise Overflow(f"{value} does not fit in {width} base-{q} digits")
    digits = [0] * width
    for i in range(width - 1, -1, -1):
        value, digits[i] = divmod(value, q)
    return digits


def decode_word(digits, q: int) -> int:
    """Decode MSD-first base-q digits back to an integer."""
    value = 0
    for d in digits:
        if d < 0 or d >= q:
            raise InvalidDigit(f"digit {d} outside [0, {q})")
        value = value * q + d
    return value


def can_overwrite(current, new) -> bool:
    """True iff ``new`` can be programmed over ``current`` without an erase.

    Component-wise: every digit may only stay or rise.
    """
    if len(current) != len(new):
        raise WidthMismatch(f"widths differ: {len(current)} vs {len(new)}")
    return all(n >= c for c, n in zip(current, new))


def classify_slot(level: int, q: int) -> SlotState:
    """Classify a state cell level.  Callers guarantee level in [0, q-1]."""
    if level % 2 == 1:
        return SlotState.OCCUPIED
    if level + 2 <= q - 1:
        return SlotState.VACANT
    return SlotState.DEAD


def occupy_level(level: int, q: int) -> int:
    """Level the state cell must be programmed to when claiming a slot."""
    if classify_slot(level, q) is not SlotState.VACANT:
        raise IllegalTransition(f"cannot occupy a slot at level {level} (q={q})")
    return level + 1


def tombstone_level(level: int, q: int) -> int:
    """Level the state cell must be programmed to when releasing a slot."""
    if classify_slot(level, q) is not SlotState.OCCUPIED:
        raise IllegalTransition(f"cannot tombstone a slot at level {level} (q={q})")
    if level + 1 > q - 1:
        # saturated state cell: the increment has nowhere to go; callers must
        # rewrite the containing node instead
        raise IllegalTransition(f"state cell saturated at level {level} (q={q})")
    return level + 1


def cycles_per_slot(q: int) -> int:
    """Occupy/tombstone cycles a fresh slot survives between erases."""
    return (q - 1) // 2
