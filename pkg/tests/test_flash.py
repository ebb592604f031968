import random

import pytest
from hypothesis import given, settings, strategies as st

from fmtree.flash import (
    FlashDevice,
    FlashGeometry,
    InvalidGeometry,
    MonotonicityViolation,
    OutOfRange,
)


def make(q=8, cells=64, blocks=4):
    return FlashDevice(FlashGeometry(q, cells, blocks))


def test_fresh_device_all_zero():
    dev = make()
    for b in range(4):
        assert dev.snapshot_block(b) == [0] * 64
    assert dev.counters() == (0, 0, 0)


def test_invalid_geometry():
    with pytest.raises(InvalidGeometry):
        FlashGeometry(1, 64, 4)  # q > 1 required
    with pytest.raises(InvalidGeometry):
        FlashGeometry(8, 0, 4)
    with pytest.raises(InvalidGeometry):
        FlashGeometry(8, 64, 0)
    FlashGeometry(2, 1, 1)  # minimal valid device


def test_read_your_write():
    dev = make()
    assert dev.read_cell(0, 0) == 0
    assert dev.counters().cell_reads == 1
    dev.program_cell(0, 0, 5)
    assert dev.read_cell(0, 0) == 5


def test_read_out_of_range():
    dev = make()
    with pytest.raises(OutOfRange):
        dev.read_cell(4, 0)  # block_id == block_count
    with pytest.raises(OutOfRange):
        dev.read_cell(0, 64)
    with pytest.raises(OutOfRange):
        dev.read_cell(-1, 0)


def test_program_semantics():
    dev = make()
    dev.program_cell(0, 0, 3)
    assert dev.counters().cell_programs == 1
    dev.program_cell(0, 0, 3)  # same level: free no-op
    assert dev.counters().cell_programs == 1
    with pytest.raises(MonotonicityViolation):
        dev.program_cell(0, 0, 2)
    with pytest.raises(OutOfRange):
        dev.program_cell(0, 0, 8)  # target must stay below q
    with pytest.raises(OutOfRange):
        dev.program_cell(0, 0, -1)
    assert dev.counters().cell_programs == 1


def test_erase_block():
    dev = make()
    dev.program_cell(0, 0, 3)
    dev.program_cell(0, 1, 7)
    dev.erase_block(0)
    assert dev.snapshot_block(0) == [0] * 64
    assert dev.wear_stats().per_block[0] == 1
    dev.erase_block(0)
    assert dev.wear_stats().per_block[0] == 2
    with pytest.raises(OutOfRange):
        dev.erase_block(4)


def test_counters_tally():
    dev = make()
    dev.read_cell(0, 0)
    dev.read_cell(1, 5)
    dev.program_cell(0, 0, 1)
    dev.erase_block(2)
    assert dev.counters() == (2, 1, 1)


def test_reset_preserves_wear():
    dev = make()
    dev.erase_block(0)
    dev.erase_block(0)
    dev.reset_counters()
    assert dev.counters() == (0, 0, 0)
    assert dev.wear_stats().max_erases == 2
    # the erase tally restarts from the reset epoch, wear does not
    dev.erase_block(0)
    assert dev.counters().block_erases == 1
    assert dev.wear_stats().per_block[0] == 3


def test_wear_stats_arithmetic():
    dev = make()
    assert dev.wear_stats().max_erases == 0
    assert dev.wear_stats().mean_erases == 0
    dev.erase_block(0)
    dev.erase_block(0)
    stats = dev.wear_stats()
    assert stats.max_erases == 2
    assert stats.mean_erases == 0.5
    assert len(stats.per_block) == 4


def test_program_run_counts_only_changes():
    dev = make()
    dev.program_run(0, 0, [1, 2, 3])
    assert dev.counters().cell_programs == 3
    dev.program_run(0, 0, [1, 2, 4])  # only the last cell actually rises
    assert dev.counters().cell_programs == 4
    assert dev.read_run(0, 0, 3) == [1, 2, 4]
    assert dev.counters().cell_reads == 3
    with pytest.raises(MonotonicityViolation):
        dev.program_run(0, 0, [0, 2, 4])
    with pytest.raises(OutOfRange):
        dev.program_run(0, 62, [1, 1, 1])  # spills past the block end


def test_dump_format():
    dev = make(q=8, cells=3, blocks=2)
    dev.program_cell(0, 1, 4)
    dev.erase_block(1)
    lines = dev.dump().splitlines()
    assert lines[0] == "block 0 erases=0 cells=0 4 0"
    assert lines[1] == "block 1 erases=1 cells=0 0 0"


def test_determinism_identical_call_sequences():
    a, b = make(), make()
    rng = random.Random(99)
    for _ in range(2000):
        roll = rng.random()
        block = rng.randrange(4)
        cell = rng.randrange(64)
        if roll < 0.5:
            target = rng.randrange(8)
            for dev in (a, b):
                try:
                    dev.program_cell(block, cell, target)
                except MonotonicityViolation:
                    pass
        elif roll < 0.9:
            assert a.read_cell(block, cell) == b.read_cell(block, cell)
        else:
            a.erase_block(block)
            b.erase_block(block)
    assert a.counters() == b.counters()
    for blk in range(4):
        assert a.snapshot_block(blk) == b.snapshot_block(blk)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.data())
def test_fuzz_monotone_between_erases(q, data):
    dev = FlashDevice(FlashGeometry(q, 8, 2))
    shadow = [[0] * 8 for _ in range(2)]
    steps = data.draw(st.lists(
        st.tuples(st.integers(0, 2), st.integers(0, 1), st.integers(0, 7),
                  st.integers(0, q - 1)),
        max_size=200))
    for kind, block, cell, target in steps:
        if kind == 0:
            try:
                dev.program_cell(block, cell, target)
            except MonotonicityViolation:
                assert target < shadow[block][cell]
            else:
                assert target >= shadow[block][cell]
                shadow[block][cell] = max(shadow[block][cell], target)
        elif kind == 1:
            level = dev.read_cell(block, cell)
            assert 0 <= level < q
            assert level == shadow[block][cell]
        else:
            dev.erase_block(block)
            shadow[block] = [0] * 8
