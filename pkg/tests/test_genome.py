import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nesgd import nn
from nesgd.errors import ConfigurationError, ShapeError, StateError
from nesgd.genome import Genome, apply_genome, random_genome


@pytest.fixture
def base_snapshot():
    return nn.snapshot(nn.build_model((2, 16, 3), seed=7))  # 4 blocks


def test_text_round_trip():
    g = Genome((1, 0, 1, 0))
    assert g.text == "1010"
    assert Genome.from_text("1010") == g
    assert len(g) == 4


def test_random_genome_deterministic():
    a = random_genome(4, np.random.default_rng(5))
    b = random_genome(4, np.random.default_rng(5))
    assert a == b
    assert len(a) == 4


def test_random_genome_rejects_zero_length():
    with pytest.raises(ConfigurationError):
        random_genome(0, np.random.default_rng(0))


def test_random_genome_is_roughly_fair():
    rng = np.random.default_rng(99)
    ones = sum(random_genome(1, rng).bits[0] for _ in range(10_000))
    assert 0.45 <= ones / 10_000 <= 0.55


def test_all_ones_is_identity(base_snapshot):
    mixed, retained = apply_genome(base_snapshot, Genome((1, 1, 1, 1)), np.random.default_rng(3))
    assert all(retained.values())
    for block_id in base_snapshot.values:
        assert np.array_equal(mixed.values[block_id], base_snapshot.values[block_id])
    assert mixed.tag == "alpha_plus_one"


def test_all_zeros_redraws_every_block(base_snapshot):
    mixed, retained = apply_genome(base_snapshot, Genome((0, 0, 0, 0)), np.random.default_rng(3))
    assert not any(retained.values())
    for block_id in base_snapshot.values:
        assert not np.array_equal(mixed.values[block_id], base_snapshot.values[block_id])


def test_mask_1010_mixes_blocks(base_snapshot):
    mixed, retained = apply_genome(base_snapshot, Genome((1, 0, 1, 0)), np.random.default_rng(3))
    assert retained == {0: True, 1: False, 2: True, 3: False}
    assert np.array_equal(mixed.values[0], base_snapshot.values[0])
    assert np.array_equal(mixed.values[2], base_snapshot.values[2])
    assert not np.array_equal(mixed.values[1], base_snapshot.values[1])
    assert not np.array_equal(mixed.values[3], base_snapshot.values[3])


def test_length_mismatch_raises(base_snapshot):
    with pytest.raises(ShapeError):
        apply_genome(base_snapshot, Genome((1, 0)), np.random.default_rng(0))


def test_snapshot_without_init_specs_rejected(base_snapshot):
    stripped = nn.WeightSnapshot(
        values=base_snapshot.values, shapes=base_snapshot.shapes, tag="alpha"
    )
    with pytest.raises(StateError):
        apply_genome(stripped, Genome((1, 1, 1, 1)), np.random.default_rng(0))


def test_deterministic_for_seed(base_snapshot):
    g = Genome((0, 1, 0, 1))
    first, _ = apply_genome(base_snapshot, g, np.random.default_rng(11))
    second, _ = apply_genome(base_snapshot, g, np.random.default_rng(11))
    for block_id in first.values:
        assert np.array_equal(first.values[block_id], second.values[block_id])


def test_block_redraw_independent_of_other_bits(base_snapshot):
    # block 3 is masked out in both genomes; its redraw must not depend on
    # whether block 1 was also masked out
    a, _ = apply_genome(base_snapshot, Genome((1, 0, 1, 0)), np.random.default_rng(21))
    b, _ = apply_genome(base_snapshot, Genome((1, 1, 1, 0)), np.random.default_rng(21))
    assert np.array_equal(a.values[3], b.values[3])


@settings(max_examples=50, deadline=None)
@given(bits=st.lists(st.integers(0, 1), min_size=4, max_size=4), seed=st.integers(0, 2**32 - 1))
def test_retained_and_reinit_sets_partition_blocks(bits, seed):
    base = nn.snapshot(nn.build_model((2, 16, 3), seed=7))
    genome = Genome(tuple(bits))
    mixed, retained = apply_genome(base, genome, np.random.default_rng(seed))
    kept = {i for i, keep in retained.items() if keep}
    redrawn = {i for i, keep in retained.items() if not keep}
    assert kept | redrawn == set(base.values)
    assert kept & redrawn == set()
    for block_id in kept:
        assert np.array_equal(mixed.values[block_id], base.values[block_id])
