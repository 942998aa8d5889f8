import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kashin.kwise import (KwiseGenerator, coordinate_masks, expand_field_elements,
                          expand_seed_ints, kwise_expand, sign_table,
                          verify_kwise_exhaustive)

from conftest import reference_expand


def test_generator_validation():
    with pytest.raises(ValueError):
        KwiseGenerator(k=0, r=3, M=7)
    with pytest.raises(ValueError):
        KwiseGenerator(k=2, r=3, M=8)  # M > 2^r - 1
    gen = KwiseGenerator(k=4, r=3, M=7)
    assert gen.seed_len == 12


def test_zero_seed_gives_all_plus_one():
    gen = KwiseGenerator(k=4, r=3, M=7)
    assert np.all(kwise_expand(gen, np.zeros(12, dtype=np.uint8)) == 1)


def test_single_bit_generator_passes_seed_through():
    gen = KwiseGenerator(k=1, r=1, M=1)
    assert kwise_expand(gen, [0])[0] == 1
    assert kwise_expand(gen, [1])[0] == -1


def test_seed_length_mismatch_rejected():
    gen = KwiseGenerator(k=2, r=2, M=3)
    with pytest.raises(ValueError):
        kwise_expand(gen, [0, 1, 0])
    with pytest.raises(ValueError):
        kwise_expand(gen, [0, 1, 2, 0])  # non-bit entry


def test_expand_is_pure():
    gen = KwiseGenerator(k=3, r=4, M=11)
    seed = np.array([1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0], dtype=np.uint8)
    assert np.array_equal(kwise_expand(gen, seed), kwise_expand(gen, seed))


def test_kernel_matches_reference_expansion(rng):
    for _ in range(25):
        r = int(rng.integers(1, 33))
        k = int(rng.integers(1, 7))
        M = int(min((1 << r) - 1, rng.integers(1, 40)))
        z = rng.integers(0, 1 << 62, size=(k,)).astype(np.uint64) & np.uint64((1 << r) - 1)
        gen = KwiseGenerator(k=k, r=r, M=M)
        got = expand_field_elements(gen, z.reshape(1, -1))[0]
        assert np.array_equal(got, reference_expand(k, r, M, z))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=(1 << 16) - 1))
def test_integer_and_bit_seeds_agree(packed):
    gen = KwiseGenerator(k=4, r=4, M=15)
    bits = np.array([(packed >> i) & 1 for i in range(16)], dtype=np.uint8)
    assert np.array_equal(kwise_expand(gen, bits),
                          expand_seed_ints(gen, packed)[0])


# ---------------------------------------------------------
# exact independence by enumeration
# ---------------------------------------------------------

def test_pairwise_generator_exhaustive_counts():
    # 16 seeds: each coordinate balanced, each pair uniform over 4 patterns
    gen = KwiseGenerator(k=2, r=2, M=3)
    table = sign_table(gen)
    assert table.shape == (16, 3)
    for c in range(3):
        assert (table[:, c] == -1).sum() == 8
    for a, b in itertools.combinations(range(3), 2):
        counts = Counter(map(tuple, table[:, [a, b]]))
        assert sorted(counts.values()) == [4, 4, 4, 4]


def test_four_wise_exhaustive_is_exact():
    gen = KwiseGenerator(k=4, r=3, M=7)
    rep = verify_kwise_exhaustive(gen, j=4)
    assert rep.max_deviation == 0.0
    assert rep.subsets_checked == 35
    assert rep.seeds_enumerated == 4096


def test_single_coordinate_always_unbiased():
    for gen in (KwiseGenerator(k=1, r=3, M=5), KwiseGenerator(k=2, r=2, M=3),
                KwiseGenerator(k=4, r=4, M=15)):
        assert verify_kwise_exhaustive(gen, j=1).max_deviation == 0.0


def test_pairwise_generator_happens_to_be_3_uniform():
    # For k=2, r=2, M=3 the three coordinate functionals have full rank
    # over GF(2) (their XOR is the first seed bit, not zero), so even the
    # full triple is exactly uniform: order-k independence is a floor,
    # not a ceiling.
    gen = KwiseGenerator(k=2, r=2, M=3)
    rep = verify_kwise_exhaustive(gen, j=3)
    assert rep.max_deviation == 0.0


def test_dependence_beyond_order_is_detected():
    # k=1 evaluates a degree-0 polynomial, so every coordinate is the same
    # bit: only the two constant patterns occur, deviation 1/2 - 1/8.
    gen = KwiseGenerator(k=1, r=2, M=3)
    rep = verify_kwise_exhaustive(gen, j=3)
    assert rep.max_deviation == pytest.approx(3.0 / 8.0)
    # the guaranteed order is still exact
    assert verify_kwise_exhaustive(gen, j=1).max_deviation == 0.0
    # k=2, r=3, M=7: exactly uniform through j=3, but some 4-subsets of
    # evaluation points XOR to zero, so only half the 4-bit patterns
    # occur there and the deviation is exactly 1/16.
    gen2 = KwiseGenerator(k=2, r=3, M=7)
    assert verify_kwise_exhaustive(gen2, j=3).max_deviation == 0.0
    assert verify_kwise_exhaustive(gen2, j=4).max_deviation == pytest.approx(1.0 / 16.0)


def test_enumeration_guard():
    gen = KwiseGenerator(k=4, r=7, M=100)  # 28 seed bits
    with pytest.raises(ValueError):
        verify_kwise_exhaustive(gen, j=2)
    with pytest.raises(ValueError):
        sign_table(gen)


def test_subset_cap_limits_work():
    gen = KwiseGenerator(k=4, r=4, M=15)
    rep = verify_kwise_exhaustive(gen, j=3, max_subsets=20)
    assert rep.subsets_checked == 20
    assert rep.total_subsets == 455
    assert rep.max_deviation == 0.0


def test_coordinate_masks_reproduce_table():
    gen = KwiseGenerator(k=3, r=3, M=7)
    masks = coordinate_masks(gen)
    table = sign_table(gen)
    seeds = np.arange(1 << gen.seed_len, dtype=np.uint32)
    for c, mask in enumerate(masks):
        bits = np.bitwise_count(seeds & np.uint32(mask)) & 1
        assert np.array_equal(1 - 2 * bits.astype(np.int8), table[:, c])


def test_truncation_is_prefix():
    # an M < 2^r - 1 generator is the prefix of the full-length one
    full = sign_table(KwiseGenerator(k=2, r=3, M=7))
    short = sign_table(KwiseGenerator(k=2, r=3, M=4))
    assert np.array_equal(full[:, :4], short)
