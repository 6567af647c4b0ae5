import random
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pimfilter.oracle import (
    BaseCounts,
    base_count_error,
    decide,
    edit_distance,
    histogram,
    should_discard,
)

seqs = st.text(alphabet="ACGT", max_size=40)


@lru_cache(maxsize=None)
def reference_distance(a, b):
    """Independent recursive definition of the edit distance."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    if a[0] == b[0]:
        return reference_distance(a[1:], b[1:])
    return 1 + min(
        reference_distance(a[1:], b[1:]),   # substitute
        reference_distance(a, b[1:]),       # insert
        reference_distance(a[1:], b),       # delete
    )


class TestHistogram:
    def test_balanced(self):
        assert histogram("ACGT" * 25) == BaseCounts(25, 25, 25, 25)

    def test_empty(self):
        assert histogram("") == BaseCounts(0, 0, 0, 0)

    def test_skewed(self):
        assert histogram("AAAT") == BaseCounts(a=3, t=1, g=0, c=0)

    def test_rejects_invalid_letter(self):
        with pytest.raises(ValueError, match="position 2"):
            histogram("ACNT")

    @given(seqs)
    def test_total_is_length(self, seq):
        assert histogram(seq).total == len(seq)

    @given(seqs, st.randoms())
    def test_permutation_invariance(self, seq, rnd):
        shuffled = list(seq)
        rnd.shuffle(shuffled)
        assert histogram(seq) == histogram("".join(shuffled))


class TestBaseCountError:
    def test_one_substitution_costs_two(self):
        assert base_count_error(BaseCounts(100, 0, 0, 0), BaseCounts(99, 1, 0, 0)) == 2

    def test_identical_is_zero(self):
        h = BaseCounts(10, 20, 30, 40)
        assert base_count_error(h, h) == 0

    def test_disjoint_alphabets(self):
        assert base_count_error(BaseCounts(50, 50, 0, 0), BaseCounts(0, 0, 50, 50)) == 200


class TestShouldDiscard:
    def test_boundary_is_kept(self):
        assert should_discard(2, eth=1) == 0  # 2 > 2 is false

    def test_above_boundary_discards(self):
        assert should_discard(3, eth=1) == 1

    def test_zero_zero(self):
        assert should_discard(0, eth=0) == 0


class TestEditDistance:
    def test_equal(self):
        assert edit_distance("AAAA", "AAAA") == 0

    def test_single_substitution(self):
        assert edit_distance("AAAA", "AATA") == 1

    def test_indel(self):
        assert edit_distance("ACGT", "AGT") == 1
        assert edit_distance("", "ACG") == 3

    @given(st.text(alphabet="ACGT", max_size=7), st.text(alphabet="ACGT", max_size=7))
    @settings(max_examples=150, deadline=None)
    def test_matches_recursive_reference(self, a, b):
        assert edit_distance(a, b) == reference_distance(a, b)


class TestSoundness:
    @given(seqs, seqs)
    @settings(max_examples=200, deadline=None)
    def test_error_bounded_by_twice_edit_distance(self, a, b):
        assert base_count_error(histogram(a), histogram(b)) <= 2 * edit_distance(a, b)

    def test_never_discards_within_threshold(self):
        rng = random.Random(3)
        for _ in range(200):
            n = rng.randint(10, 40)
            window = "".join(rng.choice("ACGT") for _ in range(n))
            eth = rng.randint(0, 5)
            k = rng.randint(0, eth)
            read = list(window)
            for _ in range(k):  # substitutions keep the distance <= k
                read[rng.randrange(n)] = rng.choice("ACGT")
            read = "".join(read)
            assert edit_distance(read, window) <= eth
            assert decide(histogram(read), window, eth) == 0

    @given(seqs.filter(lambda s: len(s) > 0), st.data())
    @settings(max_examples=150, deadline=None)
    def test_single_edit_moves_error_by_at_most_two(self, seq, data):
        i = data.draw(st.integers(0, len(seq) - 1))
        base = data.draw(st.sampled_from("ACGT"))
        kind = data.draw(st.sampled_from(["sub", "ins", "del"]))
        if kind == "sub":
            edited = seq[:i] + base + seq[i + 1:]
        elif kind == "ins":
            edited = seq[:i] + base + seq[i:]
        else:
            edited = seq[:i] + seq[i + 1:]
        h0, h1 = histogram(seq), histogram(edited)
        assert base_count_error(h0, h1) <= 2
