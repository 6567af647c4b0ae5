"""Software golden model of the base-count filter.

The filter compares per-base occurrence histograms of a read and a
same-length reference window. The accumulated absolute count difference
is a lower bound on twice the edit distance, so discarding a location
only when that error exceeds twice the edit threshold never loses a true
location. A plain Levenshtein distance is included for testing that
soundness claim.
"""

from __future__ import annotations

from typing import NamedTuple

BASES = "ATGC"


class BaseCounts(NamedTuple):
    """Occurrences of each base type in a sequence."""

    a: int
    t: int
    g: int
    c: int

    @property
    def total(self):
        return self.a + self.t + self.g + self.c


def histogram(seq):
    """Exact per-base counts of a sequence over {A, C, G, T}.

    :raises ValueError: on any other letter.
    """
    counts = {"A": 0, "T": 0, "G": 0, "C": 0}
    for i, ch in enumerate(seq):
        if ch not in counts:
            raise ValueError(f"invalid base {ch!r} at position {i}")
        counts[ch] += 1
    return BaseCounts(counts["A"], counts["T"], counts["G"], counts["C"])


def base_count_error(read_counts, window_counts):
    """Sum over base types of |window count - read count|."""
    return sum(abs(s - r) for r, s in zip(read_counts, window_counts))


def should_discard(error, eth):
    """1 iff the accumulated count error exceeds twice the edit threshold."""
    return 1 if error > 2 * eth else 0


def decide(read_counts, window, eth):
    """Filter decision (1 = discard) for a read histogram and a window."""
    return should_discard(base_count_error(read_counts, histogram(window)), eth)


def edit_distance(a, b):
    """Levenshtein distance: minimal substitutions + insertions + deletions."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (ca != cb),
            ))
        prev = cur
    return prev[len(b)]
