import random

import pytest

from pimfilter import oracle
from pimfilter.crossbar import CrossbarState, NorRow, taint_violations
from pimfilter.genome import load_tile, partition
from pimfilter.io import synth_genome
from pimfilter.kernel import (
    BASES,
    COMPUTE_BUDGET,
    STEP_BUDGETS,
    TOTAL_BUDGET,
    build_program,
    encode_base,
    match_value,
    plan_layout,
    run_kernel,
    store_threshold,
    window_row_ranges,
)


@pytest.fixture(scope="module")
def tile_state(layout):
    rng = random.Random(11)
    genome = synth_genome(6600, rng)
    state = CrossbarState()
    load_tile(state, layout, genome, partition(len(genome))[0], eth=5)
    return genome, state


@pytest.fixture(scope="module")
def cache():
    return {}


class TestEncoding:
    @pytest.mark.parametrize("base,code", [("A", (0, 0)), ("T", (0, 1)), ("G", (1, 0)), ("C", (1, 1))])
    def test_codes(self, base, code):
        assert encode_base(base) == code

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            encode_base("N")


class TestMatchExpressions:
    def test_truth_table(self):
        # evaluate all four expressions over all four stored codes
        for stored in BASES:
            a, b = encode_base(stored)
            pa, pb = 1 - a, 1 - b  # the window is kept inverted
            for probe in BASES:
                assert match_value(probe, pa, pb) == int(probe == stored)

    def test_c_is_plain_nor(self):
        # stored C inverts to (0, 0); NOR(0, 0) = 1
        assert match_value("C", 0, 0) == 1

    def test_t_expression(self):
        a, b = encode_base("T")
        assert match_value("T", 1 - a, 1 - b) == 1
        assert match_value("G", 1 - a, 1 - b) == 0


class TestWindowRows:
    def test_aligned_offset_single_fragment(self):
        assert window_row_ranges(0, 100) == [(0, range(0, 100))]
        assert window_row_ranges(6400, 100) == [(64, range(0, 100))]

    def test_split_offset(self):
        (p1, r1), (p2, r2) = window_row_ranges(230, 100)
        assert (p1, list(r1)[:1], list(r1)[-1]) == (2, [30], 99)
        assert (p2, list(r2)) == (3, list(range(0, 30)))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            window_row_ranges(6401, 100)


class TestBudgets:
    def test_per_step_and_totals(self, layout, tile_state, cache):
        genome, state = tile_state
        counts = oracle.histogram(genome[123:223])
        res = run_kernel(state, layout, counts, 123, cache=cache)
        for label, budget in STEP_BUDGETS.items():
            assert res.steps[label].compute <= budget, label
        assert res.compute_cycles <= COMPUTE_BUDGET
        assert res.compute_cycles + res.init_cycles <= TOTAL_BUDGET

    def test_comparison_step_structure(self, layout):
        # two shared inversions feed the A comparison; T, G, C cost one each
        prog = build_program(layout, 0)
        spans = {label: (s, e) for label, s, e in prog.annotations if label == "3"}
        s, e = spans["3"]
        gates = [op for op in prog.ops[s:e] if isinstance(op, NorRow)]
        assert len(gates) == 6
        na, nb = gates[0], gates[1]
        assert len(na.input_cols) == 1 and len(nb.input_cols) == 1
        m_a = gates[2]
        assert set(m_a.input_cols) == {na.output_col, nb.output_col}

    def test_write_step_cost(self, layout, tile_state, cache):
        genome, state = tile_state
        counts = oracle.histogram(genome[0:100])
        res = run_kernel(state, layout, counts, 0, cache=cache)
        assert res.steps["1"].compute == 8  # two cycles per stored count


class TestDecisions:
    def test_exact_window_kept_at_zero_threshold(self, layout, tile_state, cache):
        genome, state = tile_state
        counts = oracle.histogram(genome[200:300])
        res = run_kernel(state, layout, counts, 200, eth=0, cache=cache)
        assert res.discard == 0

    def test_all_a_read_against_all_a_window(self, layout):
        genome = "A" * 6500
        state = CrossbarState()
        load_tile(state, layout, genome, partition(len(genome))[0], eth=0)
        counts = oracle.BaseCounts(100, 0, 0, 0)
        assert run_kernel(state, layout, counts, 0).discard == 0

    def test_fully_disjoint_alphabets_discard(self, layout):
        genome = "G" * 50 + "C" * 6450
        state = CrossbarState()
        load_tile(state, layout, genome, partition(len(genome))[0], eth=10)
        counts = oracle.BaseCounts(50, 50, 0, 0)  # error 200 > 20
        assert run_kernel(state, layout, counts, 0).discard == 1

    def test_boundary_error_exactly_twice_eth(self, layout):
        # window has k non-A bases against an all-A read: error = 2k
        k = 7
        genome = "T" * k + "A" * 6500
        state = CrossbarState()
        load_tile(state, layout, genome, partition(len(genome))[0])
        counts = oracle.BaseCounts(100, 0, 0, 0)
        assert run_kernel(state, layout, counts, 0, eth=k).discard == 0
        assert run_kernel(state, layout, counts, 0, eth=k - 1).discard == 1

    def test_window_lands_in_p_as_row_rotation(self, layout, tile_state, cache):
        # the inverted window copy rotates rows by the in-fragment phase
        genome, state = tile_state
        offset = 250  # split across two fragments, phase 50
        counts = oracle.histogram("ACGT" * 25)
        run_kernel(state, layout, counts, offset, cache=cache)
        window = genome[offset:offset + 100]
        r0 = offset % 100
        for r in range(100):
            pa, pb = state.cells[r, layout.p_cols[0]], state.cells[r, layout.p_cols[1]]
            a, b = encode_base(window[(r - r0) % 100])
            assert (pa, pb) == (1 - a, 1 - b)

    def test_window_counts_reach_the_lanes(self, layout, tile_state, cache):
        genome, state = tile_state
        offset = 4321
        window = genome[offset:offset + 100]
        counts = oracle.histogram("ACGT" * 25)
        run_kernel(state, layout, counts, offset, cache=cache)
        want = oracle.histogram(window)
        got = [state.read_value([(layout.lane_rows[b], c) for c in layout.res_cols])
               for b in BASES]
        assert got == [want.a, want.t, want.g, want.c]
        assert sum(got) == 100

    def test_permutation_invariance(self, layout, cache):
        rng = random.Random(5)
        window = list("ACGT" * 25)
        rng.shuffle(window)
        shuffled = list(window)
        rng.shuffle(shuffled)
        counts = oracle.histogram(synth_genome(100, rng))
        results = []
        for w in ("".join(window), "".join(shuffled)):
            genome = w + "A" * 6450
            state = CrossbarState()
            load_tile(state, layout, genome, partition(len(genome))[0], eth=3)
            results.append(run_kernel(state, layout, counts, 0, cache=cache).discard)
        assert results[0] == results[1]

    def test_randomized_against_golden_model(self, layout, tile_state, cache):
        genome, state = tile_state
        rng = random.Random(17)
        for _ in range(150):
            offset = rng.randint(0, 6400)
            eth = rng.choice([0, 1, 5, 10])
            read = synth_genome(100, rng) if rng.random() < 0.6 else \
                list(genome[offset:offset + 100])
            if isinstance(read, list):
                for _ in range(rng.randint(0, 12)):
                    read[rng.randrange(100)] = rng.choice("ACGT")
                read = "".join(read)
            counts = oracle.histogram(read)
            res = run_kernel(state, layout, counts, offset, eth=eth, cache=cache)
            assert res.discard == oracle.decide(counts, genome[offset:offset + 100], eth)


class TestValidation:
    def test_histogram_must_sum_to_read_length(self, layout, tile_state):
        _, state = tile_state
        with pytest.raises(ValueError, match="read length"):
            run_kernel(state, layout, oracle.BaseCounts(1, 0, 0, 0), 0)

    def test_offset_out_of_range(self, layout, tile_state):
        genome, state = tile_state
        counts = oracle.histogram(genome[:100])
        with pytest.raises(ValueError):
            run_kernel(state, layout, counts, 6401)
        with pytest.raises(ValueError):
            run_kernel(state, layout, counts, -1)

    def test_threshold_range(self, layout):
        state = CrossbarState()
        with pytest.raises(ValueError):
            store_threshold(state, layout, -1)
        with pytest.raises(ValueError):
            store_threshold(state, layout, 101)

    def test_program_taint_clean(self, layout):
        prog = build_program(layout, 123)
        defined = {(r, c) for r in range(100) for c in range(layout.genome_cols)}
        defined |= {(layout.lane_rows["A"], c) for c in layout.thr_cols}
        assert taint_violations(prog, defined) == []

    def test_short_reads_supported(self):
        short = plan_layout(read_length=60)
        genome = "ACGT" * 1700
        state = CrossbarState()
        load_tile(state, short, genome, partition(len(genome), 60)[0], eth=2)
        rng = random.Random(9)
        for _ in range(8):
            offset = rng.randint(0, 6400)
            read = synth_genome(60, rng)
            counts = oracle.histogram(read)
            res = run_kernel(state, short, counts, offset, eth=2)
            assert res.discard == oracle.decide(counts, genome[offset:offset + 60], 2)
