import itertools

import numpy as np
import pytest

from mcfft.fft_tasks.architectures import ArchitectureVariant, core_schedule
from mcfft.fft_tasks.dfg import build_dif_dfg
from mcfft.fft_tasks.folding import (
    FoldingSet,
    OpRef,
    RegisterReport,
    Section,
    base_folding_sets_16,
    fill_channels,
    filled_folding_sets,
    fold,
    format_folding_sets,
    generated_folding_sets,
    interleave_nulls,
    interleaved_folding_sets,
    lifetime_profile,
    minimize_registers,
    ordered_folding_sets,
    parse_folding_sets,
    r2mdc_folding_sets,
    r2mdc_folding_sets_16,
    slot_delays,
    validate_schedule,
)
from mcfft.fft_tasks.status import (
    ChannelCountError,
    CoverageError,
    DiagnosticType,
    NegativeDelayError,
    PatternMismatchError,
)

from .conftest import read_golden


def _ref(text: str) -> OpRef:
    return OpRef.parse(text)


class TestOpRef:
    def test_str(self):
        assert str(OpRef(0, 3)) == "A3"
        assert str(OpRef(1, 3, 1)) == "B'3"
        assert str(OpRef(3, 0, 2)) == "D''0"

    def test_parse(self):
        assert OpRef.parse("C''5") == OpRef(2, 5, 2)
        with pytest.raises(PatternMismatchError):
            OpRef.parse("a3")


class TestFoldingSetConstruction:
    def test_base_sets(self, golden):
        sets = base_folding_sets_16()
        assert sets == golden("base16")
        assert sets[0].slots[0] == _ref("A0")
        assert sets[1].slots[2] == _ref("B0")

    def test_base_sets_are_stage_permutations(self):
        for stage, fs in enumerate(base_folding_sets_16()):
            assert sorted(ref.index for ref in fs.slots) == list(range(8))
            assert {ref.stage for ref in fs.slots} == {stage}

    def test_generated_sets_reproduce_base_sets(self):
        assert generated_folding_sets(16) == base_folding_sets_16()

    def test_interleave_nulls(self, golden):
        assert [interleave_nulls(fs, 2) for fs in base_folding_sets_16()] == golden("base16_spread")

    def test_interleave_nulls_identity_and_null_share(self):
        fs = base_folding_sets_16()[0]
        assert interleave_nulls(fs, 1) == fs
        spread = interleave_nulls(fs, 4)
        assert spread.folding_factor == 32
        assert spread.null_count == 24

    def test_fill_strided(self, golden):
        assert interleaved_folding_sets(base_folding_sets_16(), 2) == golden("base16_two_channel")

    def test_ordered_sets(self, golden):
        assert interleaved_folding_sets(ordered_folding_sets(16), 2) == golden("ordered16_two_channel")

    def test_r2mdc_sets(self, golden):
        sets = r2mdc_folding_sets_16()
        assert sets == golden("r2mdc16")
        assert sets[0].slots[8] is None
        assert sets[1].slots[4] == _ref("B0")
        assert [fs.ops()[0][0] for fs in sets] == [0, 4, 6, 7]
        assert all(fs.utilization == 0.5 for fs in sets)

    def test_fill_block_wraps_around(self, golden):
        filled = filled_folding_sets(r2mdc_folding_sets_16(), 2)
        assert filled == golden("r2mdc16_two_channel")
        assert all(fs.null_count == 0 for fs in filled)

    def test_fill_requires_matching_null_pattern(self):
        with pytest.raises(PatternMismatchError, match="null slots"):
            fill_channels(base_folding_sets_16()[0], 2)

    def test_fill_rejects_occupied_targets(self):
        slots = [None, _ref("A0"), None, _ref("A1")]
        with pytest.raises(PatternMismatchError, match="taken"):
            fill_channels(FoldingSet("A", tuple(slots)), 2)

    @pytest.mark.parametrize("channels", [0, 3, 6])
    def test_channel_count_must_be_power_of_two(self, channels):
        with pytest.raises(ChannelCountError):
            interleave_nulls(base_folding_sets_16()[0], channels)


class TestTextFormat:
    @pytest.mark.parametrize(
        "name",
        [
            "base16",
            "base16_spread",
            "base16_two_channel",
            "ordered16_two_channel",
            "r2mdc16",
            "r2mdc16_two_channel",
        ],
    )
    def test_golden_text_is_reproduced(self, name):
        text = read_golden(name)
        assert format_folding_sets(parse_folding_sets(text)) == text

    def test_comments_and_blank_lines_are_skipped(self):
        sets = parse_folding_sets("# unit A\n\nA: A0 - A1\n")
        assert sets == [FoldingSet("A", (_ref("A0"), None, _ref("A1")))]

    @pytest.mark.parametrize("text", ["A A0 A1", ": A0", "A: A0 A?"])
    def test_malformed(self, text):
        with pytest.raises(PatternMismatchError):
            parse_folding_sets(text)


class TestFold:
    def test_base_schedule_delays(self, dfg16):
        schedule = fold(dfg16, base_folding_sets_16())
        assert schedule.folding_factor == 8
        assert schedule.delay(_ref("A0"), _ref("B0")) == 2
        assert schedule.delay(_ref("A4"), _ref("B0")) == 0
        # D1 waits a full period for C1, so C0's result is held 8 cycles, not 0
        assert schedule.delay(_ref("C0"), _ref("D1")) == 8
        assert schedule.delay(_ref("C1"), _ref("D1")) == 4
        assert all(edge.delay >= 0 for edge in schedule.edges)

    def test_last_stage_firing_order(self, dfg16):
        schedule = fold(dfg16, base_folding_sets_16())
        assert [(t, str(ref)) for t, ref in schedule.stage_times(3)] == [
            (7, "D0"),
            (8, "D2"),
            (9, "D4"),
            (10, "D6"),
            (11, "D1"),
            (12, "D3"),
            (13, "D5"),
            (14, "D7"),
        ]

    @pytest.mark.parametrize("channels", [2, 4])
    def test_interleaving_scales_delays(self, dfg16, channels):
        base = fold(dfg16, base_folding_sets_16())
        spread = fold(dfg16, [interleave_nulls(fs, channels) for fs in base_folding_sets_16()])
        for edge in base.edges:
            assert spread.delay(edge.producer, edge.consumer) == channels * edge.delay

    @pytest.mark.parametrize(
        "nulls, filled",
        [
            (
                lambda: [interleave_nulls(fs, 2) for fs in base_folding_sets_16()],
                lambda: interleaved_folding_sets(base_folding_sets_16(), 2),
            ),
            (r2mdc_folding_sets_16, lambda: filled_folding_sets(r2mdc_folding_sets_16(), 2)),
        ],
    )
    def test_filling_keeps_delays(self, dfg16, nulls, filled):
        empty = fold(dfg16, nulls())
        full = fold(dfg16, filled())
        assert full.channels == 2
        for edge in empty.edges:
            assert full.delay(edge.producer, edge.consumer) == edge.delay
            primed = (
                OpRef(edge.producer.stage, edge.producer.index, 1),
                OpRef(edge.consumer.stage, edge.consumer.index, 1),
            )
            assert full.delay(*primed) == edge.delay

    def test_one_op_per_slot_and_frame(self, dfg16):
        schedule = fold(dfg16, interleaved_folding_sets(base_folding_sets_16(), 2))
        for fs in schedule.sets:
            slots = [schedule.slot_of(ref) for _, ref in fs.ops()]
            assert sorted(slots) == list(range(schedule.folding_factor))
        assert len(schedule.times) == 2 * len(dfg16.ops)

    def test_pinned_iterations_can_go_negative(self, dfg16):
        pinned = {ref: 0 for fs in base_folding_sets_16() for _, ref in fs.ops()}
        with pytest.raises(NegativeDelayError) as excinfo:
            fold(dfg16, base_folding_sets_16(), iterations=pinned)
        assert excinfo.value.delay < 0

    def test_slot_delays_before_iteration_shift(self, dfg16):
        edges = slot_delays(dfg16, base_folding_sets_16())
        raw = {(edge.producer, edge.consumer): edge.delay for edge in edges}
        assert raw[(_ref("A0"), _ref("B0"))] == 2
        assert raw[(_ref("C0"), _ref("D1"))] == 0
        assert raw[(_ref("C1"), _ref("D1"))] == -4
        assert min(raw.values()) < 0

    def test_no_c_unit_labeling_avoids_iteration_shift(self, dfg16):
        # Whatever D op takes slot 0, its two producers are distinct C ops and the
        # C unit fires one op per slot, so one of them comes after slot 0
        for index in range(8):
            producers = [edge.producer[1] for edge in dfg16.predecessors(3, index)]
            assert len(set(producers)) == 2
            for c_slots in itertools.permutations(range(8)):
                assert min(0 - c_slots[p] for p in producers) < 0

    def test_coverage_error(self, dfg16):
        sets = base_folding_sets_16()
        sets[0] = FoldingSet("A", (_ref("A0"),) * 8)
        with pytest.raises(CoverageError) as excinfo:
            fold(dfg16, sets)
        types = {d.type for d in excinfo.value.diagnostics}
        assert types == {DiagnosticType.DUPLICATE, DiagnosticType.MISSING}

    @pytest.mark.parametrize("size", [8, 32, 64])
    def test_generated_sets_fold_for_other_sizes(self, size):
        graph = build_dif_dfg(size)
        for sets in (
            interleaved_folding_sets(generated_folding_sets(size), 2),
            interleaved_folding_sets(ordered_folding_sets(size), 2),
            filled_folding_sets(r2mdc_folding_sets(size), 2),
        ):
            assert validate_schedule(graph, sets).ok
            assert all(edge.delay >= 0 for edge in fold(graph, sets).edges)


class TestValidateSchedule:
    def test_interleaved_sets_are_valid(self, dfg16, golden):
        assert validate_schedule(dfg16, golden("base16_two_channel")).ok

    def test_duplicate(self, dfg16):
        sets = base_folding_sets_16()
        slots = list(sets[0].slots)
        slots[1] = slots[0]
        sets[0] = FoldingSet("A", tuple(slots))
        report = validate_schedule(dfg16, sets)
        assert [d.op for d in report.of_type(DiagnosticType.DUPLICATE)] == ["A0"]
        assert [d.op for d in report.of_type(DiagnosticType.MISSING)] == ["A2"]

    def test_swapped_across_units(self, dfg16):
        sets = base_folding_sets_16()
        a, b = list(sets[0].slots), list(sets[1].slots)
        a[0], b[2] = b[2], a[0]
        sets[0], sets[1] = FoldingSet("A", tuple(a)), FoldingSet("B", tuple(b))
        report = validate_schedule(dfg16, sets)
        assert sorted(d.op for d in report.of_type(DiagnosticType.MISPLACED)) == ["A0", "B0"]

    def test_factor_mismatch(self, dfg16):
        sets = base_folding_sets_16()
        sets[3] = FoldingSet("D", sets[3].slots + (None,))
        report = validate_schedule(dfg16, sets)
        assert report.of_type(DiagnosticType.FACTOR_MISMATCH)

    def test_unit_count(self, dfg16):
        assert not validate_schedule(dfg16, base_folding_sets_16()[:3]).ok

    def test_negative_delay_is_reported(self, dfg16):
        pinned = {ref: 0 for fs in base_folding_sets_16() for _, ref in fs.ops()}
        report = validate_schedule(dfg16, base_folding_sets_16(), iterations=pinned)
        assert report.of_type(DiagnosticType.NEGATIVE_DELAY)
        assert not report.of_type(DiagnosticType.MISSING)

    @pytest.mark.parametrize("seed", range(50))
    def test_random_mutations_are_caught(self, dfg16, golden, seed):
        rng = np.random.default_rng(seed)
        sets = golden("base16_two_channel")
        slots = [list(fs.slots) for fs in sets]
        unit = int(rng.integers(len(slots)))
        slot = int(rng.integers(len(slots[unit])))
        match int(rng.integers(3)):
            case 0:
                # copy another op of the unit over this one
                other = (slot + 1 + int(rng.integers(len(slots[unit]) - 1))) % len(slots[unit])
                slots[unit][slot] = slots[unit][other]
            case 1:
                # exchange with an op of another unit
                other_unit = (unit + 1 + int(rng.integers(len(slots) - 1))) % len(slots)
                other = int(rng.integers(len(slots[other_unit])))
                slots[unit][slot], slots[other_unit][other] = (
                    slots[other_unit][other],
                    slots[unit][slot],
                )
            case 2:
                slots[unit][slot] = None
        mutated = [FoldingSet(fs.unit_name, tuple(s)) for fs, s in zip(sets, slots)]
        assert not validate_schedule(dfg16, mutated).ok


class TestRegisters:
    def test_lifetime_profile(self):
        assert lifetime_profile([(0, 0)], 4) == [0, 0, 0, 0]
        assert lifetime_profile([(0, 3)], 4) == [0, 1, 1, 1]
        assert lifetime_profile([(0, 8)], 4) == [2, 2, 2, 2]

    @pytest.mark.parametrize(
        "variant, expected",
        [
            (ArchitectureVariant.ARCH1, 28),
            (ArchitectureVariant.ARCH2, 28),
            (ArchitectureVariant.ARCH3, 14),
        ],
    )
    def test_core_registers(self, variant, expected):
        report = minimize_registers(core_schedule(variant, 16, 2))
        assert report.fft == expected
        assert max(report.live_profile) == expected
        assert report.unshared >= report.fft

    def test_no_edges_no_registers(self):
        graph = build_dif_dfg(2)
        schedule = fold(graph, [FoldingSet("A", (OpRef(0, 0),))])
        assert minimize_registers(schedule).fft == 0


class TestRegisterReport:
    def test_totals(self):
        report = RegisterReport()
        report.add(Section.PRE_PROCESSING, "buffer", 16)
        report.add(Section.PRE_PROCESSING, "sync", 1)
        report.add(Section.FFT, "core", 28)
        report.add(Section.POST_PROCESSING, "dsd", 2)
        report.add(Section.REORDERING, "reoc 0", 7, instantiated=False)
        report.add(Section.REORDERING, "reoc 1", 7, instantiated=False)

        assert report.as_row() == (17, 28, 2, 14, 61)
        assert report.instantiated_total == 47
        assert [item.label for item in report.section_items(Section.PRE_PROCESSING)] == [
            "buffer",
            "sync",
        ]
