import pytest

from mcfft.fft_tasks.netlist import BUBBLE, Tag, Token, simulate
from mcfft.fft_tasks.oracle import bit_reverse_perm, half_size_bit_reverse_perm
from mcfft.fft_tasks.reorder import (
    BitRevBuffer,
    ReorderBuffer,
    bit_exchanges,
    bit_permutation,
    build_bit_reorder,
    min_latency_departures,
    natural_order_departures,
    plan_reorder,
    synthesize_reorder,
)
from mcfft.fft_tasks.status import (
    CausalityError,
    PatternMismatchError,
    ReorderConflictError,
)


def serial(order, lane="in"):
    """Arrival schedule of one frame whose index order[t] arrives at cycle t."""
    return {index: (lane, cycle) for cycle, index in enumerate(order)}


def frames_stream(order, frames):
    return [Token(0j, Tag(0, f, index)) for f in range(frames) for index in order]


class TestPlanReorder:
    def test_identity_needs_no_registers(self):
        arrival = serial(range(8))
        departure = {key: ("out", cycle) for key, (_, cycle) in arrival.items()}
        assert plan_reorder(arrival, departure, 8).registers == 0

    def test_block_reversal(self):
        arrival = serial(range(4))
        departure = {i: ("out", 6 - i) for i in range(4)}
        plan = plan_reorder(arrival, departure, 4)
        assert plan.registers == 3
        assert plan.max_delay == 6

    def test_half_size_bit_reversal(self):
        arrival = {(0, index): where for index, where in serial(half_size_bit_reverse_perm(16)).items()}
        departure, latency = natural_order_departures(arrival, {0: "out"})
        assert latency == 3
        assert plan_reorder(arrival, departure, 16).registers == 3

    def test_not_a_permutation(self):
        with pytest.raises(PatternMismatchError):
            plan_reorder(serial(range(4)), {i: ("out", i) for i in range(3)}, 4)

    def test_causality(self):
        with pytest.raises(CausalityError):
            plan_reorder(serial(range(2)), {0: ("out", 1), 1: ("out", 0)}, 2)

    def test_input_conflict(self):
        arrival = {0: ("in", 0), 1: ("in", 2)}
        with pytest.raises(ReorderConflictError, match="arrive"):
            plan_reorder(arrival, {0: ("out", 0), 1: ("out", 3)}, 2)

    def test_output_conflict(self):
        arrival = {0: ("in", 0), 1: ("in", 1)}
        with pytest.raises(ReorderConflictError, match="leave"):
            plan_reorder(arrival, {0: ("out", 1), 1: ("out", 3)}, 2)


def test_min_latency_departures():
    arrival = {0: ("in", 0), 1: ("in", 1)}
    departures, latency = min_latency_departures(arrival, {0: ("out", 1), 1: ("out", 0)})
    assert latency == 1
    assert departures == {0: ("out", 2), 1: ("out", 1)}


class TestReorderBuffer:
    def test_reverses_blocks(self):
        circuit, registers = synthesize_reorder(
            serial(range(4)), {i: ("out", 6 - i) for i in range(4)}, 4, label="reverser"
        )
        assert registers == circuit.registers == 3
        trace = simulate(circuit, {"in": frames_stream(range(4), 3)}, 20)
        out = [t.tag for t in trace.tokens("out") if not t.is_bubble]
        assert [tag.index for tag in out] == [3, 2, 1, 0] * 3
        assert [tag.frame for tag in out] == [0] * 4 + [1] * 4 + [2] * 4
        assert trace.first_token_cycle(["out"]) == 3

    def test_multiple_lanes(self):
        arrival = {"x": ("a", 0), "y": ("b", 0)}
        departure = {"x": ("d", 1), "y": ("c", 0)}
        circuit, registers = synthesize_reorder(arrival, departure, 2)
        assert registers == 1
        assert circuit.inputs == ["a", "b"]
        assert circuit.outputs == ["c", "d"]

    def test_unexpected_token(self):
        plan = plan_reorder({0: ("in", 0)}, {0: ("out", 1)}, 2)
        buffer = ReorderBuffer("buf", plan, "test")
        buffer.step(0, [Token(0j, Tag(0, 0, 0))])
        with pytest.raises(ReorderConflictError, match="unexpected"):
            buffer.step(1, [Token(0j, Tag(0, 0, 1))])

    def test_lane_map(self):
        plan = plan_reorder({0: ("in", 0)}, {0: ("out", 1)}, 2)
        buffer = ReorderBuffer("buf", plan, "test", lane_map={"in": "pre.top"})
        assert buffer.inputs == ["pre.top"]
        assert buffer.outputs == ["out"]
        assert buffer.describe() == "test(period=2)"


# Base-core results of one channel after 1-DSD channel separation
INTERLEAVED_ORDER = [0, 8, 2, 10, 1, 9, 3, 11, 4, 12, 6, 14, 5, 13, 7, 15]


class TestBitReorder:
    def test_bit_permutation(self):
        assert bit_permutation(INTERLEAVED_ORDER) == (2, 1, 3, 0)
        assert bit_permutation(bit_reverse_perm(16)) == (3, 2, 1, 0)
        assert bit_permutation(list(range(8))) == (0, 1, 2)
        rotated = bit_reverse_perm(16)[2:] + bit_reverse_perm(16)[:2]
        assert bit_permutation(rotated) is None
        assert bit_permutation([0, 2, 1]) is None

    def test_cheapest_exchanges(self):
        assert bit_exchanges((2, 1, 3, 0)) == [(2, 0), (3, 2)]
        assert sorted(bit_exchanges((3, 2, 1, 0))) == [(2, 1), (3, 0)]
        assert bit_exchanges((0, 1, 2)) == []

    @pytest.mark.parametrize(
        "order, registers",
        [
            (INTERLEAVED_ORDER, 7),
            (half_size_bit_reverse_perm(16), 3),
            (bit_reverse_perm(16), 9),
        ],
    )
    def test_cascade_restores_natural_order(self, order, registers):
        circuit, latency = build_bit_reorder(order)
        assert circuit.registers == latency == registers
        assert {c.kind for c in circuit.components} == {"REOC"}
        trace = simulate(circuit, {"in": frames_stream(order, 2)}, 32 + latency)
        out = [(t.tag.frame, t.tag.index) for t in trace.tokens(circuit.outputs[0])[latency:]]
        assert out == [(f, k) for f in range(2) for k in range(16)]

    def test_cascade_follows_the_frame_start(self):
        circuit, latency = build_bit_reorder(INTERLEAVED_ORDER, start=5)
        stream = [BUBBLE] * 5 + frames_stream(INTERLEAVED_ORDER, 1)
        trace = simulate(circuit, {"in": stream}, 5 + 16 + latency)
        out = [t.tag.index for t in trace.tokens(circuit.outputs[0])[5 + latency:]]
        assert out == list(range(16))

    def test_rotation_is_rejected(self):
        with pytest.raises(PatternMismatchError, match="bit permutation"):
            build_bit_reorder(bit_reverse_perm(16)[2:] + bit_reverse_perm(16)[:2])


class TestBitRevBuffer:
    def test_named_component(self):
        arrival = {(0, index): where for index, where in serial(INTERLEAVED_ORDER).items()}
        departure, _ = natural_order_departures(arrival, {0: "out"})
        buffer = BitRevBuffer("rev", plan_reorder(arrival, departure, 16))
        assert buffer.kind == "BitRevBuffer"
        assert buffer.describe() == "bit-reversal buffer(period=16)"
        assert buffer.registers == 7

    def test_strided_departures(self):
        arrival = {(0, index): ("in", 2 * index) for index in range(4)}
        departure, latency = natural_order_departures(arrival, {0: "out"}, stride=2)
        assert latency == 0
        assert departure == {(0, index): ("out", 2 * index) for index in range(4)}
