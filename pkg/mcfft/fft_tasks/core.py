import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .dfg import DataFlowGraph
from .folding import FoldedEdge, FoldedSchedule, OpRef
from .netlist import BUBBLE, Butterfly2, Component, Tag, Token, TwiddleMul
from .oracle import bit_reverse
from .status import McfftError, OperandMismatchError, UnsupportedConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegisterSource:
    """What a register loads at a clock edge: another register, or the unit output of an edge."""

    register: Optional[int] = None
    edge: Optional[int] = None

    def __str__(self) -> str:
        return f"r{self.register}" if self.register is not None else f"edge {self.edge}"


class RegisterAllocation:
    """Concrete register file for the values a folded schedule holds between stages.

    During phase p register r holds live[p][r], a (cycles left, edge index) pair; loads[p][r]
    is the mux input register r selects at the clock edge that starts phase p. Edges with
    D_F = 0 are wires and hold no register.
    """

    def __init__(self, schedule: FoldedSchedule):
        if schedule.pipeline_depth:
            raise UnsupportedConfigurationError(
                "Register allocation assumes combinational units (pipeline depth 0)"
            )
        self.period = schedule.folding_factor
        self.edges: Tuple[FoldedEdge, ...] = schedule.edges
        held = [(i, edge) for i, edge in enumerate(self.edges) if edge.delay > 0]

        # Linear scan with the active list ordered by end point: the value read soonest
        # sits in r0, the next in r1, and so on
        self.live: List[List[Tuple[int, int]]] = []
        for phase in range(self.period):
            values = []
            for i, edge in held:
                left = (schedule.times[edge.consumer] - phase) % self.period
                while left < edge.delay:
                    values.append((left, i))
                    left += self.period
            self.live.append(sorted(values))
        self._index: List[Dict[Tuple[int, int], int]] = [
            {value: r for r, value in enumerate(values)} for values in self.live
        ]

        self.loads: List[List[RegisterSource]] = []
        for phase in range(self.period):
            before = (phase - 1) % self.period
            sources = []
            for left, i in self.live[phase]:
                if left + 1 < self.edges[i].delay:
                    sources.append(RegisterSource(register=self._index[before][(left + 1, i)]))
                    continue
                producer_time = schedule.times[self.edges[i].producer]
                if producer_time % self.period != before:
                    raise McfftError(
                        f"{self.edges[i]} enters the register file at phase {phase} but "
                        f"its producer fires at phase {producer_time % self.period}"
                    )
                sources.append(RegisterSource(edge=i))
            self.loads.append(sources)

    @property
    def registers(self) -> int:
        return max((len(values) for values in self.live), default=0)

    def register_of(self, phase: int, edge: int) -> int:
        """Register holding the value of `edge` in the phase its consumer reads it."""
        return self._index[phase][(0, edge)]

    def mux_inputs(self, register: int) -> List[RegisterSource]:
        """Distinct sources register `register` selects among over one period."""
        sources = []
        for loads in self.loads:
            if register < len(loads) and loads[register] not in sources:
                sources.append(loads[register])
        return sources


class FoldedCore(Component):
    """Folded FFT datapath: one butterfly unit per stage, time-multiplexed by a schedule.

    Inputs are the two operand lanes of the first stage (plus an optional frame-sync lane),
    outputs the two result lanes of the last stage. Values between stages live in the
    register file of a RegisterAllocation, moved by its periodic mux control; every operand
    a unit reads is checked against the DFG, so a misfolded schedule raises
    OperandMismatchError instead of computing garbage.

    The slot counter locks on the first sync token when a sync lane is wired, otherwise on
    the first sample token to arrive. Output tokens are tagged with the frequency bin they
    hold.
    """

    kind = "FoldedCore"

    def __init__(
        self,
        name: str,
        graph: DataFlowGraph,
        schedule: FoldedSchedule,
        inputs: Tuple[str, str],
        outputs: Tuple[str, str],
        sync: Optional[str] = None,
        sync_latency: int = 0,
    ):
        if schedule.pipeline_depth:
            raise UnsupportedConfigurationError(
                "The folded core models combinational butterflies only (pipeline depth 0)"
            )
        super().__init__(name, list(inputs) + ([sync] if sync else []), list(outputs))
        self.graph = graph
        self.schedule = schedule
        self.sync = sync
        self.sync_latency = sync_latency
        self.allocation = RegisterAllocation(schedule)
        self.unit_names = [fs.unit_name for fs in schedule.sets]

        factor = schedule.folding_factor
        # unit -> slot -> (op, frame-0 firing time)
        self._slots: List[List[Optional[Tuple[OpRef, int]]]] = []
        self._twiddles: List[TwiddleMul] = []
        for fs in schedule.sets:
            table: List[Optional[Tuple[OpRef, int]]] = [None] * factor
            exponents = [0] * factor
            for slot, ref in fs.ops():
                table[slot] = (ref, schedule.times[ref])
                exponents[slot] = graph.op(ref.stage, ref.index).twiddle_exponent
            self._slots.append(table)
            self._twiddles.append(
                TwiddleMul(f"{fs.unit_name}.twiddle", exponents, graph.size, "", "")
            )

        # (channel, input index) of a top operand -> (first-stage op, time)
        self._top_operands: Dict[Tuple[int, int], Tuple[OpRef, int]] = {}
        for ref, time in schedule.times.items():
            if ref.stage == 0:
                position = graph.op(0, ref.index).position
                self._top_operands[(ref.channel, position)] = (ref, time)

        self._edge_into: Dict[Tuple[OpRef, int], int] = {}
        self._edge_from: Dict[Tuple[OpRef, int], int] = {}
        for i, edge in enumerate(schedule.edges):
            self._edge_into[(edge.consumer, edge.consumer_port)] = i
            self._edge_from[(edge.producer, edge.producer_port)] = i
        self.reset()

    @property
    def registers(self) -> int:
        return self.allocation.registers

    @property
    def occupancy(self) -> int:
        return sum(not token.is_bubble for token in self._file)

    @property
    def folding_factor(self) -> int:
        return self.schedule.folding_factor

    def reset(self):
        self.origin: Optional[int] = None
        self._file: List[Token] = [BUBBLE] * self.allocation.registers
        self.firings: Dict[str, List[Optional[bool]]] = {
            f"{self.name}.{unit}": [] for unit in self.unit_names
        }

    def _lock(self, cycle: int, top: Token, bottom: Token, sync: Optional[Token]):
        if self.sync:
            if sync is not None and not sync.is_bubble:
                self.origin = (
                    cycle - self.sync_latency - sync.tag.frame * self.folding_factor
                )
        elif not top.is_bubble:
            key = (top.tag.channel, top.tag.index)
            if key not in self._top_operands:
                raise OperandMismatchError(
                    f"{self.name}: {top} is not a first-stage top operand"
                )
            _, time = self._top_operands[key]
            self.origin = cycle - time - top.tag.frame * self.folding_factor
        if self.origin is None and not (top.is_bubble and bottom.is_bubble):
            raise OperandMismatchError(
                f"{self.name}: samples ({top}, {bottom}) arrived at cycle {cycle} "
                "before the slot counter locked"
            )

    def _expected(self, ref: OpRef, frame: int) -> Tuple[Tag, Tag]:
        op = self.graph.op(ref.stage, ref.index)
        return (
            Tag(ref.channel, frame, op.position),
            Tag(ref.channel, frame, op.position + op.span),
        )

    def _operand(self, ref: OpRef, port: int, phase: int, produced: Dict[int, Token]) -> Token:
        edge = self._edge_into[(ref, port)]
        if self.allocation.edges[edge].delay == 0:
            return produced.get(edge, BUBBLE)
        return self._file[self.allocation.register_of(phase, edge)]

    def _checked(self, ref: OpRef, frame: int, a: Token, b: Token) -> bool:
        """True when the op has both operands, False when the slot idles.

        Raises:
            OperandMismatchError if only one operand is present or either is not the
            value the DFG routes to this op
        """
        if a.is_bubble and b.is_bubble:
            return False
        if a.is_bubble or b.is_bubble:
            raise OperandMismatchError(
                f"{self.name}: {ref} frame {frame} is missing an operand, got ({a}, {b})"
            )
        expected = self._expected(ref, frame)
        if (a.tag, b.tag) != expected:
            raise OperandMismatchError(
                f"{self.name}: {ref} frame {frame} expects {expected}, "
                f"got ({a.tag}, {b.tag})"
            )
        return True

    def step(self, cycle: int, tokens: List[Token]) -> List[Token]:
        top, bottom = tokens[0], tokens[1]
        sync = tokens[2] if self.sync else None
        if self.origin is None:
            self._lock(cycle, top, bottom, sync)
        if self.origin is None:
            for record in self.firings.values():
                record.append(None)
            return [BUBBLE, BUBBLE]

        elapsed = cycle - self.origin
        slot = elapsed % self.folding_factor
        last = len(self._slots) - 1
        outputs = [BUBBLE, BUBBLE]
        produced: Dict[int, Token] = {}
        for stage, (unit, table) in enumerate(zip(self.firings, self._slots)):
            entry = table[slot]
            frame = None if entry is None else (elapsed - entry[1]) // self.folding_factor
            if entry is None or frame < 0:
                if stage == 0 and not (top.is_bubble and bottom.is_bubble):
                    raise OperandMismatchError(
                        f"{self.name}: samples ({top}, {bottom}) arrived in idle slot {slot}"
                    )
                self.firings[unit].append(None)
                continue
            ref = entry[0]
            if stage == 0:
                a, b = top, bottom
            else:
                a, b = (self._operand(ref, port, slot, produced) for port in (0, 1))
            fired = self._checked(ref, frame, a, b)
            self.firings[unit].append(fired)
            if not fired:
                continue

            twiddle = self._twiddles[stage].factor(slot)
            results = Butterfly2.compute(a, b, twiddle)
            op = self.graph.op(ref.stage, ref.index)
            for port, token in enumerate(results):
                position = op.position + port * op.span
                if stage == last:
                    bin_index = bit_reverse(position, self.graph.stages)
                    outputs[port] = Token(token.value, Tag(ref.channel, frame, bin_index))
                else:
                    produced[self._edge_from[(ref, port)]] = Token(
                        token.value, Tag(ref.channel, frame, position)
                    )

        following = (slot + 1) % self.folding_factor
        self._file = [
            self._file[source.register]
            if source.register is not None
            else produced.get(source.edge, BUBBLE)
            for source in self.allocation.loads[following]
        ] + [BUBBLE] * (self.allocation.registers - len(self.allocation.loads[following]))
        return outputs

    def describe(self) -> str:
        return (
            f"FoldedCore(N={self.graph.size}, N_f={self.folding_factor}, "
            f"units={len(self.unit_names)})"
        )
