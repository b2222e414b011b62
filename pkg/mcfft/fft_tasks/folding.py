import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .dfg import DataFlowGraph, is_power_of_two, stage_letter
from .status import (
    ChannelCountError,
    CoverageError,
    DiagnosticType,
    NegativeDelayError,
    PatternMismatchError,
    ScheduleDiagnostic,
    ScheduleReport,
    SizeError,
)

logger = logging.getLogger(__name__)

NULL_TOKEN = "-"
OP_TOKEN = re.compile(r"^([A-Z])('*)(\d+)$")


@dataclass(frozen=True, order=True)
class OpRef:
    """Reference to one butterfly of one channel; channel c > 0 prints with c primes (A'3)."""

    stage: int
    index: int
    channel: int = 0

    def __str__(self) -> str:
        primes = "'" * self.channel
        return f"{stage_letter(self.stage)}{primes}{self.index}"

    @staticmethod
    def parse(token: str) -> "OpRef":
        match = OP_TOKEN.match(token)
        if not match:
            raise PatternMismatchError(f"Not an op reference: {token!r}")
        letter, primes, index = match.groups()
        return OpRef(ord(letter) - ord("A"), int(index), len(primes))


@dataclass(frozen=True)
class FoldingSet:
    """Slot list of one hardware unit; None marks a null (idle) slot."""

    unit_name: str
    slots: Tuple[Optional[OpRef], ...]

    @property
    def folding_factor(self) -> int:
        return len(self.slots)

    @property
    def null_count(self) -> int:
        return sum(1 for ref in self.slots if ref is None)

    @property
    def utilization(self) -> float:
        return 1.0 - self.null_count / self.folding_factor

    def ops(self) -> List[Tuple[int, OpRef]]:
        return [(slot, ref) for slot, ref in enumerate(self.slots) if ref is not None]

    def __str__(self) -> str:
        tokens = [NULL_TOKEN if ref is None else str(ref) for ref in self.slots]
        return f"{self.unit_name}: {' '.join(tokens)}"


def _stage_set(stage: int, slots: Sequence[Optional[OpRef]]) -> FoldingSet:
    return FoldingSet(stage_letter(stage), tuple(slots))


def _from_indices(stage: int, indices: Sequence[int]) -> FoldingSet:
    return _stage_set(stage, [OpRef(stage, i) for i in indices])


def base_folding_sets_16() -> List[FoldingSet]:
    """Single-channel folding sets of the 16-point base architecture (N_f = 8)."""
    return [
        _from_indices(0, [0, 2, 4, 6, 1, 3, 5, 7]),
        _from_indices(1, [5, 7, 0, 2, 4, 6, 1, 3]),
        _from_indices(2, [3, 5, 7, 0, 2, 4, 6, 1]),
        _from_indices(3, [2, 4, 6, 1, 3, 5, 7, 0]),
    ]


def _check_size(size: int):
    if size < 4 or not is_power_of_two(size):
        raise SizeError(f"FFT size must be a power of two >= 4, got {size}")


def _rotate_right(value: int, bits: int) -> int:
    if bits == 0:
        return value
    return (value >> 1) | ((value & 1) << (bits - 1))


def generated_folding_sets(size: int) -> List[FoldingSet]:
    """Even-indices-then-odd folding sets with a per-stage rotation, for any size.

    Op l of stage s sits in slot rotr(l) + o_s (mod N/2). The first stage has o = 0,
    inner stages accumulate (N/2) >> (r + 1) for r = 1..s and the last stage uses N/2 - 1.
    For N = 16 this is exactly base_folding_sets_16().
    """
    _check_size(size)
    half = size // 2
    bits = half.bit_length() - 1
    stages = size.bit_length() - 1
    sets = []
    offset = 0
    for stage in range(stages):
        if stage == stages - 1 and stage > 0:
            offset = half - 1
        elif stage > 0:
            offset += half >> (stage + 1)
        slots: List[Optional[OpRef]] = [None] * half
        for index in range(half):
            slots[(_rotate_right(index, bits) + offset) % half] = OpRef(stage, index)
        sets.append(_stage_set(stage, slots))
    return sets


def ordered_folding_sets(size: int) -> List[FoldingSet]:
    """Index-ordered folding sets; stage s >= 1 starts at op N >> (s + 1).

    Interleaved by 2 and filled, the 16-point instance gives the simple ordering scheme
    used by architecture 2.
    """
    _check_size(size)
    half = size // 2
    sets = []
    for stage in range(size.bit_length() - 1):
        rotation = 0 if stage == 0 else size >> (stage + 1)
        sets.append(_from_indices(stage, [(i + rotation) % half for i in range(half)]))
    return sets


def r2mdc_folding_sets(size: int) -> List[FoldingSet]:
    """Radix-2 multipath delay commutator schedule: N_f = N, each stage busy for N/2 slots.

    Stage s starts at slot sum(N >> (r + 1) for r = 1..s).
    """
    _check_size(size)
    sets = []
    start = 0
    for stage in range(size.bit_length() - 1):
        if stage > 0:
            start += size >> (stage + 1)
        slots: List[Optional[OpRef]] = [None] * size
        for index in range(size // 2):
            slots[start + index] = OpRef(stage, index)
        sets.append(_stage_set(stage, slots))
    return sets


def r2mdc_folding_sets_16() -> List[FoldingSet]:
    return r2mdc_folding_sets(16)


def _check_channels(channels: int):
    if channels < 1 or not is_power_of_two(channels):
        raise ChannelCountError(f"Channel count must be a power of two, got {channels}")


def interleave_nulls(fs: FoldingSet, channels: int) -> FoldingSet:
    """Spread the slots of `fs` M apart; slot i moves to M*i and the rest become null."""
    _check_channels(channels)
    if channels == 1:
        return fs
    slots: List[Optional[OpRef]] = [None] * (fs.folding_factor * channels)
    for slot, ref in enumerate(fs.slots):
        slots[slot * channels] = ref
    return FoldingSet(fs.unit_name, tuple(slots))


def fill_channels(fs: FoldingSet, channels: int) -> FoldingSet:
    """Replace the null slots of `fs` with the ops of channels 1..M-1.

    Two null patterns are accepted. A strided pattern (every op on a multiple of M, as
    interleave_nulls leaves it) puts channel c at slot i + c. A block pattern (the idle half
    of an R2MDC stage) puts channel c at (i + c * N_f / M) mod N_f, wrapping around.

    Raises:
        PatternMismatchError if the nulls do not form one of those patterns
    """
    _check_channels(channels)
    if channels == 1:
        return fs

    factor = fs.folding_factor
    ops = fs.ops()
    if factor % channels or fs.null_count != factor * (channels - 1) // channels:
        raise PatternMismatchError(
            f"Unit {fs.unit_name} has {fs.null_count} null slots of {factor}, "
            f"expected {factor * (channels - 1) // channels} for {channels} channels"
        )
    if any(ref.channel != 0 for _, ref in ops):
        raise PatternMismatchError(f"Unit {fs.unit_name} already holds other channels")

    strided = all(slot % channels == 0 for slot, _ in ops)
    shift = 1 if strided else factor // channels
    slots = list(fs.slots)
    for slot, ref in ops:
        for channel in range(1, channels):
            target = (slot + channel * shift) % factor
            if slots[target] is not None:
                raise PatternMismatchError(
                    f"Slot {target} of unit {fs.unit_name} is taken by {slots[target]}, "
                    f"cannot place {replace(ref, channel=channel)}"
                )
            slots[target] = replace(ref, channel=channel)
    return FoldingSet(fs.unit_name, tuple(slots))


def interleaved_folding_sets(sets: Iterable[FoldingSet], channels: int) -> List[FoldingSet]:
    """interleave_nulls followed by fill_channels on every unit."""
    return [fill_channels(interleave_nulls(fs, channels), channels) for fs in sets]


def filled_folding_sets(sets: Iterable[FoldingSet], channels: int) -> List[FoldingSet]:
    return [fill_channels(fs, channels) for fs in sets]


def format_folding_sets(sets: Iterable[FoldingSet]) -> str:
    return "".join(f"{fs}\n" for fs in sets)


def parse_folding_sets(text: str) -> List[FoldingSet]:
    """Parse the `UNIT: slot0 slot1 ...` format written by format_folding_sets."""
    sets = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, body = line.partition(":")
        if not sep or not name.strip():
            raise PatternMismatchError(f"Line {number}: expected 'UNIT: slots', got {line!r}")
        slots = [
            None if token == NULL_TOKEN else OpRef.parse(token) for token in body.split()
        ]
        sets.append(FoldingSet(name.strip(), tuple(slots)))
    return sets


@dataclass(frozen=True)
class FoldedEdge:
    producer: OpRef
    producer_port: int
    consumer: OpRef
    consumer_port: int
    delay: int

    def __str__(self) -> str:
        return f"{self.producer} -> {self.consumer} (D_F={self.delay})"


@dataclass
class FoldedSchedule:
    """A folded DFG: absolute firing time of every op instance and the delay of every edge.

    Frame f of an op with time T fires at T + f * folding_factor.
    """

    size: int
    folding_factor: int
    sets: Tuple[FoldingSet, ...]
    times: Dict[OpRef, int]
    edges: Tuple[FoldedEdge, ...]
    channels: int
    pipeline_depth: int = 0

    @property
    def stages(self) -> int:
        return len(self.sets)

    def delay(self, producer: OpRef, consumer: OpRef) -> int:
        for edge in self.edges:
            if edge.producer == producer and edge.consumer == consumer:
                return edge.delay
        raise KeyError(f"No edge {producer} -> {consumer}")

    def slot_of(self, ref: OpRef) -> int:
        return self.times[ref] % self.folding_factor

    def stage_times(self, stage: int, channel: Optional[int] = None) -> List[Tuple[int, OpRef]]:
        """(time, op) pairs of one stage in firing order."""
        return sorted(
            (t, ref)
            for ref, t in self.times.items()
            if ref.stage == stage and (channel is None or ref.channel == channel)
        )


def _unit_count_diagnostic(graph: DataFlowGraph, sets: Sequence[FoldingSet]):
    if len(sets) != graph.stages:
        return ScheduleDiagnostic(
            DiagnosticType.MISPLACED,
            f"expected {graph.stages} units, got {len(sets)}",
        )
    return None


def _coverage(graph: DataFlowGraph, sets: Sequence[FoldingSet]) -> List[ScheduleDiagnostic]:
    diagnostics = []
    factors = sorted({fs.folding_factor for fs in sets})
    if len(factors) > 1:
        diagnostics.append(
            ScheduleDiagnostic(
                DiagnosticType.FACTOR_MISMATCH,
                ", ".join(f"{fs.unit_name}={fs.folding_factor}" for fs in sets),
            )
        )
    unit_count = _unit_count_diagnostic(graph, sets)
    if unit_count:
        diagnostics.append(unit_count)

    seen: Dict[OpRef, str] = {}
    for unit_stage, fs in enumerate(sets):
        for slot, ref in fs.ops():
            where = f"{fs.unit_name}[{slot}]"
            if not (0 <= ref.stage < graph.stages and 0 <= ref.index < graph.ops_per_stage):
                diagnostics.append(
                    ScheduleDiagnostic(
                        DiagnosticType.MISPLACED,
                        f"{where} is not an op of the {graph.size}-point graph",
                        str(ref),
                    )
                )
                continue
            if ref in seen:
                diagnostics.append(
                    ScheduleDiagnostic(
                        DiagnosticType.DUPLICATE, f"{seen[ref]} and {where}", str(ref)
                    )
                )
                continue
            seen[ref] = where
            if ref.stage != unit_stage:
                diagnostics.append(
                    ScheduleDiagnostic(
                        DiagnosticType.MISPLACED, f"found at {where}", str(ref)
                    )
                )

    channels = max((ref.channel for ref in seen), default=0) + 1
    for channel in range(channels):
        for op in graph.ops:
            ref = OpRef(op.stage, op.index, channel)
            if ref not in seen:
                diagnostics.append(
                    ScheduleDiagnostic(DiagnosticType.MISSING, "not scheduled", str(ref))
                )
    return diagnostics


def _channel_count(sets: Sequence[FoldingSet]) -> int:
    return max((ref.channel for fs in sets for _, ref in fs.ops()), default=0) + 1


def _resolve_times(
    graph: DataFlowGraph,
    sets: Sequence[FoldingSet],
    iterations: Optional[Mapping[OpRef, int]],
    pipeline_depth: int,
) -> Dict[OpRef, int]:
    factor = sets[0].folding_factor
    channels = _channel_count(sets)
    slots = {ref: slot for fs in sets for slot, ref in fs.ops()}
    times: Dict[OpRef, int] = {}
    for op in graph.ops:
        for channel in range(channels):
            ref = OpRef(op.stage, op.index, channel)
            slot = slots[ref]
            if iterations is not None:
                times[ref] = slot + factor * iterations.get(ref, 0)
                continue
            ready = max(
                (
                    times[OpRef(*edge.producer, channel)] + pipeline_depth
                    for edge in graph.predecessors(op.stage, op.index)
                ),
                default=0,
            )
            # Earliest iteration of this slot that sees every operand
            iteration = max(0, -((slot - ready) // factor))
            times[ref] = slot + factor * iteration
    return times


def _folded_edges(
    graph: DataFlowGraph, times: Mapping[OpRef, int], channels: int, pipeline_depth: int
) -> List[FoldedEdge]:
    edges = []
    for channel in range(channels):
        for edge in graph.edges:
            producer = OpRef(*edge.producer, channel)
            consumer = OpRef(*edge.consumer, channel)
            edges.append(
                FoldedEdge(
                    producer,
                    edge.producer_port,
                    consumer,
                    edge.consumer_port,
                    times[consumer] - times[producer] - pipeline_depth,
                )
            )
    return edges


def validate_schedule(
    graph: DataFlowGraph,
    sets: Sequence[FoldingSet],
    iterations: Optional[Mapping[OpRef, int]] = None,
    pipeline_depth: int = 0,
) -> ScheduleReport:
    """Check a folding-set collection against a graph without raising.

    Coverage (duplicates, missing or misplaced ops, mismatched folding factors) is always
    checked. Negative folded delays can only arise when `iterations` pins the iteration
    index of each op; otherwise every op is placed as soon as its operands exist.
    """
    diagnostics = _coverage(graph, sets)
    if not diagnostics:
        times = _resolve_times(graph, sets, iterations, pipeline_depth)
        for edge in _folded_edges(graph, times, _channel_count(sets), pipeline_depth):
            if edge.delay < 0:
                diagnostics.append(
                    ScheduleDiagnostic(
                        DiagnosticType.NEGATIVE_DELAY, str(edge), str(edge.consumer)
                    )
                )
    return ScheduleReport(diagnostics)


def fold(
    graph: DataFlowGraph,
    sets: Sequence[FoldingSet],
    iterations: Optional[Mapping[OpRef, int]] = None,
    pipeline_depth: int = 0,
) -> FoldedSchedule:
    """Fold the graph onto one hardware unit per stage.

    Each op instance fires at slot + N_f * k. Without `iterations`, k is the smallest
    non-negative value that lets the op see all of its operands; with `iterations`, k is
    taken from the mapping (0 when absent). Edge delays are D_F = T_v - T_u - P.

    Raises:
        CoverageError if the sets are not a complete, duplicate-free schedule
        NegativeDelayError naming the first edge whose folded delay is negative
    """
    diagnostics = _coverage(graph, sets)
    if diagnostics:
        raise CoverageError(diagnostics)

    channels = _channel_count(sets)
    times = _resolve_times(graph, sets, iterations, pipeline_depth)
    edges = _folded_edges(graph, times, channels, pipeline_depth)
    for edge in edges:
        if edge.delay < 0:
            raise NegativeDelayError(edge, edge.delay)

    logger.debug(
        "Folded %d-point graph onto %d units, N_f=%d, %d channel(s)",
        graph.size,
        len(sets),
        sets[0].folding_factor,
        channels,
    )
    return FoldedSchedule(
        size=graph.size,
        folding_factor=sets[0].folding_factor,
        sets=tuple(sets),
        times=times,
        edges=tuple(edges),
        channels=channels,
        pipeline_depth=pipeline_depth,
    )


def slot_delays(graph: DataFlowGraph, sets: Sequence[FoldingSet]) -> List[FoldedEdge]:
    """Folded delays with every op in iteration 0, i.e. D_F = v - u on slot indices.

    Negative entries are edges the folding sets cannot realize without moving the consumer
    to a later iteration, which `fold` does.

    Raises:
        CoverageError if the sets are not a complete, duplicate-free schedule
    """
    diagnostics = _coverage(graph, sets)
    if diagnostics:
        raise CoverageError(diagnostics)
    times = _resolve_times(graph, sets, {}, 0)
    return _folded_edges(graph, times, _channel_count(sets), 0)


@dataclass(frozen=True)
class LifetimeReport:
    """Register need of a folded schedule.

    fft: most values alive in any cycle of the steady state
    unshared: sum of all edge delays (one private register chain per edge)
    live_profile: live values per slot of the folding period
    """

    fft: int
    unshared: int
    live_profile: Tuple[int, ...]


def lifetime_profile(intervals: Iterable[Tuple[int, int]], period: int) -> List[int]:
    """Live count per phase of a periodic schedule.

    Every interval (start, end) repeats each `period` cycles and occupies the cycles
    start+1..end, so a value consumed in the cycle it is produced holds no register.
    """
    live = [0] * period
    for start, end in intervals:
        for phase in range(period):
            live[phase] += (end - phase) // period - (start - phase) // period
    return live


def minimize_registers(schedule: FoldedSchedule) -> LifetimeReport:
    intervals = [
        (
            schedule.times[edge.producer] + schedule.pipeline_depth,
            schedule.times[edge.consumer],
        )
        for edge in schedule.edges
    ]
    live = lifetime_profile(intervals, schedule.folding_factor)
    return LifetimeReport(
        fft=max(live, default=0),
        unshared=sum(edge.delay for edge in schedule.edges),
        live_profile=tuple(live),
    )


class Section(Enum):
    """Register report columns."""

    PRE_PROCESSING = "pre-processing"
    FFT = "FFT"
    POST_PROCESSING = "post-processing"
    REORDERING = "reordering"


@dataclass(frozen=True)
class LineItem:
    section: Section
    label: str
    registers: int
    instantiated: bool = True


@dataclass
class RegisterReport:
    """Register counts per section, itemized so every count can be traced to a block."""

    items: List[LineItem] = field(default_factory=list)

    def add(self, section: Section, label: str, registers: int, instantiated: bool = True):
        self.items.append(LineItem(section, label, registers, instantiated))

    def section_total(self, section: Section) -> int:
        return sum(item.registers for item in self.items if item.section == section)

    def section_items(self, section: Section) -> List[LineItem]:
        return [item for item in self.items if item.section == section]

    @property
    def pre_processing(self) -> int:
        return self.section_total(Section.PRE_PROCESSING)

    @property
    def fft(self) -> int:
        return self.section_total(Section.FFT)

    @property
    def post_processing(self) -> int:
        return self.section_total(Section.POST_PROCESSING)

    @property
    def reordering(self) -> int:
        return self.section_total(Section.REORDERING)

    @property
    def total(self) -> int:
        return sum(item.registers for item in self.items)

    @property
    def instantiated_total(self) -> int:
        return sum(item.registers for item in self.items if item.instantiated)

    def as_row(self) -> Tuple[int, int, int, int, int]:
        return (
            self.pre_processing,
            self.fft,
            self.post_processing,
            self.reordering,
            self.total,
        )
