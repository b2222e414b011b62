import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..config.settings import (
    INTERLEAVER_CHANNELS,
    OBSERVATION_FRAMES,
    STEADY_FRAME,
    SUPPORTED_POINTS,
    TOLERANCE,
)
from .core import FoldedCore
from .dfg import DataFlowGraph, build_dif_dfg, is_power_of_two
from .folding import (
    FoldedSchedule,
    RegisterReport,
    Section,
    filled_folding_sets,
    fold,
    generated_folding_sets,
    interleaved_folding_sets,
    ordered_folding_sets,
    r2mdc_folding_sets,
)
from .netlist import (
    BUBBLE,
    Circuit,
    Delay,
    FrameStrobe,
    Tag,
    Token,
    Trace,
    build_dsd,
    reverse_pipeline,
    simulate,
)
from .oracle import (
    PermutationSpec,
    bit_reverse,
    check_permutation,
    half_size_bit_reverse_perm,
    measure,
    spectral_error,
)
from .reorder import (
    BitRevBuffer,
    ReorderBuffer,
    ReorderPlan,
    bit_permutation,
    build_bit_reorder,
    min_latency_departures,
    natural_order_departures,
    plan_reorder,
)
from .status import (
    ChannelCountError,
    CheckOutcome,
    CheckResult,
    McfftError,
    PatternMismatchError,
    SizeError,
    UnsupportedConfigurationError,
)

logger = logging.getLogger(__name__)


class ArchitectureVariant(Enum):
    ARCH1 = 1  # base 2-parallel core, multi-channel DSD interleaver, REOC reordering
    ARCH2 = 2  # simple ordering scheme, REOC pre-processing, bit-reversal reordering
    ARCH3 = 3  # R2MDC core, (N/2)-DSD pre/post, half-size bit reversal

    @property
    def label(self) -> str:
        return f"Architecture {self.value}"


# (pre, fft, post, reorder) at N = 16, M = 2
REFERENCE_REGISTERS = {
    ArchitectureVariant.ARCH1: (17, 28, 2, 14),
    ArchitectureVariant.ARCH2: (18, 28, 2, 18),
    ArchitectureVariant.ARCH3: (16, 14, 16, 6),
}

REORDER_LABELS = {
    ArchitectureVariant.ARCH1: "REOC",
    ArchitectureVariant.ARCH2: "bit-reversal buffer",
    ArchitectureVariant.ARCH3: "half-size bit-reversal REOC",
}

# Channel counts each architecture has a complete datapath for
DATAPATH_CHANNELS = {
    ArchitectureVariant.ARCH1: INTERLEAVER_CHANNELS,
    ArchitectureVariant.ARCH2: (2,),
    ArchitectureVariant.ARCH3: (2,),
}


def input_lanes(channels: int) -> List[str]:
    return [f"ch{c}" for c in range(channels)]


def has_datapath(variant: ArchitectureVariant, channels: int) -> bool:
    return channels in DATAPATH_CHANNELS[variant]


@dataclass(frozen=True)
class ArchitectureSpec:
    variant: ArchitectureVariant
    size: int = 16
    channels: int = 2
    natural_order: bool = False

    @property
    def stride(self) -> int:
        """Cycles between two samples of one channel: the core takes 2 samples per cycle."""
        return self.channels // 2


@dataclass
class BuiltArchitecture:
    """A complete multi-channel FFT circuit with its register report.

    output_channels maps each output lane to the channel it serializes; raw_order holds the
    bin order each channel leaves the post-processing in (before any reordering).
    interleaver is the standalone DSD interleaver embedded at the front, and
    interleaver_lanes its outputs inside `circuit`.
    """

    spec: ArchitectureSpec
    circuit: Circuit
    report: RegisterReport
    graph: DataFlowGraph
    schedule: FoldedSchedule
    core: FoldedCore
    pre_lanes: List[str]
    post_lanes: List[str]
    output_lanes: List[str]
    output_channels: Dict[str, int]
    raw_order: Dict[int, List[int]]
    pre_latency: int
    latency: int
    interleaver: Optional[Circuit] = None
    interleaver_lanes: List[str] = field(default_factory=list)
    throughput: float = 2.0
    notes: List[str] = field(default_factory=list)

    @property
    def input_lanes(self) -> List[str]:
        return list(self.circuit.inputs)

    @property
    def stride(self) -> int:
        return self.spec.stride

    @property
    def output_order(self) -> Dict[int, List[int]]:
        if self.spec.natural_order:
            return {c: list(range(self.spec.size)) for c in self.raw_order}
        return self.raw_order


def _spaced(tokens: List[Token], stride: int) -> List[Token]:
    if stride == 1:
        return tokens
    spaced = [BUBBLE] * (len(tokens) * stride)
    spaced[::stride] = tokens
    return spaced


def tag_streams(
    size: int,
    frames: int,
    channels: Sequence[int],
    lanes: Optional[Sequence[str]] = None,
    stride: int = 1,
) -> Dict[str, List[Token]]:
    """Value-free token streams: channel c sample n of frame f enters lane c at (f*N + n) * stride."""
    return {
        (lanes[c] if lanes else f"ch{c}"): _spaced(
            [Token(0j, Tag(c, f, n)) for f in range(frames) for n in range(size)], stride
        )
        for c in channels
    }


def channel_streams(
    data: Mapping[int, np.ndarray], lanes: Optional[Sequence[str]] = None, stride: int = 1
) -> Dict[str, List[Token]]:
    """Serial natural-order streams from frames shaped (frames, N) per channel."""
    streams = {}
    for channel, frames in data.items():
        streams[lanes[channel] if lanes else f"ch{channel}"] = _spaced(
            [
                Token(complex(value), Tag(channel, f, n))
                for f, frame in enumerate(frames)
                for n, value in enumerate(frame)
            ],
            stride,
        )
    return streams


def random_frames(
    size: int, frames: int, channels: Sequence[int], seed: int
) -> Dict[int, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {
        c: rng.standard_normal((frames, size)) + 1j * rng.standard_normal((frames, size))
        for c in channels
    }


def _observe(circuit: Circuit, probes: Sequence[str], spec: ArchitectureSpec, period: int) -> Trace:
    cycles = (OBSERVATION_FRAMES + 6) * period
    return simulate(
        circuit,
        tag_streams(spec.size, OBSERVATION_FRAMES, range(spec.channels), stride=spec.stride),
        cycles,
        probes=list(circuit.inputs) + list(probes),
    )


def _steady_arrivals(
    trace: Trace, lanes: Sequence[str], spec: ArchitectureSpec, period: int
) -> Dict[Tuple[int, int], Tuple[str, int]]:
    """(channel, index) -> (lane, cycle) of the steady frame, shifted back to frame 0."""
    arrivals: Dict[Tuple[int, int], Tuple[str, int]] = {}
    for lane in lanes:
        for cycle, token in enumerate(trace.tokens(lane)):
            if token.is_bubble or token.tag.frame != STEADY_FRAME or token.tag.channel < 0:
                continue
            key = (token.tag.channel, token.tag.index)
            if key in arrivals:
                raise PatternMismatchError(f"Token {key} seen twice on lanes {list(lanes)}")
            arrivals[key] = (lane, cycle - STEADY_FRAME * period)
    expected = spec.size * spec.channels
    if len(arrivals) != expected:
        raise PatternMismatchError(
            f"Observed {len(arrivals)} tokens of frame {STEADY_FRAME} on {list(lanes)}, "
            f"expected {expected}"
        )
    return arrivals


def core_operand_order(
    graph: DataFlowGraph, schedule: FoldedSchedule, top: str, bottom: str
) -> Dict[Tuple[int, int], Tuple[str, int]]:
    """(channel, sample index) -> (lane, frame-0 time) the first core stage consumes it at."""
    order = {}
    for ref, time in schedule.times.items():
        if ref.stage != 0:
            continue
        op = graph.op(0, ref.index)
        order[(ref.channel, op.position)] = (top, time)
        order[(ref.channel, op.position + op.span)] = (bottom, time)
    return order


def core_schedule(variant: ArchitectureVariant, size: int, channels: int) -> FoldedSchedule:
    """Fold the DIF graph with the interleaved folding sets of one architecture."""
    graph = build_dif_dfg(size)
    match variant:
        case ArchitectureVariant.ARCH1:
            sets = interleaved_folding_sets(generated_folding_sets(size), channels)
        case ArchitectureVariant.ARCH2:
            sets = interleaved_folding_sets(ordered_folding_sets(size), channels)
        case ArchitectureVariant.ARCH3:
            if channels > 2:
                raise UnsupportedConfigurationError(
                    f"The R2MDC core has idle slots for 2 channels, not {channels}"
                )
            sets = filled_folding_sets(r2mdc_folding_sets(size), channels)
    return fold(graph, sets)


def interleaver_stage_values(
    channels: int, variant: ArchitectureVariant, size: int
) -> List[int]:
    """DSD lengths of each interleaver stage: M/2, M/4, ..., 1 or N/2, N/4, ... for R2MDC."""
    if channels not in INTERLEAVER_CHANNELS:
        raise ChannelCountError(
            f"The interleaver supports {INTERLEAVER_CHANNELS} channels, got {channels}"
        )
    stages = channels.bit_length() - 1
    if variant == ArchitectureVariant.ARCH3:
        if size >> stages < 1 or not is_power_of_two(size):
            raise SizeError(f"{channels} channels cannot be interleaved over {size} points")
        return [size >> (s + 1) for s in range(stages)]
    return [channels >> (s + 1) for s in range(stages)]


def build_interleaver(
    channels: int, variant: ArchitectureVariant, size: int = 16, origin: int = 0
) -> Circuit:
    """Multi-channel pre-processing: log2(M) stages of DSDs.

    Stage s pairs lanes 2^s apart with a DSD of the stage value; the lower lane goes to
    the DSD's lane 1. Every switch counts its phases from cycle `origin`. Input lanes are
    ch0..ch{M-1}; outputs are listed lane by lane.
    """
    values = interleaver_stage_values(channels, variant, size)
    circuit = Circuit(f"interleaver-{channels}", input_lanes(channels))
    lanes = list(circuit.inputs)
    for stage, k in enumerate(values):
        distance = 1 << stage
        for low in range(channels):
            if low & distance:
                continue
            high = low + distance
            outs = circuit.embed(
                build_dsd(k, origin=origin),
                {"in0": lanes[high], "in1": lanes[low]},
                f"s{stage}.{low}-{high}",
            )
            lanes[low], lanes[high] = outs["out0"], outs["out1"]
    circuit.set_outputs(lanes)
    return circuit


@dataclass(frozen=True)
class InterleaverMeasurement:
    channels: int
    size: int
    memory: int
    latency: int

    @property
    def formula_memory(self) -> int:
        return (self.channels - 1) * self.size

    @property
    def formula_latency(self) -> int:
        return (self.channels - 1) * self.size // self.channels


def measure_interleaver(
    channels: int, variant: ArchitectureVariant = ArchitectureVariant.ARCH3, size: int = 16
) -> InterleaverMeasurement:
    """Register census and simulated latency of the generalized interleaver."""
    circuit = build_interleaver(channels, variant, size)
    streams = tag_streams(size, 3, range(channels), circuit.inputs)
    trace = simulate(circuit, streams, 6 * size)
    first_out = trace.first_token_cycle(circuit.outputs)
    if first_out is None:
        raise McfftError(f"Interleaver for {channels} channels produced no samples")
    return InterleaverMeasurement(channels, size, circuit.registers, first_out)


def _check_build(variant: ArchitectureVariant, size: int, channels: int):
    if channels < 2 or not is_power_of_two(channels):
        raise ChannelCountError(f"Channel count must be a power of two >= 2, got {channels}")
    if not has_datapath(variant, channels):
        raise UnsupportedConfigurationError(
            f"{variant.label} has a complete datapath for {DATAPATH_CHANNELS[variant]} "
            f"channels; use build_interleaver for {channels}"
        )
    if size not in SUPPORTED_POINTS:
        raise UnsupportedConfigurationError(
            f"No validated folding sets for {size} points; supported: {SUPPORTED_POINTS}"
        )


class _Builder:
    """Shared assembly steps: interleaver, core, channel separation, optional reordering."""

    def __init__(self, spec: ArchitectureSpec, log_manager=None):
        self.spec = spec
        self.log_manager = log_manager
        self.graph = build_dif_dfg(spec.size)
        self.schedule = core_schedule(spec.variant, spec.size, spec.channels)
        self.period = self.schedule.folding_factor
        if self.period != spec.size * spec.stride:
            raise UnsupportedConfigurationError(
                f"Folding period {self.period} does not match {spec.channels} channels "
                f"of {spec.size}-sample frames"
            )
        self.circuit = Circuit(
            f"arch{spec.variant.value}-{spec.size}", input_lanes(spec.channels), log_manager
        )
        self.report = RegisterReport()
        self.notes: List[str] = []
        self.interleaver: Optional[Circuit] = None
        self.interleaver_lanes: List[str] = []

    def log(self, message: str):
        if self.log_manager:
            self.log_manager.info(message)
        logger.info(message)

    def debug(self, message: str, *args):
        if self.log_manager:
            self.log_manager.debug(message, *args)
        logger.debug(message, *args)

    def add_interleaver(self, interleaver: Circuit, label: str) -> List[str]:
        """Embed the DSD interleaver on the input lanes and return its output lanes."""
        outs = self.circuit.embed(
            interleaver, {lane: lane for lane in interleaver.inputs}, "pre.dsd"
        )
        self.interleaver = interleaver
        self.interleaver_lanes = [outs[lane] for lane in interleaver.outputs]
        self.report.add(Section.PRE_PROCESSING, label, interleaver.registers)
        return self.interleaver_lanes

    def staging_plan(
        self, circuit: Circuit, arrival_lanes: Sequence[str]
    ) -> Tuple[ReorderPlan, int]:
        """Plan the reordering of `arrival_lanes` into the core's first-stage operand order."""
        trace = _observe(circuit, arrival_lanes, self.spec, self.period)
        arrival = _steady_arrivals(trace, arrival_lanes, self.spec, self.period)
        order = core_operand_order(self.graph, self.schedule, "pre.top", "pre.bot")
        departure, latency = min_latency_departures(arrival, order)
        return plan_reorder(arrival, departure, self.period), latency

    def interleaving_buffer(self, arrival_lanes: Sequence[str], label: str, name: str):
        plan, latency = self.staging_plan(self.circuit, arrival_lanes)
        self.circuit.add(ReorderBuffer(name, plan, label))
        return plan, latency

    def best_interleaver_origin(self) -> int:
        """Switch origin of the interleaver that leaves the smallest staging buffer."""
        costs = {}
        for origin in range(self.spec.channels):
            interleaver = build_interleaver(
                self.spec.channels, self.spec.variant, self.spec.size, origin
            )
            trial = Circuit("origin-trial", interleaver.inputs)
            outs = trial.embed(interleaver, {lane: lane for lane in interleaver.inputs}, "dsd")
            lanes = [outs[lane] for lane in interleaver.outputs]
            trial.set_outputs(lanes)
            plan, _ = self.staging_plan(trial, lanes)
            costs[origin] = plan.registers
            self.debug("Interleaver switch origin %d: %d staging registers", origin, plan.registers)
        return min(costs, key=costs.get)

    def add_core(self, top: str, bottom: str, sync: Optional[str] = None) -> FoldedCore:
        core = FoldedCore("fft", self.graph, self.schedule, (top, bottom), ("fft.top", "fft.bot"), sync)
        self.circuit.add(core)
        self.report.add(Section.FFT, "folded core, lifetime-shared registers", core.registers)
        return core

    def _post_phases(self, k: int) -> List[int]:
        """Cycles (mod 2k) at which channel 0 results leave the core."""
        trace = _observe(self.circuit, ["fft.top"], self.spec, self.period)
        phases = sorted(
            {
                cycle % (2 * k)
                for cycle, token in enumerate(trace.tokens("fft.top"))
                if not token.is_bubble and token.tag.channel == 0
            }
        )
        if len(phases) != k:
            raise PatternMismatchError(
                f"Channel 0 leaves the core on phases {phases}, not a {k}-cycle block"
            )
        return phases

    def separate_with_dsd(self, k: int) -> List[str]:
        dsd = build_dsd(k, self._post_phases(k))
        outs = self.circuit.embed(dsd, {"in0": "fft.bot", "in1": "fft.top"}, "post")
        self.report.add(Section.POST_PROCESSING, f"{k}-DSD channel separation", dsd.registers)
        return [outs["out0"], outs["out1"]]

    def separate_with_buffer(self) -> List[str]:
        """One lane per channel, a result every `stride` cycles in the order the core made them."""
        core_lanes = ["fft.top", "fft.bot"]
        trace = _observe(self.circuit, core_lanes, self.spec, self.period)
        arrival = _steady_arrivals(trace, core_lanes, self.spec, self.period)
        ranked = sorted(arrival.items(), key=lambda item: (item[1][1], core_lanes.index(item[1][0])))
        order: Dict[Tuple[int, int], Tuple[str, int]] = {}
        first: Dict[int, int] = {}
        count: Dict[int, int] = {}
        for key, (_, cycle) in ranked:
            channel = key[0]
            first.setdefault(channel, cycle)
            rank = count.get(channel, 0)
            order[key] = (f"post.{channel}", first[channel] + rank * self.spec.stride)
            count[channel] = rank + 1
        departure, _ = min_latency_departures(arrival, order)
        plan = plan_reorder(arrival, departure, self.period)
        self.circuit.add(ReorderBuffer("post.separate", plan, "channel separation buffer"))
        self.report.add(Section.POST_PROCESSING, "channel separation buffer", plan.registers)
        return [f"post.{c}" for c in range(self.spec.channels)]

    def _natural_order(
        self, channel: int, lane: str, arrival: Mapping, order: List[int], label: str
    ) -> Optional[str]:
        """Reorder one channel to natural order; returns its output lane when instantiated.

        A dense, frame-aligned stream whose order permutes position bits gets a REOC
        cascade; anything else a bit-reversal buffer sized by lifetime analysis.
        """
        cycles = sorted(cycle for _, cycle in arrival.values())
        dense = self.spec.stride == 1 and cycles == list(range(cycles[0], cycles[0] + len(cycles)))
        cascaded = dense and bit_permutation(order) is not None
        if cascaded:
            cascade, latency = build_bit_reorder(order, cycles[0] % self.period)
            registers = cascade.registers
            kind = "REOC cascade"
        else:
            departure, latency = natural_order_departures(
                arrival, {channel: f"reorder.{channel}.out"}, self.spec.stride
            )
            plan = plan_reorder(arrival, departure, self.period)
            registers = plan.registers
            kind = "bit-reversal buffer"
        self.report.add(
            Section.REORDERING,
            f"{label}, channel {channel} (latency {latency})",
            registers,
            instantiated=self.spec.natural_order,
        )
        self.debug("Channel %d reorders with a %s of %d registers", channel, kind, registers)
        if not self.spec.natural_order:
            return None
        if cascaded:
            outs = self.circuit.embed(cascade, {"in": lane}, f"reorder.{channel}")
            return outs[cascade.outputs[0]]
        buffer = BitRevBuffer(f"reorder.{channel}", plan, label)
        self.circuit.add(buffer)
        return buffer.outputs[0]

    def finish(
        self, core: FoldedCore, pre_lanes: List[str], post_k: Optional[int] = None
    ) -> BuiltArchitecture:
        """Channel separation (a post_k-DSD, or a buffer when None), then reordering."""
        spec = self.spec
        post_lanes = self.separate_with_dsd(post_k) if post_k else self.separate_with_buffer()

        trace = _observe(self.circuit, pre_lanes + post_lanes, spec, self.period)
        arrival = _steady_arrivals(trace, post_lanes, spec, self.period)
        lane_channels: Dict[str, set] = {}
        for (channel, _), (lane, _) in arrival.items():
            lane_channels.setdefault(lane, set()).add(channel)
        if any(len(channels) != 1 for channels in lane_channels.values()):
            raise PatternMismatchError(f"Post-processing lanes mix channels: {lane_channels}")
        post_channels = {lane: channels.pop() for lane, channels in lane_channels.items()}

        raw_order = {
            channel: [
                index
                for (c, index), _ in sorted(arrival.items(), key=lambda item: item[1][1])
                if c == channel
            ]
            for channel in post_channels.values()
        }

        label = REORDER_LABELS[spec.variant]
        output_channels = dict(post_channels)
        for lane, channel in sorted(post_channels.items(), key=lambda item: item[1]):
            lane_arrival = {key: where for key, where in arrival.items() if key[0] == channel}
            out_lane = self._natural_order(channel, lane, lane_arrival, raw_order[channel], label)
            if out_lane is not None:
                del output_channels[lane]
                output_channels[out_lane] = channel

        output_lanes = sorted(output_channels, key=output_channels.get)
        self.circuit.set_outputs(output_lanes)

        pre_first = trace.first_token_cycle(pre_lanes)
        final = _observe(self.circuit, output_lanes, spec, self.period)
        latency = final.first_token_cycle(output_lanes)
        if pre_first is None or latency is None:
            raise McfftError(f"{self.circuit.name} produced no samples")

        if self.report.instantiated_total != self.circuit.registers:
            raise McfftError(
                f"Register report ({self.report.instantiated_total}) does not match the "
                f"netlist census ({self.circuit.registers})"
            )
        self.log(
            f"Built {spec.variant.label}, N={spec.size}, M={spec.channels}: registers "
            f"pre={self.report.pre_processing} fft={self.report.fft} "
            f"post={self.report.post_processing} reorder={self.report.reordering}, "
            f"census {self.circuit.registers}"
        )
        return BuiltArchitecture(
            spec=spec,
            circuit=self.circuit,
            report=self.report,
            graph=self.graph,
            schedule=self.schedule,
            core=core,
            pre_lanes=pre_lanes,
            post_lanes=post_lanes,
            output_lanes=output_lanes,
            output_channels=output_channels,
            raw_order=raw_order,
            pre_latency=pre_first,
            latency=latency,
            interleaver=self.interleaver,
            interleaver_lanes=self.interleaver_lanes,
            notes=self.notes,
        )


def build_arch1(
    size: int = 16, channels: int = 2, natural_order: bool = False, log_manager=None
) -> BuiltArchitecture:
    """Base 2-parallel core behind the multi-channel DSD interleaver.

    A staging buffer turns the interleaver output into the core's operand order. The two
    pipeline registers between buffer and core are removed by reverse pipelining; the
    register on the frame-sync strobe stays, with the strobe fired a cycle early so sync
    and first operands reach the core together. Two channels separate in a 1-DSD, more
    in a channel separation buffer.
    """
    variant = ArchitectureVariant.ARCH1
    _check_build(variant, size, channels)
    builder = _Builder(ArchitectureSpec(variant, size, channels, natural_order), log_manager)
    circuit = builder.circuit

    origin = builder.best_interleaver_origin()
    builder.debug("Interleaver switch origin %d", origin)
    values = interleaver_stage_values(channels, variant, size)
    lanes = builder.add_interleaver(
        build_interleaver(channels, variant, size, origin),
        f"{'/'.join(map(str, values))}-DSD interleaver",
    )
    plan, latency = builder.interleaving_buffer(lanes, "staging buffer", "pre.stage")
    builder.report.add(Section.PRE_PROCESSING, "staging buffer to core operand order", plan.registers)
    if latency < 1:
        raise UnsupportedConfigurationError(
            f"Operands reach the core {latency} cycles after the first sample; "
            "the sync register needs at least 1"
        )

    circuit.add(Delay("pre.top.reg", 1, "pre.top", "pre.top.q"))
    circuit.add(Delay("pre.bot.reg", 1, "pre.bot", "pre.bot.q"))
    circuit.add(FrameStrobe("pre.strobe", builder.period, latency - 1, "pre.sync.d"))
    circuit.add(Delay("pre.sync.reg", 1, "pre.sync.d", "pre.sync"))
    core = builder.add_core("pre.top.q", "pre.bot.q", sync="pre.sync")

    removed = reverse_pipeline(circuit, ["pre.top.q", "pre.bot.q"])
    builder.report.add(
        Section.PRE_PROCESSING, "frame-sync register kept after reverse pipelining", 1
    )
    builder.notes.append(f"reverse pipelining removed {removed} registers before the core")
    return builder.finish(core, ["pre.top", "pre.bot"], post_k=1 if channels == 2 else None)


def build_arch2(natural_order: bool = False, log_manager=None) -> BuiltArchitecture:
    """16-point, 2-channel core on the simple ordering scheme, fed by a 1-DSD and a REOC."""
    variant = ArchitectureVariant.ARCH2
    builder = _Builder(ArchitectureSpec(variant, 16, 2, natural_order), log_manager)

    dsd_lanes = builder.add_interleaver(build_interleaver(2, variant, 16), "1-DSD interleaver")
    plan, _ = builder.interleaving_buffer(dsd_lanes, "REOC", "pre.reoc")
    builder.report.add(Section.PRE_PROCESSING, "REOC operand ordering", plan.registers)

    core = builder.add_core("pre.top", "pre.bot")
    return builder.finish(core, ["pre.top", "pre.bot"], post_k=1)


def build_arch3(
    size: int = 16, channels: int = 2, natural_order: bool = False, log_manager=None
) -> BuiltArchitecture:
    """R2MDC core whose idle half runs the second channel, with (N/2)-DSD pre/post."""
    variant = ArchitectureVariant.ARCH3
    _check_build(variant, size, channels)
    builder = _Builder(ArchitectureSpec(variant, size, channels, natural_order), log_manager)

    lanes = builder.add_interleaver(
        build_interleaver(channels, variant, size), f"{size // 2}-DSD interleaver"
    )
    # DSD lane 1 carries x[n], lane 0 carries x[n + N/2]
    top, bottom = lanes[1], lanes[0]
    core = builder.add_core(top, bottom)
    return builder.finish(core, [top, bottom], post_k=size // 2)


def build_architecture(
    variant: ArchitectureVariant,
    size: int = 16,
    channels: int = 2,
    natural_order: bool = False,
    log_manager=None,
) -> BuiltArchitecture:
    match variant:
        case ArchitectureVariant.ARCH1:
            return build_arch1(size, channels, natural_order, log_manager)
        case ArchitectureVariant.ARCH2:
            if size != 16 or channels != 2:
                raise UnsupportedConfigurationError(
                    "Architecture 2 is fixed at 16 points and 2 channels"
                )
            return build_arch2(natural_order, log_manager)
        case ArchitectureVariant.ARCH3:
            return build_arch3(size, channels, natural_order, log_manager)


@dataclass
class RunResult:
    trace: Trace
    spectra: Dict[int, np.ndarray]


def run_frames(built: BuiltArchitecture, data: Mapping[int, np.ndarray]) -> RunResult:
    """Stream frames through a built architecture and collect each channel's spectra.

    Spectra come back in natural bin order whatever order the circuit emits them in.

    Raises:
        PatternMismatchError if any bin of any fed frame never comes out
    """
    size = built.spec.size
    period = built.schedule.folding_factor
    frames = max(len(f) for f in data.values())
    cycles = frames * period + built.latency + 2 * period
    probes = built.input_lanes + built.pre_lanes + built.output_lanes
    trace = simulate(
        built.circuit, channel_streams(data, stride=built.stride), cycles, probes
    )

    spectra = {c: np.full((len(data[c]), size), np.nan, dtype=np.complex128) for c in data}
    for lane in built.output_lanes:
        for token in trace.tokens(lane):
            if token.is_bubble or token.tag.channel not in spectra:
                continue
            spectra[token.tag.channel][token.tag.frame, token.tag.index] = token.value
    for channel, values in spectra.items():
        if np.isnan(values).any():
            raise PatternMismatchError(f"Channel {channel} is missing output bins")
    return RunResult(trace, spectra)


def expected_raw_order(built: BuiltArchitecture, channel: int = 0) -> List[int]:
    """Bin order one channel leaves the post-processing in, predicted from the schedule.

    Architecture 3 separates channels with an (N/2)-DSD, so a channel's top results come
    out as a block before its bottom results; the others alternate top and bottom.
    """
    size = built.spec.size
    if built.spec.variant == ArchitectureVariant.ARCH3:
        return half_size_bit_reverse_perm(size)
    bits = built.graph.stages
    last = built.graph.stages - 1
    order = []
    for _, ref in built.schedule.stage_times(last, channel):
        position = built.graph.op(last, ref.index).position
        order.extend([bit_reverse(position, bits), bit_reverse(position + 1, bits)])
    return order


def verify_architecture(
    built: BuiltArchitecture,
    frames: int,
    seed: int,
    fed_channels: Sequence[int] = (0, 1),
    log_manager=None,
) -> List[CheckResult]:
    """Run random frames through a built architecture and check it against the oracles.

    Failed checks are logged as warnings; the caller decides what a failure means.
    """
    spec = built.spec
    checks: List[CheckResult] = []
    if spec.size == 16 and spec.channels == 2:
        checks.append(
            CheckResult.compare(
                "registers pre/fft/post/reorder",
                built.report.as_row()[:4],
                REFERENCE_REGISTERS[spec.variant],
            )
        )
    checks.append(
        CheckResult.compare(
            "register census", built.circuit.registers, built.report.instantiated_total
        )
    )

    data = random_frames(spec.size, frames, fed_channels, seed)
    result = run_frames(built, data)
    error = spectral_error(result.spectra, data)
    checks.append(
        CheckResult(
            "max |X - DFT(x)|",
            f"{error:.3e}",
            f"< {TOLERANCE:.0e}",
            CheckOutcome.PASS if error < TOLERANCE else CheckOutcome.FAIL,
        )
    )

    lanes = {lane: c for lane, c in built.output_channels.items() if c in fed_channels}
    order = built.output_order
    permutation = check_permutation(
        result.trace,
        PermutationSpec.serial({lane: (c, order[c]) for lane, c in lanes.items()}, built.stride),
    )
    checks.append(
        CheckResult(
            "output order",
            str(permutation),
            "natural" if spec.natural_order else "as produced",
            CheckOutcome.PASS if permutation.ok else CheckOutcome.FAIL,
        )
    )

    measurement = measure(
        result.trace,
        built.schedule.folding_factor,
        built.input_lanes,
        built.output_lanes,
        built.pre_lanes,
    )
    expected_util = len(fed_channels) / spec.channels
    for unit, utilization in measurement.utilization.items():
        checks.append(CheckResult.compare(f"utilization {unit}", utilization, expected_util))
    checks.append(
        CheckResult.compare(
            "throughput (samples/cycle)",
            measurement.throughput,
            len(fed_channels) / spec.stride,
        )
    )
    if spec.variant == ArchitectureVariant.ARCH3:
        checks.append(
            CheckResult.compare(
                "pre-processing latency",
                measurement.pre_latency,
                (spec.channels - 1) * spec.size // spec.channels,
            )
        )
    for check in checks:
        if not check.passed:
            logger.error("%s: %s failed: %s vs %s", spec.variant.label, check.name, check.measured, check.expected)
            if log_manager:
                log_manager.warning(
                    "%s: %s failed: %s vs %s",
                    spec.variant.label,
                    check.name,
                    check.measured,
                    check.expected,
                )
    return checks
