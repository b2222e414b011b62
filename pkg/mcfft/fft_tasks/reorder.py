import itertools
import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from .folding import lifetime_profile
from .netlist import BUBBLE, Circuit, Component, Delay, Token, check_phases
from .status import (
    CausalityError,
    PatternMismatchError,
    RegisterOverflowError,
    ReorderConflictError,
    SizeError,
)

logger = logging.getLogger(__name__)

# (lane, cycle) of one token, keyed by whatever identifies the token in a period
Schedule = Mapping[Hashable, Tuple[str, int]]


@dataclass(frozen=True)
class Route:
    out_lane: str
    delay: int


@dataclass(frozen=True)
class ReorderPlan:
    """Where each (input lane, phase) goes and how long it waits there."""

    period: int
    routes: Mapping[Tuple[str, int], Route]
    registers: int
    in_lanes: Tuple[str, ...]
    out_lanes: Tuple[str, ...]

    @property
    def max_delay(self) -> int:
        return max((route.delay for route in self.routes.values()), default=0)


def plan_reorder(arrival: Schedule, departure: Schedule, period: int) -> ReorderPlan:
    """Plan a periodic permutation of tokens between lanes and cycles.

    The register count is the lifetime bound: the most tokens waiting in any cycle of the
    steady state, where a token arriving at a and leaving at d waits d - a cycles.

    Raises:
        PatternMismatchError if departure is not a permutation of arrival
        CausalityError if a token leaves before it arrives
        ReorderConflictError if two tokens share an input or output lane and phase
    """
    if set(arrival) != set(departure):
        raise PatternMismatchError("Departure schedule is not a permutation of the arrivals")

    routes: Dict[Tuple[str, int], Route] = {}
    taken: Dict[Tuple[str, int], Hashable] = {}
    intervals = []
    for key in sorted(arrival, key=repr):
        in_lane, arrives = arrival[key]
        out_lane, departs = departure[key]
        if departs < arrives:
            raise CausalityError(f"{key} departs at cycle {departs} before arriving at {arrives}")
        slot_in = (in_lane, arrives % period)
        if slot_in in routes:
            raise ReorderConflictError(
                f"Two tokens arrive on {in_lane} at phase {arrives % period}"
            )
        slot_out = (out_lane, departs % period)
        if slot_out in taken:
            raise ReorderConflictError(
                f"{key} and {taken[slot_out]} both leave on {out_lane} at phase "
                f"{departs % period}"
            )
        taken[slot_out] = key
        routes[slot_in] = Route(out_lane, departs - arrives)
        intervals.append((arrives, departs))

    return ReorderPlan(
        period=period,
        routes=routes,
        registers=max(lifetime_profile(intervals, period), default=0),
        in_lanes=tuple(sorted({lane for lane, _ in arrival.values()})),
        out_lanes=tuple(sorted({lane for lane, _ in departure.values()})),
    )


def min_latency_departures(
    arrival: Schedule, order: Schedule
) -> Tuple[Dict[Hashable, Tuple[str, int]], int]:
    """Shift a relative departure order as early as causality allows.

    Args:
        arrival: token -> (lane, cycle) it arrives
        order: token -> (lane, relative cycle) it should leave

    Returns:
        (departure schedule, latency added to the relative order)
    """
    latency = max(arrival[key][1] - order[key][1] for key in order)
    return {key: (lane, cycle + latency) for key, (lane, cycle) in order.items()}, latency


class ReorderBuffer(Component):
    """Phase-controlled register pool realizing a ReorderPlan.

    Holds at most plan.registers tokens; `label` names what the pool stands for in a
    register report (REOC, bit-reversal buffer, ...).
    """

    kind = "ReorderBuffer"

    def __init__(
        self,
        name: str,
        plan: ReorderPlan,
        label: str,
        lane_map: Mapping[str, str] = None,
    ):
        lane_map = lane_map or {}
        super().__init__(
            name,
            [lane_map.get(lane, lane) for lane in plan.in_lanes],
            [lane_map.get(lane, lane) for lane in plan.out_lanes],
        )
        self.label = label
        self.period = plan.period
        self.capacity = plan.registers
        self._routes = {
            (lane_map.get(lane, lane), phase): Route(
                lane_map.get(route.out_lane, route.out_lane), route.delay
            )
            for (lane, phase), route in plan.routes.items()
        }
        self.reset()

    @property
    def registers(self) -> int:
        return self.capacity

    @property
    def occupancy(self) -> int:
        return len(self._pending)

    def reset(self):
        self._pending: Dict[Tuple[str, int], Token] = {}

    def rename(self, lane_map, name_map):
        self._routes = {
            (lane_map(lane), phase): Route(lane_map(route.out_lane), route.delay)
            for (lane, phase), route in self._routes.items()
        }
        super().rename(lane_map, name_map)

    def step(self, cycle: int, tokens: List[Token]) -> List[Token]:
        phase = cycle % self.period
        passing: Dict[str, Token] = {}
        for lane, token in zip(self.inputs, tokens):
            route = self._routes.get((lane, phase))
            if route is None:
                if not token.is_bubble:
                    raise ReorderConflictError(
                        f"{self.name}: unexpected {token} on {lane} at phase {phase}"
                    )
                continue
            if route.delay == 0:
                passing[route.out_lane] = token
            else:
                self._pending[(route.out_lane, cycle + route.delay)] = token

        outputs = [
            passing[lane] if lane in passing else self._pending.pop((lane, cycle), BUBBLE)
            for lane in self.outputs
        ]
        if len(self._pending) > self.capacity:
            raise RegisterOverflowError(
                f"{self.name} holds {len(self._pending)} tokens, capacity {self.capacity}"
            )
        return outputs

    def describe(self) -> str:
        return f"{self.label}(period={self.period})"


def synthesize_reorder(
    arrival: Schedule,
    departure: Schedule,
    period: int,
    label: str = "reorder buffer",
) -> Tuple[Circuit, int]:
    """Build a standalone circuit that turns the arrival schedule into the departure one.

    Returns:
        (circuit, register count), the count being the lifetime lower bound
    """
    plan = plan_reorder(arrival, departure, period)
    circuit = Circuit(label, list(plan.in_lanes))
    circuit.add(ReorderBuffer("buffer", plan, label))
    circuit.set_outputs(list(plan.out_lanes))
    logger.debug("Synthesized %s: %d registers, period %d", label, plan.registers, period)
    return circuit, plan.registers


def natural_order_departures(
    arrival: Schedule, lane_of_channel: Mapping[int, str], stride: int = 1
) -> Tuple[Dict[Hashable, Tuple[str, int]], int]:
    """Departures putting each channel's frame in index order on its own lane, as early as possible.

    Tokens are keyed (channel, index); consecutive indices leave `stride` cycles apart.
    """
    order = {
        (channel, index): (lane_of_channel[channel], index * stride)
        for channel, index in arrival
    }
    return min_latency_departures(arrival, order)


class Reoc(Component):
    """Reorder circuit over a d-register line.

    At a swap phase ((t - d) mod period in swap_phases) the current input goes straight to
    the output and the token leaving the line is fed back into it; otherwise the line
    shifts like Delay(d).
    """

    kind = "REOC"

    def __init__(
        self,
        name: str,
        distance: int,
        period: int,
        swap_phases: Iterable[int],
        src: str,
        dst: str,
    ):
        if distance < 1:
            raise SizeError(f"REOC distance must be at least 1, got {distance}")
        super().__init__(name, [src], [dst])
        self.distance = distance
        self.period = period
        self.swap_phases = check_phases(period, swap_phases)
        self.reset()

    @property
    def registers(self) -> int:
        return self.distance

    def reset(self):
        self._line = deque([BUBBLE] * self.distance)

    def step(self, cycle: int, tokens: List[Token]) -> List[Token]:
        out = self._line.popleft()
        if (cycle - self.distance) % self.period in self.swap_phases:
            self._line.append(out)
            return [tokens[0]]
        self._line.append(tokens[0])
        return [out]

    def describe(self) -> str:
        return f"REOC(d={self.distance}, p={self.period}, swap={sorted(self.swap_phases)})"


def build_reoc(distance: int, period: int, swap_phases: Sequence[int]) -> Circuit:
    circuit = Circuit(f"reoc{distance}", ["in"])
    circuit.add(Reoc("reoc", distance, period, swap_phases, "in", "out"))
    circuit.set_outputs(["out"])
    return circuit


def bit_permutation(order: Sequence[int]) -> Optional[Tuple[int, ...]]:
    """Position bit feeding each index bit when `order` permutes the bits of its positions.

    order[q] is the index found at position q. Returns source with source[k] the position
    bit that index bit k is read from, or None when the order is no bit permutation.
    """
    size = len(order)
    if size < 2 or size & (size - 1):
        return None
    bits = size.bit_length() - 1
    source = [None] * bits
    for s in range(bits):
        index = order[1 << s]
        if index == 0 or index & (index - 1):
            return None
        k = index.bit_length() - 1
        if source[k] is not None:
            return None
        source[k] = s
    if any(
        order[q] != sum(((q >> s) & 1) << k for k, s in enumerate(source)) for q in range(size)
    ):
        return None
    return tuple(source)


def bit_exchanges(source: Sequence[int]) -> List[Tuple[int, int]]:
    """Cheapest sequence of position-bit exchanges putting every index bit in its own place.

    Exchanging position bits a > b costs a REOC of 2^a - 2^b registers; the search runs
    over bit arrangements, arrangement[s] being the index bit held by position bit s.
    """
    bits = len(source)
    start = [0] * bits
    for k, s in enumerate(source):
        start[s] = k
    graph = nx.Graph()
    for arrangement in itertools.permutations(range(bits)):
        for low, high in itertools.combinations(range(bits), 2):
            swapped = list(arrangement)
            swapped[low], swapped[high] = swapped[high], swapped[low]
            graph.add_edge(
                arrangement, tuple(swapped), weight=(1 << high) - (1 << low), bits=(high, low)
            )
    path = nx.dijkstra_path(graph, tuple(start), tuple(range(bits)))
    return [graph.edges[u, v]["bits"] for u, v in zip(path, path[1:])]


def build_bit_reorder(order: Sequence[int], start: int = 0) -> Tuple[Circuit, int]:
    """Cascade of REOCs putting a dense, frame-aligned stream in natural index order.

    Position q of every frame arrives at cycle start + q (mod len(order)) holding index
    order[q]; index k leaves at start + latency + k.

    Returns:
        (circuit with input `in`, latency)

    Raises:
        PatternMismatchError if the order does not permute position bits
    """
    source = bit_permutation(order)
    if source is None:
        raise PatternMismatchError(f"{list(order)} is not a bit permutation of its positions")
    size = len(order)
    circuit = Circuit(f"bit-reorder{size}", ["in"])
    lane = "in"
    latency = 0
    for n, (a, b) in enumerate(bit_exchanges(source)):
        distance = (1 << a) - (1 << b)
        phases = sorted(
            (start + latency + q - distance) % size
            for q in range(size)
            if (q >> a) & 1 and not (q >> b) & 1
        )
        outs = circuit.embed(build_reoc(distance, size, phases), {"in": lane}, f"x{n}")
        lane = outs["out"]
        latency += distance
        logger.debug("Bit exchange %d<->%d: REOC(%d)", a, b, distance)
    if lane == "in":
        circuit.add(Delay("wire", 0, "in", "out"))
        lane = "out"
    circuit.set_outputs([lane])
    return circuit, latency


class BitRevBuffer(ReorderBuffer):
    """Register pool reordering a channel whose output order is no bit permutation."""

    kind = "BitRevBuffer"

    def __init__(self, name: str, plan: ReorderPlan, label: str = "bit-reversal buffer"):
        super().__init__(name, plan, label)
