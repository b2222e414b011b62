import copy
import csv
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, TextIO

import networkx as nx

from .dfg import twiddle_factor
from .status import (
    ArityError,
    CombinationalLoopError,
    McfftError,
    PhaseSetError,
    SizeError,
    UnsupportedConfigurationError,
)

logger = logging.getLogger(__name__)

SYNC_CHANNEL = -1


@dataclass(frozen=True)
class Tag:
    """Provenance of a sample: which channel, which frame, which index within the frame."""

    channel: int
    frame: int
    index: int


@dataclass(frozen=True)
class Token:
    value: complex = 0j
    tag: Optional[Tag] = None

    @property
    def is_bubble(self) -> bool:
        return self.tag is None

    def __str__(self) -> str:
        if self.tag is None:
            return "."
        return f"c{self.tag.channel}f{self.tag.frame}[{self.tag.index}]"


BUBBLE = Token()


class Component:
    """A clocked block with named input and output lanes."""

    kind = "component"

    def __init__(self, name: str, inputs: Sequence[str], outputs: Sequence[str]):
        self.name = name
        self.inputs = list(inputs)
        self.outputs = list(outputs)

    @property
    def registers(self) -> int:
        return 0

    def step(self, cycle: int, tokens: List[Token]) -> List[Token]:
        raise NotImplementedError

    def reset(self):
        pass

    def rename(self, lane_map: Callable[[str], str], name_map: Callable[[str], str]):
        self.name = name_map(self.name)
        self.inputs = [lane_map(lane) for lane in self.inputs]
        self.outputs = [lane_map(lane) for lane in self.outputs]

    def describe(self) -> str:
        return self.kind

    def __str__(self) -> str:
        return (
            f"{self.name}: {self.describe()} "
            f"[{', '.join(self.inputs)}] -> [{', '.join(self.outputs)}] "
            f"registers={self.registers}"
        )


class Delay(Component):
    """Delay(k): outputs at cycle t the token accepted at cycle t - k. k = 0 is a wire."""

    kind = "Delay"

    def __init__(self, name: str, k: int, src: str, dst: str):
        if k < 0:
            raise SizeError(f"Delay length must not be negative, got {k}")
        super().__init__(name, [src], [dst])
        self.k = k
        self.reset()

    @property
    def registers(self) -> int:
        return self.k

    def reset(self):
        self._line = deque([BUBBLE] * self.k)

    def shorten(self):
        self.k -= 1
        self.reset()

    def step(self, cycle: int, tokens: List[Token]) -> List[Token]:
        if self.k == 0:
            return [tokens[0]]
        out = self._line.popleft()
        self._line.append(tokens[0])
        return [out]

    def describe(self) -> str:
        return f"Delay({self.k})"


def check_phases(period: int, phases: Iterable[int]) -> frozenset:
    if period < 1:
        raise PhaseSetError(f"Period must be positive, got {period}")
    phases = frozenset(phases)
    outside = sorted(p for p in phases if not 0 <= p < period)
    if outside:
        raise PhaseSetError(f"Phases {outside} are outside [0, {period})")
    return phases


class Switch2x2(Component):
    """Periodic 2x2 switch: crossed when (t - origin) mod period is in the phase set."""

    kind = "Switch2x2"

    def __init__(
        self,
        name: str,
        period: int,
        cross_phases: Iterable[int],
        inputs: Sequence[str],
        outputs: Sequence[str],
        origin: int = 0,
    ):
        super().__init__(name, inputs, outputs)
        self.period = period
        self.cross_phases = check_phases(period, cross_phases)
        self.origin = origin

    def crossed(self, cycle: int) -> bool:
        return (cycle - self.origin) % self.period in self.cross_phases

    def step(self, cycle: int, tokens: List[Token]) -> List[Token]:
        a, b = tokens
        return [b, a] if self.crossed(cycle) else [a, b]

    def describe(self) -> str:
        return f"Switch2x2(p={self.period}, cross={sorted(self.cross_phases)})"


class Butterfly2(Component):
    """Radix-2 butterfly: (a + b, (a - b) * twiddle). Results carry the tag of `a`."""

    kind = "Butterfly2"

    def __init__(
        self, name: str, inputs: Sequence[str], outputs: Sequence[str], twiddle: complex = 1
    ):
        super().__init__(name, inputs, outputs)
        self.twiddle = twiddle

    @staticmethod
    def compute(a: Token, b: Token, twiddle: complex = 1):
        if a.is_bubble or b.is_bubble:
            return BUBBLE, BUBBLE
        return (
            Token(a.value + b.value, a.tag),
            Token((a.value - b.value) * twiddle, a.tag),
        )

    def step(self, cycle: int, tokens: List[Token]) -> List[Token]:
        return list(self.compute(tokens[0], tokens[1], self.twiddle))


class TwiddleMul(Component):
    """Multiplies a lane by W_N^e, e taken from a schedule repeating every len(exponents) cycles."""

    kind = "TwiddleMul"

    def __init__(
        self,
        name: str,
        exponents: Sequence[int],
        size: int,
        src: str,
        dst: str,
        origin: int = 0,
    ):
        if not exponents:
            raise PhaseSetError("Twiddle schedule must not be empty")
        super().__init__(name, [src], [dst])
        self.exponents = list(exponents)
        self.size = size
        self.origin = origin
        self._factors = [twiddle_factor(e, size) for e in self.exponents]

    def factor(self, phase: int) -> complex:
        return self._factors[phase % len(self._factors)]

    def step(self, cycle: int, tokens: List[Token]) -> List[Token]:
        token = tokens[0]
        if token.is_bubble:
            return [BUBBLE]
        return [Token(token.value * self.factor(cycle - self.origin), token.tag)]


class FrameStrobe(Component):
    """Emits a sync token tagged with the frame number every `period` cycles from `phase` on."""

    kind = "FrameStrobe"

    def __init__(self, name: str, period: int, phase: int, dst: str):
        super().__init__(name, [], [dst])
        self.period = period
        self.phase = phase

    def step(self, cycle: int, tokens: List[Token]) -> List[Token]:
        offset = cycle - self.phase
        if offset < 0 or offset % self.period:
            return [BUBBLE]
        return [Token(0j, Tag(SYNC_CHANNEL, offset // self.period, 0))]

    def describe(self) -> str:
        return f"FrameStrobe(p={self.period}, phase={self.phase})"


class Circuit:
    """Feedforward netlist of components connected by named lanes.

    Every lane has exactly one driver (a circuit input or one component output) and the
    connection graph is acyclic, so one pass in topological order evaluates a cycle.
    """

    def __init__(self, name: str, inputs: Sequence[str], log_manager=None):
        self.name = name
        self.inputs = list(inputs)
        self.outputs: List[str] = []
        self.components: List[Component] = []
        self.log_manager = log_manager
        self.cycle = 0
        self.values: Dict[str, Token] = {}
        self._order: Optional[List[Component]] = None

    def add(self, component: Component) -> Component:
        """Append a component; raises McfftError if one of its output lanes already has a driver."""
        drivers = self.drivers()
        for lane in component.outputs:
            if lane in drivers:
                owner = drivers[lane]
                raise McfftError(
                    f"Lane {lane} of {self.name} is already driven by "
                    f"{owner.name if owner else 'a circuit input'}"
                )
        self.components.append(component)
        self._order = None
        return component

    def remove(self, component: Component):
        """Drop a component; its output lanes are left undriven until rewired."""
        self.components.remove(component)
        self._order = None

    def component(self, name: str) -> Component:
        """Look a component up by name; raises KeyError when absent."""
        for component in self.components:
            if component.name == name:
                return component
        raise KeyError(f"No component {name} in {self.name}")

    def set_outputs(self, lanes: Sequence[str]):
        """Lanes `step` returns, in order."""
        self.outputs = list(lanes)

    def embed(self, sub: "Circuit", inputs: Mapping[str, str], prefix: str) -> Dict[str, str]:
        """Copy the components of `sub` into this circuit.

        Args:
            sub: circuit to flatten into this one
            inputs: sub input lane -> lane of this circuit feeding it
            prefix: prepended to the names of internal lanes and components

        Returns:
            sub output lane -> lane name in this circuit
        """
        missing = [lane for lane in sub.inputs if lane not in inputs]
        if missing:
            raise ArityError(f"No lanes given for inputs {missing} of {sub.name}")

        def lane_map(lane: str) -> str:
            return inputs[lane] if lane in inputs else f"{prefix}.{lane}"

        for component in sub.components:
            clone = copy.deepcopy(component)
            clone.rename(lane_map, lambda name: f"{prefix}.{name}")
            clone.reset()
            self.add(clone)
        return {lane: lane_map(lane) for lane in sub.outputs}

    def rewire(self, old: str, new: str):
        """Make every reader of lane `old` read lane `new` instead."""
        for component in self.components:
            component.inputs = [new if lane == old else lane for lane in component.inputs]
        self.outputs = [new if lane == old else lane for lane in self.outputs]
        self._order = None

    def drivers(self) -> Dict[str, Optional[Component]]:
        """Lane -> component driving it, None for circuit inputs."""
        drivers: Dict[str, Optional[Component]] = {lane: None for lane in self.inputs}
        for component in self.components:
            for lane in component.outputs:
                drivers[lane] = component
        return drivers

    def readers(self, lane: str) -> List[Component]:
        """Components that take `lane` as an input."""
        return [c for c in self.components if lane in c.inputs]

    def connection_graph(self) -> nx.DiGraph:
        """Components as nodes, one edge per lane from its driving component to each reader.

        Raises:
            McfftError if a component reads a lane nothing drives
        """
        drivers = self.drivers()
        graph = nx.DiGraph()
        graph.add_nodes_from(range(len(self.components)))
        index = {id(component): i for i, component in enumerate(self.components)}
        for i, component in enumerate(self.components):
            for lane in component.inputs:
                if lane not in drivers:
                    raise McfftError(f"Lane {lane} read by {component.name} has no driver")
                driver = drivers[lane]
                if driver is not None:
                    graph.add_edge(index[id(driver)], i, lane=lane)
        return graph

    def topological_order(self) -> List[Component]:
        """Components in evaluation order, cached until the netlist changes.

        Raises:
            CombinationalLoopError naming the components of a loop
        """
        if self._order is not None:
            return self._order

        graph = self.connection_graph()
        try:
            order = list(nx.topological_sort(graph))
        except nx.NetworkXUnfeasible:
            loop = [self.components[u].name for u, _ in nx.find_cycle(graph)]
            raise CombinationalLoopError(
                f"Loop in {self.name}: {' -> '.join(loop + loop[:1])}"
            ) from None
        self._order = [self.components[i] for i in order]
        return self._order

    def reset(self):
        """Back to cycle 0 with every register holding a bubble."""
        self.cycle = 0
        self.values = {}
        for component in self.components:
            component.reset()

    def step(self, tokens: Sequence[Token]) -> List[Token]:
        """Advance one cycle: one token per input lane in, one token per output lane out.

        Raises:
            ArityError if the number of tokens does not match the input lanes
        """
        if len(tokens) != len(self.inputs):
            raise ArityError(
                f"{self.name} takes {len(self.inputs)} input tokens, got {len(tokens)}"
            )
        values = dict(zip(self.inputs, tokens))
        for component in self.topological_order():
            outputs = component.step(self.cycle, [values[lane] for lane in component.inputs])
            values.update(zip(component.outputs, outputs))
        self.values = values
        self.cycle += 1
        return [values[lane] for lane in self.outputs]

    @property
    def registers(self) -> int:
        return sum(component.registers for component in self.components)

    def census(self) -> List[Component]:
        """Components holding at least one register."""
        return [c for c in self.components if c.registers]

    def dump(self) -> str:
        """Text netlist: ports, components in evaluation order and the register total."""
        lines = [
            f"circuit {self.name}",
            f"inputs: {', '.join(self.inputs)}",
            f"outputs: {', '.join(self.outputs)}",
        ]
        lines.extend(str(component) for component in self.topological_order())
        lines.append(f"registers: {self.registers}")
        return "\n".join(lines) + "\n"


CSV_COLUMNS = ["cycle", "port", "re", "im", "channel", "frame", "index", "bubble"]


@dataclass
class Trace:
    """Per-cycle record of the probed lanes, plus the firing record of any folded core."""

    ports: List[str]
    cycles: int
    samples: Dict[str, List[Token]]
    firings: Dict[str, List[Optional[bool]]] = field(default_factory=dict)

    def tokens(self, port: str) -> List[Token]:
        return self.samples[port]

    def first_token_cycle(self, ports: Optional[Iterable[str]] = None) -> Optional[int]:
        """First cycle at which any of `ports` carries a sample token."""
        cycles = [
            t
            for port in (ports or self.ports)
            for t, token in enumerate(self.samples[port])
            if not token.is_bubble and token.tag.channel != SYNC_CHANNEL
        ]
        return min(cycles, default=None)

    def last_token_cycle(self, ports: Optional[Iterable[str]] = None) -> Optional[int]:
        cycles = [
            t
            for port in (ports or self.ports)
            for t, token in enumerate(self.samples[port])
            if not token.is_bubble and token.tag.channel != SYNC_CHANNEL
        ]
        return max(cycles, default=None)

    def to_csv(self, stream: TextIO):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for cycle in range(self.cycles):
            for port in self.ports:
                token = self.samples[port][cycle]
                if token.is_bubble:
                    writer.writerow([cycle, port, "", "", "", "", "", 1])
                    continue
                writer.writerow(
                    [
                        cycle,
                        port,
                        repr(float(token.value.real)),
                        repr(float(token.value.imag)),
                        token.tag.channel,
                        token.tag.frame,
                        token.tag.index,
                        0,
                    ]
                )

    def write_csv(self, path: str):
        with open(path, "w", newline="") as f:
            self.to_csv(f)


def simulate(
    circuit: Circuit,
    streams: Mapping[str, Sequence[Token]],
    cycles: int,
    probes: Optional[Iterable[str]] = None,
) -> Trace:
    """Reset the circuit and run it for `cycles` cycles.

    Input lanes without a stream, and streams shorter than `cycles`, are fed bubbles.
    By default the circuit's inputs and outputs are probed.
    """
    ports = list(probes) if probes is not None else circuit.inputs + circuit.outputs
    circuit.reset()
    # Validate the netlist before running
    circuit.topological_order()
    drivers = circuit.drivers()
    unknown = [port for port in ports if port not in drivers]
    if unknown:
        raise McfftError(f"Cannot probe unknown lanes {unknown} of {circuit.name}")

    samples: Dict[str, List[Token]] = {port: [] for port in ports}
    for cycle in range(cycles):
        tokens = []
        for lane in circuit.inputs:
            stream = streams.get(lane, ())
            tokens.append(stream[cycle] if cycle < len(stream) else BUBBLE)
        circuit.step(tokens)
        for port in ports:
            samples[port].append(circuit.values[port])

    firings: Dict[str, List[Optional[bool]]] = {}
    for component in circuit.components:
        for unit, record in getattr(component, "firings", {}).items():
            firings[unit] = list(record)
    return Trace(ports=ports, cycles=cycles, samples=samples, firings=firings)


def build_dsd(k: int, cross_phases: Optional[Iterable[int]] = None, origin: int = 0) -> Circuit:
    """Delay-switch-delay: Delay(k) on lane 0, a 2x2 switch of period 2k, Delay(k) on lane 1.

    With a (lane 0) and b (lane 1) inputs, output blocks of k cycles alternate sources. The
    switch is crossed for the k phases in `cross_phases` (default k..2k-1): crossed cycles
    emit (b_t, b_t-k), the others (a_t-k, a_t-2k).

    Raises:
        SizeError if k < 1
        PhaseSetError if the phase set does not hold k phases of [0, 2k)
    """
    if k < 1:
        raise SizeError(f"DSD length must be at least 1, got {k}")
    phases = check_phases(2 * k, range(k, 2 * k) if cross_phases is None else cross_phases)
    if len(phases) != k:
        raise PhaseSetError(f"A DSD({k}) switch is crossed for {k} phases, got {sorted(phases)}")

    circuit = Circuit(f"dsd{k}", ["in0", "in1"])
    circuit.add(Delay("d0", k, "in0", "a"))
    circuit.add(Switch2x2("sw", 2 * k, phases, ["a", "in1"], ["out0", "s1"], origin))
    circuit.add(Delay("d1", k, "s1", "out1"))
    circuit.set_outputs(["out0", "out1"])
    return circuit


def reverse_pipeline(circuit: Circuit, lanes: Sequence[str]) -> int:
    """Take one register off the delay driving each lane, where all lanes feed one component.

    Removing a register from every input path of a block only shifts its timing by a cycle.

    Returns:
        Number of registers removed

    Raises:
        UnsupportedConfigurationError if a lane is not driven by a delay, or the lanes do
        not all feed the same single component
    """
    drivers = circuit.drivers()
    delays = []
    consumers = set()
    for lane in lanes:
        driver = drivers.get(lane)
        if not isinstance(driver, Delay) or driver.k < 1:
            raise UnsupportedConfigurationError(f"Lane {lane} is not driven by a delay")
        readers = circuit.readers(lane)
        if len(readers) != 1 or lane in circuit.outputs:
            raise UnsupportedConfigurationError(f"Lane {lane} must feed exactly one component")
        consumers.add(readers[0].name)
        delays.append(driver)
    if len(consumers) > 1:
        raise UnsupportedConfigurationError(
            f"Lanes {list(lanes)} feed different components: {sorted(consumers)}"
        )

    for delay in delays:
        if delay.k == 1:
            circuit.remove(delay)
            circuit.rewire(delay.outputs[0], delay.inputs[0])
        else:
            delay.shorten()

    if circuit.log_manager:
        circuit.log_manager.info(
            f"Reverse pipelining removed {len(delays)} registers before {consumers.pop()}"
        )
    return len(delays)
