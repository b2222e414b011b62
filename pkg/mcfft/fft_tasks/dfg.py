import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .status import FrameLengthError, SizeError

logger = logging.getLogger(__name__)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def stage_letter(stage: int) -> str:
    return chr(ord("A") + stage)


@dataclass(frozen=True)
class ButterflyOp:
    """One radix-2 DIF butterfly: (a + b) on the top output, (a - b) * W^k on the bottom."""

    stage: int
    index: int
    twiddle_exponent: int
    input_ids: Tuple[int, int]
    output_ids: Tuple[int, int]
    position: int
    span: int

    @property
    def name(self) -> str:
        return f"{stage_letter(self.stage)}{self.index}"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Edge:
    """Producer output port -> consumer input port. DIF graphs carry no algorithmic delays."""

    producer: Tuple[int, int]
    producer_port: int
    consumer: Tuple[int, int]
    consumer_port: int
    weight: int = 0


@dataclass(frozen=True)
class DataFlowGraph:
    size: int
    ops: Tuple[ButterflyOp, ...]
    edges: Tuple[Edge, ...]

    @property
    def stages(self) -> int:
        return int(math.log2(self.size))

    @property
    def ops_per_stage(self) -> int:
        return self.size // 2

    @cached_property
    def _by_key(self) -> Dict[Tuple[int, int], ButterflyOp]:
        return {(op.stage, op.index): op for op in self.ops}

    @cached_property
    def _preds(self) -> Dict[Tuple[int, int], List[Edge]]:
        preds: Dict[Tuple[int, int], List[Edge]] = {}
        for edge in self.edges:
            preds.setdefault(edge.consumer, []).append(edge)
        for edges in preds.values():
            edges.sort(key=lambda e: e.consumer_port)
        return preds

    @cached_property
    def _succs(self) -> Dict[Tuple[int, int], List[Edge]]:
        succs: Dict[Tuple[int, int], List[Edge]] = {}
        for edge in self.edges:
            succs.setdefault(edge.producer, []).append(edge)
        for edges in succs.values():
            edges.sort(key=lambda e: e.producer_port)
        return succs

    def op(self, stage: int, index: int) -> ButterflyOp:
        return self._by_key[(stage, index)]

    def stage_ops(self, stage: int) -> List[ButterflyOp]:
        return [op for op in self.ops if op.stage == stage]

    def predecessors(self, stage: int, index: int) -> List[Edge]:
        """Incoming edges ordered by consumer port (empty for first-stage ops)."""
        return list(self._preds.get((stage, index), []))

    def successors(self, stage: int, index: int) -> List[Edge]:
        """Outgoing edges ordered by producer port (empty for last-stage ops)."""
        return list(self._succs.get((stage, index), []))

    def twiddle(self, exponent: int) -> complex:
        return twiddle_factor(exponent, self.size)


def twiddle_factor(exponent: int, size: int) -> complex:
    """W_N^k = cos(2*pi*k/N) - i*sin(2*pi*k/N)."""
    angle = 2.0 * math.pi * exponent / size
    return complex(math.cos(angle), -math.sin(angle))


def _producer_of(position: int, span: int) -> Tuple[int, int]:
    """Locate which op (index) and output port of a stage with `span` drives `position`."""
    group, offset = divmod(position, 2 * span)
    if offset < span:
        return group * span + offset, 0
    return group * span + offset - span, 1


def build_dif_dfg(size: int) -> DataFlowGraph:
    """Build the radix-2 decimation-in-frequency FFT dataflow graph.

    Args:
        size: FFT size N, a power of two >= 2

    Returns:
        DataFlowGraph with log2(N) stages of N/2 butterflies, stages named A, B, C, ...

    Raises:
        SizeError if N is not a power of two >= 2
    """
    if size < 2 or not is_power_of_two(size):
        raise SizeError(f"FFT size must be a power of two >= 2, got {size}")

    stages = int(math.log2(size))
    ops: List[ButterflyOp] = []
    edges: List[Edge] = []
    for stage in range(stages):
        span = size >> (stage + 1)
        for index in range(size // 2):
            group, offset = divmod(index, span)
            position = group * 2 * span + offset
            ops.append(
                ButterflyOp(
                    stage=stage,
                    index=index,
                    twiddle_exponent=offset << stage,
                    input_ids=(stage * size + position, stage * size + position + span),
                    output_ids=(
                        (stage + 1) * size + position,
                        (stage + 1) * size + position + span,
                    ),
                    position=position,
                    span=span,
                )
            )
            if stage == 0:
                continue
            prev_span = span * 2
            for port, pos in enumerate((position, position + span)):
                producer, producer_port = _producer_of(pos, prev_span)
                edges.append(
                    Edge((stage - 1, producer), producer_port, (stage, index), port)
                )

    logger.debug("Built %d-point DIF graph: %d ops, %d edges", size, len(ops), len(edges))
    return DataFlowGraph(size=size, ops=tuple(ops), edges=tuple(edges))


def evaluate_dfg(graph: DataFlowGraph, frame: Sequence[complex]) -> np.ndarray:
    """Evaluate the graph on one frame.

    The result is in position order, i.e. element p holds bin bit_reverse(p).

    Raises:
        FrameLengthError if the frame does not have N samples
    """
    values = np.array(frame, dtype=np.complex128)
    if values.shape != (graph.size,):
        raise FrameLengthError(
            f"Frame must have {graph.size} samples, got shape {values.shape}"
        )

    for op in graph.ops:
        top, bottom = op.position, op.position + op.span
        a, b = values[top], values[bottom]
        values[top] = a + b
        values[bottom] = (a - b) * graph.twiddle(op.twiddle_exponent)
    return values


def dump_dfg(graph: DataFlowGraph) -> str:
    """Adjacency listing, one op per line: name, twiddle exponent, successor names."""
    lines = []
    for op in graph.ops:
        successors = [
            f"{stage_letter(e.consumer[0])}{e.consumer[1]}"
            for e in graph.successors(op.stage, op.index)
        ]
        lines.append(" ".join([op.name, str(op.twiddle_exponent), *successors]))
    return "\n".join(lines) + "\n"
