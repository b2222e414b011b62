"""Ground truth for the simulator: a direct DFT, index permutations and trace checks.

Nothing here evaluates the FFT graph, so the DFT cannot share a bug with it.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .status import McfftError, PatternMismatchError, PermutationResult, SizeError


def naive_dft(frame: Sequence[complex]) -> np.ndarray:
    """X[k] = sum_n x[n] * exp(-2*pi*i*n*k/N), summed directly in O(N^2)."""
    x = np.asarray(frame, dtype=np.complex128)
    n = np.arange(x.shape[0])
    kernel = np.exp(-2j * np.pi * np.outer(n, n) / max(x.shape[0], 1))
    return kernel @ x


def bit_reverse(value: int, bits: int) -> int:
    result = 0
    for _ in range(bits):
        result = (result << 1) | (value & 1)
        value >>= 1
    return result


def _bits(size: int) -> int:
    if size < 1 or size & (size - 1):
        raise SizeError(f"Size must be a power of two, got {size}")
    return size.bit_length() - 1


def bit_reverse_perm(size: int) -> List[int]:
    bits = _bits(size)
    return [bit_reverse(i, bits) for i in range(size)]


def half_size_bit_reverse_perm(size: int) -> List[int]:
    """Bit reversal over N/2 indices, applied to each half of the frame separately."""
    bits = _bits(size)
    if size < 4:
        raise SizeError(f"Half-size bit reversal needs N >= 4, got {size}")
    half = size // 2
    return [
        bit_reverse(i, bits - 1) if i < half else half + bit_reverse(i - half, bits - 1)
        for i in range(size)
    ]


@dataclass(frozen=True)
class PermutationSpec:
    """Expected (channel, index) per (phase, lane) over one period; None expects a bubble.

    Phase 0 of a lane is its first sample token, so warm-up bubbles are skipped.
    """

    period: int
    expected: Mapping[Tuple[int, str], Optional[Tuple[int, int]]]

    def __post_init__(self):
        seen = [value for value in self.expected.values() if value is not None]
        if len(seen) != len(set(seen)):
            raise PatternMismatchError("A permutation spec must name each token once per period")

    @property
    def lanes(self) -> List[str]:
        return sorted({lane for _, lane in self.expected})

    @staticmethod
    def serial(
        lane_orders: Mapping[str, Tuple[int, Sequence[int]]], stride: int = 1
    ) -> "PermutationSpec":
        """One channel per lane, one sample every `stride` cycles: lane -> (channel, index order)."""
        periods = {len(order) for _, order in lane_orders.values()}
        if len(periods) != 1:
            raise PatternMismatchError("Serial lanes must share one period")
        expected = {}
        for lane, (channel, order) in lane_orders.items():
            for n, index in enumerate(order):
                expected[(n * stride, lane)] = (channel, index)
                for gap in range(1, stride):
                    expected[(n * stride + gap, lane)] = None
        return PermutationSpec(periods.pop() * stride, expected)


def check_permutation(trace, spec: PermutationSpec, stop: Optional[int] = None) -> PermutationResult:
    """Compare the tag pattern of every spec lane with the spec, from its first sample token.

    Checking runs to `stop` (exclusive) or to the lane's last sample token.
    """
    for lane in spec.lanes:
        tokens = trace.tokens(lane)
        sample_cycles = [t for t, token in enumerate(tokens) if not token.is_bubble]
        if not sample_cycles:
            first = spec.expected.get((0, lane))
            return PermutationResult(False, 0, lane, first, None)
        start = sample_cycles[0]
        end = stop if stop is not None else sample_cycles[-1] + 1
        for cycle in range(start, min(end, len(tokens))):
            expected = spec.expected.get(((cycle - start) % spec.period, lane))
            token = tokens[cycle]
            observed = None if token.is_bubble else (token.tag.channel, token.tag.index)
            if observed != expected:
                return PermutationResult(False, cycle, lane, expected, observed)
    return PermutationResult(True)


@dataclass(frozen=True)
class Measurement:
    utilization: Dict[str, float]
    pre_latency: Optional[int]
    latency: Optional[int]
    throughput: float
    window: Tuple[int, int]


def measure(
    trace,
    folding_factor: int,
    inputs: Iterable[str],
    outputs: Iterable[str],
    pre_outputs: Optional[Iterable[str]] = None,
) -> Measurement:
    """Utilization, latency and throughput of a simulated architecture.

    The steady state starts at twice the measured end-to-end latency (after the first input)
    and ends with the last input; it is cut to a whole number of folding periods.
    Utilization is active firings per cycle of each unit, throughput is input samples per
    cycle and the pre-processing latency is the first sample token on `pre_outputs` minus
    the first input.

    Raises:
        McfftError if the trace holds no full folding period of steady state
    """
    inputs, outputs = list(inputs), list(outputs)
    first_in = trace.first_token_cycle(inputs)
    last_in = trace.last_token_cycle(inputs)
    first_out = trace.first_token_cycle(outputs)
    if first_in is None or first_out is None:
        raise McfftError("No samples went through the circuit")

    latency = first_out - first_in
    pre_latency = None
    if pre_outputs is not None:
        first_pre = trace.first_token_cycle(list(pre_outputs))
        pre_latency = None if first_pre is None else first_pre - first_in

    start = first_in + 2 * latency
    length = (last_in + 1 - start) // folding_factor * folding_factor
    if length <= 0:
        raise McfftError(
            f"Trace too short for a steady state: window starts at {start}, "
            f"inputs end at {last_in}"
        )
    end = start + length

    utilization = {
        unit: sum(1 for fired in record[start:end] if fired) / length
        for unit, record in trace.firings.items()
    }
    samples = sum(
        1 for lane in inputs for token in trace.tokens(lane)[start:end] if not token.is_bubble
    )
    return Measurement(
        utilization=utilization,
        pre_latency=pre_latency,
        latency=latency,
        throughput=samples / length,
        window=(start, end),
    )


def spectral_error(
    spectra: Mapping[int, np.ndarray], frames: Mapping[int, np.ndarray]
) -> float:
    """Largest elementwise |X - DFT(x)| over all channels and frames."""
    worst = 0.0
    for channel, outputs in spectra.items():
        for frame, spectrum in zip(frames[channel], outputs):
            worst = max(worst, float(np.max(np.abs(spectrum - naive_dft(frame)))))
    return worst
