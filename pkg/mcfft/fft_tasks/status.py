from enum import Enum, auto
from dataclasses import dataclass, field
from typing import List, Optional, Tuple


class McfftError(ValueError):
    """Base class for every error raised by the synthesizer and simulator."""


class SizeError(McfftError):
    pass


class FrameLengthError(McfftError):
    pass


class ChannelCountError(McfftError):
    pass


class PatternMismatchError(McfftError):
    pass


class CoverageError(McfftError):
    def __init__(self, diagnostics: List["ScheduleDiagnostic"]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


class NegativeDelayError(McfftError):
    def __init__(self, edge, delay: int):
        self.edge = edge
        self.delay = delay
        super().__init__(f"Negative folded delay {delay} on edge {edge}")


class ArityError(McfftError):
    pass


class CombinationalLoopError(McfftError):
    pass


class CausalityError(McfftError):
    pass


class ReorderConflictError(McfftError):
    pass


class RegisterOverflowError(McfftError):
    pass


class OperandMismatchError(McfftError):
    pass


class PhaseSetError(McfftError):
    pass


class UnsupportedConfigurationError(McfftError):
    pass


class ConfigError(McfftError):
    def __init__(self, problems: List[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


class DiagnosticType(Enum):
    DUPLICATE = auto()
    MISSING = auto()
    MISPLACED = auto()
    FACTOR_MISMATCH = auto()
    NEGATIVE_DELAY = auto()


@dataclass
class ScheduleDiagnostic:
    """A single problem found while checking a folding-set collection."""

    type: DiagnosticType
    message: str
    op: Optional[str] = None

    def __str__(self) -> str:
        match self.type:
            case DiagnosticType.DUPLICATE:
                return f"Duplicate op {self.op}: {self.message}"
            case DiagnosticType.MISSING:
                return f"Missing op {self.op}"
            case DiagnosticType.MISPLACED:
                return f"Op {self.op} on the wrong unit: {self.message}"
            case DiagnosticType.FACTOR_MISMATCH:
                return f"Folding factor mismatch: {self.message}"
            case DiagnosticType.NEGATIVE_DELAY:
                return f"Negative delay: {self.message}"
            case _:
                return self.message


@dataclass
class ScheduleReport:
    diagnostics: List[ScheduleDiagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def of_type(self, kind: DiagnosticType) -> List[ScheduleDiagnostic]:
        return [d for d in self.diagnostics if d.type == kind]


@dataclass
class PermutationResult:
    """Outcome of a tag-trace permutation check."""

    ok: bool
    cycle: Optional[int] = None
    lane: Optional[str] = None
    expected: Optional[Tuple[int, int]] = None
    observed: Optional[Tuple[int, int]] = None

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return (
            f"mismatch at cycle {self.cycle} lane {self.lane}: "
            f"expected {self.expected}, observed {self.observed}"
        )


class CheckOutcome(Enum):
    PASS = auto()
    FAIL = auto()


@dataclass
class CheckResult:
    """One line of a verification summary: what was measured against what was expected."""

    name: str
    measured: str
    expected: str
    outcome: CheckOutcome

    @property
    def passed(self) -> bool:
        return self.outcome == CheckOutcome.PASS

    @staticmethod
    def compare(name: str, measured, expected) -> "CheckResult":
        outcome = CheckOutcome.PASS if measured == expected else CheckOutcome.FAIL
        return CheckResult(name, str(measured), str(expected), outcome)
