from typing import Dict, List, Sequence

from rich.table import Table
from rich.text import Text

from ...fft_tasks.architectures import (
    REFERENCE_REGISTERS,
    ArchitectureVariant,
    BuiltArchitecture,
    InterleaverMeasurement,
)
from ...fft_tasks.folding import Section
from ...fft_tasks.status import CheckOutcome, CheckResult

OUTCOME_STYLES = {
    CheckOutcome.PASS: "bright_green",
    CheckOutcome.FAIL: "red bold",
}

SECTION_STYLES = {
    Section.PRE_PROCESSING: "cyan",
    Section.FFT: "magenta",
    Section.POST_PROCESSING: "cyan",
    Section.REORDERING: "yellow",
}


def _count(value: int, expected: int = None) -> Text:
    if expected is None:
        return Text(str(value))
    style = OUTCOME_STYLES[CheckOutcome.PASS if value == expected else CheckOutcome.FAIL]
    label = str(value) if value == expected else f"{value} (expected {expected})"
    return Text(label, style=style)


def register_table(builds: Sequence[BuiltArchitecture]) -> Table:
    """Four-column register breakdown per architecture, checked against the reference counts at N=16."""
    table = Table(title="Registers per section")
    for column in ("Architecture", "Pre", "FFT", "Post", "Reorder", "Total"):
        table.add_column(column, justify="left" if column == "Architecture" else "right")
    for built in builds:
        report = built.report
        expected = (
            REFERENCE_REGISTERS[built.spec.variant]
            if built.spec.size == 16 and built.spec.channels == 2
            else (None,) * 4
        )
        table.add_row(
            f"{built.spec.variant.label} (N={built.spec.size})",
            _count(report.pre_processing, expected[0]),
            _count(report.fft, expected[1]),
            _count(report.post_processing, expected[2]),
            _count(report.reordering, expected[3]),
            Text(str(report.total), style="bold"),
        )
    return table


def itemized_table(built: BuiltArchitecture) -> Table:
    """Every register line item of one build; reorder blocks not in the netlist are dimmed."""
    table = Table(title=f"{built.spec.variant.label} line items")
    table.add_column("Section")
    table.add_column("Block")
    table.add_column("Registers", justify="right")
    table.add_column("In netlist")
    for item in built.report.items:
        table.add_row(
            Text(item.section.value, style=SECTION_STYLES[item.section]),
            item.label,
            str(item.registers),
            "yes" if item.instantiated else Text("no", style="dim italic"),
        )
    table.add_row(
        "", Text("netlist census", style="bold"), str(built.circuit.registers), ""
    )
    return table


def check_table(title: str, checks: List[CheckResult]) -> Table:
    """Measured against expected value for each oracle check, colored by outcome."""
    table = Table(title=title)
    table.add_column("Check")
    table.add_column("Measured", justify="right")
    table.add_column("Expected", justify="right")
    table.add_column("Result")
    for check in checks:
        table.add_row(
            check.name,
            check.measured,
            check.expected,
            Text(check.outcome.name, style=OUTCOME_STYLES[check.outcome]),
        )
    return table


def interleaver_table(measured: InterleaverMeasurement) -> Table:
    """Pre-processing comparison: static rows for prior approaches, measured row for ours."""
    m, n = measured.channels, measured.size
    table = Table(title=f"Pre-processing for M={m}, N={n}")
    table.add_column("Pre-processing circuit")
    table.add_column("Memory elements", justify="right")
    table.add_column("Latency", justify="right")
    table.add_column("Control")
    table.add_row("Memory banks", str(m * n), str(n), "complex memory reads")
    table.add_row(
        "Multi-channel commutators",
        str(measured.formula_memory),
        str(measured.formula_latency),
        "complex pre-processing control",
    )
    table.add_row(
        f"{ArchitectureVariant.ARCH3.label} (measured)",
        _count(measured.memory, measured.formula_memory),
        _count(measured.latency, measured.formula_latency),
        "counter based",
    )
    return table


def summary_counts(checks: Dict[ArchitectureVariant, List[CheckResult]]) -> Text:
    failed = sum(1 for results in checks.values() for c in results if not c.passed)
    total = sum(len(results) for results in checks.values())
    if failed:
        return Text(f"{failed} of {total} checks failed", style=OUTCOME_STYLES[CheckOutcome.FAIL])
    return Text(f"all {total} checks passed", style=OUTCOME_STYLES[CheckOutcome.PASS])
