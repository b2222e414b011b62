import argparse
import csv
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, List, Optional, Sequence

from rich.console import Console

from ..config.settings import (
    DEFAULT_CHANNELS,
    DEFAULT_FRAMES,
    DEFAULT_POINTS,
    DEFAULT_SEED,
    RunConfig,
)
from ..fft_tasks.architectures import (
    DATAPATH_CHANNELS,
    ArchitectureVariant,
    BuiltArchitecture,
    build_architecture,
    build_interleaver,
    channel_streams,
    core_schedule,
    has_datapath,
    input_lanes,
    measure_interleaver,
    random_frames,
    verify_architecture,
)
from ..fft_tasks.folding import minimize_registers
from ..fft_tasks.log_manager import LogManager
from ..fft_tasks.netlist import Circuit, build_dsd, simulate
from ..fft_tasks.status import CheckResult, ConfigError, McfftError, UnsupportedConfigurationError
from .components.report_table import (
    check_table,
    interleaver_table,
    itemized_table,
    register_table,
    summary_counts,
)


EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected 'on' or 'off', got {value!r}")
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--arch", type=int, choices=(1, 2, 3), help="architecture (default: all)")
    common.add_argument("--points", type=int, default=DEFAULT_POINTS, help="FFT size N")
    common.add_argument("--channels", type=int, default=DEFAULT_CHANNELS, help="channel count M")
    common.add_argument("--frames", type=int, default=DEFAULT_FRAMES, help="frames per channel")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed")
    common.add_argument(
        "--natural-order", type=_on_off, default=False, metavar="{on,off}",
        help="reorder outputs to natural order",
    )
    common.add_argument("--out", help="directory for CSV reports and traces")
    common.add_argument("--log-dir", help="log directory (default: platform log dir)")
    common.add_argument("--verbose", action="store_true", help="also log to the console")

    parser = argparse.ArgumentParser(
        prog="mcfft",
        description="Multi-channel folded FFT architecture synthesizer and simulator",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("build", parents=[common], help="build and print register reports")
    commands.add_parser("verify", parents=[common], help="check architectures against oracles")
    trace = commands.add_parser("trace", parents=[common], help="write a CSV port trace")
    trace.add_argument("--cycles", type=int, help="cycles to simulate")
    trace.add_argument("--dsd", type=int, help="trace a standalone k-DSD instead")
    commands.add_parser("report", parents=[common], help="register summary and interleaver comparison")
    logs = commands.add_parser("logs", parents=[common], help="show the run log")
    logs.add_argument("--clear", action="store_true", help="empty the log file instead")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        arch=args.arch,
        points=args.points,
        channels=args.channels,
        frames=args.frames,
        seed=args.seed,
        natural_order=args.natural_order,
        out=args.out,
        cycles=getattr(args, "cycles", None),
        dsd=getattr(args, "dsd", None),
        clear=getattr(args, "clear", False),
        log_dir=args.log_dir,
        verbose=args.verbose,
    )


def _out_path(config: RunConfig, name: str) -> Optional[str]:
    if not config.out:
        return None
    os.makedirs(config.out, exist_ok=True)
    return os.path.join(config.out, name)


def _write_csv(path: Optional[str], header: Sequence[str], rows: List[Sequence]):
    if not path:
        return
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _require_datapath(arch: int, channels: int, command: str):
    variant = ArchitectureVariant(arch)
    if not has_datapath(variant, channels):
        supported = ", ".join(map(str, DATAPATH_CHANNELS[variant]))
        raise ConfigError(
            [f"{command} needs a complete datapath; {variant.label} has one for --channels {supported}"]
        )


def _datapath_archs(config: RunConfig, command: str) -> List[int]:
    """Architectures with a complete datapath at the configured channel count."""
    archs = [
        a for a in config.archs if has_datapath(ArchitectureVariant(a), config.build_channels)
    ]
    if not archs:
        _require_datapath(config.archs[0], config.build_channels, command)
    return archs


def _build_all(
    config: RunConfig, archs: Sequence[int], log_manager: Optional[LogManager]
) -> List[BuiltArchitecture]:
    return [
        build_architecture(
            ArchitectureVariant(arch),
            config.points,
            config.build_channels,
            config.natural_order,
            log_manager,
        )
        for arch in archs
    ]


def cmd_build(config: RunConfig, console: Console, log_manager=None) -> int:
    datapaths = [
        a for a in config.archs if has_datapath(ArchitectureVariant(a), config.build_channels)
    ]
    interleavers = [a for a in config.archs if a not in datapaths]
    if interleavers:
        _build_interleavers(config, interleavers, console)
    if not datapaths:
        return EXIT_OK

    builds = _build_all(config, datapaths, log_manager)
    rows = []
    for built in builds:
        console.print(built.circuit.dump(), markup=False, highlight=False)
        console.print(itemized_table(built))
        for note in built.notes:
            console.print(f"[dim]{note}[/dim]")
        rows.extend(
            [built.spec.variant.value, item.section.value, item.label, item.registers, int(item.instantiated)]
            for item in built.report.items
        )
    console.print(register_table(builds))
    _write_csv(
        _out_path(config, "registers.csv"),
        ["arch", "section", "block", "registers", "instantiated"],
        rows,
    )
    return EXIT_OK


def _build_interleavers(config: RunConfig, archs: Sequence[int], console: Console):
    """Architectures without a datapath at this channel count: the interleaver and core schedule."""
    rows = []
    for arch in archs:
        variant = ArchitectureVariant(arch)
        circuit = build_interleaver(config.channels, variant, config.points)
        console.print(circuit.dump(), markup=False, highlight=False)
        try:
            lifetime = minimize_registers(core_schedule(variant, config.points, config.channels))
        except UnsupportedConfigurationError as e:
            console.print(
                f"{variant.label}, M={config.channels}: interleaver registers "
                f"{circuit.registers}; {e}"
            )
            rows.append([arch, circuit.registers, "", ""])
            continue
        console.print(
            f"{variant.label}, M={config.channels}: interleaver registers "
            f"{circuit.registers}, core lifetime registers {lifetime.fft} "
            f"(unshared {lifetime.unshared})"
        )
        rows.append([arch, circuit.registers, lifetime.fft, lifetime.unshared])
    _write_csv(
        _out_path(config, "interleavers.csv"),
        ["arch", "interleaver_registers", "fft_registers", "fft_unshared"],
        rows,
    )


def cmd_verify(config: RunConfig, console: Console, log_manager=None) -> int:
    archs = _datapath_archs(config, "verify")
    fed = config.fed_channels

    def run(arch: int):
        built = build_architecture(
            ArchitectureVariant(arch),
            config.points,
            config.build_channels,
            config.natural_order,
            log_manager,
        )
        return verify_architecture(built, config.frames, config.seed, fed, log_manager)

    results: Dict[ArchitectureVariant, List[CheckResult]] = {}
    with ThreadPoolExecutor(max_workers=len(archs)) as executor:
        futures = {executor.submit(run, arch): ArchitectureVariant(arch) for arch in archs}
        for future in as_completed(futures):
            results[futures[future]] = future.result()

    rows = []
    for variant in sorted(results, key=lambda v: v.value):
        console.print(check_table(variant.label, results[variant]))
        rows.extend(
            [variant.value, c.name, c.measured, c.expected, c.outcome.name]
            for c in results[variant]
        )
    console.print(summary_counts(results))
    _write_csv(
        _out_path(config, "verify.csv"),
        ["arch", "check", "measured", "expected", "outcome"],
        rows,
    )
    failed = any(not c.passed for checks in results.values() for c in checks)
    if failed and log_manager:
        log_manager.error("Verification failed")
    return EXIT_FAILED if failed else EXIT_OK


def _dsd_demo(k: int) -> Circuit:
    """Two serial channels into a k-DSD: channel 0 on lane 1, channel 1 on lane 0."""
    circuit = Circuit(f"dsd{k}-demo", input_lanes(2))
    outs = circuit.embed(build_dsd(k), {"in0": "ch1", "in1": "ch0"}, "dsd")
    circuit.set_outputs([outs["out0"], outs["out1"]])
    return circuit


def cmd_trace(config: RunConfig, console: Console, log_manager=None) -> int:
    data = random_frames(config.points, config.frames, config.fed_channels, config.seed)
    if config.dsd:
        circuit = _dsd_demo(config.dsd)
        probes = circuit.inputs + circuit.outputs
        cycles = config.cycles if config.cycles is not None else config.frames * config.points
        streams = channel_streams(data)
        name = f"trace-dsd{config.dsd}.csv"
    else:
        arch = config.arch or 1
        _require_datapath(arch, config.build_channels, "trace")
        built = build_architecture(
            ArchitectureVariant(arch),
            config.points,
            config.build_channels,
            config.natural_order,
            log_manager,
        )
        circuit = built.circuit
        probes = built.input_lanes + built.pre_lanes + built.output_lanes
        period = built.schedule.folding_factor
        cycles = (
            config.cycles
            if config.cycles is not None
            else config.frames * period + built.latency
        )
        streams = channel_streams(data, stride=built.stride)
        name = f"trace-arch{arch}.csv"

    trace = simulate(circuit, streams, cycles, probes)
    path = _out_path(config, name) or name
    trace.write_csv(path)
    console.print(f"Wrote {cycles} cycles of {len(probes)} ports to {path}")
    return EXIT_OK


def cmd_report(config: RunConfig, console: Console, log_manager=None) -> int:
    channels = config.build_channels
    builds = [
        build_architecture(ArchitectureVariant(a), config.points, 2, config.natural_order, log_manager)
        for a in config.archs
    ]
    if builds:
        console.print(register_table(builds))
        _write_csv(
            _out_path(config, "register-summary.csv"),
            ["arch", "points", "pre", "fft", "post", "reorder", "total"],
            [[b.spec.variant.value, b.spec.size, *b.report.as_row()] for b in builds],
        )

    measured = measure_interleaver(channels, ArchitectureVariant.ARCH3, config.points)
    console.print(interleaver_table(measured))
    _write_csv(
        _out_path(config, "interleaver-comparison.csv"),
        ["circuit", "channels", "points", "memory", "latency", "formula_memory", "formula_latency"],
        [
            ["memory banks", channels, config.points, channels * config.points, config.points, "", ""],
            [
                "arch3 interleaver",
                channels,
                config.points,
                measured.memory,
                measured.latency,
                measured.formula_memory,
                measured.formula_latency,
            ],
        ],
    )
    ok = (measured.memory, measured.latency) == (
        measured.formula_memory,
        measured.formula_latency,
    )
    return EXIT_OK if ok else EXIT_FAILED


def cmd_logs(config: RunConfig, console: Console, log_manager=None) -> int:
    """Print the run log with colored levels, or empty it with --clear."""
    if config.clear:
        log_manager.clear_logs()
        console.print("Log cleared")
        return EXIT_OK
    console.print(log_manager.read_logs(), highlight=False)
    console.print(f"[dim]{log_manager.LOG_FILE}: {log_manager.get_log_size()} bytes[/dim]")
    return EXIT_OK


COMMANDS = {
    "build": cmd_build,
    "verify": cmd_verify,
    "trace": cmd_trace,
    "report": cmd_report,
    "logs": cmd_logs,
}


def run(argv: Optional[Sequence[str]] = None, console: Optional[Console] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    console = console or Console()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    config = config_from_args(args)
    try:
        config.validate()
    except ConfigError as e:
        console.print(f"[red bold]usage error:[/red bold] {e}")
        return EXIT_USAGE

    log_manager = LogManager(config.log_dir, config.verbose)
    try:
        log_manager.info(f"mcfft {args.command}: {config}")
        return COMMANDS[args.command](config, console, log_manager)
    except ConfigError as e:
        console.print(f"[red bold]usage error:[/red bold] {e}")
        return EXIT_USAGE
    except McfftError as e:
        log_manager.error(f"{args.command} failed: {e}")
        console.print(f"[red bold]error:[/red bold] {e}")
        return EXIT_FAILED
    finally:
        log_manager.close()
