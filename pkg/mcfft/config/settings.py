from dataclasses import dataclass
from typing import List, Optional

from ..fft_tasks.status import ConfigError

TOLERANCE = 1e-9
DEFAULT_SEED = 2021
DEFAULT_POINTS = 16
DEFAULT_CHANNELS = 2
DEFAULT_FRAMES = 100

SUPPORTED_POINTS = (8, 16, 32, 64)
SUPPORTED_ARCHS = (1, 2, 3)
# Channel counts the generalized interleaver accepts; 1 means "feed one channel"
SUPPORTED_CHANNELS = (1, 2, 4, 8)
INTERLEAVER_CHANNELS = (2, 4, 8)

# Frames simulated when a builder observes a stream order to synthesize a reorder buffer
OBSERVATION_FRAMES = 6
STEADY_FRAME = 2


@dataclass
class RunConfig:
    """Settings for one command-line run, with defaults mirroring the 16-point, 2-channel instance."""

    arch: Optional[int] = None  # None builds all three
    points: int = DEFAULT_POINTS
    channels: int = DEFAULT_CHANNELS
    frames: int = DEFAULT_FRAMES
    seed: int = DEFAULT_SEED
    natural_order: bool = False
    out: Optional[str] = None
    cycles: Optional[int] = None
    dsd: Optional[int] = None
    clear: bool = False  # logs command: empty the log file
    log_dir: Optional[str] = None
    verbose: bool = False

    @property
    def archs(self) -> List[int]:
        """Architectures to run; without --arch, architecture 2 joins only at its fixed size."""
        if self.arch is not None:
            return [self.arch]
        fixed = self.points == 16 and self.channels <= 2
        return [a for a in SUPPORTED_ARCHS if a != 2 or fixed]

    @property
    def fed_channels(self) -> List[int]:
        """Channels that receive samples; a single-channel run feeds channel 0 only."""
        return list(range(self.channels)) if self.channels > 1 else [0]

    @property
    def build_channels(self) -> int:
        """Channel count the hardware is built for (one channel still uses the 2-channel datapath)."""
        return max(self.channels, 2)

    def validate(self) -> "RunConfig":
        """Check every field and raise ConfigError listing all problems found.

        Returns:
            The config itself, so calls can be chained

        Raises:
            ConfigError if any field is out of range
        """
        problems = []
        if self.arch is not None and self.arch not in SUPPORTED_ARCHS:
            problems.append(f"--arch must be one of {SUPPORTED_ARCHS}, got {self.arch}")
        if self.points not in SUPPORTED_POINTS:
            problems.append(f"--points must be one of {SUPPORTED_POINTS}, got {self.points}")
        if self.channels not in SUPPORTED_CHANNELS:
            problems.append(
                f"--channels must be one of {SUPPORTED_CHANNELS}, got {self.channels}"
            )
        if self.arch == 2 and self.points != 16:
            problems.append("architecture 2 is fixed at --points 16")
        if self.arch == 2 and self.channels > 2:
            problems.append("architecture 2 is fixed at --channels 2")
        if self.frames < 1:
            problems.append(f"--frames must be positive, got {self.frames}")
        if self.cycles is not None and self.cycles < 0:
            problems.append(f"--cycles must not be negative, got {self.cycles}")
        if self.dsd is not None and self.dsd < 1:
            problems.append(f"--dsd must be at least 1, got {self.dsd}")

        if problems:
            raise ConfigError(problems)
        return self
