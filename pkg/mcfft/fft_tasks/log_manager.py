from enum import Enum
import logging
import os
import re
from typing import Optional

from platformdirs import user_log_dir
from rich.logging import RichHandler


class LogLevel(Enum):
    """Log levels with the Rich markup `mcfft logs` shows them in."""

    DEBUG = ("[blue bold]DEBUG[/blue bold]", logging.DEBUG)
    INFO = ("[green bold]INFO[/green bold]", logging.INFO)
    WARNING = ("[yellow bold]WARNING[/yellow bold]", logging.WARNING)
    ERROR = ("[red bold]ERROR[/red bold]", logging.ERROR)
    CRITICAL = ("[red bold reverse]CRITICAL[/red bold reverse]", logging.CRITICAL)


class LogManager:
    """Run log of the synthesizer, kept in one file across invocations.

    Module loggers under `mcfft.` propagate into the same file; with `verbose` they are
    echoed to the console through Rich as well.
    """

    LOGGER_NAME = "mcfft"

    def __init__(self, log_dir: Optional[str] = None, verbose: bool = False):
        log_dir = log_dir or user_log_dir("mcfft")
        self.LOG_FILE = os.path.expanduser(os.path.join(log_dir, "mcfft.log"))

        os.makedirs(os.path.dirname(self.LOG_FILE), exist_ok=True)

        self._configure_logger(verbose)

    def _configure_logger(self, verbose: bool):
        self.logger = logging.getLogger(self.LOGGER_NAME)
        self.logger.setLevel(logging.DEBUG)

        if self.logger.hasHandlers():
            for handler in list(self.logger.handlers):
                handler.close()
            self.logger.handlers.clear()

        file_formatter = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s")

        file_handler = logging.FileHandler(self.LOG_FILE)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(file_formatter)
        self.logger.addHandler(file_handler)

        if verbose:
            console = RichHandler(show_path=False, markup=True)
            console.setLevel(logging.DEBUG)
            self.logger.addHandler(console)

    def debug(self, message: str, *args):
        """Planning details: observed arrival phases, chosen switch origins."""
        self.log(message, LogLevel.DEBUG, *args)

    def info(self, message: str, *args):
        """One line per command and per finished build."""
        self.log(message, LogLevel.INFO, *args)

    def warning(self, message: str, *args):
        """A check that failed without aborting the command."""
        self.log(message, LogLevel.WARNING, *args)

    def error(self, message: str, *args):
        """A command that could not finish."""
        self.log(message, LogLevel.ERROR, *args)

    def log(self, message: str, level: LogLevel = LogLevel.DEBUG, *args):
        """Log a message with the specified level; `args` are %-formatted into it."""
        if args:
            message = message % args
        self.logger.log(level.value[1], message)

    def read_logs(self) -> str:
        """The log file with its level names replaced by Rich markup."""
        if not os.path.exists(self.LOG_FILE):
            return "No logs available."

        with open(self.LOG_FILE, "r") as f:
            logs = f.read()

        for level in LogLevel:
            logs = re.sub(f" {level.name} ", f" {level.value[0]} ", logs)

        return logs

    def clear_logs(self):
        """Truncate the log file; used by `mcfft logs --clear`."""
        with open(self.LOG_FILE, "w") as f:
            f.write("")

    def get_log_size(self) -> int:
        """Size of the log file in bytes, 0 when it does not exist."""
        if os.path.exists(self.LOG_FILE):
            return os.path.getsize(self.LOG_FILE)
        return 0

    def close(self):
        """Detach and close every handler so the file can be removed or reopened."""
        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)
