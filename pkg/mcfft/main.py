#!/usr/bin/env python3
"""
mcfft - synthesize, simulate and verify folded multi-channel FFT architectures
"""

import sys

from .ui.cli import run


def main():
    """Run the mcfft command line."""
    sys.exit(run())


if __name__ == "__main__":
    main()
