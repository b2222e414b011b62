import os

import pytest

from mcfft.fft_tasks.architectures import ArchitectureVariant, build_architecture
from mcfft.fft_tasks.dfg import build_dif_dfg
from mcfft.fft_tasks.folding import parse_folding_sets

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


def read_golden(name: str):
    with open(os.path.join(GOLDEN_DIR, f"{name}.txt")) as f:
        return f.read()


@pytest.fixture
def golden():
    """Folding sets from a golden file, parsed."""
    return lambda name: parse_folding_sets(read_golden(name))


@pytest.fixture(scope="session")
def dfg16():
    return build_dif_dfg(16)


# Builds are deterministic and only read by the tests, so share them per session
@pytest.fixture(scope="session")
def arch1():
    return build_architecture(ArchitectureVariant.ARCH1)


@pytest.fixture(scope="session")
def arch2():
    return build_architecture(ArchitectureVariant.ARCH2)


@pytest.fixture(scope="session")
def arch3():
    return build_architecture(ArchitectureVariant.ARCH3)


@pytest.fixture(scope="session")
def natural_builds():
    return {
        variant: build_architecture(variant, natural_order=True)
        for variant in ArchitectureVariant
    }
