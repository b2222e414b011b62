from setuptools import setup, find_packages

# Read requirements
with open("requirements.txt") as f:
    requirements = f.read().splitlines()

setup(
    name="mcfft",
    version="0.1",
    packages=find_packages(include=["mcfft", "mcfft.*"]),
    install_requires=requirements,
    extras_require={"test": ["pytest"]},
    python_requires=">=3.10",
    entry_points={
        "console_scripts": [
            "mcfft=mcfft.main:main",
        ],
    },
    description="Synthesize, simulate and verify folded multi-channel FFT architectures",
)
