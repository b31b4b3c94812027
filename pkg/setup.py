"""Setup script for the tipset finality calculator."""

from setuptools import setup, find_packages

setup(
    name="tipset-finality",
    version="0.1.0",
    description="Error-probability bounds for finality on tipset-based blockchains",
    packages=find_packages(exclude=("examples", "examples.*")),
    python_requires=">=3.10",
    install_requires=[
        "pydantic>=2.0.0",
        "numpy>=1.22",
        "scipy>=1.8",
    ],
    extras_require={
        "dev": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": [
            "tipset-finality=tipset_finality.cli:run",
        ],
    },
)
