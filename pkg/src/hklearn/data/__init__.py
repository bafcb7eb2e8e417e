"""Bundled fixtures so examples and tests run offline."""

from importlib import resources
from pathlib import Path


def fixture_path(name: str = "two_moons.csv") -> Path:
    """Filesystem path of a bundled data file."""
    return Path(resources.files(__name__) / name)
