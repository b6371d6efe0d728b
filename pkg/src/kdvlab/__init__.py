"""Damped-driven KdV on the circle: spectral solver, Hill-spectrum actions and averaging diagnostics."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"
