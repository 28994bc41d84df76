"""dilate - Shape and time distortion loss for multi-step forecasting."""

from importlib.metadata import version

__version__ = version("dilate-cli")
