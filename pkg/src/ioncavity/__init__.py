"""Ion crystals in a pumped optical cavity."""
from importlib.metadata import PackageNotFoundError, version

from .params import MHZ, MeanField, SystemParams

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = ["MHZ", "MeanField", "SystemParams", "__version__"]
