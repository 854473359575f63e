"""Part-based landmark localization with auxiliary parts discovered from unannotated regions."""
from .core import PARTS, GrayImage, LandmarkSet, Patch, load_dataset

__version__ = "0.1.0"

__all__ = ["PARTS", "GrayImage", "LandmarkSet", "Patch", "load_dataset", "__version__"]
