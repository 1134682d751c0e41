"""Weighted geodesics and energy checks for vorticity lines in the pinned 3D Ginzburg-Landau model."""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.1.0"

from ._kernels import BACKEND
from .geometry import (ConvexBody, Scene, SingularityData, make_scene, make_singularities, symmetric_scene,
                       two_pair_scene)

__all__ = [
    "BACKEND",
    "ConvexBody",
    "Scene",
    "SingularityData",
    "make_scene",
    "make_singularities",
    "symmetric_scene",
    "two_pair_scene",
    "__version__",
]
