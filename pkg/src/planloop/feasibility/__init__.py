"""Binary reachability checks backed by a probabilistic roadmap over the
world's free space, with collision kernels available as a compiled
extension or a pure-numpy fallback.
"""

from .graph import FeasibilityChecker, RoadmapParams, build_roadmap
from .kernels import KERNEL_BACKEND, get_kernels

__all__ = [
    "FeasibilityChecker",
    "RoadmapParams",
    "build_roadmap",
    "KERNEL_BACKEND",
    "get_kernels",
]
