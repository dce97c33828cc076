"""Mean curvature flow of spacelike submanifolds in indefinite geometries.

Subpackages and modules
-----------------------
indefinite
    Indefinite orthogonal group: normal form, frames, tilt.
ambient
    Ambient metrics of signature (n, m), curvature, time functions.
submanifold
    Discretized immersions and their extrinsic geometry.
flow
    Time stepping of ``df/ds = H`` with runtime monitors.
radial
    Radial vector-field sections of the neutral tangent bundle.
cli
    Command-line entry point.
"""

__version__ = "0.1.0"

from . import ambient, flow, indefinite, radial, submanifold  # noqa: E402,F401
from ._kernels import BACKEND  # noqa: E402,F401
