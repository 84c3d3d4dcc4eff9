"""Safety filtering for robots among nonconvex obstacles using sampled-boundary distances."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
