"""chansim: a simulator for generalized error-correcting channels.

Codebooks decoded by classification, composable error sources, nested
layered channel stacks, and feedback sessions where the sender identifies
and inverts the receiver-side error function.
"""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
