"""Two-stage text-guided redressing on synthetic paper dolls."""

from ._fashion_synth import *  # noqa: F401,F403
from ._fashion_synth import FashionError, StageModel

__all__ = [name for name in dir() if not name.startswith("_")]
