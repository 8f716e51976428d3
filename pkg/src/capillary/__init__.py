"""Numerical verification kernel for capillary hypersurfaces in space-form balls."""
import jax

jax.config.update("jax_enable_x64", True)

from .spaceform import SpaceForm  # noqa: E402

__version__ = "0.1.0"

__all__ = ["SpaceForm", "__version__"]
