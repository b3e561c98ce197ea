"""PINN solver for the conformable time-fractional diffusion equation."""

from cfpinn.graph import Graph, Node

__all__ = ["Graph", "Node"]
__version__ = "0.1.0"
