"""Periodic unit-cell analysis of corrugated shells.

Modules
-------
exprdsl   : expression language for periodic profiles
cellgrid  : unit cells, periodic fields and spectral calculus
graphiso  : linearized Monge-Ampere operator, kernels and correctors for graphs
surfiso   : Darboux operator and rotation fields for immersed periodic surfaces
meshiso   : periodic polyhedral meshes and their isometric modes
effpde    : effective strain algebra and the effective surface equation
cli       : the ``isoshell`` command
"""
from . import cellgrid, effpde, exprdsl, graphiso, meshiso, surfiso

__all__ = ["cellgrid", "effpde", "exprdsl", "graphiso", "meshiso", "surfiso"]
__version__ = "0.1.0"
