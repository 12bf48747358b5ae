"""Hot spots of Neumann eigenfunctions on warped products and of heat flow on cones."""

__version__ = "0.1.0"
