"""Dyadic harmonic analysis toolkit for two-weight testing experiments."""

from .grid import CubeId, GridSpec, parse_cube, format_cube

__all__ = ["CubeId", "GridSpec", "parse_cube", "format_cube"]
