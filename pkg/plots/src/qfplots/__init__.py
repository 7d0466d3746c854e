"""Render experiment figures from fingerprinting-harness CSV outputs."""

__version__ = "1.0.0"

from .figures import FigureKind, FigureSpec, render

__all__ = ["FigureKind", "FigureSpec", "render", "__version__"]
