"""Toric-code memory simulator: lattices, anyon dynamics, decoding, analysis."""

from __future__ import annotations

__version__ = "0.1.0"
