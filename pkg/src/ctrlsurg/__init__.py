"""Controlled algebraic surgery over finite metric control spaces."""
from __future__ import annotations

__version__ = "0.1.0"
