"""Slot-accurate TSCH unicast simulator with pluggable receive-slot listening policies."""

__version__ = "0.1.0"
