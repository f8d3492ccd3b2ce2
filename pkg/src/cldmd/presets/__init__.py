"""Shipped experiment presets (JSON documents)."""
