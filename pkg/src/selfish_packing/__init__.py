"""Selfish bin packing games with proportional cost."""
