"""
tbnorm: task-balanced normalization layers with hand-derived gradients and a
desk-scale class-incremental learning harness.
"""

__version__ = "0.1.0"
