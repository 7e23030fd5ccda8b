"""
permin
======
Periodic minimizers of weighted ergodic averages on hyperbolic systems.
"""

__version__ = "0.1.0"
