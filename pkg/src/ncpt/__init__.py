"""Noncommutative probability toolkit for multi-agent hypothesis testing.

Subpackages cover: dense Hermitian linear algebra (`linalg`), the
event-state-operation calculus for classical and von Neumann models
(`event_state`), sequential-test simulation with an ordered-collection
coordinator (`simulate`), empirical order-effect statistics and model
fitting (`empirics`), and minimum-error detection with PVM/POVM
measurements (`detection`).
"""

__version__ = "0.1.0"
