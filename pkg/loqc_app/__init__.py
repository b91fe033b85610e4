"""
Linear Optics C-sign Gate Analysis
Simulates non-deterministic linear-optical C-sign gates under ancilla
production and detection inefficiency.
"""

import logging

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())
