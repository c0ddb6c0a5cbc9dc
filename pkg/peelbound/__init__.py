"""
peelbound - Peel-and-Bound decision-diagram solver for asteroid routing
"""

__version__ = "1.0.0"
