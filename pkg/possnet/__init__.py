"""
possnet - possibilistic classification of network Bell scenarios.
"""

__version__ = "1.0.0"
