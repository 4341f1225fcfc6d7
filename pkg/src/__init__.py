"""
Two-Timescale Stochastic Approximation Lab
"""
__version__ = "1.0.0"
