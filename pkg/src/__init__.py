"""Numerical lab for magnetic Dirac quasimodes and Strichartz-quotient scaling."""
__version__ = '1.0.0'
