"""Desk-scale computations around primes of the form x^2 + n y^2."""

__version__ = "0.1.0"
