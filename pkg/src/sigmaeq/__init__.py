"""Explicit bounds and desk-scale searches for (x^q - 1)/(x - 1) = A m_1^e_1 ... m_s^e_s."""

__version__ = "0.1.0"
