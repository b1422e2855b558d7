"""Rational sl(M|N) spin chains with periodic and open boundaries.

Graded tensor algebra, R-matrices, reflection matrices and their
classification, transfer matrices with an exact-diagonalization oracle,
analytical Bethe ansatz eigenvalues and a Bethe-equation solver.
"""

__version__ = "0.1.0"
