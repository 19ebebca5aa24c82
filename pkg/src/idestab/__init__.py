"""Stability analysis of linear integral delay equations.

The system x(t) = integral_{-h}^{0} F(theta) x(t + theta) d theta is
exponentially stable exactly when every block matrix [L(i h/r, j h/r)]
built from the delay Lyapunov matrix is positive definite.  This package
computes the fundamental matrix, the Lyapunov matrix (direct integral and
collocation), the functionals behind the criterion, the block test with
instability witnesses, and two-parameter stability charts with
independent simulation/root oracles.
"""

__version__ = "0.1.0"
