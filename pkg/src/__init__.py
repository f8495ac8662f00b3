"""
Vector Equilibrium Toolkit
Hypothesis checks, discretization, Frank-Wolfe solver and certification
for weighted vector equilibrium problems with logarithmic interaction.
"""

__version__ = "1.0.0"
__description__ = "Solver and verifier for vector equilibrium problems in logarithmic potential theory"
