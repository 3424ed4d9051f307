"""Oscillatory integrals with torus symmetry: exact localization and
asymptotics near singular momentum levels.

Modules:
    models       linear Hamiltonian torus actions and the round sphere chart
    amplitudes   poly * gaussian * bump amplitude algebra and its parser
    oscillatory  quadrature, closed gaussian forms, inner stationary phase
    desing       dyadic desingularization and asymptotic order fits
    residues     fixed-point localization, piecewise measures, JK residues
    cli          scenario runner behind the ``equiloc`` console script
"""

__version__ = "0.1.0"
