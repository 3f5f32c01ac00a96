"""Mass-conservative IMEX relaxation Runge-Kutta solver for the
energy-regularized logarithmic Schroedinger equation in 1-D."""

__version__ = "0.1.0"
