"""Floquet-Lindblad simulation and estimation toolkit for a Stark-mixed Rydberg receiver.

Modules
-------
model       operating points, Stark-mixing geometry, Floquet Hamiltonian blocks
liouville   vectorization and Liouvillian superoperators
pss         periodic steady state by harmonic balance
timedomain  direct master-equation integration and lock-in demodulation
estimation  noise model, estimators, response maps, Monte-Carlo RMSE
design      mixing-angle design metrics and optima
nonuniform  averaging over a nonuniform static bias
cli         experiment runner
"""

__version__ = "0.1.0"
