"""Numeric tolerances shared by every module."""

# exact-algebra checks (norms, Hermiticity, eigenvalue residuals)
EXACT = 1e-10
# normalisation of state vectors and density-matrix traces
NORM = 1e-12
# smallest eigenvalue still accepted as positive semidefinite
PSD = -1e-10
# MLE stops once the per-count log-likelihood gain drops below this
MLE_FTOL = 1e-10
MLE_MAXITER = 100_000
# a momentum sector lighter than this cannot be conditioned on
SECTOR_MIN_PROB = 1e-9
