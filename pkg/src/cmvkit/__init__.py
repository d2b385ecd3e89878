"""Five-diagonal and Hessenberg representations of unitary operators built from Schur parameters."""
