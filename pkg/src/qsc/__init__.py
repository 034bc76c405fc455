"""qsc: binary sparse coding on QUBO solvers.

A classical, desk-scale implementation of a quantum-annealer-style sparse
coding pipeline: images are compressed through a bottleneck autoencoder,
encoded as binary sparse codes by minimizing a QUBO energy (exhaustive,
simulated-annealing, or matching-pursuit backends), optionally compiled
onto a chimera hardware graph via clique embedding, and fed to linear SVM
or MLP classification heads.  A thermodynamics module analyzes solver
spectra (partition function, free energy, and its second derivative in the
sparsity trade-off).
"""

__version__ = "0.1.0"
