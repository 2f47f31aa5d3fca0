"""Two-stage code-aided joint CFO/CPO estimation for multi-satellite
coherent combining: polar-coded BPSK chain, cross-entropy coarse search,
EM fine estimation, and a seeded Monte Carlo experiment harness."""

__version__ = "0.1.0"
