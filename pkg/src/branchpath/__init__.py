"""Path ensembles on branched simplicial complexes.

Conservation constraints and microstate counting for branch weights, lattice
path sums with entropic damping, and a weight-exchange collapse model.
"""

__version__ = "0.1.0"
