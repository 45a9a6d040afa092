"""Robustness of node embeddings to structural poisoning attacks.

Subpackages and modules:

- ``graph``: simple undirected graphs, labels, structural statistics, IO
- ``attacks``: 14 edge addition / deletion / rewiring strategies
- ``embed``: DeepWalk, node2vec, HOPE, NetMF, GraRep
- ``evaluation``: node classification and network reconstruction pipelines
- ``data``: dataset registry, cached download, SBM generator
- ``harness``: config-driven experiment grids and reports
"""

__version__ = "0.1.0"
