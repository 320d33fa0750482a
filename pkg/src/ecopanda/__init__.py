"""Decentralized dual-ascent solvers over time-varying networks.

Core modules:

- :mod:`ecopanda.graphnet` -- time-varying graphs, Metropolis mixing, joint spectrum
- :mod:`ecopanda.objective` -- agent-separable ridge quadratics
- :mod:`ecopanda.solvers` -- Eco-PANDA, PANDA, DIGing and run traces
- :mod:`ecopanda.theory` -- rate constants, admissible steps, diagnostics
- :mod:`ecopanda.harness` -- experiment configs, runs, outputs

The FastAPI service lives in :mod:`ecopanda.service`; ``ecopanda.cli`` is a
thin client for it.
"""

__version__ = "0.1.0"
