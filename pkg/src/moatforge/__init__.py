"""Exact-rational primal-dual Steiner tree toolkit: terminal merge forests,
moat-growing duals, a scale-or-contract solver, oracles and audits."""

__version__ = "0.1.0"
