"""Lagrangian flow-map laboratory for compressible gas with a physical vacuum boundary."""
