"""Numerical laboratory for commutator methods on finite self-adjoint matrices."""
