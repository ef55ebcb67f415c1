"""Homogenization laboratory for contact Hamilton-Jacobi equations on the torus."""
