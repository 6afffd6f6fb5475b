"""Arithmetic pipeline fixture with definition and inheritance edges."""
