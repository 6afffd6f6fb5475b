"""Mini web framework used as an end-to-end fixture."""
