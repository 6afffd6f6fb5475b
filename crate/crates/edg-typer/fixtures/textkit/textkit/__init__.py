"""Text utilities fixture with pre-existing partial annotations."""
