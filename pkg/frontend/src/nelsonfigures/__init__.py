"""Post-hoc figure rendering for nelson-lab CSV experiment outputs."""

__version__ = "0.1.0"
