"""Spectral lab for the Dirichlet Laplacian in twisted and bent tubes."""

__version__ = "0.1.0"

# first line of every CSV file written by the package; bump when columns change
CSV_MARKER = "# wslab csv v1"
