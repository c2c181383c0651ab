"""Exact-arithmetic bar/cobar/W/Koszul constructions for reduced operads
of finitely generated chain complexes over Q or F_p."""

__version__ = "0.1.0"
