"""Flag-algebra upper bounds and permuton lower bounds for permutation packing densities."""

__version__ = "0.1.0"
