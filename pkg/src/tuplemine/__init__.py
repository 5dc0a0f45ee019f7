"""Mine relation-typed knowledge tuples from corpora of labeled linguistic graphs."""

__version__ = "0.1.0"
