"""Near-tip analysis of plane elastic cracks."""

__version__ = "0.1.0"
