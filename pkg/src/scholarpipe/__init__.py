"""Task-aware hybrid retrieval-augmented generation for scholarly assistance."""

__version__ = "0.1.0"
