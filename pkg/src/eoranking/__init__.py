"""Equal-opportunity ranking under disparate uncertainty."""

__version__ = "0.1.0"
