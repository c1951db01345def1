"""Raw text to CoNLL-U preprocessing for the relation-extraction pipeline."""

__version__ = "0.1.0"
