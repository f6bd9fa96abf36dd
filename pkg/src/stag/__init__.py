"""stag: a desk-scale bibliographic knowledge graph pipeline and API."""

__version__ = "0.1.0"
