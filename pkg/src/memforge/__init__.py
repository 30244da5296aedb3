"""memforge: a literature-grounded knowledge-graph memory engine.

Builds a confidence-weighted pathology knowledge graph as long-term memory,
embeds it into a dense memory bank, and extracts sparse, relevance-scaled
working-memory blocks for injection into sequence models.
"""

__version__ = "0.1.0"
