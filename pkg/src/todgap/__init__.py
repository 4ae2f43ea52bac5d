"""Measure how LLM task-oriented dialog agents differ from human experts.

The harness regenerates every expert turn of a corpus under teacher forcing,
labels human and agent turns with dialog acts and tools, scores responses
with an LLM judge, and reports the behavior gap with significance tests.
"""

__version__ = "0.1.0"
