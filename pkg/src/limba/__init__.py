"""limba: desk-scale corpus engineering and language-model tooling for
low-resource languages.

The toolkit covers the full loop from raw text to a trained generative
model: corpus ingestion and splitting, language/variant identification,
quality filtering, PoS tagging, subword tokenization, translation and
speech evaluation metrics, a from-scratch recurrent language model, a
reproducible pipeline runner, and an HTTP annotation service for the
human experts who supply the labels.
"""

__version__ = "0.1.0"
