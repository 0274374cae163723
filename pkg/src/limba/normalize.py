"""Text normalization shared by ingestion and feature extraction.

Unicode NFC plus whitespace collapse only. Case is left untouched:
orthography in the target languages is unstandardized, so folding
would destroy signal the classifiers need.
"""

import re
import unicodedata

_WS_RUN = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """NFC-normalize, collapse internal whitespace runs, trim the ends."""
    text = unicodedata.normalize("NFC", text)
    return _WS_RUN.sub(" ", text).strip()
