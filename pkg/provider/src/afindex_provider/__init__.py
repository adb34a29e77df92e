"""Sentence-encoder adapter for the afindex embedding subprocess protocol.

Reads ``{"id": ..., "text": ...}`` JSON lines on stdin and writes the
embedding exchange format on stdout: a header object announcing the true
model dimension followed by one unit-normalized vector per input, in input
order. A nonzero exit status signals failure; diagnostics go to stderr.
"""

__version__ = "0.1.0"

from .encoders import EncoderLoadError, HashEncoder, make_encoder  # noqa: F401
from .serve import serve  # noqa: F401
