"""Language-model backends.

A backend exposes ``vocab_size``, ``newline_id``, ``encode``, ``decode``,
``token_text`` and ``next_logits``.
"""

from __future__ import annotations

from .ngram import NGramBackend, NGramModel, softmax, train_ngram
from .remote import RemoteBackend, make_server, serve_in_thread
from .tokenizer import NEWLINE, UNK, Tokenizer, Vocab, segment, split_identifier

__all__ = [
    "NEWLINE",
    "UNK",
    "NGramBackend",
    "NGramModel",
    "RemoteBackend",
    "Tokenizer",
    "Vocab",
    "make_server",
    "segment",
    "serve_in_thread",
    "softmax",
    "split_identifier",
    "train_ngram",
]
