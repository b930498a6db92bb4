"""
The frozen CLIP-style text encoder, its tokenizer and prompt injection.
"""

from .model import (
    PromptSet,
    TextEncoder,
    TextFeature,
    encode,
    encode_batch,
    encode_prompted,
    encode_prompted_batch,
    init_prompts,
    nearest_vocab_words,
    trace_block_inputs,
)
from .vocabulary import TokenSequence, Vocabulary, tokenize
from .weights import (
    EncoderConfig,
    EncoderWeights,
    fingerprint,
    init_weights,
    load_weights,
    save_weights,
)

__all__ = [
    "EncoderConfig",
    "EncoderWeights",
    "PromptSet",
    "TextEncoder",
    "TextFeature",
    "TokenSequence",
    "Vocabulary",
    "encode",
    "encode_batch",
    "encode_prompted",
    "encode_prompted_batch",
    "fingerprint",
    "init_prompts",
    "init_weights",
    "load_weights",
    "nearest_vocab_words",
    "save_weights",
    "tokenize",
    "trace_block_inputs",
]
