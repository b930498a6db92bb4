"""
Curation and persistence of the text-to-text prompt dataset.
"""

from .client import FixtureLlmClient, HttpLlmClient, LlmClient
from .curation import (
    assemble_dataset,
    assemble_handcrafted,
    build_inputs,
    curate,
    generate_outputs,
    load_dataset,
    save_dataset,
)
from .records import (
    ClassRecord,
    PromptDataset,
    PromptPair,
    QueryTemplate,
    load_classes,
)

__all__ = [
    "ClassRecord",
    "FixtureLlmClient",
    "HttpLlmClient",
    "LlmClient",
    "PromptDataset",
    "PromptPair",
    "QueryTemplate",
    "assemble_dataset",
    "assemble_handcrafted",
    "build_inputs",
    "curate",
    "generate_outputs",
    "load_classes",
    "load_dataset",
    "save_dataset",
]
