"""Question-answer generation over reconstructed scenes."""

from .answers import (
    AnswerError,
    DerivedAnswer,
    MissingEntityError,
    derive_answer,
    entity_name,
    entity_position,
    parse_entity,
)
from .generate import (
    BENCH_TARGETS,
    GenerationError,
    QAItem,
    SceneSplit,
    ambiguity_ratio,
    enumerate_bindings,
    filter_ambiguous,
    generate_dataset,
    instantiate,
    read_items_jsonl,
    split_scenes,
    write_items_jsonl,
)
from .templates import (
    SUBCATEGORY_DISPLAY,
    SUBCATEGORY_ORDER,
    Template,
    TemplateError,
    TemplateManifest,
    default_manifest,
    load_manifest,
)

__all__ = [
    "AnswerError",
    "BENCH_TARGETS",
    "DerivedAnswer",
    "GenerationError",
    "MissingEntityError",
    "QAItem",
    "SceneSplit",
    "SUBCATEGORY_DISPLAY",
    "SUBCATEGORY_ORDER",
    "Template",
    "TemplateError",
    "TemplateManifest",
    "ambiguity_ratio",
    "default_manifest",
    "derive_answer",
    "entity_name",
    "entity_position",
    "enumerate_bindings",
    "filter_ambiguous",
    "generate_dataset",
    "instantiate",
    "load_manifest",
    "parse_entity",
    "read_items_jsonl",
    "split_scenes",
    "write_items_jsonl",
]
