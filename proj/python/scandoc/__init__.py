"""Numeric field extraction from scanned-document word streams.

Thin wrapper over the C++ core. The heavy lifting (image preprocessing,
word-table parsing, segmentation, classifiers, the dual-branch network and the
evaluation statistics) lives in the `scandoc._core` extension; this package
re-exports the bound operations.
"""

from scandoc._core import (  # noqa: F401
    Instance,
    OrderKey,
    PageWords,
    ScandocError,
    WordBox,
    adjust_contrast,
    apply_recipe,
    bonferroni,
    chi_square_2x2,
    delong,
    delong_ci,
    generate_corpus,
    instances_to_csv,
    morph,
    parse_numeric,
    parse_word_table,
    recipes,
    roc_auc,
    run_experiment,
    segment_report,
    serialize_word_table,
    split_dataset,
    stopword_count,
    to_grayscale,
    tokenize_normalize,
)

__all__ = [
    "Instance",
    "OrderKey",
    "PageWords",
    "ScandocError",
    "WordBox",
    "adjust_contrast",
    "apply_recipe",
    "bonferroni",
    "chi_square_2x2",
    "delong",
    "delong_ci",
    "generate_corpus",
    "instances_to_csv",
    "morph",
    "parse_numeric",
    "parse_word_table",
    "recipes",
    "roc_auc",
    "run_experiment",
    "segment_report",
    "serialize_word_table",
    "split_dataset",
    "stopword_count",
    "to_grayscale",
    "tokenize_normalize",
]
