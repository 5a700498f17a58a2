"""Natural-logic tableau prover with abductive acquisition of lexical relations."""

from .abduction import AbductionConfig, ClosingSet, abduce
from .kb import KnowledgeBase, Relation, RelKind, add_relation, load_kb, save_kb
from .learner import LearnConfig, Metrics, Problem, cross_validate, evaluate, learn
from .llf import Term, beta_reduce, format_llf, parse_llf
from .tableau import ProverVerdict, Sign, classify, export_proof

__all__ = [
    "AbductionConfig",
    "ClosingSet",
    "KnowledgeBase",
    "LearnConfig",
    "Metrics",
    "Problem",
    "ProverVerdict",
    "RelKind",
    "Relation",
    "Sign",
    "Term",
    "abduce",
    "add_relation",
    "beta_reduce",
    "classify",
    "cross_validate",
    "evaluate",
    "export_proof",
    "format_llf",
    "learn",
    "load_kb",
    "parse_llf",
    "save_kb",
]
