"""PHP webshell detection toolkit.

Three feature views of a script (compressed source tokens, pruned
syntax-node-type sequences, summary statistics) fused by a small trainable
detector, plus the mutation and sink-removal machinery used to harden it.
"""

from shellsift._core import (
    Detector,
    __version__,
    ast_types,
    coevolve,
    de_malicious,
    mutate,
    operator_names,
    sanitize_sinks,
    shannon_entropy,
    source_tokens,
    stat_features,
    verify_benign,
)

__all__ = [
    "Detector",
    "__version__",
    "ast_types",
    "coevolve",
    "de_malicious",
    "mutate",
    "operator_names",
    "sanitize_sinks",
    "shannon_entropy",
    "source_tokens",
    "stat_features",
    "verify_benign",
]
