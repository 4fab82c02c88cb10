from .formats import (read_conll2009, read_dep_treebank, read_span_props, write_conll2009, write_dep_treebank,
                      write_span_props)
from .resources import attach_external_reps, load_external_reps, load_word_embeddings, write_external_reps
from .synthetic import SyntheticConfig, gen_synthetic, to_word_based
from .types import (AlignmentError, AnnotatedSentence, Argument, Corpus, DepTree, ParseError, PredicateFrame,
                    TreeError, is_tree, validate_tree)
from .vocab import NULL_ROLE, PAD, UNK, Vocabulary

__all__ = [
    "read_conll2009", "write_conll2009", "read_dep_treebank", "write_dep_treebank", "read_span_props",
    "write_span_props", "load_word_embeddings", "load_external_reps", "write_external_reps",
    "attach_external_reps", "SyntheticConfig", "gen_synthetic", "to_word_based", "AnnotatedSentence",
    "Argument", "Corpus", "DepTree", "PredicateFrame", "ParseError", "AlignmentError", "TreeError",
    "is_tree", "validate_tree", "Vocabulary", "PAD", "UNK", "NULL_ROLE",
]
