"""Lexicon acquisition from unsegmented phone sequences paired with meaning sets."""
from .core import Dictionary, LexEntry, LexiconError, Utterance, canonical_id, split_id
from .parser import CostWeights, Parse, Placement, SearchLimits, best_parse, brute_force_parse, segment_phones
from .learner import TrainConfig, TrainingReport, maintain, process_utterance, train
from .evaluation import Metrics, boundary_metrics, lexicon_metrics, token_metrics

__all__ = [
    "CostWeights",
    "Dictionary",
    "LexEntry",
    "LexiconError",
    "Metrics",
    "Parse",
    "Placement",
    "SearchLimits",
    "TrainConfig",
    "TrainingReport",
    "Utterance",
    "best_parse",
    "boundary_metrics",
    "brute_force_parse",
    "canonical_id",
    "lexicon_metrics",
    "maintain",
    "process_utterance",
    "segment_phones",
    "split_id",
    "token_metrics",
    "train",
]
