"""Sequence tagging for wet-lab protocol NER: feature CRF, BiLSTM-CRF,
BIO-constrained decoding, CoNLL/BRAT corpora and entity-level scoring."""
from .corpus import WNUT_SCHEME, Document, Entity, LabelScheme, Sentence, Token
from .crf import CrfModel, TrainConfig
from .utils import __version__

__all__ = ["WNUT_SCHEME", "Document", "Entity", "LabelScheme", "Sentence", "Token", "CrfModel", "TrainConfig", "__version__"]
