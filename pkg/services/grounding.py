"""
Grounding: HOI triplets -> natural-language sentences.

Sentences are rendered from the Jinja templates in prompts/grounding_<variant>.txt.
Positive / negative membership comes only from the Hungarian assignment.
"""
from functools import lru_cache
from typing import Sequence

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from config import PROMPTS_DIR
from models.enums import PromptVariant, Polarity
from models.errors import GroundingError
from models.schemas import HOITriplet, MatchResult, GroundedSentence
from models.vocabulary import Vocabulary


@lru_cache(maxsize=1)
def _env() -> Environment:
    return Environment(loader=FileSystemLoader(str(PROMPTS_DIR)), undefined=StrictUndefined, autoescape=False)


load_template = lambda variant: _env().get_template(f'grounding_{PromptVariant(variant).value}.txt').render


def ground_triplet(triplet: HOITriplet, vocab: Vocabulary, variant=PromptVariant.FULL) -> str:
    """Render one triplet with its (predicted) names, verbatim"""
    if vocab.is_sentinel(triplet.object_id, triplet.verb_id):
        raise GroundingError(f"Cannot ground a no-object / no-interaction triplet "
                             f"(object={triplet.object_id}, verb={triplet.verb_id})")
    if not (vocab.is_object(triplet.object_id) and vocab.is_verb(triplet.verb_id)):
        raise GroundingError(f"Label out of vocabulary (object={triplet.object_id}, verb={triplet.verb_id})")
    render = load_template(variant)
    return render(verb=vocab.verb_names[triplet.verb_id], object=vocab.object_names[triplet.object_id]).strip()


def partition_and_ground(predictions: Sequence[HOITriplet], match: MatchResult, vocab: Vocabulary,
                         variant=PromptVariant.FULL) -> tuple[list[GroundedSentence], list[GroundedSentence]]:
    """
    Split predictions into positive (matched) and negative (unmatched) sentences.

    Predictions carrying a sentinel label are dropped. Each sentence is weighted
    by its prediction's score and both lists are in prediction-index order.
    """
    if match.num_predictions != len(predictions):
        raise GroundingError(f"Match covers {match.num_predictions} predictions, got {len(predictions)}")
    matched = set(match.matched)
    positives, negatives = [], []
    for idx, triplet in enumerate(predictions):
        if vocab.is_sentinel(triplet.object_id, triplet.verb_id):
            continue
        polarity = Polarity.POSITIVE if idx in matched else Polarity.NEGATIVE
        sentence = GroundedSentence(ground_triplet(triplet, vocab, variant), polarity, idx,
                                    min(1.0, max(0.0, triplet.score)))
        (positives if polarity == Polarity.POSITIVE else negatives).append(sentence)
    return positives, negatives


def cap_negatives(sentences: Sequence[GroundedSentence], limit: int) -> list[GroundedSentence]:
    """Keep the `limit` highest-weight sentences (ties to the lower index), in source order"""
    if limit >= len(sentences):
        return list(sentences)
    ranked = sorted(sentences, key=lambda s: (-s.weight, s.source_index))[:max(limit, 0)]
    return sorted(ranked, key=lambda s: s.source_index)
