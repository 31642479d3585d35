from .grounding import ground_triplet, partition_and_ground, cap_negatives
from .scoring import ITMScorer, MockScorer, RemoteScorer, build_scorer
from .matching import hungarian, match_predictions
from .losses import itm_contrastive_loss, hoi_loss
from .evaluation import average_precision, hico_map, vcoco_role_ap, evaluate

__all__ = [
    'ground_triplet',
    'partition_and_ground',
    'cap_negatives',
    'ITMScorer',
    'MockScorer',
    'RemoteScorer',
    'build_scorer',
    'hungarian',
    'match_predictions',
    'itm_contrastive_loss',
    'hoi_loss',
    'average_precision',
    'hico_map',
    'vcoco_role_ap',
    'evaluate',
]
