from .run import RunRepository
from .score_cache import ScoreCacheRepository

__all__ = ['RunRepository', 'ScoreCacheRepository']
