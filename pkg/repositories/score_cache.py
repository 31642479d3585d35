from typing import Dict, Iterable, Optional

from sqlalchemy import select
from sqlalchemy.dialects.sqlite import insert

from models.database import ScoreCacheEntry, SCORE_CACHE_URL
from .base import BaseRepository


class ScoreCacheRepository(BaseRepository):
    """Persistent ITM score memo keyed by (image key, sentence)"""

    db_url = SCORE_CACHE_URL

    def get_many(self, image_key: str, sentences: Iterable[str]) -> Dict[str, float]:
        """Cached scores for whichever of `sentences` are known"""
        sentences = list(set(sentences))
        if not sentences:
            return {}
        rows = self.session.execute(
            select(ScoreCacheEntry.sentence, ScoreCacheEntry.score)
            .where(ScoreCacheEntry.image_key == image_key, ScoreCacheEntry.sentence.in_(sentences))
        )
        return {sentence: score for sentence, score in rows}

    def put_many(self, image_key: str, scores: Dict[str, float], endpoint: Optional[str] = None):
        if not scores:
            return
        stmt = insert(ScoreCacheEntry).values([
            {'image_key': image_key, 'sentence': s, 'score': float(v), 'endpoint': endpoint}
            for s, v in scores.items()
        ])
        self.session.execute(stmt.on_conflict_do_nothing(index_elements=['image_key', 'sentence']))

    count = lambda self: self.session.query(ScoreCacheEntry).count()
