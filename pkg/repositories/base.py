from contextlib import contextmanager
from typing import Optional

from models.database import get_session


class BaseRepository:
    """Base repository with session management"""
    db_url: Optional[str] = None  # None: experiment store

    def __init__(self, session):
        self.session = session

    @classmethod
    @contextmanager
    def transaction(cls, url: Optional[str] = None):
        """Context manager for transactional operations"""
        session = get_session(url or cls.db_url)
        try:
            yield cls(session)
            session.commit()
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def save(self, row):
        """Add a row and flush to get its ID"""
        self.session.add(row)
        self.session.flush()
        return row
