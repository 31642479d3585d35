from datetime import datetime
from functools import lru_cache
from pathlib import Path
from typing import Optional, List

from sqlalchemy import (
    create_engine, String, Integer, Float, DateTime, Text, ForeignKey, Index, UniqueConstraint
)
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column, relationship, sessionmaker

from config import RUNS_DB_URL, HOIKIT_CACHE_DIR


class Base(DeclarativeBase):
    pass


class Run(Base):
    """One training (or ablation arm) run"""
    __tablename__ = 'runs'

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    run_dir: Mapped[str] = mapped_column(Text, nullable=False)
    label: Mapped[Optional[str]] = mapped_column(String(100), nullable=True)  # e.g. "alpha=1.0"
    config_json: Mapped[str] = mapped_column(Text, nullable=False)
    status: Mapped[str] = mapped_column(String(20), nullable=False, default='running')  # running, completed, failed
    checkpoint_path: Mapped[Optional[str]] = mapped_column(Text, nullable=True)
    full_map: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    rare_map: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    nonrare_map: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    started_at: Mapped[datetime] = mapped_column(DateTime, nullable=False, default=datetime.utcnow)
    finished_at: Mapped[Optional[datetime]] = mapped_column(DateTime, nullable=True)

    epochs: Mapped[List["EpochMetric"]] = relationship(
        "EpochMetric", back_populates="run", cascade="all, delete-orphan", order_by="EpochMetric.epoch"
    )

    def __repr__(self):
        return f"<Run(id={self.id}, label='{self.label}', status='{self.status}')>"


class EpochMetric(Base):
    """Mean losses of one epoch, plus evaluation numbers when the epoch was evaluated"""
    __tablename__ = 'epoch_metrics'

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    run_id: Mapped[int] = mapped_column(Integer, ForeignKey('runs.id'), nullable=False)
    epoch: Mapped[int] = mapped_column(Integer, nullable=False)
    total_loss: Mapped[float] = mapped_column(Float, nullable=False)
    hoi_loss: Mapped[float] = mapped_column(Float, nullable=False)
    itm_loss: Mapped[float] = mapped_column(Float, nullable=False)
    full_map: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    rare_map: Mapped[Optional[float]] = mapped_column(Float, nullable=True)
    recorded_at: Mapped[datetime] = mapped_column(DateTime, nullable=False, default=datetime.utcnow)

    run: Mapped["Run"] = relationship("Run", back_populates="epochs")

    __table_args__ = (
        UniqueConstraint('run_id', 'epoch', name='uq_epoch_metric_run_epoch'),
    )


class ScoreCacheEntry(Base):
    """Memoized ITM score of one (image, sentence) pair"""
    __tablename__ = 'itm_scores'

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    image_key: Mapped[str] = mapped_column(String(128), nullable=False)  # sha256 of bytes or image id
    sentence: Mapped[str] = mapped_column(Text, nullable=False)
    score: Mapped[float] = mapped_column(Float, nullable=False)
    endpoint: Mapped[Optional[str]] = mapped_column(Text, nullable=True)
    created_at: Mapped[datetime] = mapped_column(DateTime, nullable=False, default=datetime.utcnow)

    __table_args__ = (
        UniqueConstraint('image_key', 'sentence', name='uq_itm_score_key'),
        Index('idx_itm_score_image', 'image_key'),
    )


SCORE_CACHE_URL = f"sqlite:///{HOIKIT_CACHE_DIR / 'itm_scores.db'}"


@lru_cache(maxsize=None)
def _session_factory(url: str):
    """Engine + session factory per database URL; tables created on first use"""
    if url.startswith('sqlite:///'):
        Path(url.removeprefix('sqlite:///')).parent.mkdir(parents=True, exist_ok=True)
    engine = create_engine(url, echo=False)
    Base.metadata.create_all(engine)
    return sessionmaker(bind=engine, expire_on_commit=False)


def get_session(url: Optional[str] = None):
    """Get a new database session (experiment store by default)"""
    return _session_factory(url or RUNS_DB_URL)()
