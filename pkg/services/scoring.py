"""
ITM scorers: a deterministic mock oracle and a cached remote adapter.

Both honour the same contract: `score(image, sentences)` returns one finite,
nonnegative score per sentence, in order, and the scorer never changes
during training (`state_digest`).
"""
import hashlib
import io
import json
import threading
from pathlib import Path
from typing import Iterable, Mapping, Optional, Protocol, Sequence, Union

import numpy as np
from PIL import Image

from models.configs import MockScorerConfig
from models.enums import PromptVariant, ScorerKind
from models.errors import UnknownImageError
from models.results import ITMScoreVector
from models.schemas import ImageAnnotation
from models.vocabulary import Vocabulary
from repositories.score_cache import ScoreCacheRepository
from services.grounding import ground_triplet
from utils.itm_client import ITMClient

MEMORY_SCHEME = 'memory://'

ImageInput = Union[ImageAnnotation, str, bytes]


class ITMScorer(Protocol):
    def score(self, image: ImageInput, sentences: Sequence[str]) -> ITMScoreVector: ...

    def state_digest(self) -> str: ...


_sha256 = lambda payload: hashlib.sha256(payload if isinstance(payload, bytes) else payload.encode('utf-8')).hexdigest()

positive_sentences = lambda annotation, vocab: frozenset(
    ground_triplet(t, vocab, PromptVariant.FULL) for t in annotation.gt_triplets
)


def _noise(cfg: MockScorerConfig, image_id: str, sentence: str) -> float:
    if cfg.noise_sigma == 0:
        return 0.0
    seed = int(_sha256(f'{cfg.seed}\x1f{image_id}\x1f{sentence}')[:16], 16)
    return float(np.random.default_rng(seed).normal(0.0, cfg.noise_sigma))


def mock_oracle_score(annotation: ImageAnnotation, sentence: str, cfg: MockScorerConfig,
                      vocab: Vocabulary) -> float:
    """positive_level if `sentence` is the full grounding of a GT triplet, else negative_level; plus seeded noise"""
    level = cfg.positive_level if sentence in positive_sentences(annotation, vocab) else cfg.negative_level
    return max(0.0, level + _noise(cfg, annotation.image_id, sentence))


class MockScorer:
    """Deterministic stand-in for a frozen VLM, driven by ground truth"""

    def __init__(self, annotations: Iterable[ImageAnnotation], vocab: Vocabulary,
                 cfg: MockScorerConfig = MockScorerConfig()):
        self.annotations = {a.image_id: a for a in annotations}
        self.vocab, self.cfg = vocab, cfg
        self._positives = {}

    def _annotation(self, image: ImageInput) -> ImageAnnotation:
        if isinstance(image, ImageAnnotation):
            return self.annotations.get(image.image_id, image)
        if isinstance(image, str) and image in self.annotations:
            return self.annotations[image]
        raise UnknownImageError(f"Mock scorer has no annotation for image {image!r:.80}")

    def score(self, image: ImageInput, sentences: Sequence[str]) -> ITMScoreVector:
        annotation = self._annotation(image)
        positives = self._positives.get(annotation.image_id)
        if positives is None:
            positives = self._positives[annotation.image_id] = positive_sentences(annotation, self.vocab)
        cfg = self.cfg
        return ITMScoreVector(scores=[
            max(0.0, (cfg.positive_level if s in positives else cfg.negative_level) + _noise(cfg, annotation.image_id, s))
            for s in sentences
        ])

    def state_digest(self) -> str:
        state = {
            'kind': ScorerKind.MOCK.value,
            'config': self.cfg.model_dump(),
            'positives': {i: sorted(positive_sentences(a, self.vocab)) for i, a in sorted(self.annotations.items())},
        }
        return _sha256(json.dumps(state, sort_keys=True))


def _png_bytes(image: Image.Image) -> bytes:
    buffer = io.BytesIO()
    image.save(buffer, format='PNG')
    return buffer.getvalue()


class RemoteScorer:
    """
    Scores against a remote ITM service.

    Results are memoized per (image key, sentence), where the image key is the
    SHA-256 of the image bytes (or the image id when no bytes are available).
    The process-local map is backed by the SQLite score cache unless
    `persistent=False`.
    """

    def __init__(self, client: ITMClient, images: Optional[Mapping[str, Union[Image.Image, bytes]]] = None,
                 cache_url: Optional[str] = None, persistent: bool = True):
        self.client = client
        self.images = dict(images or {})
        self.cache_url, self.persistent = cache_url, persistent
        self._memo: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()

    network_calls = property(lambda self: self.client.network_calls)

    def _image_bytes(self, image: ImageInput) -> tuple[Optional[bytes], str]:
        """(bytes or None, fallback id)"""
        if isinstance(image, bytes):
            return image, ''
        image_id, ref = (image.image_id, image.image_ref) if isinstance(image, ImageAnnotation) else (image, image)
        for key in (image_id, ref):
            found = self.images.get(key)
            if found is not None:
                return (found if isinstance(found, bytes) else _png_bytes(found)), image_id
        if ref and not ref.startswith(MEMORY_SCHEME) and Path(ref).is_file():
            return Path(ref).read_bytes(), image_id
        return None, image_id

    def score(self, image: ImageInput, sentences: Sequence[str]) -> ITMScoreVector:
        sentences = list(sentences)
        if not sentences:
            return ITMScoreVector(scores=[])
        data, image_id = self._image_bytes(image)
        key = _sha256(data) if data is not None else image_id

        with self._lock:
            missing = list(dict.fromkeys(s for s in sentences if (key, s) not in self._memo))
        if missing and self.persistent:
            with ScoreCacheRepository.transaction(self.cache_url) as repo:
                stored = repo.get_many(key, missing)
            with self._lock:
                self._memo.update({(key, s): v for s, v in stored.items()})
            missing = [s for s in missing if s not in stored]

        if missing:
            if data is None:
                raise UnknownImageError(f"No image bytes for {image_id!r} and {len(missing)} uncached sentences")
            fetched = dict(zip(missing, self.client.score(data, missing)))
            print(f"[ITM] Scored {len(missing)} sentences for image {key[:12]} ({self.client.network_calls} calls so far)")
            with self._lock:
                self._memo.update({(key, s): v for s, v in fetched.items()})
            if self.persistent:
                with ScoreCacheRepository.transaction(self.cache_url) as repo:
                    repo.put_many(key, fetched, endpoint=self.client.endpoint)

        with self._lock:
            return ITMScoreVector(scores=[self._memo[(key, s)] for s in sentences])

    state_digest = lambda self: _sha256(json.dumps({'kind': ScorerKind.REMOTE.value, 'endpoint': self.client.endpoint}))


def remote_score(endpoint: str, image_bytes: bytes, sentences: Sequence[str], **client_kwargs) -> ITMScoreVector:
    """One-shot remote scoring without the persistent cache"""
    client = ITMClient(endpoint, **client_kwargs)
    try:
        return RemoteScorer(client, persistent=False).score(image_bytes, sentences)
    finally:
        client.close()


def build_scorer(kind, annotations: Iterable[ImageAnnotation] = (), vocab: Optional[Vocabulary] = None,
                 mock_config: MockScorerConfig = MockScorerConfig(), endpoint: Optional[str] = None,
                 images: Optional[Mapping] = None, cache_url: Optional[str] = None) -> ITMScorer:
    kind = ScorerKind(kind)
    if kind == ScorerKind.MOCK:
        if vocab is None:
            raise ValueError("Mock scorer needs a vocabulary")
        return MockScorer(annotations, vocab, mock_config)
    return RemoteScorer(ITMClient(endpoint), images=images, cache_url=cache_url)
