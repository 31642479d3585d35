from typing import Optional


class HoikitError(Exception):
    """Base for every domain error raised by hoikit"""


class GroundingError(HoikitError, ValueError):
    """Triplet cannot be rendered (sentinel label) or match/prediction mismatch"""


class MatchingError(HoikitError, ValueError):
    """Non-finite cost matrix or sentinel-labeled ground truth"""


class EvaluationError(HoikitError, ValueError):
    """Predictions reference unknown categories or a protocol is misused"""


class IngestionError(HoikitError, ValueError):
    """Malformed annotation entry, reported with file and entry pointer"""

    def __init__(self, message: str, path: Optional[str] = None, entry: Optional[str] = None):
        self.path, self.entry = path, entry
        context = ':'.join(p for p in (path, entry) if p)
        super().__init__(f"{context}: {message}" if context else message)


class ScorerError(HoikitError):
    """Any failure of an ITM scorer; fatal for the training step"""


class ScorerTimeoutError(ScorerError):
    """Remote scorer did not answer within the configured timeout"""


class ScorerStatusError(ScorerError):
    """Remote scorer answered with a non-2xx status"""

    def __init__(self, status_code: int, body: str = ''):
        self.status_code = status_code
        super().__init__(f"ITM service returned HTTP {status_code}: {body[:200]}")


class MalformedResponseError(ScorerError):
    """Remote scorer answered with a body that breaks the wire contract"""


class UnknownImageError(ScorerError, KeyError):
    """Scorer has no annotation / bytes for the requested image"""


class TrainingDivergedError(HoikitError):
    """Loss became non-finite; a diagnostic dump path is attached"""

    def __init__(self, message: str, dump_path: Optional[str] = None):
        self.dump_path = dump_path
        super().__init__(f"{message} (diagnostics: {dump_path})" if dump_path else message)


class ScorerMutatedError(HoikitError):
    """Scorer state digest changed during training"""
