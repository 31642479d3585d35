from enum import Enum

class BoxForm(str, Enum):
    """Box coordinate layouts"""
    CENTER = "center"      # (cx, cy, w, h)
    CORNERS = "corners"    # (x1, y1, x2, y2)

class Benchmark(str, Enum):
    """Vocabulary / evaluation protocol family"""
    HICO = "hico"
    VCOCO = "vcoco"
    SYNTHETIC = "synthetic"

class PromptVariant(str, Enum):
    """Grounded sentence structure"""
    FULL = "full"
    VERB = "verb"
    OBJECT = "object"

class Polarity(str, Enum):
    """Sentence set membership"""
    POSITIVE = "positive"
    NEGATIVE = "negative"

class EvalSetting(str, Enum):
    """HICO-DET pooling setting"""
    DEFAULT = "default"
    KNOWN_OBJECT = "known_object"

class NoObjectMode(str, Enum):
    """V-COCO Scenario-1 convention for actions without a role object"""
    IGNORE_BOX = "ignore_box"
    REQUIRE_EMPTY = "require_empty"

class ScorerKind(str, Enum):
    """ITM scorer implementation"""
    MOCK = "mock"
    REMOTE = "remote"

class AnnotationFormat(str, Enum):
    """Supported annotation files"""
    NATIVE = "native_json"
    HICO = "hico_json"
    VCOCO = "vcoco_json"

class Provenance(str, Enum):
    """Where a dataset came from"""
    REAL = "real"
    SYNTHETIC = "synthetic"
