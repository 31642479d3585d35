import csv
from pathlib import Path
from typing import Iterable, List

from models.enums import Polarity, PromptVariant
from models.schemas import BBox, HOITriplet, ImageAnnotation
from models.vocabulary import Vocabulary
from services.grounding import ground_triplet
from utils.plotting import score_histogram_plot

CSV_COLUMNS = ('image_id', 'polarity', 'text', 'score')
_WHOLE_IMAGE = BBox(0.5, 0.5, 1.0, 1.0)


def _candidate_categories(vocab: Vocabulary) -> List[tuple]:
    if vocab.hoi_categories:
        return list(vocab.hoi_categories)
    return [(v, o) for v in range(vocab.num_verbs) for o in range(vocab.num_objects)]


def image_sentences(annotation: ImageAnnotation, vocab: Vocabulary, variant=PromptVariant.FULL,
                    negative_cap: int = 16) -> tuple[list[str], list[str]]:
    """
    (positive, negative) sentences of one image.

    Positives ground the GT triplets; negatives ground vocabulary categories absent
    from the GT, in category order, skipping texts that equal a positive, at most `negative_cap`.
    """
    ground = lambda verb_id, object_id: ground_triplet(
        HOITriplet(_WHOLE_IMAGE, _WHOLE_IMAGE, object_id, verb_id), vocab, variant)
    present = {(t.verb_id, t.object_id) for t in annotation.gt_triplets}
    positives = list(dict.fromkeys(ground(v, o) for v, o in sorted(present)))
    negatives = []
    for verb_id, object_id in _candidate_categories(vocab):
        if len(negatives) >= negative_cap:
            break
        if (verb_id, object_id) in present:
            continue
        text = ground(verb_id, object_id)
        if text not in positives and text not in negatives:
            negatives.append(text)
    return positives, negatives


def score_histogram(annotations: Iterable[ImageAnnotation], vocab: Vocabulary, scorer, variant=PromptVariant.FULL,
                    out_prefix='score_histogram', negative_cap: int = 16) -> tuple[Path, Path]:
    """
    Score every image's positive and negative sentences; write <prefix>.csv and <prefix>.png.

    Scorer errors propagate. An empty dataset writes a header-only CSV and an empty plot.
    """
    variant = PromptVariant(variant)
    csv_path, png_path = Path(f'{out_prefix}.csv'), Path(f'{out_prefix}.png')
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    scores = {Polarity.POSITIVE: [], Polarity.NEGATIVE: []}
    with open(csv_path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for annotation in annotations:
            positives, negatives = image_sentences(annotation, vocab, variant, negative_cap)
            texts = positives + negatives
            if not texts:
                continue
            values = scorer.score(annotation, texts).scores
            for i, (text, value) in enumerate(zip(texts, values)):
                polarity = Polarity.POSITIVE if i < len(positives) else Polarity.NEGATIVE
                scores[polarity].append(value)
                writer.writerow((annotation.image_id, polarity.value, text, repr(float(value))))

    score_histogram_plot(png_path, scores[Polarity.POSITIVE], scores[Polarity.NEGATIVE],
                         title=f'ITM scores ({variant.value} prompts)')
    print(f"[HISTOGRAM] {len(scores[Polarity.POSITIVE])} positive / {len(scores[Polarity.NEGATIVE])} negative "
          f"scores -> {csv_path}")
    return csv_path, png_path
